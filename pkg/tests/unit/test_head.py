"""
Unit tests for the channel-group head and the model around it.
"""

import numpy as np
import pytest

from groupreid.config import VARIANTS, BackboneSpec, HeadSpec, ModelSpec
from groupreid.exceptions import EvaluationError, NotForwardedError, ShapeMismatchError
from groupreid.head import (
    ChannelGroupHead,
    DescriptorSet,
    param_breakdown,
    param_count,
    slice_channel_groups,
    stripe_pool,
)
from groupreid.losses import head_loss
from groupreid.model import ReidModel
from groupreid.tensor import (
    RunningStats,
    batchnorm1d,
    finite_diff_grad,
    global_avg_pool,
    linear_forward,
    relative_error,
    relu,
)


def tiny_spec(variant='A', n_c=2, shared=True, stripes=0, embed_dim=4, n_id=3):
    return ModelSpec(
        backbone=BackboneSpec(stage_channels=(4, 8), input_hw=(8, 8)),
        head=HeadSpec(variant=variant, n_c=n_c, c_total=8, embed_dim=embed_dim,
                      n_id=n_id, shared_embed=shared, part_stripes=stripes),
    )


def copy_weights(source, target):
    for src, dst in zip(source.parameters(), target.parameters()):
        dst.value[...] = src.value


class TestChannelGrouping:
    """Tests for slice_channel_groups."""

    def test_two_groups(self):
        """Four channels split into two contiguous pairs."""
        groups = slice_channel_groups(np.array([[1.0, 2.0, 3.0, 4.0]]), 2)
        np.testing.assert_array_equal(groups[0], [[1.0, 2.0]])
        np.testing.assert_array_equal(groups[1], [[3.0, 4.0]])

    def test_single_group_is_whole_feature(self):
        """n_c=1 returns the feature unchanged."""
        features = np.array([[1.0, 2.0, 3.0, 4.0]])
        groups = slice_channel_groups(features, 1)
        assert len(groups) == 1
        np.testing.assert_array_equal(groups[0], features)

    @pytest.mark.parametrize('n_c', [1, 2, 4, 8, 16])
    def test_groups_partition_the_channels(self, n_c, rng):
        """Concatenating the groups recovers F exactly."""
        features = rng.normal(size=(3, 16))
        groups = slice_channel_groups(features, n_c)
        assert all(g.shape == (3, 16 // n_c) for g in groups)
        np.testing.assert_array_equal(np.concatenate(groups, axis=1), features)

    def test_indivisible_channels_raise(self):
        """C must be a multiple of n_c."""
        with pytest.raises(ShapeMismatchError):
            slice_channel_groups(np.zeros((1, 6)), 4)


class TestHeadForward:
    """Tests for ChannelGroupHead outputs."""

    def test_variant_a_matches_manual_pipeline(self, rng):
        """Every group goes linear -> batch-norm -> relu -> its own classifier."""
        spec = HeadSpec(variant='A', n_c=8, c_total=16, embed_dim=4, n_id=5)
        head = ChannelGroupHead(spec, rng)
        features = rng.normal(size=(6, 16))
        logits, descriptors = head.forward(features, 'train')

        embed = head.embeds[0]
        for i, group in enumerate(slice_channel_groups(features, 8)):
            hidden = linear_forward(group, embed.weight.value, embed.bias.value)
            normed, _ = batchnorm1d(hidden, embed.gamma.value, embed.beta.value, RunningStats.fresh(4))
            expected = relu(normed)
            np.testing.assert_allclose(descriptors.groups[i], expected, rtol=0, atol=1e-12)
            clf = head.classifiers[i]
            np.testing.assert_allclose(
                logits[i], linear_forward(expected, clf.weight.value, clf.bias.value), rtol=0, atol=1e-12
            )

    def test_identical_halves_give_identical_groups(self, rng):
        """With a shared embedding, equal channel groups produce equal descriptors."""
        head = ChannelGroupHead(HeadSpec(variant='A', n_c=2, c_total=8, embed_dim=4, n_id=3), rng)
        half = rng.normal(size=(4, 4))
        _, descriptors = head.forward(np.concatenate([half, half], axis=1), 'train')
        np.testing.assert_array_equal(descriptors.groups[0], descriptors.groups[1])

    @pytest.mark.parametrize('variant', VARIANTS)
    def test_branch_and_descriptor_counts(self, variant, rng):
        """Each variant has its documented number of branches and groups."""
        spec = HeadSpec(variant=variant, n_c=4, c_total=16, embed_dim=4, n_id=3)
        logits, descriptors = ChannelGroupHead(spec, rng).forward(rng.normal(size=(5, 16)), 'train')
        assert len(logits) == spec.n_branches
        assert all(l.shape == (5, 3) for l in logits)
        assert descriptors.n_groups == spec.n_groups
        assert descriptors.standard().shape == (5, spec.standard_dim)

    def test_backward_before_forward_raises(self, rng):
        """Backward needs cached activations."""
        head = ChannelGroupHead(HeadSpec(n_c=2, c_total=8, embed_dim=4, n_id=3), rng)
        with pytest.raises(NotForwardedError):
            head.backward([np.zeros((2, 3))] * 2)

    def test_wrong_feature_width_raises(self, rng):
        """Features must have c_total channels."""
        head = ChannelGroupHead(HeadSpec(n_c=2, c_total=8, embed_dim=4, n_id=3), rng)
        with pytest.raises(ShapeMismatchError):
            head.forward(np.zeros((2, 6)))


class TestSharedEmbedding:
    """Tests for weight sharing across channel groups."""

    def test_shared_gradient_is_sum_of_unshared(self, rng):
        """The shared embedding's gradient equals the sum over per-group copies."""
        shared = ChannelGroupHead(HeadSpec(variant='A', n_c=4, c_total=16, embed_dim=4, n_id=3), rng)
        unshared = ChannelGroupHead(
            HeadSpec(variant='A', n_c=4, c_total=16, embed_dim=4, n_id=3, shared_embed=False), rng
        )
        for embed in unshared.embeds:
            for src, dst in zip(shared.embeds[0].parameters(), embed.parameters()):
                dst.value[...] = src.value
        for src, dst in zip(shared.classifiers, unshared.classifiers):
            copy_weights(src, dst)

        features = rng.normal(size=(6, 16))
        grads = [rng.normal(size=(6, 3)) for _ in range(4)]
        shared.forward(features, 'train')
        unshared.forward(features, 'train')
        grad_shared = shared.backward(grads)
        grad_unshared = unshared.backward(grads)

        np.testing.assert_allclose(grad_shared, grad_unshared, rtol=0, atol=1e-12)
        for index in range(4):
            total = sum(embed.parameters()[index].grad for embed in unshared.embeds)
            np.testing.assert_allclose(shared.embeds[0].parameters()[index].grad, total,
                                       rtol=0, atol=1e-12)

    def test_single_group_equals_global_branch(self, rng):
        """Variant A with n_c=1 is bit-identical to the B baseline."""
        model_a = ReidModel(tiny_spec('A', n_c=1), seed=7)
        model_b = ReidModel(tiny_spec('B'), seed=7)
        assert list(model_a.named_parameters()) == list(model_b.named_parameters())

        images = rng.uniform(size=(4, 3, 8, 8))
        labels = np.array([0, 1, 2, 0])
        out_a, out_b = model_a.forward(images, 'train'), model_b.forward(images, 'train')
        np.testing.assert_array_equal(out_a.logits[0], out_b.logits[0])
        np.testing.assert_array_equal(out_a.descriptors.standard(), out_b.descriptors.standard())

        model_a.backward(head_loss(out_a.logits, labels).grad_logits)
        model_b.backward(head_loss(out_b.logits, labels).grad_logits)
        for pa, pb in zip(model_a.parameters(), model_b.parameters()):
            np.testing.assert_array_equal(pa.grad, pb.grad)


class TestParamCount:
    """Tests for param_count / param_breakdown."""

    @pytest.mark.parametrize('n_c', [1, 2, 4, 8])
    def test_shared_embedding_cost(self, n_c):
        """A shared embedding costs C_g*D + D weights plus 2D batch-norm scalars."""
        spec = HeadSpec(variant='A', n_c=n_c, c_total=64, embed_dim=16, n_id=32)
        c_g = 64 // n_c
        assert param_breakdown(spec)['embed'] == c_g * 16 + 16 + 2 * 16

    @pytest.mark.parametrize('n_c', [2, 4, 8])
    def test_unshared_embeddings_scale_with_groups(self, n_c):
        """Unshared embeddings cost n_c times the shared one."""
        shared = HeadSpec(variant='A', n_c=n_c, c_total=64, embed_dim=16, n_id=32)
        unshared = HeadSpec(variant='A', n_c=n_c, c_total=64, embed_dim=16, n_id=32, shared_embed=False)
        assert param_breakdown(unshared)['embed'] == n_c * param_breakdown(shared)['embed']

    def test_single_group_matches_baseline(self):
        """A with n_c=1 has exactly the B parameter count."""
        a = HeadSpec(variant='A', n_c=1, c_total=64, embed_dim=16, n_id=32)
        b = HeadSpec(variant='B', c_total=64, embed_dim=16, n_id=32)
        assert param_count(a) == param_count(b)

    @pytest.mark.parametrize('variant', VARIANTS)
    @pytest.mark.parametrize('stripes', [0, 2])
    def test_count_matches_instantiated_head(self, variant, stripes):
        """The formula agrees with the tensors a model allocates."""
        model = ReidModel(tiny_spec(variant, n_c=2, stripes=stripes), seed=0)
        head_params = [p for p in model.parameters() if p.name.startswith('head.')]
        assert param_count(model.spec.head) == sum(p.size for p in head_params)


class TestStripesAndDescriptors:
    """Tests for stripe pooling and DescriptorSet views."""

    def test_single_stripe_is_global_pool(self, rng):
        """One stripe pools the whole map."""
        maps = rng.normal(size=(2, 3, 4, 2))
        np.testing.assert_allclose(stripe_pool(maps, 1)[0], global_avg_pool(maps), rtol=0, atol=1e-15)

    def test_two_stripes(self):
        """Top and bottom halves pool separately."""
        maps = np.zeros((1, 1, 4, 2))
        maps[:, :, :2] = 1.0
        top, bottom = stripe_pool(maps, 2)
        assert top[0, 0] == 1.0 and bottom[0, 0] == 0.0

    def test_stripes_must_divide_height(self):
        """Height must be a multiple of the stripe count."""
        with pytest.raises(ShapeMismatchError):
            stripe_pool(np.zeros((1, 1, 5, 2)), 2)

    def test_descriptor_dimensions(self, rng):
        """N_c=8, D=16: standard is 128, fast 16, concat:2 is 32."""
        descriptors = DescriptorSet(groups=[rng.normal(size=(3, 16)) for _ in range(8)])
        assert descriptors.standard().shape == (3, 128)
        assert descriptors.fast(5).shape == (3, 16)
        assert descriptors.concat(2).shape == (3, 32)
        np.testing.assert_array_equal(descriptors.concat(8), descriptors.standard())

    def test_stripes_are_appended(self, rng):
        """Stripe features follow the groups in the standard descriptor."""
        groups = [rng.normal(size=(2, 4)) for _ in range(2)]
        stripes = [rng.normal(size=(2, 4))]
        descriptors = DescriptorSet(groups=groups, stripes=stripes)
        np.testing.assert_array_equal(descriptors.standard()[:, 8:], stripes[0])

    def test_out_of_range_views_raise(self, rng):
        """Group indices and concat counts are bounds-checked."""
        descriptors = DescriptorSet(groups=[rng.normal(size=(2, 4)) for _ in range(4)])
        with pytest.raises(EvaluationError):
            descriptors.fast(4)
        with pytest.raises(EvaluationError):
            descriptors.concat(0)
        with pytest.raises(EvaluationError):
            descriptors.concat(5)

    def test_merge_stacks_chunks(self, rng):
        """Merging chunk-wise sets stacks their rows."""
        a = DescriptorSet(groups=[rng.normal(size=(2, 4))])
        b = DescriptorSet(groups=[rng.normal(size=(3, 4))])
        merged = DescriptorSet.merge([a, b])
        assert merged.n_images == 5
        np.testing.assert_array_equal(merged.groups[0][2:], b.groups[0])


class TestModelGradients:
    """End-to-end gradient checks: backbone, head and the summed branch loss."""

    @pytest.mark.parametrize('seed', range(20))
    def test_composite_gradients(self, seed):
        """Backpropagated gradients match central differences of the total loss."""
        variant = VARIANTS[seed % len(VARIANTS)]
        stripes = 2 if seed >= 10 else 0
        model = ReidModel(tiny_spec(variant, n_c=2, shared=seed % 2 == 0, stripes=stripes), seed=seed)
        rng = np.random.default_rng(100 + seed)
        images = rng.uniform(size=(4, 3, 8, 8))
        labels = np.array([0, 1, 2, 0])

        def loss():
            return head_loss(model.forward(images, 'train').logits, labels).total

        model.zero_grad()
        out = model.forward(images, 'train')
        model.backward(head_loss(out.logits, labels).grad_logits)

        params = model.named_parameters()
        for name in ('backbone.stage0.conv.weight', 'head.embed0.weight', 'head.classifier0.weight'):
            param = params[name]
            analytic = param.grad.copy()
            assert relative_error(analytic, finite_diff_grad(loss, param.value)) < 1e-4, name

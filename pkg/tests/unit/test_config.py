"""
Unit tests for groupreid configuration.
"""

import json
import warnings

import pytest
from groupreid.config import (
    BackboneSpec,
    EvalConfig,
    GridConfig,
    HeadSpec,
    ModelSpec,
    NuisanceSpec,
    PKBatchSpec,
    RunConfig,
    SynthSpec,
    TrainSpec,
    DEFAULT_CONFIG,
    load_config,
)
from groupreid.exceptions import ConfigurationError


class TestHeadSpec:
    """Tests for HeadSpec dataclass."""

    def test_default_values(self):
        """Test that defaults are sensible."""
        spec = HeadSpec()

        assert spec.variant == 'A'
        assert spec.n_c == 8
        assert spec.c_total == 64
        assert spec.embed_dim == 16
        assert spec.shared_embed is True
        assert spec.part_stripes == 0
        assert spec.c_group == 8

    def test_variant_b_forces_one_group(self):
        """Test that the global baseline always has a single group."""
        spec = HeadSpec(variant='B', n_c=8)

        assert spec.n_c == 1
        assert spec.n_branches == 1
        assert spec.standard_dim == spec.embed_dim

    def test_lowercase_variant_accepted(self):
        """Test variant names are case-insensitive."""
        assert HeadSpec(variant='c').variant == 'C'

    def test_invalid_variant(self):
        """Test that an unknown variant raises error."""
        with pytest.raises(ConfigurationError) as exc:
            HeadSpec(variant='Z')

        assert "variant must be one of" in str(exc.value)

    def test_indivisible_channels(self):
        """Test that c_total must divide into n_c groups."""
        with pytest.raises(ConfigurationError) as exc:
            HeadSpec(n_c=3, c_total=64)

        assert "not divisible" in str(exc.value)

    def test_single_channel_groups_warn(self):
        """Test that one-channel groups generate a warning."""
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            HeadSpec(n_c=64, c_total=64)

            assert len(w) == 1
            assert "single channel" in str(w[0].message)

    @pytest.mark.parametrize('variant,branches,groups,embeds,dim', [
        ('A', 4, 4, 1, 32),
        ('B', 1, 1, 1, 8),
        ('C', 1, 4, 4, 32),
        ('D', 4, 1, 1, 8),
        ('E', 4, 4, 1, 32),
    ])
    def test_variant_structure(self, variant, branches, groups, embeds, dim):
        """Test branch, group and embedding counts per variant."""
        spec = HeadSpec(variant=variant, n_c=4, c_total=16, embed_dim=8)

        assert spec.n_branches == branches
        assert spec.n_groups == groups
        assert spec.n_embeds == embeds
        assert spec.standard_dim == dim

    def test_stripes_extend_descriptor(self):
        """Test stripe features add to the standard dimension."""
        assert HeadSpec(n_c=4, c_total=16, embed_dim=8, part_stripes=2).standard_dim == 48


class TestTrainSpec:
    """Tests for TrainSpec dataclass."""

    def test_default_values(self):
        """Test that defaults are sensible."""
        spec = TrainSpec()

        assert spec.epochs == 40
        assert spec.lr == 0.01
        assert spec.momentum == 0.9
        assert spec.weight_decay == 5e-4
        assert spec.pk.batch_size == 32
        assert spec.loss_mode == 'classification'
        assert spec.triplet.margin == 0.3

    def test_default_milestone(self):
        """Test the single default milestone at two thirds of training."""
        spec = TrainSpec(epochs=30)

        assert spec.milestones == (20,)
        assert spec.lr_at(19) == pytest.approx(0.01)
        assert spec.lr_at(20) == pytest.approx(0.001)

    def test_multiple_milestones(self):
        """Test the rate decays once per passed milestone."""
        spec = TrainSpec(epochs=10, lr=1.0, lr_milestones=(3, 6), lr_decay_factor=0.5)

        assert [spec.lr_at(e) for e in (0, 3, 6, 9)] == [1.0, 0.5, 0.25, 0.25]

    def test_invalid_epochs(self):
        """Test that zero epochs raises error."""
        with pytest.raises(ConfigurationError):
            TrainSpec(epochs=0)

    def test_negative_lr(self):
        """Test that a negative learning rate raises error."""
        with pytest.raises(ConfigurationError):
            TrainSpec(lr=-0.1)

    def test_zero_lr_warns(self):
        """Test that lr=0 is allowed but flagged."""
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            TrainSpec(lr=0.0)

            assert len(w) == 1
            assert "lr=0" in str(w[0].message)

    def test_very_long_schedule_warns(self):
        """Test that very long training generates warning."""
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            TrainSpec(epochs=500)

            assert len(w) == 1
            assert "very long" in str(w[0].message)

    def test_unsorted_milestones(self):
        """Test that milestones must increase."""
        with pytest.raises(ConfigurationError):
            TrainSpec(lr_milestones=(10, 5))

    def test_invalid_loss_mode(self):
        """Test that an unknown loss mode raises error."""
        with pytest.raises(ConfigurationError):
            TrainSpec(loss_mode='contrastive')

    def test_pk_from_dict(self):
        """Test nested sections are accepted as dicts."""
        spec = TrainSpec(pk={'p': 4, 'k': 2})

        assert isinstance(spec.pk, PKBatchSpec)
        assert spec.pk.batch_size == 8

    def test_pk_needs_two_of_each(self):
        """Test that triplet mining needs p >= 2 and k >= 2."""
        with pytest.raises(ConfigurationError):
            PKBatchSpec(p=1, k=4)
        with pytest.raises(ConfigurationError):
            PKBatchSpec(p=4, k=1)


class TestDataAndBackboneSpecs:
    """Tests for SynthSpec, NuisanceSpec and BackboneSpec."""

    def test_synth_defaults(self):
        """Test the desk-scale dataset defaults."""
        spec = SynthSpec()

        assert spec.n_train_ids == 32
        assert spec.n_test_ids == 16
        assert spec.image_hw == (64, 32)
        assert spec.train_per_id == 16

    def test_too_many_queries(self):
        """Test queries must fit in the camera-0 images."""
        with pytest.raises(ConfigurationError) as exc:
            SynthSpec(test_images_per_id=4, query_per_id=3)

        assert "camera-0" in str(exc.value)

    def test_label_noise_range(self):
        """Test label noise must be a fraction below 1."""
        with pytest.raises(ConfigurationError):
            SynthSpec(label_noise=1.0)

    def test_nuisance_none(self):
        """Test the degenerate nuisance factory disables everything."""
        none = NuisanceSpec.none()

        assert none.shift_px == 0
        assert none.noise_sigma == 0.0
        assert none.camera_tint == 0.0

    def test_invalid_nuisance(self):
        """Test out-of-range nuisance values raise error."""
        with pytest.raises(ConfigurationError):
            NuisanceSpec(occlusion_prob=1.5)
        with pytest.raises(ConfigurationError):
            NuisanceSpec(shift_px=-1)

    def test_backbone_strides(self):
        """Test default strides halve every stage but the last."""
        spec = BackboneSpec(stage_channels=(4, 8, 16), input_hw=(32, 16))

        assert spec.strides == (2, 2, 1)
        assert spec.output_hw((32, 16)) == (8, 4)
        assert BackboneSpec(stage_channels=(4, 8, 16), last_stride=2, input_hw=(32, 16)).output_hw((32, 16)) == (4, 2)

    def test_backbone_odd_input(self):
        """Test that an input that cannot be halved raises error."""
        with pytest.raises(ConfigurationError):
            BackboneSpec(stage_channels=(4, 8), input_hw=(9, 8))

    def test_backbone_even_kernel(self):
        """Test that kernels must be odd."""
        with pytest.raises(ConfigurationError):
            BackboneSpec(kernel=2)


class TestModelSpec:
    """Tests for ModelSpec dataclass."""

    def test_channel_mismatch(self):
        """Test head.c_total must equal the backbone output channels."""
        with pytest.raises(ConfigurationError) as exc:
            ModelSpec(backbone=BackboneSpec(stage_channels=(4, 8)), head=HeadSpec(c_total=16, n_c=2))

        assert "c_total" in str(exc.value)

    def test_stripes_must_divide_height(self):
        """Test the feature-map height must split into the stripes."""
        with pytest.raises(ConfigurationError):
            ModelSpec(
                backbone=BackboneSpec(stage_channels=(4, 8), input_hw=(12, 8)),
                head=HeadSpec(n_c=2, c_total=8, part_stripes=4),
            )

    def test_dict_round_trip(self):
        """Test to_dict / from_dict reproduce the spec."""
        spec = ModelSpec(
            backbone=BackboneSpec(stage_channels=(4, 8), input_hw=(8, 8)),
            head=HeadSpec(variant='E', n_c=2, c_total=8, shared_embed=False),
        )

        assert ModelSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


class TestEvalAndGridConfig:
    """Tests for EvalConfig and GridConfig."""

    def test_eval_defaults(self):
        """Test evaluation defaults."""
        config = EvalConfig()

        assert config.settings == ('standard',)
        assert config.k_max is None
        assert config.voting_method == 'borda'

    def test_single_setting_string(self):
        """Test a bare string becomes a one-element tuple."""
        assert EvalConfig(settings='fast:0').settings == ('fast:0',)

    def test_invalid_voting_method(self):
        """Test that an unknown voting method raises error."""
        with pytest.raises(ConfigurationError):
            EvalConfig(voting_method='condorcet')

    def test_grid_rejects_unknown_variant(self):
        """Test that grid variants are validated."""
        with pytest.raises(ConfigurationError):
            GridConfig(variants=('A', 'Q'))

    def test_grid_rejects_empty_axis(self):
        """Test that no grid axis may be empty."""
        with pytest.raises(ConfigurationError):
            GridConfig(seeds=())


class TestRunConfig:
    """Tests for RunConfig."""

    def test_derived_fields(self):
        """Test seed, channels, identities and input size are propagated."""
        config = RunConfig.smoke().with_overrides(seed=7)

        assert config.data.seed == 7
        assert config.train.seed == 7
        assert config.head.c_total == config.backbone.out_channels == 16
        assert config.head.n_id == config.data.n_train_ids == 8
        assert config.backbone.input_hw == config.data.image_hw

    def test_with_overrides(self):
        """Test with_overrides creates new config."""
        config = RunConfig.smoke()
        new_config = config.with_overrides(seed=5, jobs=4, debug_mode=True)

        # Original unchanged
        assert config.seed == 0
        assert config.jobs == 1

        # New config has overrides
        assert new_config.seed == 5
        assert new_config.jobs == 4
        assert new_config.debug_mode is True

    def test_model_spec_overrides(self):
        """Test grid cells can override head fields."""
        spec = RunConfig.smoke().model_spec(variant='E', shared_embed=False)

        assert spec.head.variant == 'E'
        assert spec.head.n_embeds == spec.head.n_c

    def test_batch_larger_than_data(self):
        """Test PK sizes must fit the training data."""
        with pytest.raises(ConfigurationError) as exc:
            RunConfig(data=SynthSpec(n_train_ids=4), train=TrainSpec(pk=PKBatchSpec(p=8, k=4)))

        assert "train.pk.p" in str(exc.value)

    def test_negative_seed(self):
        """Test that a negative seed raises error."""
        with pytest.raises(ConfigurationError):
            RunConfig(seed=-1)

    def test_factory_smoke(self):
        """Test smoke factory method."""
        config = RunConfig.smoke()

        assert config.data.n_train_ids == 8
        assert config.data.image_hw == (32, 16)
        assert config.backbone.stage_channels == (4, 8, 16)
        assert config.head.n_c == 4
        assert config.train.epochs == 3
        assert config.grid.seeds == (0,)

    def test_factory_desk(self):
        """Test desk factory method matches the defaults."""
        assert RunConfig.desk() == RunConfig()

    def test_from_dict(self):
        """Test building a config from a JSON document."""
        config = RunConfig.from_dict({
            'data': {'n_train_ids': 8, 'n_test_ids': 4, 'images_per_id': 8,
                     'test_images_per_id': 4, 'query_per_id': 1, 'image_hw': [32, 16]},
            'backbone': {'stage_channels': [4, 8, 16]},
            'head': {'n_c': 2, 'embed_dim': 4},
            'train': {'epochs': 2, 'pk': {'p': 4, 'k': 4}},
            'seed': 3,
        })

        assert config.head.n_c == 2
        assert config.head.c_total == 16
        assert config.train.pk.p == 4
        assert config.data.seed == 3

    def test_from_dict_unknown_key(self):
        """Test unknown keys are rejected."""
        with pytest.raises(ConfigurationError) as exc:
            RunConfig.from_dict({'head': {'groups': 4}})

        assert "unknown keys in head: groups" in str(exc.value)

    def test_from_dict_derived_key(self):
        """Test derived fields cannot be set directly."""
        with pytest.raises(ConfigurationError) as exc:
            RunConfig.from_dict({'head': {'c_total': 32}})

        assert "derived" in str(exc.value)

    def test_load_config_missing_file(self, tmp_path):
        """Test a missing file raises ConfigurationError."""
        with pytest.raises(ConfigurationError) as exc:
            load_config(tmp_path / 'absent.json')

        assert "not found" in str(exc.value)

    def test_load_config_invalid_json(self, tmp_path):
        """Test malformed JSON raises ConfigurationError."""
        path = tmp_path / 'bad.json'
        path.write_text('{"seed": ')

        with pytest.raises(ConfigurationError) as exc:
            load_config(path)

        assert "not valid JSON" in str(exc.value)

    def test_load_config_file(self, tmp_path):
        """Test loading a config file."""
        path = tmp_path / 'run.json'
        path.write_text(json.dumps({'seed': 2, 'jobs': 3}))

        config = load_config(path)

        assert config.seed == 2
        assert config.jobs == 3

    def test_default_config_singleton(self):
        """Test DEFAULT_CONFIG is valid."""
        assert DEFAULT_CONFIG is not None
        assert DEFAULT_CONFIG.head.n_c == 8
        assert DEFAULT_CONFIG.head.c_total == 64

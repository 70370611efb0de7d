"""
Unit tests for the synthetic benchmark, PK sampling and augmentation.
"""

from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest

from groupreid.config import NuisanceSpec, PKBatchSpec, SynthSpec
from groupreid.data import (
    AUG_PAD,
    PKSampler,
    augment,
    augment_batch,
    corrupt_labels,
    generate_dataset,
    pk_sampler,
    render_image,
)
from groupreid.exceptions import ConfigurationError


def small_spec(**overrides):
    values = dict(n_train_ids=6, n_test_ids=3, images_per_id=6, test_images_per_id=4,
                  query_per_id=1, image_hw=(16, 8))
    values.update(overrides)
    return SynthSpec(**values)


class TestGenerateDataset:
    """Tests for generate_dataset."""

    def test_deterministic(self):
        """The same spec generates bit-identical splits."""
        first, second = generate_dataset(small_spec()), generate_dataset(small_spec())
        for name, split in first.splits().items():
            other = second.splits()[name]
            np.testing.assert_array_equal(split.images, other.images)
            np.testing.assert_array_equal(split.identities, other.identities)
            np.testing.assert_array_equal(split.cameras, other.cameras)

    def test_seed_changes_images(self):
        """A different seed renders different people."""
        a = generate_dataset(small_spec(seed=0))
        b = generate_dataset(small_spec(seed=1))
        assert not np.array_equal(a.train.images, b.train.images)

    def test_split_sizes(self):
        """Split sizes follow the spec's counts."""
        data = generate_dataset(small_spec(val_per_id=2))
        assert len(data.train) == 6 * 4
        assert len(data.val) == 6 * 2
        assert len(data.query) == 3
        assert len(data.gallery) == 3 * 3
        assert data.train.images.shape[1:] == (3, 16, 8)

    def test_pixel_range(self, smoke_data):
        """Every pixel lies in [0, 1]."""
        for split in smoke_data.splits().values():
            assert split.images.min() >= 0.0
            assert split.images.max() <= 1.0

    def test_identities_disjoint(self, smoke_data):
        """Training and test identities never overlap."""
        assert smoke_data.train.identity_set == set(smoke_data.train_ids)
        assert smoke_data.query.identity_set | smoke_data.gallery.identity_set == set(smoke_data.test_ids)
        assert not smoke_data.train.identity_set & smoke_data.gallery.identity_set
        smoke_data.check_disjoint()

    def test_queries_have_cross_camera_matches(self, smoke_data):
        """Queries are camera 0; every query identity has camera-1 gallery images."""
        assert set(smoke_data.query.cameras.tolist()) == {0}
        for identity in smoke_data.query.identities:
            cameras = smoke_data.gallery.cameras[smoke_data.gallery.identities == identity]
            assert 1 in cameras

    def test_no_nuisance_gives_identical_images(self):
        """With every nuisance disabled all images of a person coincide."""
        data = generate_dataset(small_spec(nuisance=NuisanceSpec.none()))
        for identity in data.train_ids:
            images = data.train.images[data.train.identities == identity]
            for image in images[1:]:
                np.testing.assert_array_equal(image, images[0])

    def test_same_person_closer_than_different_people(self):
        """Mean pixel distance within an identity is below the distance across identities."""
        data = generate_dataset(small_spec(n_train_ids=8))
        images = data.train.images.reshape(len(data.train), -1)
        labels = data.train.identities
        intra, inter = [], []
        for i, j in combinations(range(len(images)), 2):
            distance = np.linalg.norm(images[i] - images[j])
            (intra if labels[i] == labels[j] else inter).append(distance)
        assert np.mean(intra) < np.mean(inter)

    def test_render_image_is_deterministic(self):
        """The same (identity, index, camera) renders the same pixels."""
        spec = small_spec()
        np.testing.assert_array_equal(render_image(spec, 3, 1, 1), render_image(spec, 3, 1, 1))

    def test_label_noise_preserves_counts(self):
        """Corrupting labels only moves them between samples."""
        clean = generate_dataset(small_spec())
        noisy = generate_dataset(small_spec(label_noise=0.3))
        np.testing.assert_array_equal(np.sort(noisy.train.identities), np.sort(clean.train.identities))
        changed = np.mean(noisy.train.identities != clean.train.identities)
        assert 0 < changed <= round(0.3 * len(clean.train)) / len(clean.train)
        np.testing.assert_array_equal(noisy.train.images, clean.train.images)

    def test_corrupt_labels_tiny_fraction_is_noop(self):
        """Fewer than two chosen samples leaves labels untouched."""
        labels = np.arange(10)
        np.testing.assert_array_equal(corrupt_labels(labels, 0.05, seed=0), labels)


class TestPKSampler:
    """Tests for PK batch sampling."""

    def test_batch_composition(self):
        """Every batch holds p identities with k images each."""
        labels = np.repeat(np.arange(8), 6)
        for indices in PKSampler(labels, PKBatchSpec(p=2, k=4), seed=0).epoch(0):
            batch_labels = labels[indices]
            values, counts = np.unique(batch_labels, return_counts=True)
            assert len(values) == 2
            assert counts.tolist() == [4, 4]
            assert len(set(indices.tolist())) == 8

    def test_epoch_visits_every_identity(self):
        """8 identities with p=2 give 4 batches covering all identities once."""
        labels = np.repeat(np.arange(8), 4)
        sampler = PKSampler(labels, PKBatchSpec(p=2, k=4), seed=5)
        batches = list(sampler.epoch(0))
        assert len(batches) == len(sampler) == 4
        seen = np.concatenate([np.unique(labels[b]) for b in batches])
        assert sorted(seen.tolist()) == list(range(8))

    def test_trailing_group_dropped(self):
        """With 7 identities and p=2 the last identity sits out the epoch."""
        labels = np.repeat(np.arange(7), 4)
        sampler = PKSampler(labels, PKBatchSpec(p=2, k=2))
        assert len(sampler) == 3
        assert len(list(sampler.epoch(0))) == 3

    def test_deterministic_and_epoch_dependent(self):
        """Same seed and epoch repeat; different epochs reshuffle."""
        labels = np.repeat(np.arange(8), 6)
        sampler = PKSampler(labels, PKBatchSpec(p=4, k=3), seed=1)
        first = [b.tolist() for b in sampler.epoch(0)]
        assert first == [b.tolist() for b in PKSampler(labels, PKBatchSpec(p=4, k=3), seed=1).epoch(0)]
        assert first != [b.tolist() for b in sampler.epoch(1)]

    def test_identity_with_too_few_images_raises(self):
        """k images must be available for every identity."""
        labels = np.array([0, 0, 0, 1, 1])
        with pytest.raises(ConfigurationError) as exc:
            PKSampler(labels, PKBatchSpec(p=2, k=3))
        assert "fewer than k=3" in str(exc.value)

    def test_too_few_identities_raises(self):
        """p cannot exceed the identity count."""
        with pytest.raises(ConfigurationError):
            PKSampler(np.repeat(np.arange(2), 4), PKBatchSpec(p=3, k=2))

    def test_pk_sampler_yields_labels(self, smoke_data):
        """pk_sampler pairs images with their labels for every epoch."""
        batches = list(pk_sampler(smoke_data.train, PKBatchSpec(p=4, k=4), seed=0, epochs=2))
        assert len(batches) == 4
        for batch in batches:
            assert batch.images.shape == (16, 3, 32, 16)
            np.testing.assert_array_equal(batch.labels, smoke_data.train.identities[batch.indices])


class TestAugment:
    """Tests for flip-and-crop augmentation."""

    def test_identity_when_disabled(self, rng):
        """No flip and a zero offset returns the image."""
        image = rng.uniform(size=(3, 16, 8))
        np.testing.assert_array_equal(augment(image, 0, flip=False, offset=(0, 0)), image)

    def test_double_flip_is_identity(self, rng):
        """Flipping twice restores the image."""
        image = rng.uniform(size=(3, 16, 8))
        once = augment(image, 0, flip=True, offset=(0, 0))
        np.testing.assert_array_equal(once, image[:, :, ::-1])
        np.testing.assert_array_equal(augment(once, 1, flip=True, offset=(0, 0)), image)

    def test_shift_moves_content(self, rng):
        """A crop offset translates the image and pads with zeros."""
        image = rng.uniform(size=(3, 16, 8))
        out = augment(image, 0, flip=False, offset=(2, 0))
        np.testing.assert_array_equal(out[:, :14], image[:, 2:])
        assert not out[:, 14:].any()

    def test_range_and_shape(self, rng):
        """Random augmentations keep the shape and the [0, 1] range."""
        image = rng.uniform(size=(3, 16, 8))
        for seed in range(20):
            out = augment(image, seed)
            assert out.shape == image.shape
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_seeded(self, rng):
        """The same seed gives the same augmentation."""
        image = rng.uniform(size=(3, 16, 8))
        np.testing.assert_array_equal(augment(image, [3, 4]), augment(image, [3, 4]))

    def test_offset_beyond_padding_raises(self, rng):
        """Offsets are limited to the padding."""
        with pytest.raises(ValueError):
            augment(rng.uniform(size=(3, 16, 8)), 0, offset=(AUG_PAD + 1, 0))

    def test_batch_uses_per_image_seeds(self, rng):
        """augment_batch equals augmenting each image with its own seed."""
        images = rng.uniform(size=(3, 3, 16, 8))
        batch = augment_batch(images, [7, 4, 0])
        for i, image in enumerate(images):
            np.testing.assert_array_equal(batch[i], augment(image, [7, 4, 0, i]))


class TestSynthSpecIntegration:
    """Tests for spec changes flowing into the data."""

    def test_image_size_follows_spec(self):
        """image_hw sets the rendered size."""
        data = generate_dataset(replace(small_spec(), image_hw=(24, 12)))
        assert data.query.images.shape[2:] == (24, 12)

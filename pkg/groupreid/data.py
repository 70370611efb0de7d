"""
Synthetic re-id data.

Every identity is a procedural "person": head, torso and legs regions with
their own colours and textures on a grey background. Images of an identity
differ only by seeded nuisance (shift, occlusion, brightness, camera tint,
pixel noise), so colour and texture cues live in different places of the
image and of the learned feature channels.

All randomness comes from numpy generators seeded with (seed, purpose, ...)
tuples, so generation is a pure function of the SynthSpec and every image
can be produced independently of the others.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import NuisanceSpec, PKBatchSpec, SynthSpec
from .exceptions import ConfigurationError


logger = logging.getLogger('groupreid')

# Seed-stream purposes.
_APPEARANCE, _NUISANCE, _LABEL_NOISE, _SAMPLER = 0, 1, 2, 3

PATTERNS = ('plain', 'hstripes', 'vstripes', 'checker')
BACKGROUND = 0.5
AUG_PAD = 4

Seed = Union[int, Sequence[int]]


@dataclass
class Appearance:
    """Stable visual signature of one identity."""

    head_color: np.ndarray
    torso_color: np.ndarray
    legs_color: np.ndarray
    torso_pattern: str
    legs_pattern: str
    period: int
    contrast: float
    body_width: float
    waist: float
    bag_color: Optional[np.ndarray]


@dataclass
class Sample:
    """One image with its identity label, camera and split."""

    image: np.ndarray
    identity: int
    camera: int
    split: str


@dataclass
class SplitArrays:
    """Images N x 3 x H x W with per-image identity and camera ids."""

    name: str
    images: np.ndarray
    identities: np.ndarray
    cameras: np.ndarray

    def __len__(self) -> int:
        return int(self.images.shape[0])

    def sample(self, index: int) -> Sample:
        return Sample(
            image=self.images[index],
            identity=int(self.identities[index]),
            camera=int(self.cameras[index]),
            split=self.name,
        )

    def __iter__(self) -> Iterator[Sample]:
        for index in range(len(self)):
            yield self.sample(index)

    @property
    def identity_set(self) -> set:
        return set(int(i) for i in np.unique(self.identities))


@dataclass
class ReidDataset:
    """Training, validation, query and gallery splits of one SynthSpec."""

    spec: SynthSpec
    train: SplitArrays
    val: SplitArrays
    query: SplitArrays
    gallery: SplitArrays

    @property
    def train_ids(self) -> List[int]:
        return list(range(self.spec.n_train_ids))

    @property
    def test_ids(self) -> List[int]:
        first = self.spec.n_train_ids
        return list(range(first, first + self.spec.n_test_ids))

    def splits(self) -> Dict[str, SplitArrays]:
        return {'train': self.train, 'val': self.val, 'query': self.query, 'gallery': self.gallery}

    def check_disjoint(self) -> None:
        """Training identities never appear among the test identities."""
        train = self.train.identity_set | self.val.identity_set
        test = self.query.identity_set | self.gallery.identity_set
        overlap = train & test
        if overlap:
            raise ConfigurationError(f"train and test identities overlap: {sorted(overlap)}")


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def make_appearance(identity: int, seed: int) -> Appearance:
    rng = np.random.default_rng([seed, _APPEARANCE, identity])
    colors = rng.uniform(0.1, 0.95, size=(4, 3))
    return Appearance(
        head_color=colors[0],
        torso_color=colors[1],
        legs_color=colors[2],
        torso_pattern=PATTERNS[rng.integers(len(PATTERNS))],
        legs_pattern=PATTERNS[rng.integers(len(PATTERNS))],
        period=int(rng.integers(2, 7)),
        contrast=float(rng.uniform(0.15, 0.4)),
        body_width=float(rng.uniform(0.45, 0.7)),
        waist=float(rng.uniform(0.45, 0.58)),
        bag_color=colors[3] if rng.random() < 0.5 else None,
    )


def _pattern(kind: str, rows: np.ndarray, cols: np.ndarray, period: int) -> np.ndarray:
    horizontal = np.sign(np.sin(np.pi * (rows + 0.5) / period))
    vertical = np.sign(np.sin(np.pi * (cols + 0.5) / period))
    if kind == 'hstripes':
        return horizontal
    if kind == 'vstripes':
        return vertical
    if kind == 'checker':
        return horizontal * vertical
    return np.zeros_like(horizontal)


def render_person(appearance: Appearance, hw: Tuple[int, int]) -> np.ndarray:
    """Draw an identity on the plain background, 3 x H x W in [0, 1]."""
    height, width = hw
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    y = (rows + 0.5) / height
    x = (cols + 0.5) / width
    half = appearance.body_width / 2

    image = np.full((3, height, width), BACKGROUND)

    def paint(mask: np.ndarray, color: np.ndarray, pattern: str = 'plain') -> None:
        shade = 1.0 + appearance.contrast * _pattern(pattern, rows, cols, appearance.period)
        image[:, mask] = (color[:, None] * shade[mask][None, :])

    head = ((y - 0.12) / 0.09) ** 2 + ((x - 0.5) / 0.16) ** 2 <= 1.0
    torso = (y >= 0.22) & (y < appearance.waist) & (np.abs(x - 0.5) < half)
    legs = (y >= appearance.waist) & (y < 0.95) & (np.abs(x - 0.5) < half * 0.85) & (np.abs(x - 0.5) > 0.04)
    paint(head, appearance.head_color)
    paint(torso, appearance.torso_color, appearance.torso_pattern)
    paint(legs, appearance.legs_color, appearance.legs_pattern)
    if appearance.bag_color is not None:
        bag = (y >= 0.35) & (y < 0.55) & (x >= 0.5 + half) & (x < 0.5 + half + 0.12)
        paint(bag, appearance.bag_color)
    return np.clip(image, 0.0, 1.0)


def camera_gain(camera: int, tint: float) -> np.ndarray:
    """Per-channel colour cast of a synthetic camera."""
    if camera == 0:
        return np.array([1.0 + tint, 1.0, 1.0 - tint])
    return np.array([1.0 - tint, 1.0 + 0.5 * tint, 1.0 + tint])


def apply_nuisance(
    clean: np.ndarray,
    camera: int,
    nuisance: NuisanceSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Shift, occlude, re-light and add noise to a clean rendering."""
    _, height, width = clean.shape
    # Draw every variate unconditionally so the stream layout never depends on settings.
    shift = rng.integers(-nuisance.shift_px, nuisance.shift_px + 1, size=2)
    occlude = rng.random() < nuisance.occlusion_prob
    box = rng.uniform(size=4)
    brightness = 1.0 + rng.uniform(-1.0, 1.0) * nuisance.brightness_jitter
    noise = rng.standard_normal(clean.shape)

    image = clean
    if nuisance.shift_px:
        s = nuisance.shift_px
        padded = np.pad(clean, ((0, 0), (s, s), (s, s)), constant_values=BACKGROUND)
        dy, dx = s + shift[0], s + shift[1]
        image = padded[:, dy:dy + height, dx:dx + width]
    if occlude:
        box_h = max(1, int(round(height * (0.2 + 0.15 * box[0]))))
        box_w = max(1, int(round(width * (0.3 + 0.3 * box[1]))))
        top = int(box[2] * (height - box_h))
        left = int(box[3] * (width - box_w))
        image = image.copy()
        image[:, top:top + box_h, left:left + box_w] = BACKGROUND
    image = image * brightness * camera_gain(camera, nuisance.camera_tint)[:, None, None]
    image = image + nuisance.noise_sigma * noise
    return np.clip(image, 0.0, 1.0)


def render_image(spec: SynthSpec, identity: int, index: int, camera: int) -> np.ndarray:
    clean = render_person(make_appearance(identity, spec.seed), spec.image_hw)
    rng = np.random.default_rng([spec.seed, _NUISANCE, identity, index])
    image = apply_nuisance(clean, camera, spec.nuisance, rng)
    # float32-representable so the on-disk format round-trips exactly.
    return image.astype(np.float32).astype(np.float64)


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------

def _stack(name: str, hw: Tuple[int, int], images: list, identities: list, cameras: list) -> SplitArrays:
    if images:
        stacked = np.stack(images)
    else:
        stacked = np.zeros((0, 3) + tuple(hw))
    return SplitArrays(
        name=name,
        images=stacked,
        identities=np.asarray(identities, dtype=np.int64),
        cameras=np.asarray(cameras, dtype=np.int64),
    )


def corrupt_labels(identities: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """
    Corrupt about `fraction` of the labels by rotating them among a seeded
    subset of samples. Per-identity label counts are unchanged.
    """
    labels = identities.copy()
    count = int(round(fraction * labels.size))
    if count < 2:
        return labels
    rng = np.random.default_rng([seed, _LABEL_NOISE])
    chosen = rng.choice(labels.size, size=count, replace=False)
    labels[chosen] = labels[np.roll(chosen, 1)]
    return labels


def generate_dataset(spec: SynthSpec) -> ReidDataset:
    """
    Generate every split of the synthetic benchmark.

    Training images alternate between the two cameras; the last val_per_id
    images of each training identity form the validation split. Test images
    alternate cameras too; the first query_per_id camera-0 images of each
    test identity are queries, the rest gallery.
    """
    hw = spec.image_hw
    parts: Dict[str, Tuple[list, list, list]] = {
        name: ([], [], []) for name in ('train', 'val', 'query', 'gallery')
    }

    def add(split: str, image: np.ndarray, identity: int, camera: int) -> None:
        images, identities, cameras = parts[split]
        images.append(image)
        identities.append(identity)
        cameras.append(camera)

    for identity in range(spec.n_train_ids):
        for index in range(spec.images_per_id):
            camera = index % 2
            split = 'train' if index < spec.train_per_id else 'val'
            add(split, render_image(spec, identity, index, camera), identity, camera)

    for identity in range(spec.n_train_ids, spec.n_train_ids + spec.n_test_ids):
        queries = 0
        for index in range(spec.test_images_per_id):
            camera = index % 2
            if camera == 0 and queries < spec.query_per_id:
                split = 'query'
                queries += 1
            else:
                split = 'gallery'
            add(split, render_image(spec, identity, index, camera), identity, camera)

    splits = {name: _stack(name, hw, *parts[name]) for name in parts}
    if spec.label_noise:
        splits['train'].identities = corrupt_labels(splits['train'].identities, spec.label_noise, spec.seed)

    dataset = ReidDataset(spec=spec, **splits)
    dataset.check_disjoint()
    logger.debug(
        f"[groupreid] generated {len(dataset.train)} train / {len(dataset.val)} val / "
        f"{len(dataset.query)} query / {len(dataset.gallery)} gallery images"
    )
    return dataset


# ---------------------------------------------------------------------------
# Sampling and augmentation
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    """One optimisation step's images and identity labels."""

    images: np.ndarray
    labels: np.ndarray
    indices: np.ndarray


class PKSampler:
    """
    P identities x K images per batch.

    Each epoch visits every identity once in a seeded random order, in
    groups of P (a trailing group smaller than P is dropped), and draws K of
    the identity's images without replacement.
    """

    def __init__(self, labels: np.ndarray, pk: PKBatchSpec, seed: int = 0):
        self.pk = pk
        self.seed = seed
        self.ids = np.unique(labels)
        self.by_id = {int(i): np.flatnonzero(labels == i) for i in self.ids}
        short = {i: len(v) for i, v in self.by_id.items() if len(v) < pk.k}
        if short:
            raise ConfigurationError(
                f"identities with fewer than k={pk.k} images cannot be PK-sampled: {short}"
            )
        if len(self.ids) < pk.p:
            raise ConfigurationError(
                f"p={pk.p} identities per batch but only {len(self.ids)} identities available"
            )

    def __len__(self) -> int:
        return len(self.ids) // self.pk.p

    def epoch(self, epoch: int) -> Iterator[np.ndarray]:
        rng = np.random.default_rng([self.seed, _SAMPLER, epoch])
        order = rng.permutation(self.ids)
        p, k = self.pk.p, self.pk.k
        for start in range(0, len(order) - p + 1, p):
            chunk = order[start:start + p]
            yield np.concatenate([
                rng.choice(self.by_id[int(identity)], size=k, replace=False)
                for identity in chunk
            ])


def pk_sampler(split: SplitArrays, pk: PKBatchSpec, seed: int = 0, epochs: int = 1) -> Iterator[Batch]:
    """Stream PK batches from a split for the given number of epochs."""
    sampler = PKSampler(split.identities, pk, seed)
    for epoch in range(epochs):
        for indices in sampler.epoch(epoch):
            yield Batch(
                images=split.images[indices],
                labels=split.identities[indices],
                indices=indices,
            )


def augment(
    image: np.ndarray,
    seed: Seed,
    flip: Optional[bool] = None,
    offset: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """
    Random horizontal flip (p = 0.5) and random crop after zero-padding by
    AUG_PAD pixels. `offset` is the crop displacement (dy, dx) in
    [-AUG_PAD, AUG_PAD]; (0, 0) crops the original image back out.
    """
    rng = np.random.default_rng(seed)
    draw_flip = rng.random() < 0.5
    draw_offset = rng.integers(-AUG_PAD, AUG_PAD + 1, size=2)
    do_flip = draw_flip if flip is None else flip
    dy, dx = draw_offset if offset is None else offset
    if max(abs(dy), abs(dx)) > AUG_PAD:
        raise ValueError(f"crop offset {offset} exceeds the {AUG_PAD}px padding")

    _, height, width = image.shape
    out = image[:, :, ::-1] if do_flip else image
    padded = np.pad(out, ((0, 0), (AUG_PAD, AUG_PAD), (AUG_PAD, AUG_PAD)))
    top, left = AUG_PAD + dy, AUG_PAD + dx
    return np.clip(padded[:, top:top + height, left:left + width], 0.0, 1.0)


def augment_batch(images: np.ndarray, seed: Sequence[int]) -> np.ndarray:
    """Augment every image with its own seed derived from `seed` and its position."""
    return np.stack([augment(image, list(seed) + [i]) for i, image in enumerate(images)])

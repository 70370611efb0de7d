"""
groupreid configuration management.

Every experiment is described by one RunConfig document. Sections are plain
dataclasses that validate themselves on construction, so an invalid value is
reported before any data is generated or any parameter is touched.
"""

import json
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

from .exceptions import ConfigurationError


VariantName = Literal['A', 'B', 'C', 'D', 'E']
LossMode = Literal['classification', 'triplet', 'both']
VotingMethod = Literal['borda', 'plurality']

VARIANTS: Tuple[str, ...] = ('A', 'B', 'C', 'D', 'E')
LOSS_MODES: Tuple[str, ...] = ('classification', 'triplet', 'both')
VOTING_METHODS: Tuple[str, ...] = ('borda', 'plurality')

SCHEMA_VERSION = 1


def _positive_int(name: str, value: Any) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")


def _non_negative(name: str, value: float) -> None:
    if value < 0:
        raise ConfigurationError(f"{name} must be non-negative, got {value}")


@dataclass
class NuisanceSpec:
    """
    Per-image nuisance applied on top of an identity's appearance.

    Attributes:
        shift_px: Maximum translation (pixels) in each direction.
        brightness_jitter: Relative brightness change, drawn from [-j, j].
        noise_sigma: Standard deviation of additive Gaussian pixel noise.
        occlusion_prob: Probability that a grey box occludes part of the body.
        camera_tint: Strength of the per-camera colour cast.
    """

    shift_px: int = 2
    brightness_jitter: float = 0.1
    noise_sigma: float = 0.03
    occlusion_prob: float = 0.1
    camera_tint: float = 0.12

    def __post_init__(self):
        self._validate()

    def _validate(self) -> None:
        if isinstance(self.shift_px, bool) or not isinstance(self.shift_px, int) or self.shift_px < 0:
            raise ConfigurationError(
                f"shift_px must be a non-negative integer, got {self.shift_px!r}"
            )
        _non_negative('brightness_jitter', self.brightness_jitter)
        if self.brightness_jitter >= 1:
            raise ConfigurationError(
                f"brightness_jitter must be below 1, got {self.brightness_jitter}"
            )
        _non_negative('noise_sigma', self.noise_sigma)
        if not 0 <= self.occlusion_prob <= 1:
            raise ConfigurationError(
                f"occlusion_prob must lie in [0, 1], got {self.occlusion_prob}"
            )
        _non_negative('camera_tint', self.camera_tint)

    @classmethod
    def none(cls) -> 'NuisanceSpec':
        """Factory with every nuisance disabled."""
        return cls(
            shift_px=0,
            brightness_jitter=0.0,
            noise_sigma=0.0,
            occlusion_prob=0.0,
            camera_tint=0.0,
        )


@dataclass
class SynthSpec:
    """
    Synthetic re-id dataset description.

    Training identities are 0..n_train_ids-1; test identities follow them,
    so the two sets never overlap. Test images alternate between camera 0
    and camera 1; the first query_per_id camera-0 images of every test
    identity form the query set and everything else the gallery.

    Attributes:
        val_per_id: Images of every training identity held out as a
                    validation split (classification accuracy only).
        label_noise: Fraction of training samples whose labels get corrupted.
    """

    n_train_ids: int = 32
    n_test_ids: int = 16
    images_per_id: int = 16
    test_images_per_id: int = 8
    query_per_id: int = 2
    val_per_id: int = 0
    image_hw: Tuple[int, int] = (64, 32)
    nuisance: NuisanceSpec = field(default_factory=NuisanceSpec)
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.image_hw = tuple(self.image_hw)
        if isinstance(self.nuisance, dict):
            self.nuisance = _build_section(NuisanceSpec, self.nuisance, 'data.nuisance')
        self._validate()

    def _validate(self) -> None:
        _positive_int('n_train_ids', self.n_train_ids)
        _positive_int('n_test_ids', self.n_test_ids)
        if self.n_train_ids < 2:
            raise ConfigurationError(
                f"n_train_ids must be at least 2, got {self.n_train_ids}"
            )
        _positive_int('images_per_id', self.images_per_id)
        _positive_int('test_images_per_id', self.test_images_per_id)
        _positive_int('query_per_id', self.query_per_id)
        if self.val_per_id < 0:
            raise ConfigurationError(f"val_per_id must be non-negative, got {self.val_per_id}")
        if self.images_per_id - self.val_per_id < 2:
            raise ConfigurationError(
                "every training identity needs at least 2 training images, got "
                f"images_per_id={self.images_per_id}, val_per_id={self.val_per_id}"
            )
        if self.test_images_per_id < 2:
            raise ConfigurationError(
                f"test_images_per_id must be at least 2, got {self.test_images_per_id}"
            )
        camera0 = (self.test_images_per_id + 1) // 2
        if self.query_per_id > camera0:
            raise ConfigurationError(
                f"query_per_id ({self.query_per_id}) exceeds the {camera0} camera-0 "
                "images of each test identity"
            )
        if len(self.image_hw) != 2 or min(self.image_hw) < 8:
            raise ConfigurationError(
                f"image_hw must be (height, width) with both extents >= 8, got {self.image_hw}"
            )
        if not 0 <= self.label_noise < 1:
            raise ConfigurationError(
                f"label_noise must lie in [0, 1), got {self.label_noise}"
            )

    @property
    def train_per_id(self) -> int:
        return self.images_per_id - self.val_per_id


@dataclass
class BackboneSpec:
    """
    Toy convolutional feature extractor.

    Every stage is conv(kernel, stride, pad=kernel//2) -> batchnorm2d -> relu.
    The final stage's stride is last_stride; unless stage_strides is given,
    every earlier stage downsamples by 2.
    """

    stage_channels: Tuple[int, ...] = (16, 32, 64)
    stage_strides: Optional[Tuple[int, ...]] = None
    last_stride: int = 1
    kernel: int = 3
    input_hw: Tuple[int, int] = (64, 32)
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        self.stage_channels = tuple(self.stage_channels)
        if self.stage_strides is not None:
            self.stage_strides = tuple(self.stage_strides)
        self.input_hw = tuple(self.input_hw)
        self._validate()

    def _validate(self) -> None:
        if not self.stage_channels:
            raise ConfigurationError("stage_channels must name at least one stage")
        for channels in self.stage_channels:
            _positive_int('stage_channels entry', channels)
        if self.last_stride not in (1, 2):
            raise ConfigurationError(f"last_stride must be 1 or 2, got {self.last_stride}")
        if self.stage_strides is not None:
            if len(self.stage_strides) != len(self.stage_channels):
                raise ConfigurationError(
                    f"stage_strides has {len(self.stage_strides)} entries but "
                    f"stage_channels has {len(self.stage_channels)}"
                )
            if any(s not in (1, 2) for s in self.stage_strides):
                raise ConfigurationError(f"stage strides must be 1 or 2, got {self.stage_strides}")
            if self.stage_strides[-1] != self.last_stride:
                raise ConfigurationError(
                    f"final stage stride {self.stage_strides[-1]} disagrees with "
                    f"last_stride {self.last_stride}"
                )
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigurationError(f"kernel must be a positive odd integer, got {self.kernel}")
        if not 0 < self.bn_momentum <= 1:
            raise ConfigurationError(f"bn_momentum must lie in (0, 1], got {self.bn_momentum}")
        if self.bn_eps <= 0:
            raise ConfigurationError(f"bn_eps must be positive, got {self.bn_eps}")
        try:
            self.output_hw(self.input_hw)
        except ValueError as e:
            raise ConfigurationError(str(e))

    @property
    def strides(self) -> Tuple[int, ...]:
        if self.stage_strides is not None:
            return self.stage_strides
        return (2,) * (len(self.stage_channels) - 1) + (self.last_stride,)

    @property
    def out_channels(self) -> int:
        return self.stage_channels[-1]

    def output_hw(self, hw: Tuple[int, int]) -> Tuple[int, int]:
        """Final feature-map size for an input of size hw."""
        height, width = hw
        for index, stride in enumerate(self.strides):
            if stride == 2 and (height % 2 or width % 2):
                raise ValueError(
                    f"stage {index} halves a {height}x{width} map; "
                    "spatial size must be even before every stride-2 stage"
                )
            height, width = height // stride, width // stride
        return height, width


@dataclass
class HeadSpec:
    """
    Channel-group head configuration.

    Variants:
        A: channel groups, (shared) embedding per group, one classifier per group
        B: standard single embedding + single classifier (n_c forced to 1)
        C: channel groups with per-group embeddings, one concatenated classifier
        D: single full-feature embedding shared by n_c classifiers
        E: n_c full-feature embeddings, each with its own classifier

    Attributes:
        part_stripes: Horizontal stripes for the part head (0 disables it).
    """

    variant: VariantName = 'A'
    n_c: int = 8
    c_total: int = 64
    embed_dim: int = 16
    n_id: int = 32
    shared_embed: bool = True
    part_stripes: int = 0

    def __post_init__(self):
        if isinstance(self.variant, str):
            self.variant = self.variant.upper()
        if self.variant == 'B':
            self.n_c = 1
        self._validate()

    def _validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigurationError(
                f"variant must be one of {', '.join(VARIANTS)}, got '{self.variant}'"
            )
        _positive_int('n_c', self.n_c)
        _positive_int('c_total', self.c_total)
        _positive_int('embed_dim', self.embed_dim)
        if self.n_id < 2:
            raise ConfigurationError(f"n_id must be at least 2, got {self.n_id}")
        if self.c_total % self.n_c:
            raise ConfigurationError(
                f"c_total ({self.c_total}) is not divisible by n_c ({self.n_c})"
            )
        if self.part_stripes < 0:
            raise ConfigurationError(f"part_stripes must be non-negative, got {self.part_stripes}")
        if self.n_c > 1 and self.c_group == 1:
            warnings.warn(
                f"n_c={self.n_c} leaves a single channel per group; "
                "groups this thin rarely carry identity information.",
                UserWarning
            )

    @property
    def c_group(self) -> int:
        return self.c_total // self.n_c

    @property
    def grouped(self) -> bool:
        """Whether the embeddings see channel-group slices (variants A and C)."""
        return self.variant in ('A', 'C')

    @property
    def n_groups(self) -> int:
        """Number of transformed group descriptors an image produces."""
        return self.n_c if self.variant in ('A', 'C', 'E') else 1

    @property
    def n_branches(self) -> int:
        """Number of classifiers (and cross-entropy terms of the total loss)."""
        return 1 if self.variant in ('B', 'C') else self.n_c

    @property
    def n_embeds(self) -> int:
        """Number of distinct embedding parameter sets."""
        if self.variant in ('B', 'D'):
            return 1
        if self.variant == 'C':
            return self.n_c
        return 1 if self.shared_embed else self.n_c

    @property
    def embed_in(self) -> int:
        return self.c_group if self.grouped else self.c_total

    @property
    def classifier_in(self) -> int:
        return self.n_c * self.embed_dim if self.variant == 'C' else self.embed_dim

    @property
    def standard_dim(self) -> int:
        """Dim_f of the standard inference setting."""
        return (self.n_groups + self.part_stripes) * self.embed_dim


@dataclass
class PKBatchSpec:
    """P identities x K images per mini-batch."""

    p: int = 8
    k: int = 4

    def __post_init__(self):
        self._validate()

    def _validate(self) -> None:
        _positive_int('p', self.p)
        _positive_int('k', self.k)
        if self.p < 2:
            raise ConfigurationError(f"p must be at least 2 (triplet mining needs negatives), got {self.p}")
        if self.k < 2:
            raise ConfigurationError(f"k must be at least 2 (triplet mining needs positives), got {self.k}")

    @property
    def batch_size(self) -> int:
        return self.p * self.k


@dataclass
class TripletConfig:
    """Batch-hard triplet loss settings."""

    margin: float = 0.3
    soft_margin: bool = False

    def __post_init__(self):
        _non_negative('margin', self.margin)


@dataclass
class TrainSpec:
    """
    Optimisation schedule.

    Attributes:
        lr_milestones: Epochs at which lr is multiplied by lr_decay_factor.
                       Defaults to a single milestone at 2/3 of the epochs.
        eval_every: Evaluate every N epochs (0 disables periodic evaluation).
        divergence_threshold: Abort when the loss exceeds this value.
    """

    epochs: int = 40
    lr: float = 0.01
    lr_decay_factor: float = 0.1
    lr_milestones: Optional[Tuple[int, ...]] = None
    momentum: float = 0.9
    weight_decay: float = 5e-4
    pk: PKBatchSpec = field(default_factory=PKBatchSpec)
    loss_mode: LossMode = 'classification'
    triplet: TripletConfig = field(default_factory=TripletConfig)
    augment: bool = True
    eval_every: int = 0
    divergence_threshold: float = 1e6
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.pk, dict):
            self.pk = _build_section(PKBatchSpec, self.pk, 'train.pk')
        if isinstance(self.triplet, dict):
            self.triplet = _build_section(TripletConfig, self.triplet, 'train.triplet')
        if self.lr_milestones is not None:
            self.lr_milestones = tuple(self.lr_milestones)
        self._validate()

    def _validate(self) -> None:
        _positive_int('epochs', self.epochs)
        if self.epochs > 200:
            warnings.warn(
                f"{self.epochs} epochs is very long for the desk-scale benchmark.",
                UserWarning
            )
        _non_negative('lr', self.lr)
        if self.lr == 0:
            warnings.warn("lr=0 leaves every parameter at its initial value.", UserWarning)
        if not 0 < self.lr_decay_factor <= 1:
            raise ConfigurationError(
                f"lr_decay_factor must lie in (0, 1], got {self.lr_decay_factor}"
            )
        if self.lr_milestones is not None:
            previous = 0
            for milestone in self.lr_milestones:
                if milestone <= previous:
                    raise ConfigurationError(
                        f"lr_milestones must be strictly increasing positive epochs, got {self.lr_milestones}"
                    )
                previous = milestone
        if not 0 <= self.momentum < 1:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")
        _non_negative('weight_decay', self.weight_decay)
        if self.loss_mode not in LOSS_MODES:
            raise ConfigurationError(
                f"loss_mode must be one of {', '.join(LOSS_MODES)}, got '{self.loss_mode}'"
            )
        if self.eval_every < 0:
            raise ConfigurationError(f"eval_every must be non-negative, got {self.eval_every}")
        if self.divergence_threshold <= 0:
            raise ConfigurationError(
                f"divergence_threshold must be positive, got {self.divergence_threshold}"
            )

    @property
    def milestones(self) -> Tuple[int, ...]:
        if self.lr_milestones is not None:
            return self.lr_milestones
        return (max(1, round(2 * self.epochs / 3)),)

    def lr_at(self, epoch: int) -> float:
        """Step-decayed learning rate for a 0-based epoch."""
        passed = sum(1 for milestone in self.milestones if epoch >= milestone)
        return self.lr * self.lr_decay_factor ** passed


@dataclass
class EvalConfig:
    """
    Retrieval evaluation settings.

    Attributes:
        settings: Inference settings to report: 'standard', 'fast:i',
                  'concat:k' or 'voting'. Group indices are 0-based.
        k_max: Length of the CMC curve; None means min(20, gallery size).
        inference_batch: Images per forward pass during extraction.
    """

    settings: Tuple[str, ...] = ('standard',)
    k_max: Optional[int] = None
    voting_method: VotingMethod = 'borda'
    inference_batch: int = 64

    def __post_init__(self):
        if isinstance(self.settings, str):
            self.settings = (self.settings,)
        self.settings = tuple(self.settings)
        self._validate()

    def _validate(self) -> None:
        if not self.settings:
            raise ConfigurationError("eval.settings must name at least one setting")
        if self.k_max is not None:
            _positive_int('k_max', self.k_max)
        if self.voting_method not in VOTING_METHODS:
            raise ConfigurationError(
                f"voting_method must be one of {', '.join(VOTING_METHODS)}, got '{self.voting_method}'"
            )
        _positive_int('inference_batch', self.inference_batch)


@dataclass
class GridConfig:
    """Axes of the compare-variants experiment grid."""

    variants: Tuple[str, ...] = VARIANTS
    n_c_list: Tuple[int, ...] = (8,)
    shared_flags: Tuple[bool, ...] = (True,)
    loss_modes: Tuple[str, ...] = ('classification',)
    seeds: Tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        self.variants = tuple(v.upper() for v in self.variants)
        self.n_c_list = tuple(self.n_c_list)
        self.shared_flags = tuple(bool(s) for s in self.shared_flags)
        self.loss_modes = tuple(self.loss_modes)
        self.seeds = tuple(self.seeds)
        self._validate()

    def _validate(self) -> None:
        for axis in ('variants', 'n_c_list', 'shared_flags', 'loss_modes', 'seeds'):
            if not getattr(self, axis):
                raise ConfigurationError(f"grid.{axis} must not be empty")
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown:
            raise ConfigurationError(f"unknown variants in grid: {unknown}")
        bad_modes = [m for m in self.loss_modes if m not in LOSS_MODES]
        if bad_modes:
            raise ConfigurationError(f"unknown loss modes in grid: {bad_modes}")
        for n_c in self.n_c_list:
            _positive_int('grid n_c', n_c)


@dataclass
class ModelSpec:
    """Backbone plus head; the unit a checkpoint describes."""

    backbone: BackboneSpec = field(default_factory=BackboneSpec)
    head: HeadSpec = field(default_factory=HeadSpec)

    def __post_init__(self):
        if isinstance(self.backbone, dict):
            self.backbone = _build_section(BackboneSpec, self.backbone, 'backbone')
        if isinstance(self.head, dict):
            self.head = _build_section(HeadSpec, self.head, 'head')
        self._validate()

    def _validate(self) -> None:
        if self.head.c_total != self.backbone.out_channels:
            raise ConfigurationError(
                f"head.c_total ({self.head.c_total}) must equal the backbone's "
                f"final channel count ({self.backbone.out_channels})"
            )
        if self.head.part_stripes:
            height, _ = self.feature_hw
            if height % self.head.part_stripes:
                raise ConfigurationError(
                    f"feature-map height {height} is not divisible by "
                    f"part_stripes={self.head.part_stripes}"
                )

    @property
    def feature_hw(self) -> Tuple[int, int]:
        return self.backbone.output_hw(self.backbone.input_hw)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModelSpec':
        _reject_unknown(cls, data, 'model')
        return cls(
            backbone=_build_section(BackboneSpec, data.get('backbone', {}), 'backbone'),
            head=_build_section(HeadSpec, data.get('head', {}), 'head'),
        )


# Keys that RunConfig derives from other sections instead of reading them.
_DERIVED_KEYS: Dict[str, Tuple[str, ...]] = {
    'data': ('seed',),
    'backbone': ('input_hw',),
    'head': ('c_total', 'n_id'),
    'train': ('seed',),
}


@dataclass
class RunConfig:
    """
    Unified experiment configuration.

    The root seed is the single source of randomness: it is copied into the
    dataset and training sections. The head's channel count and identity
    count, and the backbone's input size, are derived from the other
    sections so they can never disagree.

    Example:
        config = RunConfig.desk().with_overrides(seed=3)
    """

    data: SynthSpec = field(default_factory=SynthSpec)
    backbone: BackboneSpec = field(default_factory=BackboneSpec)
    head: HeadSpec = field(default_factory=HeadSpec)
    train: TrainSpec = field(default_factory=TrainSpec)
    eval: EvalConfig = field(default_factory=EvalConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    seed: int = 0
    jobs: int = 1
    debug_mode: bool = False

    def __post_init__(self):
        self._validate()
        self.data = replace(self.data, seed=self.seed)
        self.train = replace(self.train, seed=self.seed)
        self.backbone = replace(self.backbone, input_hw=self.data.image_hw)
        self.head = replace(
            self.head,
            c_total=self.backbone.out_channels,
            n_id=self.data.n_train_ids,
        )
        # Cross-section consistency (channel divisibility, stripe height).
        self.model_spec()

    def _validate(self) -> None:
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.seed!r}")
        _positive_int('jobs', self.jobs)
        if self.train.pk.p > self.data.n_train_ids:
            raise ConfigurationError(
                f"train.pk.p ({self.train.pk.p}) exceeds the {self.data.n_train_ids} training identities"
            )
        if self.train.pk.k > self.data.train_per_id:
            raise ConfigurationError(
                f"train.pk.k ({self.train.pk.k}) exceeds the {self.data.train_per_id} "
                "training images per identity"
            )

    def model_spec(self, **head_overrides: Any) -> ModelSpec:
        """Build the ModelSpec, optionally overriding head fields (grid cells)."""
        head = replace(self.head, **head_overrides) if head_overrides else self.head
        return ModelSpec(backbone=self.backbone, head=head)

    def with_overrides(self, **kwargs: Any) -> 'RunConfig':
        """
        Create a new config with some values overridden.

        Example:
            new_config = config.with_overrides(seed=5, jobs=4)
        """
        return replace(self, **kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Build a config from a parsed JSON document, rejecting unknown keys."""
        if not isinstance(data, dict):
            raise ConfigurationError("configuration document must be a JSON object")
        _reject_unknown(cls, data, 'config')
        sections = {}
        for name, section_cls in (
            ('data', SynthSpec),
            ('backbone', BackboneSpec),
            ('head', HeadSpec),
            ('train', TrainSpec),
            ('eval', EvalConfig),
            ('grid', GridConfig),
        ):
            raw = data.get(name, {})
            derived = [key for key in _DERIVED_KEYS.get(name, ()) if key in raw]
            if derived:
                raise ConfigurationError(
                    f"{name}.{derived[0]} is derived from other settings and cannot be set"
                )
            sections[name] = _build_section(section_cls, raw, name)
        root = {key: data[key] for key in ('seed', 'jobs', 'debug_mode') if key in data}
        return cls(**sections, **root)

    @classmethod
    def desk(cls) -> 'RunConfig':
        """Factory for the default desk-scale benchmark."""
        return cls()

    @classmethod
    def smoke(cls) -> 'RunConfig':
        """Factory for a tiny configuration that trains in seconds."""
        return cls(
            data=SynthSpec(
                n_train_ids=8,
                n_test_ids=4,
                images_per_id=8,
                test_images_per_id=4,
                query_per_id=1,
                image_hw=(32, 16),
            ),
            backbone=BackboneSpec(stage_channels=(4, 8, 16)),
            head=HeadSpec(n_c=4, embed_dim=8),
            train=TrainSpec(epochs=3, pk=PKBatchSpec(p=4, k=4)),
            grid=GridConfig(seeds=(0,)),
        )


def _reject_unknown(cls: type, data: Dict[str, Any], section: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown keys in {section}: {', '.join(unknown)}")


def _build_section(cls: type, data: Any, section: str) -> Any:
    if isinstance(data, cls):
        return data
    if not isinstance(data, dict):
        raise ConfigurationError(f"{section} must be a JSON object, got {type(data).__name__}")
    _reject_unknown(cls, data, section)
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigurationError(f"invalid {section} section: {e}")


def load_config(path: Union[str, Path]) -> RunConfig:
    """Load and validate a RunConfig from a JSON file."""
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid JSON: {e}")
    return RunConfig.from_dict(data)


DEFAULT_CONFIG = RunConfig()

"""
groupreid - Channel-group multi-branch classification for re-identification.

A desk-scale, numpy-only network core (conv, batch norm, linear layers with
hand-written backward passes), a channel-group head in five architecture
variants, a synthetic two-camera re-id benchmark, a seeded trainer and a
retrieval evaluator with standard, fast and voting inference.

Basic Usage:
    from groupreid import RunConfig, generate_dataset, train, evaluate

    config = RunConfig.smoke()
    data = generate_dataset(config.data)
    model, log = train(config.model_spec(), data, config.train)

    for report in evaluate(model, data, config.eval):
        print(report.to_json())

Variants:
    from groupreid import HeadSpec

    HeadSpec(variant='A', n_c=8)    # channel groups + one classifier each
    HeadSpec(variant='B')           # single global branch baseline

Inference settings:
    EvalConfig(settings=('standard', 'fast:0', 'concat:2', 'voting'))

Command line:
    groupreid gen-data --out data/
    groupreid train --data data/ --out run/
    groupreid eval --checkpoint run/model.ckpt --data data/ --setting fast:0
"""

__version__ = '0.1.0'

# Public API
from .config import (
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
    TripletConfig,
    DEFAULT_CONFIG,
    load_config,
)
from .exceptions import (
    GroupReidError,
    ConfigurationError,
    ShapeMismatchError,
    LabelRangeError,
    NotForwardedError,
    DivergenceError,
    CheckpointFormatError,
    EvaluationError,
)
from .data import ReidDataset, generate_dataset, pk_sampler, augment
from .model import ReidModel
from .head import param_count
from .losses import head_loss, triplet_hard_loss
from .evaluation import (
    DistanceMatrix,
    EvalReport,
    InferenceSetting,
    cmc_map,
    distance_matrix,
    evaluate,
    infer_descriptors,
    rank_list,
    voting_rank,
)
from .trainer import TrainLog, compare_variants, train
from .storage import load_checkpoint, save_checkpoint, load_dataset, save_dataset
from .diagnostics import TrainingReport, generate_report, print_report

__all__ = [
    # Version
    '__version__',

    # Configuration
    'BackboneSpec',
    'EvalConfig',
    'GridConfig',
    'HeadSpec',
    'ModelSpec',
    'NuisanceSpec',
    'PKBatchSpec',
    'RunConfig',
    'SynthSpec',
    'TrainSpec',
    'TripletConfig',
    'DEFAULT_CONFIG',
    'load_config',

    # Data
    'ReidDataset',
    'generate_dataset',
    'pk_sampler',
    'augment',

    # Model and losses
    'ReidModel',
    'param_count',
    'head_loss',
    'triplet_hard_loss',

    # Evaluation
    'DistanceMatrix',
    'EvalReport',
    'InferenceSetting',
    'cmc_map',
    'distance_matrix',
    'evaluate',
    'infer_descriptors',
    'rank_list',
    'voting_rank',

    # Training
    'TrainLog',
    'compare_variants',
    'train',

    # Storage
    'load_checkpoint',
    'save_checkpoint',
    'load_dataset',
    'save_dataset',

    # Exceptions
    'GroupReidError',
    'ConfigurationError',
    'ShapeMismatchError',
    'LabelRangeError',
    'NotForwardedError',
    'DivergenceError',
    'CheckpointFormatError',
    'EvaluationError',

    # Diagnostics
    'TrainingReport',
    'generate_report',
    'print_report',
]

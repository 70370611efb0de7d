"""
Pipeline commands behind the CLI.

Each command takes a validated RunConfig plus paths, does its work through
the library API and returns what it produced, so scripts and tests can call
them without going through argument parsing.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import EvalConfig, RunConfig
from .data import ReidDataset, generate_dataset
from .evaluation import EvalReport, InferenceSetting, distance_matrix, evaluate, infer_descriptors
from .exceptions import CheckpointFormatError, EvaluationError
from .model import ReidModel
from .storage import load_checkpoint, load_dataset, save_checkpoint, save_dataset, write_features, write_matrix
from .trainer import GridResult, TrainLog, compare_variants, train


logger = logging.getLogger('groupreid')

PathLike = Union[str, Path]

CHECKPOINT_NAME = 'model.ckpt'
TRAIN_LOG_NAME = 'train_log.jsonl'


@dataclass
class TrainResult:
    model: ReidModel
    log: TrainLog
    checkpoint_path: Path
    log_path: Path


def resolve_dataset(config: RunConfig, data_dir: Optional[PathLike]) -> Tuple[RunConfig, ReidDataset]:
    """
    Load the dataset directory, or generate the configured dataset in memory.

    A dataset directory is authoritative for the data section: the returned
    config is rebound to the dataset's SynthSpec so the head's identity
    count and the backbone's input size follow the stored data.
    """
    if data_dir is None:
        return config, generate_dataset(config.data)
    dataset = load_dataset(data_dir)
    if dataset.spec != config.data:
        logger.debug(f"[groupreid] using the data section stored in {data_dir}")
        config = config.with_overrides(data=dataset.spec)
    return config, dataset


def cmd_gen_data(config: RunConfig, out_dir: PathLike) -> Path:
    """Generate the configured dataset and write it to out_dir."""
    dataset = generate_dataset(config.data)
    return save_dataset(dataset, out_dir)


def cmd_train(config: RunConfig, data_dir: Optional[PathLike], out_dir: PathLike) -> TrainResult:
    """Train the configured model; write the checkpoint and JSON-lines log to out_dir."""
    config, dataset = resolve_dataset(config, data_dir)
    model, log = train(config.model_spec(), dataset, config.train, config.eval)
    out_dir = Path(out_dir)
    checkpoint_path = save_checkpoint(model, out_dir / CHECKPOINT_NAME)
    log_path = out_dir / TRAIN_LOG_NAME
    log_path.write_text(log.to_json_lines())
    logger.info(f"[groupreid] checkpoint: {checkpoint_path}  log: {log_path}")
    return TrainResult(model=model, log=log, checkpoint_path=checkpoint_path, log_path=log_path)


def _check_compatible(model: ReidModel, dataset: ReidDataset, checkpoint: PathLike) -> None:
    expected = tuple(model.spec.backbone.input_hw)
    actual = tuple(dataset.spec.image_hw)
    if expected != actual:
        raise CheckpointFormatError(
            f"checkpoint {checkpoint} was trained on {expected[0]}x{expected[1]} images, "
            f"dataset has {actual[0]}x{actual[1]}"
        )


def cmd_eval(
    checkpoint: PathLike,
    data_dir: PathLike,
    settings: Optional[Sequence[str]] = None,
    eval_config: Optional[EvalConfig] = None,
    distances: Optional[PathLike] = None,
) -> List[EvalReport]:
    """
    Evaluate a checkpoint on a dataset directory, one report per setting.

    With `distances`, the query x gallery distance matrix of the first
    setting is also written there as a matrix file. Voting settings write
    the distances of the standard descriptor.
    """
    model = load_checkpoint(checkpoint)
    dataset = load_dataset(data_dir)
    _check_compatible(model, dataset, checkpoint)
    config = eval_config or EvalConfig()
    if settings:
        config = EvalConfig(
            settings=tuple(settings),
            k_max=config.k_max,
            voting_method=config.voting_method,
            inference_batch=config.inference_batch,
        )
    reports = evaluate(model, dataset, config)
    if distances is not None:
        setting = InferenceSetting.parse(config.settings[0])
        query, _ = infer_descriptors(model, dataset.query.images, setting, config.inference_batch)
        gallery, _ = infer_descriptors(model, dataset.gallery.images, setting, config.inference_batch)
        matrix = distance_matrix(query, gallery)
        path = write_matrix(distances, matrix.values)
        logger.info(f"[groupreid] {setting} distances {matrix.values.shape}: {path}")
    return reports


def cmd_compare_variants(
    config: RunConfig,
    data_dir: Optional[PathLike],
    out_path: PathLike,
    jobs: Optional[int] = None,
) -> GridResult:
    """Run the configured variant grid and write its JSON document."""
    config, dataset = resolve_dataset(config, data_dir)
    result = compare_variants(config, dataset, jobs=jobs)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(result.to_json())
    return result


def cmd_export_features(
    checkpoint: PathLike,
    data_dir: PathLike,
    out_path: PathLike,
    setting: str = 'standard',
    batch_size: int = 64,
) -> Tuple[Path, Path]:
    """
    Export query then gallery descriptors of a setting as a matrix file with
    a JSON sidecar describing every row.
    """
    model = load_checkpoint(checkpoint)
    dataset = load_dataset(data_dir)
    _check_compatible(model, dataset, checkpoint)
    if len(dataset.query) == 0:
        raise EvaluationError("cannot export features: the query set is empty")
    parsed = InferenceSetting.parse(setting)

    matrices, rows = [], []
    for split in (dataset.query, dataset.gallery):
        if len(split) == 0:
            continue
        matrix, _ = infer_descriptors(model, split.images, parsed, batch_size)
        matrices.append(matrix)
        rows.extend(
            {'split': split.name, 'identity': int(identity), 'camera': int(camera)}
            for identity, camera in zip(split.identities, split.cameras)
        )
    features = np.concatenate(matrices, axis=0)
    return write_features(out_path, features, rows, str(parsed))

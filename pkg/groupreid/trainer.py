"""
Training loop and the variant-comparison experiment grid.

A run is a pure function of (ModelSpec, dataset, TrainSpec): the model is
initialised from the training seed, PK batches and augmentations are drawn
from seeded generators, and nothing reads the clock except the wall-time
field of the log.
"""

import concurrent.futures
import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .config import SCHEMA_VERSION, EvalConfig, ModelSpec, RunConfig, TrainSpec, TripletConfig
from .data import PKSampler, ReidDataset, augment_batch
from .evaluation import EvalReport, InferenceSetting, classification_accuracy, evaluate
from .exceptions import ConfigurationError, DivergenceError, EvaluationError
from .losses import head_loss, triplet_hard_loss
from .model import ReidModel
from .tensor import sgd_step


logger = logging.getLogger('groupreid')

# Seed-stream purpose of the per-step augmentation generators.
_AUGMENT = 4
_RECENT_LOSSES = 10


@dataclass
class StepRecord:
    """
    Losses of one optimisation step.

    total = sum(per_branch) + (triplet or 0).
    """

    epoch: int
    step: int
    lr: float
    total: float
    per_branch: List[float]
    triplet: Optional[float] = None


@dataclass
class EvalSnapshot:
    epoch: int
    reports: List[EvalReport]
    val_accuracy: Optional[float] = None


@dataclass
class TrainLog:
    """Everything a training run records; equality ignores wall time."""

    steps: List[StepRecord] = field(default_factory=list)
    evals: List[EvalSnapshot] = field(default_factory=list)
    model_spec: Dict[str, Any] = field(default_factory=dict)
    train_spec: Dict[str, Any] = field(default_factory=dict)
    wall_time: float = field(default=0.0, compare=False)

    @property
    def total_losses(self) -> List[float]:
        return [record.total for record in self.steps]

    def epoch_means(self) -> List[float]:
        """Mean total loss of every epoch, in epoch order."""
        by_epoch: Dict[int, List[float]] = {}
        for record in self.steps:
            by_epoch.setdefault(record.epoch, []).append(record.total)
        return [float(np.mean(by_epoch[epoch])) for epoch in sorted(by_epoch)]

    def to_json_lines(self, include_timing: bool = False) -> str:
        """
        One JSON object per line: a header, every step, every evaluation.
        Wall time is only written with include_timing, so logs of identical
        runs are byte-identical by default.
        """
        header = {
            'schema_version': SCHEMA_VERSION,
            'type': 'header',
            'model_spec': self.model_spec,
            'train_spec': self.train_spec,
        }
        if include_timing:
            header['wall_time'] = self.wall_time
        lines = [json.dumps(header, sort_keys=True)]
        for record in self.steps:
            lines.append(json.dumps({'type': 'step', **record.__dict__}, sort_keys=True))
        for snapshot in self.evals:
            lines.append(json.dumps({
                'type': 'eval',
                'epoch': snapshot.epoch,
                'val_accuracy': snapshot.val_accuracy,
                'reports': [report.to_dict() for report in snapshot.reports],
            }, sort_keys=True))
        return '\n'.join(lines) + '\n'


@dataclass
class LossBreakdown:
    total: float
    per_branch: List[float]
    triplet: Optional[float] = None


def compute_loss_and_grads(
    model: ReidModel,
    images: np.ndarray,
    labels: np.ndarray,
    loss_mode: str = 'classification',
    triplet: Optional[TripletConfig] = None,
) -> LossBreakdown:
    """
    Forward one batch in train mode and backpropagate the loss.

    Gradients are added to the parameters' .grad; call model.zero_grad()
    first for a fresh step.
    """
    output = model.forward(images, 'train')
    per_branch: List[float] = []
    grad_logits = [np.zeros_like(logits) for logits in output.logits]
    if loss_mode in ('classification', 'both'):
        branch = head_loss(output.logits, labels)
        per_branch = branch.per_branch
        grad_logits = branch.grad_logits

    triplet_loss = grad_descriptor = None
    if loss_mode in ('triplet', 'both'):
        triplet_loss, grad_descriptor = triplet_hard_loss(output.descriptors.standard(), labels, triplet)

    model.backward(grad_logits, grad_descriptor)
    total = float(sum(per_branch)) + (triplet_loss or 0.0)
    return LossBreakdown(total=total, per_branch=per_branch, triplet=triplet_loss)


def _check_labels(model_spec: ModelSpec, data: ReidDataset) -> None:
    labels = data.train.identities
    if labels.size == 0:
        raise ConfigurationError("the training split is empty")
    if labels.min() < 0 or labels.max() >= model_spec.head.n_id:
        raise ConfigurationError(
            f"training labels span [{labels.min()}, {labels.max()}] but the head has "
            f"{model_spec.head.n_id} identity classes"
        )


def train(
    model_spec: ModelSpec,
    data: ReidDataset,
    train_spec: TrainSpec,
    eval_config: Optional[EvalConfig] = None,
) -> Tuple[ReidModel, TrainLog]:
    """
    Train a model from scratch.

    Args:
        model_spec: Architecture to build.
        data: Dataset; only its train split is optimised on.
        train_spec: Schedule, batch shape, loss mode and seed.
        eval_config: Settings used for periodic evaluation (eval_every).

    Returns:
        (trained model, TrainLog)

    Raises:
        ConfigurationError: If labels, batch shape and head disagree.
        DivergenceError: If the loss becomes non-finite or exceeds the
                         divergence threshold.
    """
    _check_labels(model_spec, data)
    model = ReidModel(model_spec, seed=train_spec.seed)
    sampler = PKSampler(data.train.identities, train_spec.pk, train_spec.seed)
    log = TrainLog(model_spec=model_spec.to_dict(), train_spec=_spec_dict(train_spec))
    params = model.parameters()
    recent: List[float] = []
    started = time.perf_counter()

    step = 0
    for epoch in range(train_spec.epochs):
        lr = train_spec.lr_at(epoch)
        epoch_losses = []
        for indices in sampler.epoch(epoch):
            images = data.train.images[indices]
            if train_spec.augment:
                images = augment_batch(images, [train_spec.seed, _AUGMENT, step])
            labels = data.train.identities[indices]

            model.zero_grad()
            losses = compute_loss_and_grads(model, images, labels, train_spec.loss_mode, train_spec.triplet)
            if not np.isfinite(losses.total) or losses.total > train_spec.divergence_threshold:
                logger.warning(f"[groupreid] loss {losses.total} at epoch {epoch} step {step}; aborting")
                raise DivergenceError(
                    f"training diverged at epoch {epoch}, step {step}: loss {losses.total}",
                    epoch=epoch, step=step, lr=lr, loss=losses.total,
                    threshold=train_spec.divergence_threshold, recent_losses=recent,
                )
            sgd_step(params, lr, train_spec.momentum, train_spec.weight_decay)

            log.steps.append(StepRecord(
                epoch=epoch, step=step, lr=lr, total=losses.total,
                per_branch=losses.per_branch, triplet=losses.triplet,
            ))
            recent = (recent + [losses.total])[-_RECENT_LOSSES:]
            epoch_losses.append(losses.total)
            step += 1

        logger.info(f"[groupreid] epoch {epoch + 1}/{train_spec.epochs}  lr {lr:g}  "
                    f"loss {np.mean(epoch_losses):.4f}")
        if train_spec.eval_every and (epoch + 1) % train_spec.eval_every == 0:
            log.evals.append(snapshot(model, data, epoch, eval_config))

    log.wall_time = time.perf_counter() - started
    return model, log


def snapshot(model: ReidModel, data: ReidDataset, epoch: int, eval_config: Optional[EvalConfig] = None) -> EvalSnapshot:
    """Retrieval reports plus validation classification accuracy, if a val split exists."""
    config = eval_config or EvalConfig()
    val_accuracy = None
    if len(data.val):
        val_accuracy = classification_accuracy(model, data.val, config.inference_batch)
    return EvalSnapshot(epoch=epoch, reports=evaluate(model, data, config), val_accuracy=val_accuracy)


def _spec_dict(train_spec: TrainSpec) -> Dict[str, Any]:
    document = asdict(train_spec)
    document['milestones'] = list(train_spec.milestones)
    return document


# ---------------------------------------------------------------------------
# Variant comparison grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridCell:
    """One architecture/loss configuration of the grid."""

    variant: str
    n_c: int
    shared: bool
    loss_mode: str

    @property
    def key(self) -> str:
        sharing = 'shared' if self.shared else 'unshared'
        return f'{self.variant}/n_c={self.n_c}/{sharing}/{self.loss_mode}'


def expand_grid(variants, n_c_list, shared_flags, loss_modes) -> List[GridCell]:
    """
    Cartesian product of the grid axes with equivalent cells merged.

    Variant B always has one group, and the sharing flag only changes
    variants A and E, so those axes collapse for the other variants.
    """
    cells: List[GridCell] = []
    for variant, n_c, shared, loss_mode in itertools.product(variants, n_c_list, shared_flags, loss_modes):
        cell = GridCell(
            variant=variant,
            n_c=1 if variant == 'B' else n_c,
            shared=shared if variant in ('A', 'E') else True,
            loss_mode=loss_mode,
        )
        if cell not in cells:
            cells.append(cell)
    return cells


@dataclass
class CellRun:
    seed: int
    reports: Dict[str, EvalReport]


@dataclass
class CellResult:
    cell: GridCell
    runs: List[CellRun]

    def summary(self) -> Dict[str, Dict[str, float]]:
        """Mean and sample standard deviation of Rank-1 and mAP per setting."""
        settings = list(self.runs[0].reports) if self.runs else []
        out = {}
        for setting in settings:
            rank1 = np.array([run.reports[setting].rank1 for run in self.runs])
            maps = np.array([run.reports[setting].map for run in self.runs])
            ddof = 1 if len(self.runs) > 1 else 0
            out[setting] = {
                'rank1_mean': float(rank1.mean()),
                'rank1_sd': float(rank1.std(ddof=ddof)),
                'map_mean': float(maps.mean()),
                'map_sd': float(maps.std(ddof=ddof)),
            }
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            'variant': self.cell.variant,
            'n_c': self.cell.n_c,
            'shared': self.cell.shared,
            'loss_mode': self.cell.loss_mode,
            'metrics': self.summary(),
            'runs': [
                {
                    'seed': run.seed,
                    'reports': {name: report.to_dict() for name, report in run.reports.items()},
                }
                for run in self.runs
            ],
        }


@dataclass
class GridResult:
    cells: List[CellResult]
    seeds: List[int]

    def cell(self, key: str) -> CellResult:
        for result in self.cells:
            if result.cell.key == key:
                return result
        raise KeyError(key)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': SCHEMA_VERSION,
            'seeds': list(self.seeds),
            'cells': [result.to_dict() for result in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n'


def run_cell(config: RunConfig, data: ReidDataset, cell: GridCell, seed: int) -> CellRun:
    """Train and evaluate one grid cell for one seed."""
    model_spec = config.model_spec(variant=cell.variant, n_c=cell.n_c, shared_embed=cell.shared)
    train_spec = replace(config.train, seed=seed, loss_mode=cell.loss_mode)
    settings = []
    for name in config.eval.settings:
        try:
            InferenceSetting.parse(name).validate(model_spec.head.n_groups)
            settings.append(name)
        except EvaluationError:
            logger.debug(f"[groupreid] {cell.key}: setting '{name}' does not apply, skipped")
    if not settings:
        raise ConfigurationError(f"no configured inference setting applies to grid cell {cell.key}")
    eval_config = replace(config.eval, settings=tuple(settings))

    model, _ = train(model_spec, data, train_spec, eval_config)
    reports = evaluate(model, data, eval_config)
    return CellRun(seed=seed, reports={report.setting: report for report in reports})


def _run_cell_job(job) -> CellRun:
    config, data, cell, seed = job
    if config.debug_mode:
        logging.basicConfig(level=logging.DEBUG)
    return run_cell(config, data, cell, seed)


def compare_variants(
    config: RunConfig,
    data: ReidDataset,
    variants=None,
    n_c_list=None,
    shared_flags=None,
    seeds=None,
    loss_modes=None,
    jobs: Optional[int] = None,
) -> GridResult:
    """
    Train every grid cell over every seed on the same data and budget.

    Axes default to config.grid. With jobs > 1 the (cell, seed) runs execute
    in a process pool; results are gathered in submission order, so the
    grid does not depend on the job count.
    """
    grid = config.grid
    cells = expand_grid(
        [v.upper() for v in (variants or grid.variants)],
        n_c_list or grid.n_c_list,
        shared_flags if shared_flags is not None else grid.shared_flags,
        loss_modes or grid.loss_modes,
    )
    seeds = list(seeds if seeds is not None else grid.seeds)
    jobs = jobs or config.jobs
    work = [(config, data, cell, seed) for cell in cells for seed in seeds]
    logger.info(f"[groupreid] grid: {len(cells)} cells x {len(seeds)} seeds, {jobs} job(s)")

    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_cell_job, work))
    else:
        runs = [_run_cell_job(job) for job in work]

    results = []
    for index, cell in enumerate(cells):
        cell_runs = runs[index * len(seeds):(index + 1) * len(seeds)]
        result = CellResult(cell=cell, runs=cell_runs)
        for setting, metrics in result.summary().items():
            logger.info(
                f"[groupreid] {cell.key} {setting}: Rank-1 {metrics['rank1_mean']:.4f} "
                f"± {metrics['rank1_sd']:.4f}  mAP {metrics['map_mean']:.4f}"
            )
        results.append(result)
    return GridResult(cells=results, seeds=seeds)

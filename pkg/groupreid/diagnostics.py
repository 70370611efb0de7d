"""
Training reports.

Summarises a TrainLog as a boxed text report with actionable suggestions,
or as JSON for CI pipelines.
"""

import json
import sys
from datetime import datetime
from typing import Any, Dict, List, Optional, TextIO

import numpy as np

from .trainer import TrainLog


WIDTH = 66


def _row(text: str = '') -> str:
    return f"| {text}"[:WIDTH + 1].ljust(WIDTH + 1) + "|"


def _rule() -> str:
    return "+" + "-" * WIDTH + "+"


def summarize(log: TrainLog) -> Dict[str, Any]:
    """Condense a TrainLog into the numbers the report shows."""
    head = log.model_spec.get('head', {})
    train = log.train_spec
    losses = log.total_losses
    summary: Dict[str, Any] = {
        'config': {
            'variant': head.get('variant'),
            'n_c': head.get('n_c'),
            'shared_embed': head.get('shared_embed'),
            'embed_dim': head.get('embed_dim'),
            'part_stripes': head.get('part_stripes'),
            'epochs': train.get('epochs'),
            'lr': train.get('lr'),
            'loss_mode': train.get('loss_mode'),
        },
        'steps': len(losses),
        'wall_time': log.wall_time,
        'loss': {},
        'branches': [],
        'evals': [],
    }
    if losses:
        epoch_means = log.epoch_means()
        summary['loss'] = {
            'first': losses[0],
            'last': losses[-1],
            'first_epoch_mean': epoch_means[0],
            'last_epoch_mean': epoch_means[-1],
            'min': float(np.min(losses)),
        }
        last = log.steps[-1]
        summary['branches'] = list(last.per_branch)
        summary['triplet'] = last.triplet
    for snap in log.evals:
        summary['evals'].append({
            'epoch': snap.epoch,
            'val_accuracy': snap.val_accuracy,
            'reports': {r.setting: {'rank1': r.rank1, 'map': r.map} for r in snap.reports},
        })
    return summary


class TrainingReport:
    """
    Human-readable report of a training run.

    Usage:
        model, log = train(spec, data, train_spec)
        print(TrainingReport(log).generate_text_report())
    """

    def __init__(self, log: TrainLog):
        self.diagnostics = summarize(log)
        self.timestamp = datetime.now()

    def generate_text_report(self) -> str:
        """Generate a text-based training report."""
        d = self.diagnostics
        lines = [_rule(), "|" + "GROUPREID TRAINING REPORT".center(WIDTH) + "|", _rule()]
        lines.append(_row(f"Report generated at: {self.timestamp.strftime('%Y-%m-%d %H:%M:%S')}"))

        config = d['config']
        lines.append(_rule())
        lines.append(_row("CONFIGURATION:"))
        lines.append(_row(f"  Variant: {config['variant']}  n_c: {config['n_c']}  "
                          f"shared: {config['shared_embed']}  D: {config['embed_dim']}"))
        if config.get('part_stripes'):
            lines.append(_row(f"  Part stripes: {config['part_stripes']}"))
        lines.append(_row(f"  Epochs: {config['epochs']}  lr: {config['lr']}  loss: {config['loss_mode']}"))
        lines.append(_row(f"  Steps: {d['steps']}  wall time: {d['wall_time']:.1f}s"))

        loss = d['loss']
        if loss:
            lines.append(_rule())
            lines.append(_row("LOSS:"))
            lines.append(_row(f"  first step {loss['first']:.4f} -> last step {loss['last']:.4f}"))
            lines.append(_row(f"  epoch mean {loss['first_epoch_mean']:.4f} -> {loss['last_epoch_mean']:.4f}"))

        branches = d['branches']
        if branches:
            lines.append(_rule())
            lines.append(_row(f"BRANCH LOSSES (last step, sum {sum(branches):.4f}):"))
            for index, value in enumerate(branches[:8]):
                lines.append(_row(f"  [{index}] {value:.4f}"))
            if len(branches) > 8:
                lines.append(_row(f"  ... and {len(branches) - 8} more"))
        if d.get('triplet') is not None:
            lines.append(_row(f"  triplet: {d['triplet']:.4f}"))

        if d['evals']:
            lines.append(_rule())
            lines.append(_row("EVALUATIONS:"))
            for snap in d['evals'][-10:]:
                parts = [f"{name} R1 {m['rank1']:.3f} mAP {m['map']:.3f}" for name, m in snap['reports'].items()]
                if snap['val_accuracy'] is not None:
                    parts.append(f"val acc {snap['val_accuracy']:.3f}")
                lines.append(_row(f"  [epoch {snap['epoch'] + 1}] " + "; ".join(parts)))

        lines.extend(self._generate_suggestions())
        lines.append(_rule())
        return "\n".join(lines)

    def _generate_suggestions(self) -> List[str]:
        """Generate actionable suggestions based on the run."""
        d = self.diagnostics
        loss = d['loss']
        config = d['config']
        suggestions = []

        if loss and loss['last_epoch_mean'] >= loss['first_epoch_mean']:
            suggestions.append(
                "The loss did not go down. Consider:\n"
                "     - a larger train.lr, or more epochs\n"
                "     - disabling train.augment for a first sanity run"
            )
        branches = d['branches']
        if len(branches) > 1 and max(branches) > 2 * min(branches):
            suggestions.append(
                "Branch losses are uneven; some channel groups learn slowly.\n"
                "     Try a smaller n_c or a shared embedding (head.shared_embed)."
            )
        if config['variant'] in ('B', 'D') and config['loss_mode'] != 'triplet':
            suggestions.append(
                f"Variant {config['variant']} has no channel grouping; fast and\n"
                "     voting inference need variant A, C or E."
            )
        accuracies = [s['val_accuracy'] for s in d['evals'] if s['val_accuracy'] is not None]
        if len(accuracies) > 1 and accuracies[-1] < max(accuracies) - 0.05:
            suggestions.append(
                "Validation accuracy dropped from its peak; the model may be\n"
                "     overfitting. Raise train.weight_decay or lower train.epochs."
            )

        lines = []
        if suggestions:
            lines.append(_rule())
            lines.append(_row("SUGGESTIONS:"))
            lines.append(_row())
            for i, suggestion in enumerate(suggestions, 1):
                for line in f"{i}. {suggestion}".split('\n'):
                    lines.append(_row(line))
                lines.append(_row())
        return lines

    def to_json(self) -> str:
        """Export the summary as JSON for CI integration."""
        return json.dumps({
            'timestamp': self.timestamp.isoformat(),
            'diagnostics': self.diagnostics,
        }, indent=2, default=str)


def generate_report(log: TrainLog) -> TrainingReport:
    return TrainingReport(log)


def print_report(log: TrainLog, stream: Optional[TextIO] = None) -> None:
    """Print a training report (to stderr by default)."""
    print(generate_report(log).generate_text_report(), file=stream or sys.stderr)

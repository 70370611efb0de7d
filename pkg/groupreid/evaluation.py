"""
Retrieval evaluation.

Distances are plain Euclidean distances between descriptors. CMC and mAP
follow the single-query protocol with the cross-camera filter: a gallery
image that shares both identity and camera with the query is ignored.

Inference settings:
    standard   - all transformed channel groups concatenated (plus stripes)
    fast:i     - channel group i alone (0-based)
    concat:k   - the first k groups concatenated (plus stripes)
    voting     - per-group rankings aggregated into one ranking
"""

import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from .config import SCHEMA_VERSION, VOTING_METHODS, EvalConfig
from .data import ReidDataset, SplitArrays
from .exceptions import EvaluationError
from .head import DescriptorSet


logger = logging.getLogger('groupreid')

DEFAULT_K_MAX = 20


@dataclass
class RetrievalMeta:
    """Identity and camera ids of the rows of a descriptor matrix."""

    identities: np.ndarray
    cameras: np.ndarray

    def __post_init__(self):
        self.identities = np.asarray(self.identities, dtype=np.int64)
        self.cameras = np.asarray(self.cameras, dtype=np.int64)
        if self.identities.shape != self.cameras.shape:
            raise EvaluationError(
                f"{self.identities.size} identities but {self.cameras.size} cameras"
            )

    def __len__(self) -> int:
        return int(self.identities.size)

    @classmethod
    def from_split(cls, split: SplitArrays) -> 'RetrievalMeta':
        return cls(identities=split.identities, cameras=split.cameras)

    @classmethod
    def anonymous(cls, n: int) -> 'RetrievalMeta':
        """Every row its own identity, all on camera 0."""
        return cls(identities=np.arange(n), cameras=np.zeros(n, dtype=np.int64))


@dataclass
class DistanceMatrix:
    """
    Q x G Euclidean distances with the metadata of both sides.

    Attributes:
        ops_per_pair: Multiplies spent per query-gallery pair, i.e. the
                      descriptor length Dim_f.
    """

    values: np.ndarray
    query_meta: RetrievalMeta
    gallery_meta: RetrievalMeta
    ops_per_pair: int

    def __post_init__(self):
        q, g = self.values.shape
        if q != len(self.query_meta) or g != len(self.gallery_meta):
            raise EvaluationError(
                f"distance matrix {self.values.shape} does not match "
                f"{len(self.query_meta)} queries x {len(self.gallery_meta)} gallery items"
            )
        if np.any(self.values < 0):
            raise EvaluationError("distance matrix has negative entries")

    @property
    def shape(self):
        return self.values.shape

    def valid_mask(self) -> np.ndarray:
        """Q x G: False where a gallery item shares identity and camera with the query."""
        same_id = self.query_meta.identities[:, None] == self.gallery_meta.identities[None, :]
        same_cam = self.query_meta.cameras[:, None] == self.gallery_meta.cameras[None, :]
        return ~(same_id & same_cam)

    def matches(self) -> np.ndarray:
        return self.query_meta.identities[:, None] == self.gallery_meta.identities[None, :]


@dataclass
class EvalReport:
    """
    Metrics of one inference setting.

    Attributes:
        cmc: Rank-k accuracies for k = 1..k_max.
        map: Mean average precision over the evaluated queries.
        setting: Inference setting name, e.g. 'fast:0'.
        descriptor_dim: Dim_f of the setting's descriptor.
        distance_ops_per_pair: Multiplies per query-gallery distance.
        n_queries: Queries that had at least one valid correct match.
        n_skipped: Queries excluded because they had none.
    """

    cmc: List[float]
    map: float
    setting: str = 'standard'
    descriptor_dim: int = 0
    distance_ops_per_pair: int = 0
    n_queries: int = 0
    n_skipped: int = 0

    @property
    def rank1(self) -> float:
        return self.cmc[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': SCHEMA_VERSION,
            'setting': self.setting,
            'rank1': self.rank1,
            'map': self.map,
            'cmc': list(self.cmc),
            'descriptor_dim': self.descriptor_dim,
            'distance_ops_per_pair': self.distance_ops_per_pair,
            'n_queries': self.n_queries,
            'n_skipped': self.n_skipped,
        }

    def to_json(self) -> str:
        """Single-line JSON object."""
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EvalReport':
        return cls(
            cmc=list(data['cmc']),
            map=data['map'],
            setting=data['setting'],
            descriptor_dim=data['descriptor_dim'],
            distance_ops_per_pair=data['distance_ops_per_pair'],
            n_queries=data['n_queries'],
            n_skipped=data['n_skipped'],
        )


# ---------------------------------------------------------------------------
# Distances, rankings, metrics
# ---------------------------------------------------------------------------

def distance_matrix(
    query_desc: np.ndarray,
    gallery_desc: np.ndarray,
    query_meta: Optional[RetrievalMeta] = None,
    gallery_meta: Optional[RetrievalMeta] = None,
) -> DistanceMatrix:
    """Euclidean distances between every query row and every gallery row."""
    if query_desc.ndim != 2 or gallery_desc.ndim != 2 or query_desc.shape[1] != gallery_desc.shape[1]:
        raise EvaluationError(
            f"descriptor dims differ: query {query_desc.shape}, gallery {gallery_desc.shape}",
            details={'query_shape': query_desc.shape, 'gallery_shape': gallery_desc.shape},
        )
    values = cdist(query_desc, gallery_desc, metric='euclidean')
    return DistanceMatrix(
        values=values,
        query_meta=query_meta if query_meta is not None else RetrievalMeta.anonymous(query_desc.shape[0]),
        gallery_meta=gallery_meta if gallery_meta is not None else RetrievalMeta.anonymous(gallery_desc.shape[0]),
        ops_per_pair=int(query_desc.shape[1]),
    )


def rank_list(dm: DistanceMatrix, query_index: int) -> np.ndarray:
    """Gallery indices by ascending distance; ties keep ascending index order."""
    if not 0 <= query_index < dm.shape[0]:
        raise EvaluationError(f"query index {query_index} out of range for {dm.shape[0]} queries")
    return np.argsort(dm.values[query_index], kind='stable')


def cmc_map(
    dm: DistanceMatrix,
    k_max: Optional[int] = None,
    orderings: Optional[Sequence[np.ndarray]] = None,
    setting: str = 'standard',
) -> EvalReport:
    """
    CMC curve and mAP of a distance matrix.

    Args:
        dm: Query x gallery distances with metadata.
        k_max: CMC length, default min(20, gallery size).
        orderings: Optional per-query gallery orderings overriding the
                   distance ranking (used by voting).
        setting: Setting name recorded in the report.

    Raises:
        EvaluationError: If no query has a valid correct match.
    """
    n_query, n_gallery = dm.shape
    if n_query == 0:
        raise EvaluationError("cannot evaluate an empty query set")
    if k_max is None:
        k_max = min(DEFAULT_K_MAX, n_gallery)
    if orderings is not None and len(orderings) != n_query:
        raise EvaluationError(f"{len(orderings)} orderings for {n_query} queries")

    valid = dm.valid_mask()
    matches = dm.matches()
    cmc = np.zeros(k_max)
    average_precisions = []
    skipped = []

    for q in range(n_query):
        order = orderings[q] if orderings is not None else rank_list(dm, q)
        order = order[valid[q, order]]
        hits = matches[q, order]
        if not hits.any():
            skipped.append(q)
            continue
        hit_ranks = np.flatnonzero(hits)
        if hit_ranks[0] < k_max:
            cmc[hit_ranks[0]:] += 1
        precisions = np.arange(1, hit_ranks.size + 1) / (hit_ranks + 1)
        average_precisions.append(precisions.mean())

    if skipped:
        logger.warning(
            f"[groupreid] {len(skipped)} queries have no valid correct match and were excluded: {skipped}"
        )
    if not average_precisions:
        raise EvaluationError(
            "no query has a valid correct match in the gallery",
            details={'skipped_queries': skipped},
        )

    evaluated = len(average_precisions)
    return EvalReport(
        cmc=(cmc / evaluated).tolist(),
        map=float(np.mean(average_precisions)),
        setting=setting,
        descriptor_dim=dm.ops_per_pair,
        distance_ops_per_pair=dm.ops_per_pair,
        n_queries=evaluated,
        n_skipped=len(skipped),
    )


def voting_rank(
    per_group_dms: Sequence[DistanceMatrix],
    fallback_dm: DistanceMatrix,
    method: str = 'borda',
) -> List[np.ndarray]:
    """
    Aggregate per-group rankings into one gallery ordering per query.

    borda: each group ranks the gallery (0 = closest); items are ordered by
    the sum of their ranks. plurality: each group votes for its top-1 item;
    items are ordered by vote count, descending. Both break ties by the
    fallback distance, then by gallery index.
    """
    if len(per_group_dms) < 2:
        raise EvaluationError(
            f"voting needs at least two channel groups, got {len(per_group_dms)}"
        )
    if method not in VOTING_METHODS:
        raise EvaluationError(f"unknown voting method '{method}'")
    shapes = {dm.shape for dm in per_group_dms} | {fallback_dm.shape}
    if len(shapes) != 1:
        raise EvaluationError(
            f"voting matrices have mismatched shapes: {sorted(shapes)}",
            details={'shapes': sorted(shapes)},
        )

    n_query, n_gallery = fallback_dm.shape
    gallery_index = np.arange(n_gallery)
    orderings = []
    for q in range(n_query):
        if method == 'borda':
            # Ordinal ranks break distance ties by gallery index, like rank_list.
            score = sum(rankdata(dm.values[q], method='ordinal') - 1 for dm in per_group_dms)
        else:
            votes = np.zeros(n_gallery)
            for dm in per_group_dms:
                votes[rank_list(dm, q)[0]] += 1
            score = -votes
        orderings.append(np.lexsort((gallery_index, fallback_dm.values[q], score)))
    return orderings


# ---------------------------------------------------------------------------
# Inference settings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InferenceSetting:
    """
    A parsed inference setting.

    Attributes:
        kind: 'standard', 'fast', 'concat' or 'voting'.
        index: Group index for fast, group count for concat.
    """

    kind: str
    index: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> 'InferenceSetting':
        name, _, arg = text.strip().lower().replace('concat_', 'concat:').partition(':')
        if name in ('standard', 'voting'):
            if arg:
                raise EvaluationError(f"setting '{text}' takes no argument")
            return cls(name)
        if name in ('fast', 'concat'):
            try:
                value = int(arg)
            except ValueError:
                raise EvaluationError(f"setting '{text}' needs an integer, e.g. '{name}:1'")
            return cls(name, value)
        raise EvaluationError(
            f"unknown inference setting '{text}'; expected standard, fast:i, concat:k or voting"
        )

    def __str__(self) -> str:
        return self.kind if self.index is None else f'{self.kind}:{self.index}'

    def validate(self, n_groups: int) -> None:
        """Check the setting against a head with n_groups channel groups."""
        if self.kind == 'fast' and not 0 <= self.index < n_groups:
            raise EvaluationError(
                f"group index {self.index} out of range for {n_groups} channel groups",
                details={'index': self.index, 'n_groups': n_groups},
            )
        if self.kind == 'concat' and not 1 <= self.index <= n_groups:
            raise EvaluationError(
                f"cannot concatenate {self.index} of {n_groups} channel groups",
                details={'k': self.index, 'n_groups': n_groups},
            )
        if self.kind == 'voting' and n_groups < 2:
            raise EvaluationError(f"voting needs at least two channel groups, got {n_groups}")

    def select(self, descriptors: DescriptorSet) -> np.ndarray:
        """The setting's descriptor matrix; voting uses the standard one."""
        if self.kind == 'fast':
            return descriptors.fast(self.index)
        if self.kind == 'concat':
            return descriptors.concat(self.index)
        return descriptors.standard()


def _as_setting(setting) -> InferenceSetting:
    return setting if isinstance(setting, InferenceSetting) else InferenceSetting.parse(setting)


def infer_descriptors(model, images: np.ndarray, setting='standard', batch_size: int = 64):
    """
    Eval-mode descriptors of `images` under an inference setting.

    Returns:
        (descriptor matrix N x Dim_f, Dim_f)
    """
    setting = _as_setting(setting)
    setting.validate(model.spec.head.n_groups)
    matrix = setting.select(model.extract(images, batch_size))
    return matrix, int(matrix.shape[1])


def evaluate_descriptors(
    query: DescriptorSet,
    gallery: DescriptorSet,
    query_meta: RetrievalMeta,
    gallery_meta: RetrievalMeta,
    setting='standard',
    k_max: Optional[int] = None,
    voting_method: str = 'borda',
) -> EvalReport:
    """Evaluate one setting on already extracted descriptor sets."""
    setting = _as_setting(setting)
    setting.validate(query.n_groups)
    if len(query_meta) == 0:
        raise EvaluationError("cannot evaluate an empty query set")

    fallback = distance_matrix(setting.select(query), setting.select(gallery), query_meta, gallery_meta)
    if setting.kind != 'voting':
        return cmc_map(fallback, k_max, setting=str(setting))

    per_group = [
        distance_matrix(q, g, query_meta, gallery_meta)
        for q, g in zip(query.groups, gallery.groups)
    ]
    orderings = voting_rank(per_group, fallback, voting_method)
    return cmc_map(fallback, k_max, orderings=orderings, setting=str(setting))


def evaluate(model, dataset: ReidDataset, config: Optional[EvalConfig] = None) -> List[EvalReport]:
    """
    Evaluate a model on the dataset's query and gallery splits, one report
    per configured setting. Descriptors are extracted once and shared.
    """
    config = config or EvalConfig()
    if len(dataset.query) == 0:
        raise EvaluationError("cannot evaluate an empty query set")
    settings = [InferenceSetting.parse(s) for s in config.settings]
    for setting in settings:
        setting.validate(model.spec.head.n_groups)

    query = model.extract(dataset.query.images, config.inference_batch)
    gallery = model.extract(dataset.gallery.images, config.inference_batch)
    query_meta = RetrievalMeta.from_split(dataset.query)
    gallery_meta = RetrievalMeta.from_split(dataset.gallery)

    reports = []
    for setting in settings:
        report = evaluate_descriptors(
            query, gallery, query_meta, gallery_meta,
            setting, config.k_max, config.voting_method,
        )
        logger.info(
            f"[groupreid] {report.setting}: Rank-1 {report.rank1:.4f}  mAP {report.map:.4f}  "
            f"Dim_f {report.descriptor_dim}"
        )
        reports.append(report)
    return reports


def classification_accuracy(model, split: SplitArrays, batch_size: int = 64) -> float:
    """Top-1 accuracy of the summed branch logits on a labelled split."""
    if len(split) == 0:
        raise EvaluationError(f"split '{split.name}' is empty")
    scores = model.predict_logits(split.images, batch_size)
    return float(np.mean(scores.argmax(axis=1) == split.identities))

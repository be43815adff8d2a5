"""Scoring of per-level class probabilities produced by an external model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from semgeo.errors import InputError
from semgeo.geo import GeoCoordinate, great_circle_distance
from semgeo.partitioning import MultiPartitioning

log = logging.getLogger(__name__)

PROB_SUM_TOL = 1e-6


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: Optional[str]
    predicted_cell: object
    predicted_coordinate: GeoCoordinate
    gcd_error_km: Optional[float] = None

    def with_ground_truth(self, gt: GeoCoordinate) -> "PredictionRecord":
        return PredictionRecord(self.sample_id, self.predicted_cell, self.predicted_coordinate,
                                great_circle_distance(gt, self.predicted_coordinate))


def check_probabilities(probs: Sequence[np.ndarray], mp: MultiPartitioning,
                        tol: float = PROB_SUM_TOL) -> list[np.ndarray]:
    """Validate one probability vector per level; returns float64 copies."""
    if len(probs) != len(mp.levels):
        raise InputError(f"expected {len(mp.levels)} probability vectors, got {len(probs)}")
    out = []
    for i, (vec, level) in enumerate(zip(probs, mp.levels)):
        v = np.asarray(vec, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] != len(level):
            raise InputError(f"level {i}: vector length {v.shape} does not match {len(level)} cells")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InputError(f"level {i}: probabilities must be finite and non-negative")
        if abs(v.sum() - 1.0) > tol:
            raise InputError(f"level {i}: probabilities sum to {v.sum():.9g}, not 1")
        out.append(v)
    return out


def _record(mp: MultiPartitioning, idx: int, sample_id) -> PredictionRecord:
    cell = mp.finest.cells[idx]
    return PredictionRecord(sample_id, cell, mp.finest.cell_center[cell])


def flat_predict(probs: Sequence[np.ndarray], mp: MultiPartitioning, sample_id=None) -> PredictionRecord:
    """Most probable finest-level cell; ties go to the earlier cell."""
    probs = check_probabilities(probs, mp)
    return _record(mp, int(np.argmax(probs[0])), sample_id)


def hierarchical_scores(probs: Sequence[np.ndarray], mp: MultiPartitioning) -> np.ndarray:
    """Finest-cell probability times the probability of its cell at every coarser level."""
    scores = np.array(probs[0], dtype=np.float64)
    for level in range(1, len(mp.levels)):
        scores *= np.asarray(probs[level], dtype=np.float64)[mp.ancestor_index(level)]
    return scores


def hierarchical_predict(probs: Sequence[np.ndarray], mp: MultiPartitioning, sample_id=None) -> PredictionRecord:
    probs = check_probabilities(probs, mp)
    return _record(mp, int(np.argmax(hierarchical_scores(probs, mp))), sample_id)


def multi_level_cross_entropy(probs: Sequence[np.ndarray], true_cells: Sequence, mp: MultiPartitioning) -> float:
    """Sum over levels of -log(probability of the true cell).

    A zero probability at a true cell yields ``inf`` and a warning.
    """
    if len(true_cells) != len(mp.levels):
        raise InputError(f"expected {len(mp.levels)} true cells, got {len(true_cells)}")
    total = 0.0
    for i, (vec, cell, level) in enumerate(zip(probs, true_cells, mp.levels)):
        if cell not in level:
            raise InputError(f"true cell {cell} is not a cell of level {i}")
        p = float(vec[level.index(cell)])
        if p <= 0.0:
            log.warning("zero probability for true cell %s at level %d; loss is infinite", cell, i)
            return math.inf
        total -= math.log(p)
    return total


def mean_crops(crops: Sequence[Sequence[np.ndarray]]) -> list[np.ndarray]:
    """Level-wise mean of several probability sets (e.g. five crops of one image)."""
    if not crops:
        raise InputError("no crops to average")
    n_levels = len(crops[0])
    if any(len(c) != n_levels for c in crops):
        raise InputError("crops disagree on the number of levels")
    return [np.mean([np.asarray(c[i], dtype=np.float64) for c in crops], axis=0) for i in range(n_levels)]

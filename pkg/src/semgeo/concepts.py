"""Concept influence: how much of an explanation's top-k mass falls on a concept.

Rasters are plain numpy arrays indexed ``[row, col]``:

* explanation map: float ``(h, w)`` or ``(h, w, d)`` (reduced by channel max)
* segmentation map: non-negative integer labels ``(h, w)``
* concept masks: boolean ``(h, w)``

For a concept mask ``m`` (optionally dilated by ``beta`` px) and the top-k
mask of the explanation, ``tki = |m & topk| / k``, the relative size is
``|m| / (h*w)`` and the influence is ``tki / relative_size``. Concepts
smaller than ``s_min`` are skipped, which bounds the influence by
``1 / s_min``.
"""

from __future__ import annotations

import logging
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from semgeo import kernels
from semgeo.errors import ConfigError, InputError

log = logging.getLogger(__name__)

DEFAULT_K = 1000
DEFAULT_S_MIN = 0.05
DEFAULT_INTERVALS = ((0.0, 25.0), (25.0, 750.0), (750.0, 2500.0))
MIN_IMAGES_HEADLINE = 50
MIN_IMAGES_FULL = 10


def _as_explanation(e) -> np.ndarray:
    e = np.asarray(e)
    if e.ndim == 3:
        e = channel_max(e)
    if e.ndim != 2:
        raise InputError(f"explanation map must be 2-D or 3-D, got shape {e.shape}")
    if not np.all(np.isfinite(e)):
        raise InputError("explanation map contains NaN or Inf")
    return e


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InputError(f"raster dimensions differ: {a.shape} vs {b.shape}")


def channel_max(raw) -> np.ndarray:
    """Per-pixel maximum over the trailing channel axis."""
    raw = np.asarray(raw)
    if raw.ndim == 2:
        return raw.copy()
    if raw.ndim != 3 or raw.shape[2] < 1:
        raise InputError(f"expected an (h, w, d) raster, got shape {raw.shape}")
    return kernels.channel_max(raw)


def top_k_mask(e, k: int = DEFAULT_K) -> np.ndarray:
    """Boolean mask of the k largest values; ties resolved by row-major index."""
    e = _as_explanation(e)
    if k < 1 or k > e.size:
        raise ConfigError(f"k={k} outside [1, {e.size}] for a {e.shape} raster")
    return kernels.top_k_mask(e, int(k))


def concept_mask(seg, s) -> np.ndarray:
    return np.asarray(seg) == s


def dilate(mask, beta: int) -> np.ndarray:
    """Grow a mask by ``beta`` pixels with a 3x3 square element (Chebyshev distance <= beta)."""
    if beta < 0:
        raise ConfigError(f"beta must be non-negative, got {beta}")
    return kernels.dilate_chebyshev(np.asarray(mask, dtype=np.bool_), int(beta))


def tki(mask, topk, k: int) -> float:
    mask = np.asarray(mask, dtype=np.bool_)
    topk = np.asarray(topk, dtype=np.bool_)
    _check_same_shape(mask, topk)
    n_top = int(np.count_nonzero(topk))
    if n_top != k:
        raise InputError(f"top-k mask has {n_top} pixels set, expected k={k}")
    return kernels.and_count(mask, topk) / k


def relative_size(mask) -> float:
    mask = np.asarray(mask, dtype=np.bool_)
    return int(np.count_nonzero(mask)) / mask.size


@dataclass(frozen=True)
class CiScore:
    tki: float
    relative_size: float
    ci: float


def _check_s_min(s_min: float) -> None:
    if not 0.0 < s_min <= 1.0:
        raise ConfigError(f"s_min must lie in (0, 1], got {s_min}")


def ci_score(e, seg, s, k: int = DEFAULT_K, beta: int = 0, s_min: float = DEFAULT_S_MIN,
             topk: Optional[np.ndarray] = None) -> Optional[CiScore]:
    """Influence of concept ``s``; None when the (dilated) concept is below ``s_min``."""
    _check_s_min(s_min)
    e = _as_explanation(e)
    seg = np.asarray(seg)
    _check_same_shape(e, seg)
    mask = dilate(concept_mask(seg, s), beta)
    size = relative_size(mask)
    if size < s_min:
        return None
    if topk is None:
        topk = top_k_mask(e, k)
    t = tki(mask, topk, k)
    return CiScore(t, size, t / size)


@dataclass(frozen=True)
class CiRecord:
    sample_id: str
    concept: object
    relative_size: float
    tki: float
    ci: float
    gcd_error_km: float
    beta: int = 0


def image_ci_records(sample_id: str, e, seg, gcd_error_km: float = math.nan, *,
                     k: int = DEFAULT_K, beta: int = 0, s_min: float = DEFAULT_S_MIN,
                     names: Optional[Mapping[int, str]] = None,
                     concepts: Optional[Iterable[int]] = None) -> list[CiRecord]:
    """Records for every concept present in ``seg`` that passes the size filter.

    ``names`` maps label ids to concept names; unmapped labels keep their id.
    """
    _check_s_min(s_min)
    e = _as_explanation(e)
    seg = np.asarray(seg)
    _check_same_shape(e, seg)
    if seg.size and seg.min() < 0:
        raise InputError("segmentation labels must be non-negative")
    topk = top_k_mask(e, k)
    n_labels = int(seg.max()) + 1 if seg.size else 0
    labels = seg.astype(np.int64, copy=False)
    sizes, hits = kernels.label_overlap_counts(labels, topk, n_labels)
    present = np.flatnonzero(sizes)
    if concepts is not None:
        present = np.array(sorted(set(int(c) for c in concepts) & set(present.tolist())), dtype=np.int64)
    n_pix = seg.size
    out = []
    for lab in present.tolist():
        if beta > 0:
            mask = dilate(labels == lab, beta)
            size_px = int(np.count_nonzero(mask))
            hit_px = kernels.and_count(mask, topk)
        else:
            size_px = int(sizes[lab])
            hit_px = int(hits[lab])
        size = size_px / n_pix
        if size < s_min:
            continue
        t = hit_px / k
        concept = names.get(lab, lab) if names else lab
        out.append(CiRecord(sample_id, concept, size, t, t / size, float(gcd_error_km), beta))
    return out


@dataclass(frozen=True)
class CiAggregate:
    concept: object
    interval: tuple
    count: int
    median: float
    mean: float


def check_intervals(intervals: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    ivs = [(float(lo), float(hi)) for lo, hi in intervals]
    if not ivs:
        raise ConfigError("no intervals given")
    for lo, hi in ivs:
        if not lo < hi:
            raise ConfigError(f"empty interval [{lo}, {hi})")
    for (lo1, hi1), (lo2, hi2) in zip(ivs, ivs[1:]):
        if lo2 < hi1:
            raise ConfigError(f"intervals [{lo1}, {hi1}) and [{lo2}, {hi2}) overlap or are unordered")
    return ivs


def _sort_key(concept) -> tuple:
    return (0, concept, "") if isinstance(concept, (int, np.integer)) else (1, 0, str(concept))


def aggregate(records: Iterable[CiRecord], intervals=DEFAULT_INTERVALS,
              min_images: int = MIN_IMAGES_HEADLINE) -> list[CiAggregate]:
    """Median and mean influence per (concept, error interval).

    Intervals are half-open ``[lo, hi)``; groups with fewer than
    ``min_images`` records are omitted.
    """
    ivs = check_intervals(intervals)
    groups: dict = defaultdict(list)
    for r in records:
        for iv in ivs:
            if iv[0] <= r.gcd_error_km < iv[1]:
                groups[(r.concept, iv)].append(r.ci)
                break
    out = []
    for (concept, iv), values in groups.items():
        if len(values) < min_images:
            continue
        # fmean sums exactly, so the result does not depend on record order
        out.append(CiAggregate(concept, iv, len(values), float(statistics.median(values)),
                               statistics.fmean(values)))
    if not out:
        log.warning("no (concept, interval) group reaches min_images=%d", min_images)
    out.sort(key=lambda a: (ivs.index(a.interval), _sort_key(a.concept)))
    return out


def rank_concepts(aggs: Sequence[CiAggregate], interval, n: int = 10, lowest: bool = False,
                  by: str = "median") -> list[CiAggregate]:
    """Top (or lowest) ``n`` concepts of one interval by median or mean."""
    iv = (float(interval[0]), float(interval[1]))
    rows = [a for a in aggs if a.interval == iv]
    sign = 1.0 if lowest else -1.0
    rows.sort(key=lambda a: (sign * getattr(a, by), _sort_key(a.concept)))
    return rows[:n]


@dataclass(frozen=True)
class BetaDelta:
    concept: object
    interval: tuple
    delta: float
    median_dilated: float
    median_plain: float


def beta_delta(agg_dilated: Sequence[CiAggregate], agg_plain: Sequence[CiAggregate],
               strict: bool = True) -> list[BetaDelta]:
    """Change of the median influence caused by dilation, per (concept, interval).

    With ``strict`` both inputs must cover the same keys; otherwise only
    the common keys are reported.
    """
    a = {(x.concept, x.interval): x for x in agg_dilated}
    b = {(x.concept, x.interval): x for x in agg_plain}
    if strict and a.keys() != b.keys():
        only_a = sorted(a.keys() - b.keys(), key=str)
        only_b = sorted(b.keys() - a.keys(), key=str)
        raise InputError(f"aggregate keys differ; only in dilated: {only_a}; only in plain: {only_b}")
    keys = [k for k in a if k in b]
    order = {iv: i for i, iv in enumerate(sorted({k[1] for k in keys}))}
    keys.sort(key=lambda k: (order[k[1]], _sort_key(k[0])))
    return [BetaDelta(c, iv, a[(c, iv)].median - b[(c, iv)].median, a[(c, iv)].median, b[(c, iv)].median)
            for c, iv in keys]

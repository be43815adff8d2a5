"""Partitionings induced by minimum sample counts on the location forest.

A location survives threshold ``tau_min`` when at least that many training
samples pass through it. Because a parent's count is never below a
child's, the survivors of a remapped path always form a suffix of it, so a
sample's class is simply the first surviving location on its path.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

from semgeo.errors import ConfigError, InputError, UnassignableError
from semgeo.geo import GeoCoordinate
from semgeo.hierarchy import LocationForest

log = logging.getLogger(__name__)

CENTER_MODES = ("spherical", "arithmetic")


@dataclass
class Partitioning:
    """One set of classification cells.

    ``cells`` is the canonical (sorted) cell ordering used for probability
    vectors. ``cell_count`` is the hierarchy sample count of each cell
    (always >= ``tau_min``); ``n_assigned`` counts the training samples
    whose class the cell is.
    """

    tau_min: int
    cells: tuple
    cell_center: dict
    cell_count: dict
    n_assigned: dict = field(default_factory=dict)
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.cells = tuple(self.cells)
        self._index = {c: i for i, c in enumerate(self.cells)}

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, cell) -> bool:
        return cell in self._index

    def index(self, cell) -> int:
        return self._index[cell]


@dataclass
class MultiPartitioning:
    """Partitionings ordered fine to coarse with cross-level cell maps.

    ``parent_cell[i]`` maps each cell of level ``i`` to a cell of level ``i+1``.
    """

    levels: tuple
    parent_cell: tuple = ()
    _ancestors: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.levels = tuple(self.levels)
        self.parent_cell = tuple(self.parent_cell)
        if len(self.parent_cell) != max(len(self.levels) - 1, 0):
            raise InputError("need one parent map per adjacent level pair")

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> Partitioning:
        return self.levels[0]

    @property
    def taus(self) -> tuple:
        return tuple(p.tau_min for p in self.levels)

    def ancestor_cell(self, cell, level: int):
        """Cell of ``level`` that a finest-level cell maps to."""
        for i in range(level):
            try:
                cell = self.parent_cell[i][cell]
            except KeyError:
                raise InputError(f"no parent mapping for cell {cell} at level {i}") from None
        return cell

    def ancestor_index(self, level: int) -> np.ndarray:
        """For every finest cell (canonical order) the index of its cell at ``level``."""
        cached = self._ancestors.get(level)
        if cached is None:
            target = self.levels[level]
            cached = np.array(
                [target.index(self.ancestor_cell(c, level)) for c in self.finest.cells],
                dtype=np.int64,
            )
            self._ancestors[level] = cached
        return cached


def _check_tau(tau) -> int:
    if isinstance(tau, bool) or int(tau) != tau or tau < 1:
        raise ConfigError(f"tau_min must be a positive integer, got {tau!r}")
    return int(tau)


def finest_survivor(path: Sequence[Hashable], forest: LocationForest, tau_min: int,
                    allowed: Optional[Callable[[Hashable], bool]] = None):
    counts = forest.sample_count
    for loc in path:
        if counts.get(loc, 0) >= tau_min and (allowed is None or allowed(loc)):
            return loc
    return None


def label_samples(forest: LocationForest, remapped: Sequence[Optional[Sequence[Hashable]]],
                  tau_min: int, allowed: Optional[Callable[[Hashable], bool]] = None) -> list:
    """Class of each remapped sample at ``tau_min`` (None when no location survives)."""
    tau_min = _check_tau(tau_min)
    memo: dict = {}
    labels = []
    for path in remapped:
        if not path:
            labels.append(None)
            continue
        key = tuple(path)
        if key not in memo:
            memo[key] = finest_survivor(key, forest, tau_min, allowed)
        labels.append(memo[key])
    return labels


def _to_array(coordinates) -> np.ndarray:
    if isinstance(coordinates, np.ndarray):
        return np.asarray(coordinates, dtype=np.float64).reshape(-1, 2)
    return np.array([(c.lat_deg, c.lon_deg) for c in coordinates], dtype=np.float64).reshape(-1, 2)


def _spherical_mean(lat: np.ndarray, lon: np.ndarray) -> tuple[float, float]:
    rlat = np.radians(lat)
    rlon = np.radians(lon)
    x = float(np.mean(np.cos(rlat) * np.cos(rlon)))
    y = float(np.mean(np.cos(rlat) * np.sin(rlon)))
    z = float(np.mean(np.sin(rlat)))
    if math.sqrt(x * x + y * y + z * z) < 1e-12:
        raise InputError("spherical centroid undefined: coordinates cancel out")
    clat = math.degrees(math.atan2(z, math.hypot(x, y)))
    clon = math.degrees(math.atan2(y, x)) if math.hypot(x, y) > 0 else 0.0
    return clat, clon


def cell_center(assigned, mode: str = "spherical") -> GeoCoordinate:
    """Representative coordinate of a cell's training samples.

    ``spherical`` (default) averages unit vectors and projects back onto the
    sphere; ``arithmetic`` averages latitude and longitude directly and is
    wrong for cells straddling the antimeridian.
    """
    if mode not in CENTER_MODES:
        raise ConfigError(f"unknown center mode {mode!r}")
    arr = _to_array(assigned)
    if arr.shape[0] == 0:
        raise InputError("cell center of zero coordinates")
    if mode == "arithmetic":
        lat, lon = float(np.mean(arr[:, 0])), float(np.mean(arr[:, 1]))
    else:
        lat, lon = _spherical_mean(arr[:, 0], arr[:, 1])
    return GeoCoordinate(max(-90.0, min(90.0, lat)), max(-180.0, min(180.0, lon)))


def construct_partitioning(
    forest: LocationForest,
    remapped: Sequence[Optional[Sequence[Hashable]]],
    coordinates,
    tau_min: int,
    *,
    center_mode: str = "spherical",
    allowed: Optional[Callable[[Hashable], bool]] = None,
) -> Partitioning:
    """Cells at ``tau_min``: the finest surviving location of every sample.

    ``remapped`` and ``coordinates`` are aligned per training sample;
    ``allowed`` optionally restricts which locations may become cells
    (e.g. only locations with an area geometry).
    """
    tau_min = _check_tau(tau_min)
    coords = _to_array(coordinates)
    if coords.shape[0] != len(remapped):
        raise InputError(f"{len(remapped)} addresses but {coords.shape[0]} coordinates")
    labels = label_samples(forest, remapped, tau_min, allowed)
    members: dict = {}
    for i, lab in enumerate(labels):
        if lab is not None:
            members.setdefault(lab, []).append(i)
    if not members:
        raise InputError(f"partitioning at tau_min={tau_min} is empty")
    unassigned = sum(lab is None for lab in labels)
    if unassigned:
        log.info("tau_min=%d: %d samples have no surviving location", tau_min, unassigned)
    cells = sorted(members)
    centers = {c: cell_center(coords[members[c]], center_mode) for c in cells}
    return Partitioning(
        tau_min=tau_min,
        cells=cells,
        cell_center=centers,
        cell_count={c: forest.count(c) for c in cells},
        n_assigned={c: len(members[c]) for c in cells},
    )


def construct_multi(
    forest: LocationForest,
    remapped: Sequence[Optional[Sequence[Hashable]]],
    coordinates,
    taus: Sequence[int],
    *,
    center_mode: str = "spherical",
    allowed: Optional[Callable[[Hashable], bool]] = None,
) -> MultiPartitioning:
    """Partitionings for increasing thresholds plus fine -> coarse cell maps.

    Only samples that have a class at the coarsest level take part, so that
    every fine cell has an ancestor cell at each coarser level.
    """
    taus = [_check_tau(t) for t in taus]
    if not taus:
        raise ConfigError("at least one tau_min is required")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ConfigError(f"taus must be strictly increasing fine -> coarse, got {taus}")
    coords = _to_array(coordinates)
    if coords.shape[0] != len(remapped):
        raise InputError(f"{len(remapped)} addresses but {coords.shape[0]} coordinates")

    coarsest = label_samples(forest, remapped, taus[-1], allowed)
    keep = [i for i, lab in enumerate(coarsest) if lab is not None]
    if not keep:
        raise InputError(f"partitioning at tau_min={taus[-1]} is empty")
    if len(keep) < len(remapped):
        log.info("multi-partitioning: %d samples lack a cell at tau_min=%d and are excluded",
                 len(remapped) - len(keep), taus[-1])
    sub_paths = [remapped[i] for i in keep]
    sub_coords = coords[keep]

    levels = []
    for tau in taus:
        try:
            levels.append(construct_partitioning(forest, sub_paths, sub_coords, tau,
                                                 center_mode=center_mode, allowed=allowed))
        except InputError as exc:
            raise InputError(f"level tau_min={tau}: {exc}") from exc

    maps = []
    for fine, coarse in zip(levels, levels[1:]):
        mapping = {}
        for cell in fine.cells:
            target = next((loc for loc in forest.path(cell) if loc in coarse), None)
            if target is None:
                raise InputError(f"cell {cell} has no ancestor at tau_min={coarse.tau_min}")
            mapping[cell] = target
        maps.append(mapping)
    return MultiPartitioning(levels, maps)


def assign(sample_address: Sequence[Hashable], p: Partitioning):
    """Finest location of a remapped address that is a cell of ``p``."""
    for loc in sample_address:
        if loc in p:
            return loc
    raise UnassignableError(f"no location of {[str(x) for x in sample_address]} is a cell")


def assign_multi(sample_address: Sequence[Hashable], mp: MultiPartitioning) -> list:
    """Per-level cell, None where the address cannot be assigned."""
    out = []
    for level in mp.levels:
        try:
            out.append(assign(sample_address, level))
        except UnassignableError:
            out.append(None)
    return out


@dataclass(frozen=True)
class CellAssignment:
    sample_id: str
    per_level_cell: tuple

"""Location hierarchy built from reverse-geocoded address vectors.

Address vectors are tuples of :class:`LocationId`, ordered fine to coarse.
Adjacent pairs become weighted child -> parent edges of a multigraph; the
graph is pruned to a forest by keeping only each node's most frequent
outgoing edge, and every address is then replaced by the path from its
finest location to the root of its tree.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Hashable, Iterable, NamedTuple, Optional, Sequence

from semgeo.errors import InputError, UnknownLocationError

log = logging.getLogger(__name__)


class OsmKind(IntEnum):
    """OSM element type. The integer value is the tie-break rank."""

    NODE = 0
    WAY = 1
    RELATION = 2

    @property
    def letter(self) -> str:
        return "NWR"[self.value]


_KIND_ALIASES = {
    "n": OsmKind.NODE, "node": OsmKind.NODE,
    "w": OsmKind.WAY, "way": OsmKind.WAY,
    "r": OsmKind.RELATION, "relation": OsmKind.RELATION,
}
_ID_RE = re.compile(r"^\s*([A-Za-z]+):?(\d+)\s*$")


class LocationId(NamedTuple):
    """OSM element identity, e.g. ``W438331516``.

    Ordering is by (kind rank, numeric id), which is what the pruning
    tie-break relies on.
    """

    kind: OsmKind
    osm_id: int

    def __str__(self) -> str:
        return f"{self.kind.letter}{self.osm_id}"

    @classmethod
    def parse(cls, text: str) -> "LocationId":
        """Parse ``W123``, ``W:123`` or ``way:123`` (case-insensitive)."""
        m = _ID_RE.match(text)
        if m is None or m.group(1).lower() not in _KIND_ALIASES:
            raise InputError(f"malformed location id {text!r}")
        return cls(_KIND_ALIASES[m.group(1).lower()], int(m.group(2)))

    @classmethod
    def of(cls, kind: str, osm_id: int) -> "LocationId":
        try:
            k = _KIND_ALIASES[kind.lower()]
        except KeyError:
            raise InputError(f"unknown OSM kind {kind!r}") from None
        if osm_id < 0:
            raise InputError(f"negative OSM id {osm_id}")
        return cls(k, int(osm_id))


AddressVector = tuple  # tuple of location ids, index 0 = finest


def check_address(address: Sequence[Hashable]) -> tuple:
    """Return ``address`` as a tuple after checking it is non-empty and duplicate-free."""
    vec = tuple(address)
    if not vec:
        raise InputError("empty address vector")
    if len(set(vec)) != len(vec):
        raise InputError(f"duplicate location in address vector {[str(x) for x in vec]}")
    return vec


@dataclass
class LocationGraph:
    """Directed multigraph; ``edges[(child, parent)]`` is the occurrence count."""

    nodes: set = field(default_factory=set)
    edges: Counter = field(default_factory=Counter)

    def add(self, address: Sequence[Hashable]) -> None:
        vec = check_address(address)
        self.nodes.update(vec)
        self.edges.update(zip(vec, vec[1:]))

    def merge(self, other: "LocationGraph") -> "LocationGraph":
        """Commutative merge of two partial graphs (e.g. from parallel readers)."""
        return LocationGraph(self.nodes | other.nodes, self.edges + other.edges)

    def out_edges(self, node) -> dict:
        return {p: n for (c, p), n in self.edges.items() if c == node}


def build_multigraph(addresses: Iterable[Sequence[Hashable]]) -> LocationGraph:
    g = LocationGraph()
    n = 0
    for vec in addresses:
        g.add(vec)
        n += 1
    if n == 0:
        raise InputError("cannot build a location graph from zero addresses")
    return g


@dataclass(frozen=True)
class BrokenCycle:
    cycle: tuple
    removed_child: Hashable
    removed_parent: Hashable
    removed_count: int


@dataclass
class LocationForest:
    """Single-parent hierarchy. Roots have no ``parent`` entry."""

    nodes: set
    parent: dict
    sample_count: dict = field(default_factory=dict)
    broken_cycles: list = field(default_factory=list)
    _paths: dict = field(default_factory=dict, repr=False, compare=False)

    def __contains__(self, node) -> bool:
        return node in self.nodes

    def roots(self) -> list:
        return sorted(n for n in self.nodes if n not in self.parent)

    def path(self, node) -> tuple:
        """Path from ``node`` to its root, ``node`` first."""
        cached = self._paths.get(node)
        if cached is not None:
            return cached
        if node not in self.nodes:
            raise UnknownLocationError(f"location {node} is not in the hierarchy")
        chain = [node]
        parent = self.parent
        cur = node
        while cur in parent:
            cur = parent[cur]
            hit = self._paths.get(cur)
            if hit is not None:
                chain.extend(hit)
                break
            chain.append(cur)
        result = tuple(chain)
        self._paths[node] = result
        return result

    def count(self, node) -> int:
        return self.sample_count.get(node, 0)


def prune_to_forest(g: LocationGraph) -> LocationForest:
    """Keep each node's most frequent outgoing edge.

    Ties go to the smaller parent id. Should the surviving edges close a
    cycle, its lowest-count edge is dropped (ties: smaller child id) and
    the event is logged and recorded in ``broken_cycles``.
    """
    best: dict = {}
    for (child, parent), n in g.edges.items():
        cur = best.get(child)
        if cur is None or n > cur[0] or (n == cur[0] and parent < cur[1]):
            best[child] = (n, parent)
    parent = {c: p for c, (_, p) in best.items()}
    weight = {c: n for c, (n, _) in best.items()}

    broken = []
    done: set = set()
    for start in sorted(parent):
        if start in done:
            continue
        trail: list = []
        on_trail: set = set()
        node = start
        while node in parent and node not in done:
            if node in on_trail:
                cycle = tuple(trail[trail.index(node):])
                victim = min(cycle, key=lambda c: (weight[c], c))
                event = BrokenCycle(cycle, victim, parent[victim], weight[victim])
                del parent[victim]
                broken.append(event)
                log.warning(
                    "broke cycle of length %d by dropping edge %s -> %s (count %d)",
                    len(cycle), victim, event.removed_parent, event.removed_count,
                )
                break
            trail.append(node)
            on_trail.add(node)
            node = parent[node]
        done.update(trail)
    return LocationForest(nodes=set(g.nodes), parent=parent, broken_cycles=broken)


def remap_to_shortest_path(address: Sequence[Hashable], forest: LocationForest) -> tuple:
    """Replace an address by the forest path of its finest location."""
    if len(address) == 0:
        raise InputError("empty address vector")
    return forest.path(address[0])


def remap_lenient(address: Sequence[Hashable], forest: LocationForest) -> Optional[tuple]:
    """Remap from the first location of ``address`` known to the forest.

    Used for addresses whose finest entries may have been filtered away
    upstream, or for new datasets. Returns None when nothing is known.
    """
    for loc in address:
        if loc in forest.nodes:
            return forest.path(loc)
    return None


def count_samples(forest: LocationForest, remapped: Iterable[Sequence[Hashable]]) -> dict:
    """Count, per location, the samples whose remapped path contains it."""
    counts: Counter = Counter()
    # paths repeat heavily; counting whole paths first keeps this linear in unique paths
    for path, n in Counter(tuple(p) for p in remapped).items():
        for loc in path:
            counts[loc] += n
    return dict(counts)


def filter_rare_locations(addresses: Iterable[Sequence[Hashable]], tau: int) -> list:
    """Drop locations occurring in fewer than ``tau`` address vectors.

    Returns one entry per input; vectors left empty become None.
    """
    vecs = [tuple(a) for a in addresses]
    if tau <= 1:
        return vecs
    freq: Counter = Counter()
    for v in vecs:
        freq.update(set(v))
    out = []
    for v in vecs:
        kept = tuple(x for x in v if freq[x] >= tau)
        out.append(kept or None)
    return out


@dataclass
class HierarchyBuild:
    """Result of the full hierarchy pipeline over one dataset."""

    graph: LocationGraph
    forest: LocationForest
    remapped: list  # per input address: remapped tuple or None if dropped
    dropped: int

    def report(self) -> dict:
        return {
            "nodes": len(self.graph.nodes),
            "edges": len(self.graph.edges),
            "edge_occurrences": sum(self.graph.edges.values()),
            "roots": len(self.forest.roots()),
            "cycles_broken": len(self.forest.broken_cycles),
            "samples": len(self.remapped),
            "samples_remapped": len(self.remapped) - self.dropped,
            "samples_dropped": self.dropped,
        }


def build_hierarchy(addresses: Sequence[Optional[Sequence[Hashable]]]) -> HierarchyBuild:
    """Multigraph -> forest -> remap -> per-location sample counts.

    ``None`` entries (samples without an address) are carried through as
    dropped so that the output stays aligned with the input.
    """
    present = [a for a in addresses if a]
    graph = build_multigraph(present)
    forest = prune_to_forest(graph)
    remapped = []
    dropped = 0
    for a in addresses:
        if not a:
            remapped.append(None)
            dropped += 1
            continue
        try:
            remapped.append(remap_to_shortest_path(a, forest))
        except UnknownLocationError:
            remapped.append(None)
            dropped += 1
    if dropped:
        log.info("dropped %d samples without a usable finest location", dropped)
    forest.sample_count = count_samples(forest, (r for r in remapped if r is not None))
    return HierarchyBuild(graph, forest, remapped, dropped)

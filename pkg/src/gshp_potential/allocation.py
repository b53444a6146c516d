"""Allocation of surplus heat to district heating areas with a deficit.

Sources (areas with surplus) and demands (DHC areas with deficit) form a
bipartite graph; a source is linked to a demand when it lies within a
fraction of the demand area's oriented bounding-box length. Each connected
component is a transportation problem without costs, solved exactly as a
maximum flow on integer Wh capacities.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
import math

import numpy as np
import shapely
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc
from shapely.geometry.base import BaseGeometry

THRESHOLD_FRACTION = 0.20


@dataclass(frozen=True)
class ThresholdRule:
    fraction: float = THRESHOLD_FRACTION
    length: str = "longer"  # side of the oriented box taken as its length

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("threshold fraction must lie in (0, 1]")
        if self.length not in ("longer", "shorter", "diagonal"):
            raise ValueError(f"unknown length convention {self.length!r}")


@dataclass
class Vertex:
    id: str
    capacity: float
    geometry: BaseGeometry | None = None


@dataclass
class AllocationGraph:
    sources: list
    demands: list
    edges: list = field(default_factory=list)
    flows: dict = field(default_factory=dict)

    @property
    def total_flow(self) -> int:
        return sum(self.flows.values())

    def source_outflow(self) -> dict:
        out = {v.id: 0 for v in self.sources}
        for (s, _), f in self.flows.items():
            out[s] += f
        return out

    def demand_inflow(self) -> dict:
        inflow = {v.id: 0 for v in self.demands}
        for (_, d), f in self.flows.items():
            inflow[d] += f
        return inflow


# -- oriented minimum bounding box ---------------------------------------------

def _hull_points(geom) -> np.ndarray:
    if not isinstance(geom, BaseGeometry):
        geom = shapely.MultiPoint(np.asarray(geom, dtype=float))
    hull = geom.convex_hull
    if hull.geom_type == "Polygon":
        return np.asarray(hull.exterior.coords)[:-1]
    return np.asarray(hull.coords)


def oriented_mbb(geom):
    """Minimum-area enclosing rectangle as (width, height, angle).

    Only rectangles with a side collinear to a convex-hull edge are
    candidates. ``width`` is the extent along the edge direction.
    """
    pts = _hull_points(geom)
    if len(pts) < 2:
        return 0.0, 0.0, 0.0
    if len(pts) == 2:
        d = pts[1] - pts[0]
        return float(np.hypot(*d)), 0.0, float(math.atan2(d[1], d[0]))
    edges = np.roll(pts, -1, axis=0) - pts
    angles = np.arctan2(edges[:, 1], edges[:, 0])
    best = None
    for a in angles:
        u = np.array([math.cos(a), math.sin(a)])
        v = np.array([-u[1], u[0]])
        pu, pv = pts @ u, pts @ v
        w, h = pu.max() - pu.min(), pv.max() - pv.min()
        if best is None or w * h < best[0] * best[1] - 1e-12 * max(best[0] * best[1], 1.0):
            best = (float(w), float(h), float(a))
    return best


def oriented_mbb_length(geom, length: str = "longer") -> float:
    w, h, _ = oriented_mbb(geom)
    if length == "longer":
        return max(w, h)
    if length == "shorter":
        return min(w, h)
    if length == "diagonal":
        return math.hypot(w, h)
    raise ValueError(f"unknown length convention {length!r}")


# -- graph construction ----------------------------------------------------------

def build_graph(sources, demands, rule: ThresholdRule = ThresholdRule()) -> AllocationGraph:
    """Link every source whose geometry lies within the demand's threshold distance."""
    sources = sorted(sources, key=lambda v: str(v.id))
    demands = sorted(demands, key=lambda v: str(v.id))
    graph = AllocationGraph(sources, demands)
    if not sources or not demands:
        return graph
    tree = shapely.STRtree([s.geometry for s in sources])
    edges = []
    for d in demands:
        threshold = rule.fraction * oriented_mbb_length(d.geometry, rule.length)
        hits = tree.query(d.geometry, predicate="dwithin", distance=threshold)
        for i in sorted(int(k) for k in hits):
            edges.append((sources[i].id, d.id))
    graph.edges = sorted(edges, key=lambda e: (str(e[0]), str(e[1])))
    return graph


def connected_components(graph: AllocationGraph) -> list[AllocationGraph]:
    """Split into connected subgraphs, ordered by their smallest vertex id."""
    ids = [("s", v.id) for v in graph.sources] + [("d", v.id) for v in graph.demands]
    index = {key: i for i, key in enumerate(ids)}
    n = len(ids)
    if n == 0:
        return []
    rows = [index[("s", s)] for s, _ in graph.edges]
    cols = [index[("d", d)] for _, d in graph.edges]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, labels = _cc(adj, directed=False)
    comps = [AllocationGraph([], []) for _ in range(n_comp)]
    for v in graph.sources:
        comps[labels[index[("s", v.id)]]].sources.append(v)
    for v in graph.demands:
        comps[labels[index[("d", v.id)]]].demands.append(v)
    for s, d in graph.edges:
        comp = comps[labels[index[("s", s)]]]
        comp.edges.append((s, d))
        if (s, d) in graph.flows:
            comp.flows[(s, d)] = graph.flows[(s, d)]

    def smallest(c):
        return min(str(v.id) for v in c.sources + c.demands)

    return sorted(comps, key=smallest)


# -- transportation problem as maximum flow --------------------------------------

def to_wh(value) -> int:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError("capacities must be finite")
    if value < 0:
        raise ValueError("capacities must be non-negative")
    return int(math.floor(value))


class _Dinic:
    def __init__(self, n):
        self.n = n
        self.head = [[] for _ in range(n)]
        self.to, self.cap = [], []

    def add_edge(self, u, v, c):
        self.head[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(c)
        self.head[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(0)
        return len(self.to) - 2

    def _levels(self, s, t):
        level = [-1] * self.n
        level[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for e in self.head[u]:
                v = self.to[e]
                if self.cap[e] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level if level[t] >= 0 else None

    def _blocking_flow(self, s, t, level):
        it = [0] * self.n
        total = 0
        while True:
            # iterative DFS for one augmenting path in the level graph
            path = []
            u = s
            while u != t:
                advanced = False
                while it[u] < len(self.head[u]):
                    e = self.head[u][it[u]]
                    v = self.to[e]
                    if self.cap[e] > 0 and level[v] == level[u] + 1:
                        path.append(e)
                        u = v
                        advanced = True
                        break
                    it[u] += 1
                if not advanced:
                    if u == s:
                        return total
                    level[u] = -1  # dead end
                    e = path.pop()
                    u = self.to[e ^ 1]
                    it[u] += 1
            push = min(self.cap[e] for e in path)
            for e in path:
                self.cap[e] -= push
                self.cap[e ^ 1] += push
            total += push

    def max_flow(self, s, t):
        flow = 0
        while True:
            level = self._levels(s, t)
            if level is None:
                return flow
            flow += self._blocking_flow(s, t, level)


def solve_transportation(graph: AllocationGraph) -> AllocationGraph:
    """Maximum total allocation along the graph's edges; fills ``graph.flows`` (Wh)."""
    src_idx = {v.id: 1 + i for i, v in enumerate(graph.sources)}
    dem_idx = {v.id: 1 + len(graph.sources) + i for i, v in enumerate(graph.demands)}
    s, t = 0, 1 + len(graph.sources) + len(graph.demands)
    net = _Dinic(t + 1)
    for v in graph.sources:
        net.add_edge(s, src_idx[v.id], to_wh(v.capacity))
    for v in graph.demands:
        net.add_edge(dem_idx[v.id], t, to_wh(v.capacity))
    big = sum(to_wh(v.capacity) for v in graph.sources)
    arcs = {}
    for a, b in graph.edges:
        arcs[(a, b)] = net.add_edge(src_idx[a], dem_idx[b], big)
    net.max_flow(s, t)
    graph.flows = {key: net.cap[e ^ 1] for key, e in arcs.items() if net.cap[e ^ 1] > 0}
    return graph


def allocate(sources, demands, rule: ThresholdRule = ThresholdRule()):
    """Build the graph, solve each connected component and merge the flows."""
    graph = build_graph(sources, demands, rule)
    components = connected_components(graph)
    for comp in components:
        solve_transportation(comp)
        graph.flows.update(comp.flows)
    return graph, components


def apply_allocation(accounts: dict, graph: AllocationGraph) -> dict:
    """Move allocated heat from source surpluses to demand deficits, in place."""
    for sid, out in graph.source_outflow().items():
        if out:
            acc = accounts[sid]
            acc.surplus_heat -= out
            acc.allocated_out += out
    for did, inflow in graph.demand_inflow().items():
        if inflow:
            acc = accounts[did]
            acc.useful_heat += inflow
            acc.deficit_heat -= inflow
            acc.allocated_in += inflow
    return accounts

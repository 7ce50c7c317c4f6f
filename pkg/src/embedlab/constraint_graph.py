"""Constraint multigraphs and exact arboricity.

Each constraint contributes its two item pairs as edges of a multigraph on
the items: (x, y, z) adds {x,y} and {x,z}; (a, b, c, d) adds {a,b} and
{c,d}. The arboricity of this graph, by the Nash-Williams identity
``rho = max over induced H of ceil(|E(H)| / (|H| - 1))``, upper-bounds (times
four) the dimension needed to realize a consistent instance, so we compute
the maximum density exactly.

The density maximum is found by Dinkelbach iteration: given the best known
density g = a/b, ask whether some induced subgraph H has
``|E(H)| > g * (|H| - 1)``. The (|H| - 1) denominator is handled by fixing a
root vertex that is exempt from the per-vertex charge and trying every root;
each rooted question is a min-cut on the standard edge-vertex network with
integer capacities scaled by b, so every comparison is exact. A g-core strip
(repeatedly removing vertices of weighted degree below g) shrinks the network
first: any subgraph beating g survives the strip.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from ._rng import derive_seed, make_rng
from ._stats import wilson_interval
from .errors import CannotSplitError, InvalidParameterError, UndefinedDensityError
from .instances import Instance

__all__ = [
    "ConstraintMultigraph",
    "ArboricityReport",
    "SubadditivityReport",
    "build_constraint_graph",
    "arboricity",
    "split_constraint_graph",
    "subadditivity_check",
    "monte_carlo_arboricity_bound",
    "ArboricityTailEstimate",
    "sample_poisson_multigraph",
    "PART_FIRST",
    "PART_SECOND",
]

# Edge part tags: PART_FIRST marks anchor-positive pairs of triplets and the
# first pair of quadruplets, PART_SECOND the anchor-negative / second pair.
PART_FIRST = 0
PART_SECOND = 1


@dataclass(frozen=True, eq=False)
class ConstraintMultigraph:
    """Multigraph on items; one entry per edge occurrence, endpoints u < v."""

    n: int
    u: np.ndarray
    v: np.ndarray
    parts: np.ndarray | None = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.int64)
        v = np.asarray(self.v, dtype=np.int64)
        if u.shape != v.shape or u.ndim != 1:
            raise InvalidParameterError("edge endpoint arrays must be 1-d and equal length")
        if u.size and (u.min() < 0 or v.max() >= self.n):
            raise InvalidParameterError("edge endpoints must lie in [0, n)")
        if np.any(u == v):
            raise InvalidParameterError("self-loops are not allowed")
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "u", lo)
        object.__setattr__(self, "v", hi)
        if self.parts is not None:
            parts = np.asarray(self.parts, dtype=np.int8)
            if parts.shape != u.shape:
                raise InvalidParameterError("parts must align with the edge list")
            parts.setflags(write=False)
            object.__setattr__(self, "parts", parts)

    @property
    def num_edges(self) -> int:
        return self.u.shape[0]

    def consolidated(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unique edges with multiplicities: (u, v, weight)."""
        codes = self.u * self.n + self.v
        uniq, counts = np.unique(codes, return_counts=True)
        return uniq // self.n, uniq % self.n, counts.astype(np.int64)


def build_constraint_graph(instance: Instance) -> ConstraintMultigraph:
    cons = instance.constraints
    if instance.is_quadruplet:
        first = cons[:, 0:2]
        second = cons[:, 2:4]
    else:
        first = cons[:, 0:2]
        second = cons[:, [0, 2]]
    m = instance.m
    u = np.empty(2 * m, dtype=np.int64)
    v = np.empty(2 * m, dtype=np.int64)
    u[0::2], v[0::2] = first[:, 0], first[:, 1]
    u[1::2], v[1::2] = second[:, 0], second[:, 1]
    parts = np.empty(2 * m, dtype=np.int8)
    parts[0::2] = PART_FIRST
    parts[1::2] = PART_SECOND
    return ConstraintMultigraph(n=instance.n, u=u, v=v, parts=parts)


@dataclass(frozen=True)
class ArboricityReport:
    density_star: Fraction
    rho: int
    witness_subgraph: tuple[int, ...]
    forest_count_upper: int
    implied_dim_bound: int


def _ceil_fraction(f: Fraction) -> int:
    return -((-f.numerator) // f.denominator)


def _g_core(cu, cv, w, n, g: Fraction):
    """Vertices and edge mask surviving iterated removal of degree < g."""
    a, b = g.numerator, g.denominator
    deg = np.zeros(n, dtype=np.int64)
    np.add.at(deg, cu, w)
    np.add.at(deg, cv, w)
    incident: list[list[int]] = [[] for _ in range(n)]
    for e in range(cu.shape[0]):
        incident[cu[e]].append(e)
        incident[cv[e]].append(e)
    alive_vertex = deg > 0
    alive_edge = np.ones(cu.shape[0], dtype=bool)
    stack = [int(x) for x in np.flatnonzero(alive_vertex & (deg * b < a))]
    gone = np.zeros(n, dtype=bool)
    while stack:
        x = stack.pop()
        if gone[x] or not alive_vertex[x]:
            continue
        gone[x] = True
        for e in incident[x]:
            if not alive_edge[e]:
                continue
            alive_edge[e] = False
            y = int(cv[e]) if int(cu[e]) == x else int(cu[e])
            if gone[y]:
                continue
            deg[y] -= int(w[e])
            if deg[y] * b < a:
                stack.append(y)
    core_vertices = np.flatnonzero(alive_vertex & ~gone)
    return core_vertices, alive_edge


def _density_network(kcu, kcv, kw, V: int, a: int, b: int):
    """Edge-vertex flow network with scaled integer capacities.

    Nodes: 0 = source, 1..E = edge nodes, E+1..E+V = vertex nodes,
    E+V+1 = sink. Returns the CSR matrix plus the data positions of the
    vertex-to-sink arcs so one root's charge can be zeroed in place.
    """
    E = kcu.shape[0]
    sink = E + V + 1
    total = int(kw.sum()) * b
    inf = total + a * V + 1
    rows = np.concatenate(
        [
            np.zeros(E, dtype=np.int64),
            np.arange(1, E + 1),
            np.arange(1, E + 1),
            E + 1 + np.arange(V),
        ]
    )
    cols = np.concatenate(
        [
            np.arange(1, E + 1),
            E + 1 + kcu,
            E + 1 + kcv,
            np.full(V, sink, dtype=np.int64),
        ]
    )
    caps = np.concatenate(
        [
            kw.astype(np.int64) * b,
            np.full(E, inf, dtype=np.int64),
            np.full(E, inf, dtype=np.int64),
            np.full(V, a, dtype=np.int64),
        ]
    )
    graph = csr_matrix((caps, (rows, cols)), shape=(sink + 1, sink + 1), dtype=np.int64)
    # each vertex row holds exactly its sink arc
    sink_pos = graph.indptr[E + 1 : E + 1 + V]
    return graph, sink_pos, total, E, V


def _reachable_vertices(residual, E: int, V: int) -> np.ndarray:
    """Local vertex indices on the source side of the min cut."""
    residual = residual.copy()
    residual.data[residual.data <= 0] = 0
    residual.eliminate_zeros()
    order = breadth_first_order(residual, 0, directed=True, return_predecessors=False)
    reach = np.zeros(E + V + 2, dtype=bool)
    reach[order] = True
    return np.flatnonzero(reach[E + 1 : E + 1 + V])


def _find_denser(cu, cv, w, n: int, g: Fraction):
    """An induced subgraph with density strictly above g, or None.

    Strips the g-core first (any improving subgraph survives the strip), then
    runs one min-cut per root on a shared network, zeroing just that root's
    sink capacity in place. Rooting at any vertex of the true maximizer
    detects it, so trying every core vertex is complete; the scan exits on
    the first improvement.
    """
    a, b = g.numerator, g.denominator
    core_vertices, edge_mask = _g_core(cu, cv, w, n, g)
    if core_vertices.size < 3 or not edge_mask.any():
        return None
    local = -np.ones(n, dtype=np.int64)
    local[core_vertices] = np.arange(core_vertices.size)
    kcu = local[cu[edge_mask]]
    kcv = local[cv[edge_mask]]
    kw = w[edge_mask]
    deg = np.zeros(core_vertices.size, dtype=np.int64)
    np.add.at(deg, kcu, kw)
    np.add.at(deg, kcv, kw)
    graph, sink_pos, total, E, V = _density_network(kcu, kcv, kw, core_vertices.size, a, b)
    sink = E + V + 1
    for root_local in np.argsort(-deg, kind="stable"):
        root_local = int(root_local)
        saved = graph.data[sink_pos[root_local]]
        graph.data[sink_pos[root_local]] = 0
        result = maximum_flow(graph, 0, sink)
        found = None
        if result.flow_value < total:
            found = _reachable_vertices(graph - result.flow, E, V)
        graph.data[sink_pos[root_local]] = saved
        if found is not None and found.size >= 2:
            verts = core_vertices[found]
            sel = np.isin(local[cu], found) & np.isin(local[cv], found)
            density = Fraction(int(w[sel & edge_mask].sum()), verts.size - 1)
            if density > g:
                return density, verts
    return None


def _greedy_forest_count(cu, cv, w, n: int) -> int:
    remaining = w.copy()
    forests = 0
    parent = np.arange(n, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    while remaining.sum() > 0:
        parent[:] = np.arange(n)
        for e in range(cu.shape[0]):
            if remaining[e] <= 0:
                continue
            ru, rv = find(int(cu[e])), find(int(cv[e]))
            if ru != rv:
                parent[ru] = rv
                remaining[e] -= 1
        forests += 1
    return forests


def arboricity(graph: ConstraintMultigraph) -> ArboricityReport:
    """Exact maximum density, its ceiling, a witness, and a forest upper bound."""
    cu, cv, w = graph.consolidated()
    if cu.size == 0:
        raise UndefinedDensityError("arboricity is undefined for a graph with no edges")
    active = np.unique(np.concatenate([cu, cv]))
    best = Fraction(int(w.sum()), int(active.size - 1)) if active.size >= 2 else Fraction(0)
    witness = active
    heaviest = int(np.argmax(w))
    single = Fraction(int(w[heaviest]), 1)
    if single > best:
        best = single
        witness = np.array([cu[heaviest], cv[heaviest]], dtype=np.int64)
    while True:
        found = _find_denser(cu, cv, w, graph.n, best)
        if found is None:
            break
        best, witness = found
    rho = _ceil_fraction(best)
    forest_upper = _greedy_forest_count(cu, cv, w, graph.n)
    return ArboricityReport(
        density_star=best,
        rho=rho,
        witness_subgraph=tuple(int(x) for x in np.sort(witness)),
        forest_count_upper=forest_upper,
        implied_dim_bound=4 * rho,
    )


def split_constraint_graph(
    graph: ConstraintMultigraph,
) -> tuple[ConstraintMultigraph, ConstraintMultigraph]:
    """Split by part tag: (first-pair edges, second-pair edges)."""
    if graph.parts is None:
        raise CannotSplitError("graph has no part tags")
    first = graph.parts == PART_FIRST
    second = graph.parts == PART_SECOND
    g1 = ConstraintMultigraph(n=graph.n, u=graph.u[first], v=graph.v[first])
    g2 = ConstraintMultigraph(n=graph.n, u=graph.u[second], v=graph.v[second])
    return g1, g2


@dataclass(frozen=True)
class SubadditivityReport:
    rho_total: int
    rho_first: int
    rho_second: int

    @property
    def holds(self) -> bool:
        return self.rho_total <= self.rho_first + self.rho_second

    def __bool__(self) -> bool:
        return self.holds


def _rho_or_zero(graph: ConstraintMultigraph) -> int:
    if graph.num_edges == 0:
        return 0
    return arboricity(graph).rho


def subadditivity_check(graph: ConstraintMultigraph) -> SubadditivityReport:
    """Numerically assert rho(G) <= rho(G1) + rho(G2) on the given graph."""
    g1, g2 = split_constraint_graph(graph)
    return SubadditivityReport(
        rho_total=_rho_or_zero(graph),
        rho_first=_rho_or_zero(g1),
        rho_second=_rho_or_zero(g2),
    )


def sample_poisson_multigraph(n: int, lam: float, seed: int) -> ConstraintMultigraph:
    """Multigraph with i.i.d. Poisson(lam) multiplicity per unordered pair.

    Sampled by thinning, like the instance generators: total edge count first,
    then that many uniform pairs.
    """
    if n < 2:
        raise InvalidParameterError(f"need n >= 2, got {n}")
    if lam < 0:
        raise InvalidParameterError(f"lambda must be nonnegative, got {lam}")
    rng = make_rng(seed)
    pairs_total = n * (n - 1) // 2
    count = int(rng.poisson(lam * pairs_total))
    if count == 0:
        return ConstraintMultigraph(n=n, u=np.empty(0, dtype=np.int64), v=np.empty(0, dtype=np.int64))
    u = np.empty(count, dtype=np.int64)
    v = np.empty(count, dtype=np.int64)
    filled = 0
    while filled < count:
        need = count - filled
        cand = rng.integers(0, n, size=(need, 2))
        ok = cand[:, 0] != cand[:, 1]
        good = cand[ok]
        u[filled : filled + good.shape[0]] = good[:, 0]
        v[filled : filled + good.shape[0]] = good[:, 1]
        filled += good.shape[0]
    return ConstraintMultigraph(n=n, u=u, v=v)


@dataclass(frozen=True)
class ArboricityTailEstimate:
    fraction: float
    ci_low: float
    ci_high: float
    trials: int
    successes: int
    max_rho: int
    bound: float


def monte_carlo_arboricity_bound(
    n: int, alpha: float, trials: int, seed: int
) -> ArboricityTailEstimate:
    """Fraction of sampled Poisson(alpha/n) multigraphs with rho <= 5 * alpha."""
    if trials < 1:
        raise InvalidParameterError(f"need trials >= 1, got {trials}")
    if alpha < 1:
        warnings.warn(
            f"alpha={alpha} is below 1; the tail bound's hypothesis is violated, running anyway",
            stacklevel=2,
        )
    lam = alpha / n
    bound = 5.0 * alpha
    successes = 0
    max_rho = 0
    for t in range(trials):
        graph = sample_poisson_multigraph(n, lam, derive_seed(seed, t))
        rho = 0 if graph.num_edges == 0 else arboricity(graph).rho
        max_rho = max(max_rho, rho)
        if rho <= bound:
            successes += 1
    lo, hi = wilson_interval(successes, trials)
    return ArboricityTailEstimate(
        fraction=successes / trials,
        ci_low=lo,
        ci_high=hi,
        trials=trials,
        successes=successes,
        max_rho=max_rho,
        bound=bound,
    )

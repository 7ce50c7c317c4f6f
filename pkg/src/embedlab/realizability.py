"""Realizability certificates via the directed pair graph.

Every constraint orients one unordered item pair against another: a triplet
(x, y, z) demands dist(x, y) < dist(x, z) and contributes the directed edge
{x,y} -> {x,z}; a quadruplet (a, b, c, d) contributes {a,b} -> {c,d}. An
instance admits an embedding satisfying every constraint (in at most n
dimensions) exactly when this digraph is acyclic, i.e. when some total order
of the pair distances is consistent with all the edges. `certify` decides
this with linear-time peeling over the active pairs (indexing costs one
sort); `embed_from_ordering` turns a consistent total order into explicit
coordinates by perturbing a regular simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import derive_seed
from ._stats import wilson_interval
from .embedding import Embedding
from .errors import InvalidParameterError, LabError
from .instances import (
    Instance,
    generate_poisson_quadruplets,
    generate_poisson_triplets,
)

__all__ = [
    "PairDigraph",
    "RealizabilityCertificate",
    "build_pair_digraph",
    "certify",
    "complete_ordering",
    "embed_from_ordering",
    "verify_witness_cycle",
    "monte_carlo_acyclicity",
    "AcyclicityEstimate",
]


def _pair_codes_of(instance: Instance) -> tuple[np.ndarray, np.ndarray]:
    """Tail and head pair codes (lo * n + hi) per constraint."""
    cons = instance.constraints
    n = instance.n
    if instance.is_quadruplet:
        t_lo = np.minimum(cons[:, 0], cons[:, 1])
        t_hi = np.maximum(cons[:, 0], cons[:, 1])
        h_lo = np.minimum(cons[:, 2], cons[:, 3])
        h_hi = np.maximum(cons[:, 2], cons[:, 3])
    else:
        t_lo = np.minimum(cons[:, 0], cons[:, 1])
        t_hi = np.maximum(cons[:, 0], cons[:, 1])
        h_lo = np.minimum(cons[:, 0], cons[:, 2])
        h_hi = np.maximum(cons[:, 0], cons[:, 2])
    return t_lo * n + t_hi, h_lo * n + h_hi


@dataclass(frozen=True, eq=False)
class PairDigraph:
    """Directed multigraph on active unordered pairs; edge i = constraint i."""

    n: int
    pair_codes: np.ndarray  # sorted unique codes lo * n + hi of active pairs
    tails: np.ndarray  # (m,) indices into pair_codes
    heads: np.ndarray  # (m,)

    @property
    def num_pairs(self) -> int:
        return self.pair_codes.shape[0]

    @property
    def num_edges(self) -> int:
        return self.tails.shape[0]

    def pair(self, node: int) -> tuple[int, int]:
        code = int(self.pair_codes[node])
        return divmod(code, self.n)


def build_pair_digraph(instance: Instance) -> PairDigraph:
    tail_codes, head_codes = _pair_codes_of(instance)
    codes = np.unique(np.concatenate([tail_codes, head_codes]))
    tails = np.searchsorted(codes, tail_codes)
    heads = np.searchsorted(codes, head_codes)
    return PairDigraph(n=instance.n, pair_codes=codes, tails=tails, heads=heads)


@dataclass(frozen=True, eq=False)
class RealizabilityCertificate:
    """Either a distance ordering consistent with every constraint, or a cycle.

    `ordering` lists the active pairs in topological order when realizable;
    `witness_cycle` lists constraint indices whose edges close a directed
    cycle when not.
    """

    realizable: bool
    ordering: np.ndarray | None  # (P, 2) active pairs, topological order
    witness_cycle: list[int] | None

    @property
    def status(self) -> str:
        return "Realizable" if self.realizable else "Unrealizable"


def _topological_order(graph: PairDigraph) -> tuple[np.ndarray, np.ndarray]:
    """Kahn peeling. Returns (topo node order, leftover indegrees)."""
    P = graph.num_pairs
    order_by_tail = np.argsort(graph.tails, kind="stable")
    sorted_tails = graph.tails[order_by_tail]
    heads_by_tail = graph.heads[order_by_tail]
    offsets = np.searchsorted(sorted_tails, np.arange(P + 1))
    indeg = np.bincount(graph.heads, minlength=P).astype(np.int64)
    queue: list[int] = list(np.flatnonzero(indeg == 0))
    topo: list[int] = []
    qi = 0
    while qi < len(queue):
        u = queue[qi]
        qi += 1
        topo.append(u)
        for e in range(offsets[u], offsets[u + 1]):
            v = int(heads_by_tail[e])
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return np.array(topo, dtype=np.int64), indeg


def _find_cycle_nodes(graph: PairDigraph, leftover: np.ndarray) -> list[int]:
    """Walk predecessors inside the unpeeled set until a node repeats."""
    remaining = leftover > 0
    order_by_head = np.argsort(graph.heads, kind="stable")
    sorted_heads = graph.heads[order_by_head]
    tails_by_head = graph.tails[order_by_head]
    offsets = np.searchsorted(sorted_heads, np.arange(graph.num_pairs + 1))

    start = int(np.flatnonzero(remaining)[0])
    pos: dict[int, int] = {}
    path: list[int] = []
    u = start
    while u not in pos:
        pos[u] = len(path)
        path.append(u)
        nxt = None
        for e in range(offsets[u], offsets[u + 1]):
            t = int(tails_by_head[e])
            if remaining[t]:
                nxt = t
                break
        if nxt is None:  # unreachable: unpeeled nodes keep an unpeeled predecessor
            raise LabError("internal error: dangling node during cycle extraction")
        u = nxt
    cycle_back = path[pos[u] :]  # u <- ... <- u along predecessor steps
    cycle_back.reverse()  # forward edge direction
    return cycle_back


def _cycle_constraints(graph: PairDigraph, cycle_nodes: list[int]) -> list[int]:
    """Map each forward edge of the node cycle to one originating constraint."""
    k = len(cycle_nodes)
    wanted = {}
    for i in range(k):
        wanted[(cycle_nodes[i], cycle_nodes[(i + 1) % k])] = -1
    for e in range(graph.num_edges):
        key = (int(graph.tails[e]), int(graph.heads[e]))
        if key in wanted and wanted[key] < 0:
            wanted[key] = e
    out = [wanted[(cycle_nodes[i], cycle_nodes[(i + 1) % k])] for i in range(k)]
    if any(e < 0 for e in out):
        raise LabError("internal error: cycle edge without originating constraint")
    return out


def certify(instance: Instance) -> RealizabilityCertificate:
    """Decide realizability; produce a pair ordering or a witness cycle."""
    graph = build_pair_digraph(instance)
    topo, leftover = _topological_order(graph)
    if topo.shape[0] == graph.num_pairs:
        codes = graph.pair_codes[topo]
        ordering = np.column_stack(divmod(codes, graph.n))
        return RealizabilityCertificate(realizable=True, ordering=ordering, witness_cycle=None)
    cycle_nodes = _find_cycle_nodes(graph, leftover)
    witness = _cycle_constraints(graph, cycle_nodes)
    return RealizabilityCertificate(realizable=False, ordering=None, witness_cycle=witness)


def verify_witness_cycle(instance: Instance, witness: list[int]) -> bool:
    """Check that the listed constraints' edges close head-to-tail."""
    if not witness:
        return False
    if any(not 0 <= c < instance.m for c in witness):
        return False
    tail_codes, head_codes = _pair_codes_of(instance)
    k = len(witness)
    for i, ci in enumerate(witness):
        cj = witness[(i + 1) % k]
        if head_codes[ci] != tail_codes[cj]:
            return False
    return True


def complete_ordering(n: int, ordering: np.ndarray) -> np.ndarray:
    """Extend an ordering of active pairs to all C(n, 2) pairs.

    Absent pairs are appended after all present pairs in lexicographic order,
    which is sound because no constraint touches them.
    """
    ordering = np.asarray(ordering, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(ordering[:, 0], ordering[:, 1])
    hi = np.maximum(ordering[:, 0], ordering[:, 1])
    if ordering.size and (lo.min() < 0 or hi.max() >= n or np.any(lo == hi)):
        raise InvalidParameterError("ordering contains an invalid pair")
    present = lo * n + hi
    if np.unique(present).shape[0] != present.shape[0]:
        raise InvalidParameterError("ordering repeats a pair")
    iu, ju = np.triu_indices(n, k=1)
    all_codes = iu * n + ju  # ascending == lexicographic on (lo, hi)
    absent = np.setdiff1d(all_codes, present, assume_unique=False)
    codes = np.concatenate([present, absent])
    return np.column_stack(divmod(codes, n))


def embed_from_ordering(n: int, ordering: np.ndarray) -> Embedding:
    """Coordinates whose pairwise distances strictly increase along `ordering`.

    Targets squared distances 1 + eps * rank on top of the regular simplex and
    recovers coordinates from the centered Gram matrix. Starting from
    eps = 1 / (4 * C(n,2)), eps is halved until the Gram matrix is positive
    semidefinite (minimum eigenvalue >= -1e-12, clipped to zero) and the
    realized consecutive squared distances all differ by at least 1e-9; the
    eps -> 0 limit is the regular simplex, which is strictly positive
    definite, so the loop terminates.
    """
    if n < 1:
        raise InvalidParameterError(f"need n >= 1, got {n}")
    if n == 1:
        return Embedding(np.zeros((1, 1)))
    ordering = np.asarray(ordering, dtype=np.int64)
    if ordering.ndim != 2 or ordering.shape[1] != 2:
        raise InvalidParameterError("ordering must be a sequence of item pairs")
    num_pairs = n * (n - 1) // 2
    if ordering.shape[0] != num_pairs:
        raise InvalidParameterError(
            f"ordering must cover all {num_pairs} pairs, got {ordering.shape[0]}"
        )
    lo = np.minimum(ordering[:, 0], ordering[:, 1])
    hi = np.maximum(ordering[:, 0], ordering[:, 1])
    if lo.min() < 0 or hi.max() >= n or np.any(lo == hi):
        raise InvalidParameterError("ordering contains an invalid pair")
    codes = lo * n + hi
    if np.unique(codes).shape[0] != num_pairs:
        raise InvalidParameterError("ordering repeats a pair")

    ranks = np.arange(num_pairs, dtype=np.float64)
    rank_matrix = np.zeros((n, n))
    rank_matrix[lo, hi] = ranks
    rank_matrix[hi, lo] = ranks

    eps = 1.0 / (4.0 * num_pairs)
    for _ in range(200):
        d2 = 1.0 + eps * rank_matrix
        np.fill_diagonal(d2, 0.0)
        # centered Gram: B = -0.5 * H d2 H with H = I - J/n
        row_mean = d2.mean(axis=1, keepdims=True)
        col_mean = d2.mean(axis=0, keepdims=True)
        gram = -0.5 * (d2 - row_mean - col_mean + d2.mean())
        try:
            np.linalg.cholesky(gram + 1e-12 * np.eye(n))
        except np.linalg.LinAlgError:
            eps *= 0.5
            continue
        eigvals, eigvecs = np.linalg.eigh(gram)
        coords = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
        sq = np.einsum("ij,ij->i", coords, coords)
        realized = sq[:, None] + sq[None, :] - 2.0 * coords @ coords.T
        gaps = np.diff(realized[lo, hi])
        if gaps.size == 0 or gaps.min() >= 1e-9:
            return Embedding(coords)
        eps *= 0.5
    raise LabError("could not reach a strictly ordered positive semidefinite Gram matrix")


@dataclass(frozen=True)
class AcyclicityEstimate:
    fraction: float
    ci_low: float
    ci_high: float
    trials: int
    acyclic: int


def monte_carlo_acyclicity(
    n: int,
    lam: float,
    trials: int,
    seed: int,
    quadruplets: bool = False,
    workers: int | None = None,
) -> AcyclicityEstimate:
    """Fraction of Poisson instances whose pair digraph is acyclic.

    Trial t uses the sub-seed derived from (seed, t) and successes merge by
    summation, so the estimate is identical for any worker count. Returns a
    95% Wilson interval.
    """
    if trials < 1:
        raise InvalidParameterError(f"need trials >= 1, got {trials}")
    gen = generate_poisson_quadruplets if quadruplets else generate_poisson_triplets

    def one(t: int) -> bool:
        inst = gen(n, lam, derive_seed(seed, t))
        graph = build_pair_digraph(inst)
        topo, _ = _topological_order(graph)
        return topo.shape[0] == graph.num_pairs

    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            acyclic = sum(pool.map(one, range(trials)))
    else:
        acyclic = sum(one(t) for t in range(trials))
    lo_ci, hi_ci = wilson_interval(acyclic, trials)
    return AcyclicityEstimate(
        fraction=acyclic / trials, ci_low=lo_ci, ci_high=hi_ci, trials=trials, acyclic=acyclic
    )

"""Maximum Acyclic Subgraph, reduced to and from triplet instances.

A digraph maps to a triplet instance with one extra anchor item S (stored at
the last index): each arc u -> w becomes the triplet (S, u, w). Orderings and
embeddings then translate exactly both ways: placing S at 0 and vertex v at
its rank pi(v) on the line satisfies the triplet of an arc exactly when the
arc is forward under pi, and any embedding in any dimension collapses back to
a permutation by sorting vertices by their distance from S. The best
achievable accuracy therefore equals the best fraction of forward arcs and is
already attained in one dimension.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._rng import make_rng
from .embedding import Embedding
from .errors import InvalidInputError, InvalidParameterError
from .evaluation import evaluate_accuracy
from .instances import GeneratorKind, GeneratorMeta, Instance

__all__ = [
    "MasGraph",
    "MasSolution",
    "reduce_mas_to_triplets",
    "embed_permutation",
    "extract_permutation",
    "brute_force_mas",
    "brute_force_triplet_opt",
    "random_permutation_baseline",
    "read_digraph",
    "write_digraph",
]

_BRUTE_LIMIT = 10


@dataclass(frozen=True, eq=False)
class MasGraph:
    """v vertices plus a multiset of arcs (u, w), u != w. Parallel arcs count."""

    v: int
    arcs: np.ndarray

    def __post_init__(self):
        arcs = np.asarray(self.arcs, dtype=np.int64).reshape(-1, 2)
        if self.v < 1:
            raise InvalidParameterError(f"need v >= 1, got {self.v}")
        if arcs.size:
            if arcs.min() < 0 or arcs.max() >= self.v:
                raise InvalidParameterError("arc endpoints must lie in [0, v)")
            if np.any(arcs[:, 0] == arcs[:, 1]):
                raise InvalidParameterError("self-loops are not allowed")
        arcs = np.ascontiguousarray(arcs)
        arcs.setflags(write=False)
        object.__setattr__(self, "arcs", arcs)

    @property
    def num_arcs(self) -> int:
        return self.arcs.shape[0]


@dataclass(frozen=True, eq=False)
class MasSolution:
    """Vertex ranks (a bijection onto 1..v) and the forward-arc fraction."""

    permutation: np.ndarray
    satisfied: int
    value: float


def _check_permutation(g: MasGraph, pi: np.ndarray) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.int64)
    if pi.shape != (g.v,) or not np.array_equal(np.sort(pi), np.arange(1, g.v + 1)):
        raise InvalidParameterError("permutation must be a bijection onto {1..v}")
    return pi


def _solution_for(g: MasGraph, pi: np.ndarray) -> MasSolution:
    sat = int(np.count_nonzero(pi[g.arcs[:, 0]] < pi[g.arcs[:, 1]])) if g.num_arcs else 0
    value = sat / g.num_arcs if g.num_arcs else 1.0
    return MasSolution(permutation=pi, satisfied=sat, value=value)


def reduce_mas_to_triplets(g: MasGraph) -> Instance:
    """One triplet (S, u, w) per arc u -> w; the anchor S is item index g.v."""
    if g.num_arcs < 1:
        raise InvalidParameterError("need at least one arc")
    rows = np.column_stack(
        [np.full(g.num_arcs, g.v, dtype=np.int64), g.arcs[:, 0], g.arcs[:, 1]]
    )
    meta = GeneratorMeta(kind=GeneratorKind.EXTERNAL, seed=0)
    return Instance(n=g.v + 1, constraints=rows, meta=meta)


def embed_permutation(g: MasGraph, pi: np.ndarray) -> Embedding:
    """One-dimensional embedding: f(S) = 0, f(v) = pi(v)."""
    pi = _check_permutation(g, pi)
    coords = np.zeros((g.v + 1, 1))
    coords[: g.v, 0] = pi.astype(np.float64)
    return Embedding(coords)


def extract_permutation(emb: Embedding, g: MasGraph) -> MasSolution:
    """Rank vertices by their distance from the anchor, ties by vertex index.

    The extracted value is never below the embedding's accuracy on the
    reduced instance: a tie counts as a violation for the embedding but gets
    an orientation from the tie-break.
    """
    if emb.n != g.v + 1:
        raise InvalidInputError(f"embedding covers {emb.n} items, expected {g.v + 1}")
    coords = emb.coords
    diff = coords[: g.v] - coords[g.v]
    radii = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    order = np.lexsort((np.arange(g.v), radii))
    pi = np.empty(g.v, dtype=np.int64)
    pi[order] = np.arange(1, g.v + 1)
    return _solution_for(g, pi)


@lru_cache(maxsize=None)
def _all_rank_assignments(v: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(1, v + 1))), dtype=np.int64)


def brute_force_mas(g: MasGraph) -> MasSolution:
    """Exact optimum by enumerating all v! permutations (v <= 10)."""
    if g.v > _BRUTE_LIMIT:
        raise InvalidParameterError(
            f"exhaustive search refuses v={g.v} > {_BRUTE_LIMIT} vertices"
        )
    best_sat = -1
    best_pi: np.ndarray | None = None
    u, w = g.arcs[:, 0], g.arcs[:, 1]
    for chunk in _rank_chunks(g.v):
        sat = (chunk[:, u] < chunk[:, w]).sum(axis=1)
        i = int(np.argmax(sat))
        if int(sat[i]) > best_sat:
            best_sat = int(sat[i])
            best_pi = chunk[i].copy()
    assert best_pi is not None
    return _solution_for(g, best_pi)


def _rank_chunks(v: int, chunk_rows: int = 200_000):
    if v <= 8:
        yield _all_rank_assignments(v)
        return
    perms = itertools.permutations(range(1, v + 1))
    while True:
        block = list(itertools.islice(perms, chunk_rows))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def brute_force_triplet_opt(instance: Instance, d: int = 1) -> float:
    """Best accuracy over the permutation embeddings of an anchor-form instance.

    Requires every triplet to share the anchor at the last item index (the
    shape produced by the reduction); for such instances the permutation
    embeddings attain the optimum over all embeddings of any dimension, so
    this is exact. The embeddings are evaluated in dimension d (the extra
    coordinates are zero and do not change any distance).
    """
    if instance.is_quadruplet:
        raise InvalidParameterError("expected a triplet instance")
    if d < 1:
        raise InvalidParameterError(f"need d >= 1, got {d}")
    cons = instance.constraints
    anchor = instance.n - 1
    if not np.all(cons[:, 0] == anchor):
        raise InvalidParameterError("instance is not in anchor form (shared last-item anchor)")
    v = instance.n - 1
    if v > _BRUTE_LIMIT:
        raise InvalidParameterError(
            f"exhaustive search refuses v={v} > {_BRUTE_LIMIT} vertices"
        )
    u, w = cons[:, 1], cons[:, 2]
    best = -1
    for chunk in _rank_chunks(v):
        # squared distance from the anchor at 0: rank^2; strict comparison
        # mirrors the accuracy semantics exactly
        sat = ((chunk[:, u].astype(np.float64) ** 2) < (chunk[:, w].astype(np.float64) ** 2)).sum(
            axis=1
        )
        best = max(best, int(sat.max()))
    return best / instance.m


def random_permutation_baseline(g: MasGraph, trials: int, seed: int) -> float:
    """Monte Carlo mean of the forward-arc fraction over uniform permutations."""
    if trials < 1:
        raise InvalidParameterError(f"need trials >= 1, got {trials}")
    rng = make_rng(seed)
    u, w = g.arcs[:, 0], g.arcs[:, 1]
    total = 0
    for _ in range(trials):
        pi = rng.permutation(g.v) + 1
        total += int(np.count_nonzero(pi[u] < pi[w]))
    return total / (trials * g.num_arcs)


# --- plain text format: header "digraph v", then one "u w" line per arc ---


def write_digraph(path: str, g: MasGraph) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"digraph {g.v}\n")
        for u, w in g.arcs:
            fh.write(f"{int(u)} {int(w)}\n")


def read_digraph(path: str) -> MasGraph:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "digraph":
            raise InvalidInputError(f"{path!r}: expected header 'digraph <v>'")
        try:
            v = int(header[1])
        except ValueError:
            raise InvalidInputError(f"{path!r}: bad vertex count {header[1]!r}") from None
        arcs = []
        for line in fh:
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InvalidInputError(f"{path!r}: bad arc line {line!r}")
            arcs.append((int(parts[0]), int(parts[1])))
    arr = np.array(arcs, dtype=np.int64) if arcs else np.empty((0, 2), dtype=np.int64)
    return MasGraph(v=v, arcs=arr)


def mas_value(g: MasGraph, pi: np.ndarray) -> MasSolution:
    """Value of a given permutation (exact recomputation helper)."""
    return _solution_for(g, _check_permutation(g, pi))


def accuracy_of_permutation(g: MasGraph, pi: np.ndarray) -> float:
    """Accuracy of the permutation embedding on the reduced instance."""
    return evaluate_accuracy(embed_permutation(g, pi), reduce_mas_to_triplets(g))

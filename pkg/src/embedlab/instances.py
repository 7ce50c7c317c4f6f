"""Constraint instances and their random generators.

An instance is a set of items ``0..n-1`` together with an ordered multiset of
triplet constraints ``(anchor, positive, negative)`` meaning "the anchor is
closer to the positive than to the negative", or quadruplet constraints
``(a, b, c, d)`` meaning "the a-b distance is smaller than the c-d distance".

Generators cover uniform fixed-count sampling, the Poisson multiplicity model
(sampled by thinning: draw the total count, then that many uniform tuples,
which is distributionally identical and fast), and ground-truth instances
labeled by points on a unit sphere.
"""

from __future__ import annotations

import enum
import itertools
import os
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from ._rng import PRNG_NAME, derive_seed, make_rng
from .errors import InvalidInputError, InvalidInstanceError, InvalidParameterError

__all__ = [
    "GeneratorKind",
    "GeneratorMeta",
    "Instance",
    "Triplet",
    "Quadruplet",
    "generate_uniform_triplets",
    "generate_poisson_triplets",
    "generate_ground_truth_sphere",
    "generate_uniform_quadruplets",
    "generate_poisson_quadruplets",
    "read_instance",
    "write_instance",
    "read_points",
    "write_points",
    "default_points_path",
]


class Triplet(NamedTuple):
    anchor: int
    positive: int
    negative: int


class Quadruplet(NamedTuple):
    a: int
    b: int
    c: int
    d: int


class GeneratorKind(enum.Enum):
    """How an instance was produced. Values double as file/CLI tokens."""

    UNIFORM_FIXED_M = "uniform"
    POISSON_LAMBDA = "poisson"
    GROUND_TRUTH_SPHERE = "sphere"
    UNIFORM_QUADRUPLET = "quad-uniform"
    POISSON_QUADRUPLET = "quad-poisson"
    EXTERNAL = "external"


_UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GeneratorMeta:
    kind: GeneratorKind
    seed: int
    lam: float | None = None
    m_requested: int | None = None
    ground_truth_dimension: int | None = None
    ground_truth_points: np.ndarray | None = field(default=None, repr=False)
    prng: str = PRNG_NAME

    def __post_init__(self):
        if self.kind in (GeneratorKind.POISSON_LAMBDA, GeneratorKind.POISSON_QUADRUPLET):
            if self.lam is None:
                raise InvalidParameterError(f"{self.kind.value} metadata requires lambda")
            if self.lam < 0:
                raise InvalidParameterError(f"lambda must be nonnegative, got {self.lam}")
        if self.kind is GeneratorKind.GROUND_TRUTH_SPHERE:
            if self.ground_truth_dimension is None or self.ground_truth_points is None:
                raise InvalidParameterError("sphere metadata requires dimension and points")
            pts = self.ground_truth_points
            if pts.ndim != 2 or pts.shape[1] != self.ground_truth_dimension:
                raise InvalidParameterError("ground-truth points do not match the stated dimension")
            norms = np.linalg.norm(pts, axis=1)
            if not np.all(np.abs(norms - 1.0) <= _UNIT_NORM_TOL):
                raise InvalidParameterError("ground-truth points must have unit norm")


@dataclass(frozen=True, eq=False)
class Instance:
    """Items ``0..n-1`` plus an ordered multiset of constraints.

    ``constraints`` is an ``(m, 3)`` or ``(m, 4)`` integer array; duplicates
    are allowed and always counted with multiplicity.
    """

    n: int
    constraints: np.ndarray
    meta: GeneratorMeta

    def __post_init__(self):
        arr = np.asarray(self.constraints, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] not in (3, 4):
            raise InvalidInstanceError("constraints must be an (m, 3) or (m, 4) array")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "constraints", arr)
        if self.n < 1:
            raise InvalidInstanceError(f"need at least one item, got n={self.n}")
        if arr.size:
            if arr.min() < 0 or arr.max() >= self.n:
                raise InvalidInstanceError("constraint indices must lie in [0, n)")
            if arr.shape[1] == 3:
                a, b, c = arr.T
                if np.any((a == b) | (a == c) | (b == c)):
                    raise InvalidInstanceError("triplet items must be pairwise distinct")
            else:
                a, b, c, d = arr.T
                if np.any(a == b) or np.any(c == d):
                    raise InvalidInstanceError("quadruplet pairs must consist of distinct items")
                same = (np.minimum(a, b) == np.minimum(c, d)) & (np.maximum(a, b) == np.maximum(c, d))
                if np.any(same):
                    raise InvalidInstanceError("quadruplet must compare two different pairs")

    @property
    def m(self) -> int:
        return self.constraints.shape[0]

    @property
    def arity(self) -> int:
        return self.constraints.shape[1]

    @property
    def is_quadruplet(self) -> bool:
        return self.arity == 4

    def __len__(self) -> int:
        return self.m

    def triplets(self) -> Iterator[Triplet]:
        if self.is_quadruplet:
            raise InvalidInputError("instance holds quadruplets, not triplets")
        for row in self.constraints:
            yield Triplet(*map(int, row))

    def quadruplets(self) -> Iterator[Quadruplet]:
        if not self.is_quadruplet:
            raise InvalidInputError("instance holds triplets, not quadruplets")
        for row in self.constraints:
            yield Quadruplet(*map(int, row))


# ---------------------------------------------------------------------------
# samplers


def _distinct_rows(rng: np.random.Generator, n: int, m: int, k: int) -> np.ndarray:
    """m rows of k pairwise-distinct items, uniform over ordered k-tuples."""
    out = np.empty((m, k), dtype=np.int64)
    filled = 0
    while filled < m:
        need = m - filled
        cand = rng.integers(0, n, size=(need, k))
        ok = np.ones(need, dtype=bool)
        for i, j in itertools.combinations(range(k), 2):
            ok &= cand[:, i] != cand[:, j]
        good = cand[ok]
        out[filled : filled + good.shape[0]] = good
        filled += good.shape[0]
    return out


_ORIENTATIONS = np.array(list(itertools.permutations(range(3))), dtype=np.int64)


def _uniform_triplet_rows(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    # Two stages: an unordered 3-item set, then one of its 6 orientations.
    sets = np.sort(_distinct_rows(rng, n, m, 3), axis=1)
    orient = rng.integers(0, 6, size=m)
    return np.take_along_axis(sets, _ORIENTATIONS[orient], axis=1)


def _uniform_quadruplet_rows(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """Uniform over ordered tuples (a,b,c,d) with a!=b, c!=d, {a,b}!={c,d}."""
    out = np.empty((m, 4), dtype=np.int64)
    filled = 0
    while filled < m:
        need = m - filled
        cand = rng.integers(0, n, size=(need, 4))
        a, b, c, d = cand.T
        ok = (a != b) & (c != d)
        ok &= ~((np.minimum(a, b) == np.minimum(c, d)) & (np.maximum(a, b) == np.maximum(c, d)))
        good = cand[ok]
        out[filled : filled + good.shape[0]] = good
        filled += good.shape[0]
    return out


def triplet_tuple_count(n: int) -> int:
    return n * (n - 1) * (n - 2)


def quadruplet_tuple_count(n: int) -> int:
    return n * (n - 1) * (n * (n - 1) - 2)


def generate_uniform_triplets(n: int, m: int, seed: int) -> Instance:
    """m i.i.d. triplets, each uniform over the 6 orientations of a uniform 3-set."""
    if n < 3:
        raise InvalidInstanceError(f"uniform triplets need n >= 3, got {n}")
    if m < 1:
        raise InvalidParameterError(f"need m >= 1, got {m}")
    rng = make_rng(seed)
    rows = _uniform_triplet_rows(rng, n, m)
    meta = GeneratorMeta(kind=GeneratorKind.UNIFORM_FIXED_M, seed=seed, m_requested=m)
    return Instance(n=n, constraints=rows, meta=meta)


def generate_poisson_triplets(n: int, lam: float, seed: int) -> Instance:
    """Independent Poisson(lam) multiplicity for each ordered distinct triple.

    Sampled by thinning: the total count is Poisson(lam * n(n-1)(n-2)) and,
    given the total, the tuples are i.i.d. uniform. Expected time stays
    O(lam * n^3 + output) instead of n^3 independent draws.
    """
    if n < 3:
        raise InvalidInstanceError(f"poisson triplets need n >= 3, got {n}")
    if lam < 0:
        raise InvalidParameterError(f"lambda must be nonnegative, got {lam}")
    rng = make_rng(seed)
    total = int(rng.poisson(lam * triplet_tuple_count(n)))
    rows = _uniform_triplet_rows(rng, n, total) if total else np.empty((0, 3), dtype=np.int64)
    meta = GeneratorMeta(kind=GeneratorKind.POISSON_LAMBDA, seed=seed, lam=lam)
    return Instance(n=n, constraints=rows, meta=meta)


def generate_uniform_quadruplets(n: int, m: int, seed: int) -> Instance:
    if n < 4:
        raise InvalidInstanceError(f"uniform quadruplets need n >= 4, got {n}")
    if m < 1:
        raise InvalidParameterError(f"need m >= 1, got {m}")
    rng = make_rng(seed)
    rows = _uniform_quadruplet_rows(rng, n, m)
    meta = GeneratorMeta(kind=GeneratorKind.UNIFORM_QUADRUPLET, seed=seed, m_requested=m)
    return Instance(n=n, constraints=rows, meta=meta)


def generate_poisson_quadruplets(n: int, lam: float, seed: int) -> Instance:
    """Poisson multiplicities over valid ordered 4-tuples, sampled by thinning."""
    if n < 4:
        raise InvalidInstanceError(f"poisson quadruplets need n >= 4, got {n}")
    if lam < 0:
        raise InvalidParameterError(f"lambda must be nonnegative, got {lam}")
    rng = make_rng(seed)
    total = int(rng.poisson(lam * quadruplet_tuple_count(n)))
    rows = _uniform_quadruplet_rows(rng, n, total) if total else np.empty((0, 4), dtype=np.int64)
    meta = GeneratorMeta(kind=GeneratorKind.POISSON_QUADRUPLET, seed=seed, lam=lam)
    return Instance(n=n, constraints=rows, meta=meta)


def generate_ground_truth_sphere(n: int, dim: int, m: int, seed: int) -> Instance:
    """Triplets labeled by n uniform points on the unit sphere in R^dim.

    Samples m distinct (anchor, unordered pair) combinations without
    replacement and orients each one as (anchor, closer, farther) under the
    ground-truth Euclidean distance, so the stored points satisfy every
    constraint. Exact distance ties are discarded and redrawn.
    """
    if n < 3:
        raise InvalidInstanceError(f"sphere instances need n >= 3, got {n}")
    if dim < 1:
        raise InvalidParameterError(f"need dimension >= 1, got {dim}")
    combos = n * (n - 1) * (n - 2) // 2
    if not 1 <= m <= combos:
        raise InvalidParameterError(f"m must lie in [1, {combos}] for n={n}, got {m}")
    rng = make_rng(seed)
    points = rng.standard_normal((n, dim))
    points /= np.linalg.norm(points, axis=1, keepdims=True)

    rows = np.empty((m, 3), dtype=np.int64)
    seen: set[int] = set()
    filled = 0
    nn = n * n
    # distance evaluation gathers (batch, dim) blocks; cap memory per batch
    batch_cap = max(4096, (1 << 25) // max(1, dim))
    while filled < m:
        batch = min(max(4096, (m - filled) * 5 // 4), batch_cap)
        cand = rng.integers(0, n, size=(batch, 3))
        a, u, v = cand.T
        ok = (u != v) & (u != a) & (v != a)
        a, u, v = a[ok], u[ok], v[ok]
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        codes = a * nn + lo * n + hi
        du = np.einsum("ij,ij->i", points[a] - points[lo], points[a] - points[lo])
        dv = np.einsum("ij,ij->i", points[a] - points[hi], points[a] - points[hi])
        for idx in range(codes.shape[0]):
            code = int(codes[idx])
            if code in seen:
                continue
            seen.add(code)
            if du[idx] == dv[idx]:  # tie: combination is dropped and replaced
                continue
            if du[idx] < dv[idx]:
                rows[filled] = (a[idx], lo[idx], hi[idx])
            else:
                rows[filled] = (a[idx], hi[idx], lo[idx])
            filled += 1
            if filled == m:
                break
        if filled < m and len(seen) >= combos:
            raise InvalidParameterError("distance ties exhausted the combination space")
    meta = GeneratorMeta(
        kind=GeneratorKind.GROUND_TRUTH_SPHERE,
        seed=seed,
        m_requested=m,
        ground_truth_dimension=dim,
        ground_truth_points=points,
    )
    return Instance(n=n, constraints=rows, meta=meta)


# ---------------------------------------------------------------------------
# serialization
#
# Line-oriented text format. Header:
#     triplets <n> <m> <seed> <kind> [key=value ...]
# (or "quadruplets"), then one constraint per line as space-separated item
# indices. Optional trailing key=value tokens preserve generator parameters
# (lambda=..., D=...). Ground-truth points live in a companion file of n rows
# by D columns with 17 significant digits; its default path is FILE + ".points".


def default_points_path(path: str) -> str:
    return f"{path}.points"


def write_points(path: str, coords: np.ndarray) -> None:
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    with open(path, "w", encoding="ascii") as fh:
        for row in coords:
            fh.write(" ".join(f"{x:.17g}" for x in row))
            fh.write("\n")


def read_points(path: str) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidInputError(f"points file {path!r} is empty")
    try:
        data = np.array([[float(tok) for tok in ln.split()] for ln in lines])
    except ValueError as exc:
        raise InvalidInputError(f"points file {path!r}: {exc}") from None
    if data.ndim != 2:
        raise InvalidInputError(f"points file {path!r} is ragged")
    return data


def write_instance(path: str, instance: Instance, points_path: str | None = None) -> None:
    """Write an instance; ground-truth points go to a companion file."""
    word = "quadruplets" if instance.is_quadruplet else "triplets"
    meta = instance.meta
    extras = []
    if meta.lam is not None:
        extras.append(f"lambda={meta.lam:.17g}")
    if meta.ground_truth_dimension is not None:
        extras.append(f"D={meta.ground_truth_dimension}")
    header = f"{word} {instance.n} {instance.m} {meta.seed} {meta.kind.value}"
    if extras:
        header += " " + " ".join(extras)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header + "\n")
        for row in instance.constraints:
            fh.write(" ".join(str(int(x)) for x in row))
            fh.write("\n")
    if meta.ground_truth_points is not None:
        write_points(points_path or default_points_path(path), meta.ground_truth_points)


def _parse_header(line: str, path: str):
    tokens = line.split()
    if len(tokens) < 5 or tokens[0] not in ("triplets", "quadruplets"):
        raise InvalidInputError(f"{path!r}: bad header {line!r}")
    word = tokens[0]
    try:
        n, m, seed = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise InvalidInputError(f"{path!r}: non-integer header field: {exc}") from None
    try:
        kind = GeneratorKind(tokens[4])
    except ValueError:
        raise InvalidInputError(f"{path!r}: unknown generator kind {tokens[4]!r}") from None
    extras: dict[str, str] = {}
    for tok in tokens[5:]:
        if "=" not in tok:
            raise InvalidInputError(f"{path!r}: bad header token {tok!r}")
        key, value = tok.split("=", 1)
        extras[key] = value
    return word, n, m, seed, kind, extras


def read_instance(path: str, points_path: str | None = None) -> Instance:
    """Read an instance file written by :func:`write_instance` (or by hand)."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        body = fh.read()
    word, n, m, seed, kind, extras = _parse_header(header, path)
    arity = 4 if word == "quadruplets" else 3
    tokens = body.split()
    if len(tokens) != m * arity:
        raise InvalidInputError(
            f"{path!r}: expected {m * arity} constraint fields, found {len(tokens)}"
        )
    rows = (
        np.array(tokens, dtype=np.int64).reshape(m, arity)
        if m
        else np.empty((0, arity), dtype=np.int64)
    )

    lam = float(extras["lambda"]) if "lambda" in extras else None
    dim = int(extras["D"]) if "D" in extras else None
    points = None
    if kind is GeneratorKind.GROUND_TRUTH_SPHERE:
        ppath = points_path or default_points_path(path)
        if not os.path.exists(ppath):
            raise InvalidInputError(f"{path!r}: companion points file {ppath!r} is missing")
        points = read_points(ppath)
        if dim is None:
            dim = points.shape[1]
    if kind in (GeneratorKind.POISSON_LAMBDA, GeneratorKind.POISSON_QUADRUPLET) and lam is None:
        raise InvalidInputError(f"{path!r}: poisson instance file lacks a lambda= header token")
    meta = GeneratorMeta(
        kind=kind, seed=seed, lam=lam, ground_truth_dimension=dim, ground_truth_points=points
    )
    return Instance(n=n, constraints=rows, meta=meta)


def derive_instance_seed(seed: int, index: int) -> int:
    """Alias of the shared sub-seed derivation, re-exported for callers."""
    return derive_seed(seed, index)

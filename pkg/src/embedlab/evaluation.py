"""Constraint accuracy and the random one-dimensional baseline.

A triplet (i, j, k) is satisfied when the i-j distance is strictly smaller
than the i-k distance; a quadruplet (a, b, c, d) when the a-b distance is
strictly smaller than the c-d distance. Exact distance ties count as
violations, with no epsilon band, and duplicates count with multiplicity.
Comparisons use squared distances (the ordering is the same, with fewer
rounding events).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .embedding import Embedding
from .errors import InvalidInputError, InvalidParameterError
from .instances import Instance

__all__ = ["evaluate_accuracy", "satisfied_mask", "satisfied_count", "trivial_baseline", "BaselineResult"]

_CHUNK = 1 << 18


def _coords_for(emb: Embedding | np.ndarray, instance: Instance) -> np.ndarray:
    coords = emb.coords if isinstance(emb, Embedding) else np.asarray(emb, dtype=np.float64)
    if coords.ndim != 2:
        raise InvalidInputError("embedding coordinates must be 2-d")
    if coords.shape[0] != instance.n:
        raise InvalidInputError(
            f"embedding covers {coords.shape[0]} items but the instance has {instance.n}"
        )
    return coords


def satisfied_mask(emb: Embedding | np.ndarray, instance: Instance) -> np.ndarray:
    """Boolean mask over the constraint list, one entry per constraint."""
    coords = _coords_for(emb, instance)
    cons = instance.constraints
    out = np.empty(instance.m, dtype=bool)
    for start in range(0, instance.m, _CHUNK):
        rows = cons[start : start + _CHUNK]
        if instance.is_quadruplet:
            left = coords[rows[:, 0]] - coords[rows[:, 1]]
            right = coords[rows[:, 2]] - coords[rows[:, 3]]
        else:
            left = coords[rows[:, 0]] - coords[rows[:, 1]]
            right = coords[rows[:, 0]] - coords[rows[:, 2]]
        d2_left = np.einsum("ij,ij->i", left, left)
        d2_right = np.einsum("ij,ij->i", right, right)
        out[start : start + rows.shape[0]] = d2_left < d2_right
    return out


def satisfied_count(emb: Embedding | np.ndarray, instance: Instance) -> int:
    return int(np.count_nonzero(satisfied_mask(emb, instance)))


def evaluate_accuracy(emb: Embedding | np.ndarray, instance: Instance) -> float:
    """Fraction of constraints satisfied, in [0, 1]."""
    if instance.m == 0:
        return 1.0
    return satisfied_count(emb, instance) / instance.m


@dataclass(frozen=True)
class BaselineResult:
    mean: float
    stderr: float
    trials: int


def trivial_baseline(instance: Instance, trials: int, seed: int = 0) -> BaselineResult:
    """Mean accuracy of i.i.d. uniform one-dimensional embeddings.

    The embedding ignores the constraints entirely; by symmetry each
    comparison holds with probability 1/2, so the mean tends to 0.5.
    """
    if trials < 1:
        raise InvalidParameterError(f"need trials >= 1, got {trials}")
    rng = make_rng(seed)
    cons = instance.constraints
    m = instance.m
    accs = np.empty(trials, dtype=np.float64)
    # chunk trials so trial_count x m stays within memory
    per = max(1, _CHUNK // max(1, m))
    done = 0
    while done < trials:
        t = min(per, trials - done)
        coords = rng.random((t, instance.n))
        if instance.is_quadruplet:
            d_left = coords[:, cons[:, 0]] - coords[:, cons[:, 1]]
            d_right = coords[:, cons[:, 2]] - coords[:, cons[:, 3]]
        else:
            d_left = coords[:, cons[:, 0]] - coords[:, cons[:, 1]]
            d_right = coords[:, cons[:, 0]] - coords[:, cons[:, 2]]
        sat = (d_left * d_left) < (d_right * d_right)
        accs[done : done + t] = sat.mean(axis=1) if m else 1.0
        done += t
    stderr = float(accs.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return BaselineResult(mean=float(accs.mean()), stderr=stderr, trials=trials)

"""The embedding container shared by training, evaluation, and certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class Embedding:
    """n points in R^d as an (n, d) float64 matrix."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        if arr.ndim != 2:
            raise InvalidInputError("coords must be a 2-d array")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("coords must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

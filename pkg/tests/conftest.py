import numpy as np
import pytest

from embedlab import GeneratorKind, GeneratorMeta, Instance


def make_instance(n, rows, quadruplet=False):
    """Hand-built instance with external metadata."""
    arity = 4 if quadruplet else 3
    arr = np.asarray(rows, dtype=np.int64).reshape(-1, arity)
    return Instance(n=n, constraints=arr, meta=GeneratorMeta(GeneratorKind.EXTERNAL, seed=0))


@pytest.fixture
def tiny_contradiction():
    return make_instance(3, [[0, 1, 2], [0, 2, 1]])

import numpy as np
import pytest

from hdpcc import EnvMatrix, GenotypeTensor, RunConfig
from hdpcc.gibbs import Model


def small_model(N0=5, N1=5, J=2, Lj=(4, 4), M=5, seed=0, d=1, flat=False, **cfg):
    rng = np.random.default_rng(seed)
    L = max(Lj)
    al = rng.integers(0, 2, size=(N0 + N1, J, L, 2))
    t = GenotypeTensor.from_arrays(al, list(Lj), [0] * N0 + [1] * N1)
    env = EnvMatrix(rng.standard_normal((N0 + N1, d)), t.group)
    return Model(t, env, RunConfig(M=M, **cfg), flat=flat)


@pytest.fixture
def model():
    return small_model()


def write_geno(path, rows, header=True):
    with open(path, "w") as f:
        if header:
            f.write("#hdpcc-geno v1\n")
        for r in rows:
            f.write("\t".join(map(str, r)) + "\n")
    return path

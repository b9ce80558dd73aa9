import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdpcc import EnvMatrix
from hdpcc.errors import DomainError, NumericError
from hdpcc.model import (AlleleProbMatrix, BaseMeasure, HyperParams, alphas, bernoulli_kernel,
                         clamp_p, locus_product_likelihood, log_bernoulli_kernel, precision)


@pytest.mark.parametrize("x,p,want", [
    ((0, 0), 0.5, 0.25),
    ((1, 0), 0.3, 0.21),
    ((0, 1), 0.3, 0.21),
    ((1, 1), 0.9, 0.81),
])
def test_bernoulli_kernel(x, p, want):
    assert bernoulli_kernel(x, p) == pytest.approx(want, rel=1e-12)
    assert math.exp(log_bernoulli_kernel(x, p)) == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, np.nan])
def test_kernel_domain(p):
    with pytest.raises(DomainError):
        bernoulli_kernel((0, 1), p)


def test_locus_product_examples():
    x = np.array([[0, 0], [1, 1]])
    p = np.array([0.5, 0.5])
    assert locus_product_likelihood(x, p) == pytest.approx(math.log(0.25 * 0.25))
    assert locus_product_likelihood(x, p, [0]) == pytest.approx(math.log(0.25))
    assert locus_product_likelihood(x, p, []) == 0.0


def test_locus_product_matches_direct_product():
    g = np.random.default_rng(5)
    x = g.integers(0, 2, size=(5, 2))
    p = g.uniform(0.01, 0.99, 5)
    direct = np.prod([p[r] ** x[r].sum() * (1 - p[r]) ** (2 - x[r].sum()) for r in range(5)])
    assert locus_product_likelihood(x, p) == pytest.approx(math.log(direct), abs=1e-12)


def _env(E, group):
    return EnvMatrix(np.asarray(E, float), np.asarray(group))


def test_precision_identity():
    env = _env([[0.3], [2.0], [-1.0]], [0, 0, 1])
    hp = HyperParams.default(1)
    hp.mu_G = hp.mu_G0 = hp.mu_H = 0.0
    assert precision("G", hp, env, 1, 0) == 1.0
    assert precision("G0", hp, env, k=1) == 1.0
    assert precision("H", hp, env) == 1.0


def test_precision_large_offset_constants():
    env = _env([[0.3], [-1.0]], [0, 1])
    hp = HyperParams(0.0, [0.0], 0.0, [0.0], 0.0, [0.0], ((0.1, 100.0),) * 3)
    for lv, kw in (("G", dict(i=0, k=0)), ("G0", dict(k=1)), ("H", {})):
        assert precision(lv, hp, env, **kw) == pytest.approx(0.1 * math.exp(100), rel=1e-12)


def test_precision_beta_cancels():
    env = _env([[2.0, 2.0], [2.0, 2.0]], [0, 1])
    hp = HyperParams(0.5, [1.0, -1.0], 0.5, [1.0, -1.0], 0.5, [1.0, -1.0], ((2.0, 1.0),) * 3)
    want = 2.0 * math.exp(1.5)
    assert precision("G", hp, env, 0, 1) == pytest.approx(want)
    assert precision("G0", hp, env, k=0) == pytest.approx(want)
    assert precision("H", hp, env) == pytest.approx(want)


def test_precision_overflow_names_level():
    env = _env([[0.0], [0.0]], [0, 1])
    hp = HyperParams(0.0, [0.0], 800.0, [0.0], 0.0, [0.0])
    with pytest.raises(NumericError, match="G0"):
        precision("G0", hp, env, k=0)
    with pytest.raises(DomainError):
        precision("G", hp, env)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3), st.floats(-3, 3))
def test_log_precision_affine(mu, b, e, h):
    h = h if abs(h) > 1e-3 else 1.0
    env1 = _env([[e], [0.0]], [0, 1])
    env2 = _env([[e + h], [0.0]], [0, 1])
    hp = HyperParams(mu, [b], 0.0, [0.0], 0.0, [0.0])
    slope = (math.log(precision("G", hp, env2, 0, 0)) - math.log(precision("G", hp, env1, 0, 0))) / h
    assert slope == pytest.approx(b, abs=1e-9)


def test_alphas_vectorized_matches_scalar():
    g = np.random.default_rng(0)
    E = g.standard_normal((6, 2))
    env = _env(E, [0, 0, 0, 1, 1, 1])
    hp = HyperParams(0.2, [0.3, -0.4], 0.7, [0.1, 0.2], 0.4, [-0.5, 0.6])
    aG, aG0, aH = alphas(hp, env)
    assert aG[4] == pytest.approx(precision("G", hp, env, 1, 1))
    assert aG0[0] == pytest.approx(precision("G0", hp, env, k=0))
    assert aH == pytest.approx(precision("H", hp, env))


def test_hyperparam_vector_roundtrip():
    hp = HyperParams(0.2, [0.3, -0.4], 0.7, [0.1, 0.2], 0.4, [-0.5, 0.6])
    assert hp.with_vector(hp.vector()).equals(hp)
    assert hp.vector().size == 3 + 3 * hp.d


def test_base_measure_draws():
    b = BaseMeasure(2.0, 5.0)
    x = b.draw(np.random.default_rng(1), 20000, 3)
    assert x.shape == (20000, 3)
    assert np.all((x > 0) & (x < 1))
    assert x.mean() == pytest.approx(2 / 7, abs=0.01)
    with pytest.raises(DomainError):
        BaseMeasure(0.0, 1.0)


def test_clamp():
    assert clamp_p(np.array([0.0, 1.0]))[0] == 1e-12
    assert clamp_p(np.array([0.0, 1.0]))[1] == 1 - 1e-12


def test_row_permutation_invariance():
    g = np.random.default_rng(2)
    p = clamp_p(g.random((4, 6)))
    p[2] = p[0]
    labels = np.array([0, 1, 0, 2])
    x = g.integers(0, 2, size=(6, 2))
    a = AlleleProbMatrix(p, labels, z=3)
    perm = np.array([3, 1, 0, 2])
    b = AlleleProbMatrix(p[perm], labels[perm], z=int(np.flatnonzero(perm == 3)[0]))
    assert a.check() and b.check()
    assert a.tau == 3
    assert a.loglik(x) == b.loglik(x)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hdpcc.errors import DomainError, NumericError
from hdpcc.gibbs import init_state, sweep
from hdpcc.model import alphas
from hdpcc.tmcmc import (Bounds, TmcmcConfig, UrnSummary, ewens_loglik, log_accept_ratio,
                         tmcmc_block_update, tmcmc_chain, tmcmc_step, urn_loglik, urn_walk_loglik)

from conftest import small_model


@pytest.mark.parametrize("alpha", [0.3, 1.0, 7.5])
@pytest.mark.parametrize("M", [2, 5, 10])
def test_all_fresh(alpha, M):
    ref = sum(np.log(alpha / (alpha + m - 1)) for m in range(2, M + 1))
    assert ewens_loglik(alpha, M, M) == pytest.approx(ref, abs=1e-12)
    assert urn_walk_loglik(list(range(M)), alpha) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 7.5])
@pytest.mark.parametrize("M", [2, 5, 10])
def test_all_copies(alpha, M):
    from scipy.special import gammaln
    ref = sum(np.log((m - 1) / (alpha + m - 1)) for m in range(2, M + 1))
    assert ewens_loglik(alpha, M, 1, gammaln(M)) == pytest.approx(ref, abs=1e-12)
    assert urn_walk_loglik([0] * M, alpha) == pytest.approx(ref, abs=1e-12)


def test_nonpositive_alpha():
    with pytest.raises(NumericError):
        ewens_loglik(0.0, 3, 2)
    with pytest.raises(NumericError):
        ewens_loglik(np.inf, 3, 2)


def _walks(state, model):
    """Naive re-walk of all three seatings in draw order."""
    hp, group = state.hp, model.group
    aG, aG0, aH = alphas(hp, model.env)
    N, J, M = state.labels.shape
    lg = sum(urn_walk_loglik(state.labels[i, j], aG[i]) for i in range(N) for j in range(J))
    lg0 = lh = 0.0
    for k in (0, 1):
        rows = np.flatnonzero(group == k)
        seq_h = []
        for j in range(J):
            seq = []
            for i in rows:
                seq += [int(s) for s in state.seat[i, j] if s >= 0]
            lg0 += urn_walk_loglik(seq, aG0[k])
            seq_h += [int(v) for v in state.g0_val[k * J + j]]
        lh += urn_walk_loglik(seq_h, aH)
    return lg, lg0, lh


@pytest.mark.parametrize("seed", range(5))
def test_rewalk_oracle(seed):
    m = small_model(N0=3, N1=4, J=2, Lj=(3, 2), M=6, seed=seed, d=2)
    state = init_state(m, seed)
    for _ in range(seed):
        sweep(state, m)
    state.hp = state.hp.with_vector(np.random.default_rng(seed).uniform(-1, 1, 9) * 0.5 + 0.3)
    walks = _walks(state, m)
    for lv, ref in zip(("G", "G0", "H"), walks):
        assert urn_loglik(lv, state, state.hp, m.env, m.group) == pytest.approx(ref, abs=1e-12)


def test_unknown_level():
    m = small_model()
    state = init_state(m, 0)
    with pytest.raises(DomainError):
        urn_loglik("X", state, state.hp, m.env, m.group)


def test_identical_proposal_ratio_one():
    assert log_accept_ratio(-3.25, -3.25, 0.0) == 0.0


def test_out_of_support_rejected_without_evaluation():
    calls = []

    def lp(x):
        calls.append(x)
        return 0.0

    cfg = TmcmcConfig(mix=1.0, signs=np.array([1.0]))
    g = np.random.default_rng(0)
    x0 = np.array([1.0])
    lp0 = 0.0
    for _ in range(100):
        x, _, acc = tmcmc_step(x0, lp0, lp, cfg, g, np.array([0.0]), np.array([1.0]))
        assert not acc and x[0] == 1.0
    assert calls == []


def test_bad_config():
    with pytest.raises(DomainError):
        TmcmcConfig(mix=1.5)
    with pytest.raises(DomainError):
        TmcmcConfig(add_scale=0.0)


def test_constant_shift_invariance():
    target = lambda x: -8.0 * (x[0] - 0.3) ** 2
    cfg = TmcmcConfig(add_scale=0.2, mult_scale=0.2)
    lo, hi = np.array([0.0]), np.array([1.0])
    a, _ = tmcmc_chain([0.5], target, cfg, np.random.default_rng(1), lo, hi, 5000)
    b, _ = tmcmc_chain([0.5], lambda x: target(x) + 16.0, cfg, np.random.default_rng(1), lo, hi,
                       5000)
    assert np.array_equal(a, b)


@pytest.fixture(scope="module")
def frozen():
    m = small_model(N0=4, N1=4, J=2, Lj=(3, 3), M=6, seed=3)
    state = init_state(m, 3)
    for _ in range(20):
        sweep(state, m)
    return m, state, UrnSummary.from_state(state, m.group)


def test_mu_G_recovers_quadrature_density(frozen):
    m, state, summ = frozen
    hp = state.hp

    def logpost(v):
        h = hp.with_vector(hp.vector())
        h.mu_G = float(v[0])
        return summ.loglik("G", h, m.env)

    grid_lp = lambda x: logpost(np.array([x]))
    peak = max(grid_lp(x) for x in np.linspace(0, 1, 201))
    dens = lambda x: np.exp(grid_lp(x) - peak)
    edges = np.linspace(0, 1, 21)
    mass = np.array([integrate.quad(dens, a, b)[0] for a, b in zip(edges[:-1], edges[1:])])
    mass /= mass.sum()
    tv = {}
    for jac in (True, False):
        cfg = TmcmcConfig(add_scale=0.3, mult_scale=1.0, jacobian=jac)
        out, acc = tmcmc_chain([0.5], logpost, cfg, np.random.default_rng(0),
                               np.array([0.0]), np.array([1.0]), 200_000)
        h = np.histogram(out[:, 0], edges)[0] / out.shape[0]
        tv[jac] = 0.5 * np.abs(h - mass).sum()
        assert 0.05 < acc < 0.95
    assert tv[True] < 0.05
    assert tv[False] >= 0.05


def test_jacobian_needed_for_multiplicative_moves():
    # flat target on [0.1, 1]: with the Jacobian the chain is uniform, without it it is not
    lo, hi = np.array([0.1]), np.array([1.0])
    flat = lambda x: 0.0
    res = {}
    for jac in (True, False):
        cfg = TmcmcConfig(mix=0.0, mult_scale=0.5, jacobian=jac)
        out, _ = tmcmc_chain([0.5], flat, cfg, np.random.default_rng(2), lo, hi, 200_000)
        res[jac] = out[:, 0].mean()
    assert abs(res[True] - 0.55) < 0.01
    assert abs(res[False] - 0.55) > 0.03


def test_two_state_detailed_balance():
    lo, hi = np.array([0.0]), np.array([1.0])
    target = lambda x: np.log(0.3 + x[0])
    cfg = TmcmcConfig(add_scale=0.4, mult_scale=0.4)
    out, _ = tmcmc_chain([0.5], target, cfg, np.random.default_rng(3), lo, hi, 400_000)
    s = (out[:, 0] >= 0.5).astype(int)
    n01 = int(np.sum((s[:-1] == 0) & (s[1:] == 1)))
    n10 = int(np.sum((s[:-1] == 1) & (s[1:] == 0)))
    assert abs(n01 - n10) <= 3 * np.sqrt(n01 + n10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-50, 50))
def test_block_update_shift_invariance(seed, c):
    m = small_model(N0=3, N1=3, M=4)
    state = init_state(m, 1)
    summ = UrnSummary.from_state(state, m.group)
    shifted = UrnSummary.from_state(state, m.group)
    cfg = TmcmcConfig(steps=20)
    a, na = tmcmc_block_update(state, m.env, m.group, cfg, np.random.default_rng(seed),
                               Bounds(), summ)
    shifted.const_H += float(np.round(c))
    b, nb = tmcmc_block_update(state, m.env, m.group, cfg, np.random.default_rng(seed),
                               Bounds(), shifted)
    assert na == nb
    assert np.allclose(a.vector(), b.vector(), atol=0, rtol=0)


def test_block_update_stays_in_support():
    m = small_model(d=2)
    state = init_state(m, 0)
    lo, hi = Bounds().arrays(2)
    g = np.random.default_rng(0)
    for _ in range(300):
        state.hp, _ = tmcmc_block_update(state, m.env, m.group, TmcmcConfig(add_scale=0.3), g)
        v = state.hp.vector()
        assert np.all(v >= lo) and np.all(v <= hi)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hdpcc.errors import DomainError, TruncationError
from hdpcc.urns import (StickBreakingCache, c_bounds, crp_labels, estimate_Cijk, extend_gap,
                        g0_cache, g0_mean_measure_draw, h_cache, h_level_draw, polya_sequence,
                        polya_step_p, prior_draw, retro_posterior_draw, retro_value_draw,
                        stick_extend)


def id_source(n, rng):
    return rng.integers(0, 1 << 30, n)


def fixed_cache(weights, atoms=None):
    """Cache whose sticks reproduce `weights` exactly (remaining mass after them)."""
    w = np.asarray(weights, float)
    rem = 1.0 - np.concatenate([[0.0], np.cumsum(w)[:-1]])
    V = iter(np.minimum(w / rem, 1.0))
    ids = iter(range(len(w)) if atoms is None else atoms)
    c = StickBreakingCache(1.0, lambda n, g: np.array([next(ids) for _ in range(n)]),
                           np.random.default_rng(0), v_source=lambda n, g: [next(V) for _ in range(n)],
                           chunk=len(w))
    return c.extend(len(w))


def test_geometric_sticks():
    c = StickBreakingCache(1.0, id_source, np.random.default_rng(0),
                           v_source=lambda n, g: np.full(n, 0.5), chunk=3)
    c.extend(3)
    assert c.sticks.tolist() == [0.5, 0.25, 0.125]
    assert c.cumulative[-1] == 0.875
    assert c.gap == 0.125


def test_extend_appends_only():
    c = StickBreakingCache(5e4, id_source, np.random.default_rng(3), chunk=1024)
    stick_extend(c, 0.5)
    K1 = c.K
    head = c.sticks[:100].copy(), c.atoms[:100].copy()
    stick_extend(c, 0.9)
    assert c.K >= K1 > 1000
    assert np.array_equal(c.sticks[:100], head[0]) and np.array_equal(c.atoms[:100], head[1])
    assert np.all(np.diff(c.cumulative) > 0)


def test_seeded_replay_atom_count():
    counts = []
    for _ in range(2):
        c = StickBreakingCache(1.0, id_source, np.random.default_rng(42), chunk=1)
        stick_extend(c, 0.999999)
        counts.append(c.K)
    assert counts[0] == counts[1]
    assert c.cumulative[-1] >= 0.999999


def test_truncation_guard():
    c = StickBreakingCache(1e12, id_source, np.random.default_rng(0), chunk=1024, max_atoms=4096)
    with pytest.raises(TruncationError):
        stick_extend(c, 0.5)
    with pytest.raises(DomainError):
        stick_extend(c, 1.0)


def test_single_atom_measure():
    c = fixed_cache([1.0], atoms=[7])
    for u in (0.0, 0.3, 0.999):
        assert retro_posterior_draw(c, lambda a: np.zeros(len(a)), u=u) == (0, 7)


def _freq(draws, K):
    return np.bincount(draws, minlength=K) / len(draws)


def test_three_atom_posterior():
    w = np.array([0.5, 0.3, 0.2])
    f = np.array([0.2, 0.9, 0.5])
    g = np.random.default_rng(9)
    c = fixed_cache(w)
    n = 100_000
    draws = np.array([retro_posterior_draw(c, lambda a: np.log(f[a]), g)[0] for _ in range(n)])
    post = w * f / (w * f).sum()
    se = np.sqrt(post * (1 - post) / n)
    assert np.all(np.abs(_freq(draws, 3) - post) < 3 * se)


def test_equal_kernels_give_prior():
    w = np.array([0.6, 0.25, 0.15])
    g = np.random.default_rng(1)
    c = fixed_cache(w)
    n = 100_000
    draws = np.array([retro_posterior_draw(c, lambda a: np.full(len(a), -1.3), g, log_bound=-1.3)[0]
                      for _ in range(n)])
    assert np.all(np.abs(_freq(draws, 3) - w) < 3 * np.sqrt(w * (1 - w) / n))


def test_value_draw_matches_enumeration():
    # eight atoms over three repeated values: law over values must match
    w = np.array([0.3, 0.2, 0.15, 0.1, 0.1, 0.05, 0.05, 0.05])
    atoms = [4, 2, 4, 9, 2, 9, 4, 2]
    f = {4: 0.3, 2: 0.8, 9: 0.1}
    c = fixed_cache(w, atoms)
    g = np.random.default_rng(2)
    n = 60_000
    draws = np.array([retro_value_draw(c, lambda a: np.log([f[x] for x in a]), g) for _ in range(n)])
    vals = np.array([4, 2, 9])
    mass = np.array([sum(wi * f[a] for wi, a in zip(w, atoms) if a == v) for v in vals])
    post = mass / mass.sum()
    obs = np.array([(draws == v).sum() for v in vals])
    assert stats.chisquare(obs, post * n).pvalue > 0.001


def test_estimate_flat_kernels():
    c = StickBreakingCache(3.0, id_source, np.random.default_rng(4))
    est = estimate_Cijk(c, lambda a: np.zeros(len(a)), 1e-10)
    assert est.gap < 1e-10
    assert est.c_lower == pytest.approx(1.0, abs=1e-9)


def test_estimate_two_atoms():
    c = fixed_cache([0.5, 0.5])
    f = np.array([0.25, 0.75])
    est = estimate_Cijk(c, lambda a: np.log(f[a]), 1e-10)
    assert est.c_lower == pytest.approx(0.5, abs=1e-15)
    assert est.gap == 0.0


def test_estimate_long_series():
    g = np.random.default_rng(8)
    vals = g.random(1 << 21)
    c = StickBreakingCache(20.0, lambda n, r: r.integers(0, vals.size, n), np.random.default_rng(6))
    est = estimate_Cijk(c, lambda a: np.log(vals[a]), 1e-10)
    # independent long truncation from the same seed
    c2 = StickBreakingCache(20.0, lambda n, r: r.integers(0, vals.size, n), np.random.default_rng(6))
    c2.ensure(1_000_000)
    brute = float(np.sum(c2.sticks * vals[c2.atoms]))
    assert abs(1 / est.c_lower - 1 / brute) < 1e-9
    with pytest.raises(DomainError):
        estimate_Cijk(c, lambda a: np.zeros(len(a)), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.2, 50.0))
def test_bounds_monotone_with_exact_gap(seed, conc):
    vals = np.random.default_rng(seed).random(4096)
    c = StickBreakingCache(conc, lambda n, r: r.integers(0, 4096, n), np.random.default_rng(seed),
                           chunk=16)
    prev = -1.0
    for _ in range(4):
        c.grow()
        lo, hi = c_bounds(c, lambda a: np.log(vals[a]))
        assert lo >= prev
        assert hi - lo == pytest.approx(1.0 - c.sticks.sum(), abs=1e-12)
        prev = lo


def _fresh_counter():
    nxt = [1000]

    def fresh(n, g):
        out = np.arange(nxt[0], nxt[0] + n)
        nxt[0] += n
        return out
    return fresh


def test_h_level_empty_counts_always_fresh():
    hc = h_cache([], [], 2.0, _fresh_counter(), np.random.default_rng(0))
    draws = [h_level_draw(hc, np.random.default_rng(s)) for s in range(200)]
    assert min(draws) >= 1000


def test_h_level_point_mass_limit():
    hc = h_cache([5], [5], 1e-9, _fresh_counter(), np.random.default_rng(0))
    g = np.random.default_rng(1)
    assert all(h_level_draw(hc, g) == 5 for _ in range(2000))


def test_h_level_mixture_weight():
    # alpha_H = n = 3 on one atom: half the mass goes to fresh draws
    hc = h_cache([5], [3], 3.0, _fresh_counter(), np.random.default_rng(0))
    extend_gap(hc, 1e-12)
    fresh_mass = hc.sticks[hc.atoms != 5].sum()
    # the realized measure is random; average the fresh mass over many caches
    masses = []
    for s in range(400):
        c = h_cache([5], [3], 3.0, _fresh_counter(), np.random.default_rng(s))
        extend_gap(c, 1e-12)
        masses.append(c.sticks[c.atoms != 5].sum())
    m = np.mean(masses)
    se = np.std(masses) / np.sqrt(len(masses))
    assert abs(m - 0.5) < 3 * se
    assert 0 < fresh_mass < 1


def _hsrc(atom_id):
    return h_cache([atom_id], [1], 1e-12, _fresh_counter(), np.random.default_rng(99))


def test_g0_empty_counts_draw_from_h():
    gc = g0_cache([], [], 1.0, _hsrc(77), np.random.default_rng(0))
    g = np.random.default_rng(1)
    assert all(g0_mean_measure_draw(gc, g) == 77 for _ in range(500))


def test_g0_counts_categorical():
    n = 100_000
    g = np.random.default_rng(3)
    draws = []
    # average over cache realizations to get the mean measure
    for s in range(n // 500):
        gc = g0_cache([1, 2], [3, 1], 1e-12, _hsrc(77), np.random.default_rng(s))
        draws += [g0_mean_measure_draw(gc, g) for _ in range(500)]
    draws = np.array(draws)
    f1 = np.mean(draws == 1)
    assert np.all(np.isin(draws, [1, 2]))
    assert abs(f1 - 0.75) < 3 * np.sqrt(0.75 * 0.25 / (n // 500)) + 0.01


def test_g0_equal_masses():
    g = np.random.default_rng(5)
    hits = []
    for s in range(4000):
        gc = g0_cache([1], [2], 2.0, _hsrc(77), np.random.default_rng(s))
        hits.append(g0_mean_measure_draw(gc, g) == 1)
    p = np.mean(hits)
    assert abs(p - 0.5) < 3 * np.sqrt(0.25 / len(hits))


def test_polya_step_fresh_probability():
    g = np.random.default_rng(0)
    n = 100_000
    fresh = sum(polya_step_p([0.3], lambda r: -1.0, 1.0, g) == -1.0 for _ in range(n))
    assert abs(fresh / n - 0.5) < 3 * np.sqrt(0.25 / n)


def test_polya_huge_alpha_all_fresh():
    g = np.random.default_rng(0)
    _, labels = polya_sequence(30, lambda r: r.random(), 1e15, g)
    assert labels.max() + 1 == 30


def test_polya_first_draw_from_g0():
    g = np.random.default_rng(0)
    assert polya_step_p([], lambda r: "fresh", 1e-9, g) == "fresh"


def test_crp_labels_first_occurrence():
    g = np.random.default_rng(0)
    lab = crp_labels(40, 2.0, g.random(40), g.random(40))
    assert lab[0] == 0
    assert np.all(lab <= np.maximum.accumulate(np.r_[-1, lab[:-1]]) + 1)

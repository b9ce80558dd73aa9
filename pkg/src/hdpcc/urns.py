"""Stick-breaking caches, retrospective posterior draws and Polya urn steps."""
from collections import namedtuple

import numpy as np

from . import _kernels as kern
from .errors import DomainError, TruncationError
from .rng import beta1

MAX_ATOMS = 10_000_000

CEstimate = namedtuple("CEstimate", "c_lower log_c_lower gap K")


class StickBreakingCache:
    """Lazily grown realization sum_l w_l delta_{atom_l} of a Dirichlet process.

    Sticks are V_l ~ Beta(1, concentration); `atom_source(n, rng)` returns n
    atoms (ids or vectors) drawn iid from the mean measure. Growth only
    appends, and always in canonical chunks (max(chunk, K) atoms), so the
    realization is a deterministic function of the rng seed.
    """

    def __init__(self, concentration, atom_source, rng, *, v_source=None,
                 chunk=1024, max_atoms=MAX_ATOMS):
        if not concentration > 0 or not np.isfinite(concentration):
            raise DomainError(f"concentration must be positive and finite, got {concentration}")
        self.concentration = float(concentration)
        self.atom_source = atom_source
        self.v_source = v_source
        self.rng = rng
        self.chunk = int(chunk)
        self.max_atoms = int(max_atoms)
        self._atoms = []
        self.sticks = np.empty(0)
        self.cumulative = np.empty(0)
        self.remaining = np.empty(0)
        self._atom_arr = None

    @property
    def K(self):
        return self.sticks.shape[0]

    @property
    def gap(self):
        """1 - sum of materialized sticks, computed as a product (no cancellation)."""
        return float(self.remaining[-1]) if self.K else 1.0

    @property
    def atoms(self):
        if self._atom_arr is None:
            self._atom_arr = np.concatenate(self._atoms) if self._atoms else np.empty(0, np.int64)
        return self._atom_arr

    def extend(self, n):
        if n <= 0:
            return self
        if self.K + n > self.max_atoms:
            raise TruncationError(f"stick cache exceeded {self.max_atoms} atoms "
                                  f"(concentration {self.concentration:.3g})")
        if self.v_source is not None:
            V = np.asarray(self.v_source(n, self.rng), dtype=float)
        else:
            V = beta1(self.rng.random(n), self.concentration)
        rem0 = self.gap
        rem = rem0 * np.cumprod(1.0 - V)
        before = np.concatenate([[rem0], rem[:-1]])
        w = V * before
        c0 = self.cumulative[-1] if self.K else 0.0
        cum = c0 + np.cumsum(w)
        atoms = np.asarray(self.atom_source(n, self.rng))
        self.sticks = np.concatenate([self.sticks, w])
        self.cumulative = np.concatenate([self.cumulative, cum])
        self.remaining = np.concatenate([self.remaining, rem])
        self._atoms.append(atoms)
        self._atom_arr = None
        return self

    def grow(self):
        return self.extend(max(self.chunk, self.K))

    def aggregate(self):
        """(ids, W, cumW): stick mass per distinct atom id in order of first appearance."""
        if getattr(self, "_agg_K", -1) != self.K:
            atoms = self.atoms
            u, first, inv = np.unique(atoms, return_index=True, return_inverse=True)
            order = np.argsort(first, kind="stable")
            W = np.bincount(inv, weights=self.sticks, minlength=u.size)[order]
            self._agg = (u[order].astype(np.int64), W, np.cumsum(W))
            self._agg_K = self.K
        return self._agg

    def ensure(self, K):
        while self.K < K:
            self.grow()
        return self


def stick_extend(cache, until):
    """Grow until the cumulative stick mass reaches `until` (< 1)."""
    if not until < 1:
        raise DomainError("cumulative target must be below 1")
    while cache.K == 0 or cache.cumulative[-1] < until:
        cache.grow()
    return cache


def extend_gap(cache, eps):
    while cache.gap >= eps:
        cache.grow()
    return cache


def prior_draw(cache, rng=None, u=None):
    """Index of an atom drawn from the cached measure itself."""
    if u is None:
        u = rng.random()
    while True:
        if cache.K:
            t = kern.prior_pick(cache.cumulative, cache.K, u)
            if t >= 0:
                return int(t)
        cache.grow()


class _LogKernel:
    """Incrementally evaluated log kernels for the atoms of one cache."""

    def __init__(self, cache, logf):
        self.cache = cache
        self.logf = logf
        self.vals = np.empty(0)

    def update(self):
        K = self.cache.K
        if self.vals.shape[0] < K:
            new = np.asarray(self.logf(self.cache.atoms[self.vals.shape[0]:K]), dtype=float)
            self.vals = np.concatenate([self.vals, new])
        return self.vals


def _prefix(cache, ll):
    m = float(np.max(ll))
    S = np.cumsum(cache.sticks * np.exp(ll - m))
    return m, S


def retro_posterior_draw(cache, logf, rng=None, u=None, log_bound=0.0):
    """Exact draw from the posterior sum_a w_a f(atom_a) delta_a / c.

    `logf` maps an array of atoms to log kernel values, which must not
    exceed `log_bound` (0 for likelihoods bounded by 1). The cache grows
    until a single index is certified by the bounds c_l(K) <= c <= c_u(K).
    Returns (index, atom).
    """
    if u is None:
        u = rng.random()
    lk = _LogKernel(cache, logf)
    while True:
        if cache.K:
            ll = lk.update()
            m, S = _prefix(cache, ll)
            log_tail = np.log(cache.gap) + log_bound - m if cache.gap > 0 else -np.inf
            t = kern.retro_pick(S, cache.K, log_tail, u)
            if t >= 0:
                return int(t), cache.atoms[t]
        cache.grow()


def retro_value_draw(cache, logf, rng=None, u=None, log_bound=0.0):
    """Exact posterior draw of an atom *value* using stick mass aggregated per value.

    Values are ordered by first appearance; unbuilt mass may belong to any
    value, which the bracket accounts for. Same law over values as
    retro_posterior_draw, far cheaper when atoms repeat.
    """
    if u is None:
        u = rng.random()
    while True:
        if cache.K:
            ids, W, _ = cache.aggregate()
            ll = np.asarray(logf(ids), dtype=float)
            m = float(np.max(ll))
            S = np.cumsum(W * np.exp(ll - m))
            log_tail = np.log(cache.gap) + log_bound - m if cache.gap > 0 else -np.inf
            v = kern.value_pick(S, ids.size, log_tail, u)
            if v >= 0:
                return ids[v]
        cache.grow()


def estimate_Cijk(cache, logf, eps_trunc):
    """c_l(K) = sum_{a<=K} w_a f_a once the unbuilt stick mass is below eps_trunc.

    The normalizing constant C of the posterior is approximated by 1/c_l(K);
    the achieved gap bounds c_u - c_l.
    """
    if not eps_trunc > 0:
        raise DomainError("eps_trunc must be positive")
    extend_gap(cache, eps_trunc)
    ll = _LogKernel(cache, logf).update()
    m, S = _prefix(cache, ll)
    log_c = float(np.log(S[-1]) + m)
    return CEstimate(float(np.exp(log_c)), log_c, cache.gap, cache.K)


def c_bounds(cache, logf, log_bound=0.0):
    """(c_l(K), c_u(K)) for the current cache size."""
    ll = _LogKernel(cache, logf).update()
    cl = float(np.sum(cache.sticks * np.exp(ll)))
    return cl, cl + cache.gap * np.exp(log_bound)


# --- mean-measure caches for the three-level hierarchy -----------------------

def h_cache(eta_ids, eta_counts, alpha_H, fresh, rng, *, chunk=1024, max_atoms=MAX_ATOMS):
    """Cache for H_k given its posterior: DP(alpha_H + n, (alpha_H Ht + sum n_s delta_s)/(.)).

    `fresh(n, rng)` returns ids of n new base-measure draws.
    """
    eta_ids = np.asarray(eta_ids, dtype=np.int64)
    eta_counts = np.asarray(eta_counts, dtype=float)
    n_tot = float(eta_counts.sum())
    conc = alpha_H + n_tot
    p_fresh = alpha_H / conc
    ccum = np.cumsum(eta_counts)

    def source(n, g):
        b = g.random(n)
        sel = g.random(n)
        out = np.empty(n, np.int64)
        isnew = b < p_fresh
        k = int(isnew.sum())
        if k:
            out[isnew] = fresh(k, g)
        if k < n:
            idx = np.searchsorted(ccum, sel[~isnew] * n_tot, side="right")
            out[~isnew] = eta_ids[np.minimum(idx, len(eta_ids) - 1)]
        return out

    return StickBreakingCache(conc, source, rng, chunk=chunk, max_atoms=max_atoms)


def g0_cache(xi_ids, xi_counts, alpha_G0, hcache, rng, *, chunk=1024, max_atoms=MAX_ATOMS):
    """Cache for G0_jk: DP(alpha_G0 + n, (alpha_G0 H_k + sum n_l delta_xi_l)/(.)).

    The H_k branch draws from the shared cache `hcache`, growing it if needed.
    """
    xi_ids = np.asarray(xi_ids, dtype=np.int64)
    xi_counts = np.asarray(xi_counts, dtype=float)
    n_tot = float(xi_counts.sum())
    conc = alpha_G0 + n_tot
    p_h = alpha_G0 / conc
    ccum = np.cumsum(xi_counts)

    def source(n, g):
        b = g.random(n)
        sel = g.random(n)
        out = np.empty(n, np.int64)
        ish = b < p_h
        if ish.any():
            uh = sel[ish]
            while hcache.K == 0 or uh.max() > hcache.cumulative[-1]:
                hcache.grow()
            idx = np.searchsorted(hcache.cumulative, uh)
            out[ish] = hcache.atoms[idx]
        if not ish.all():
            idx = np.searchsorted(ccum, sel[~ish] * n_tot, side="right")
            out[~ish] = xi_ids[np.minimum(idx, len(xi_ids) - 1)]
        return out

    return StickBreakingCache(conc, source, rng, chunk=chunk, max_atoms=max_atoms)


def h_level_draw(hcache, rng=None, u=None):
    """One draw from the instantiated H_k (marginally from its mean measure)."""
    t = prior_draw(hcache, rng, u)     # may grow the cache, so index afterwards
    return hcache.atoms[t]


def g0_mean_measure_draw(gcache, rng=None, u=None):
    t = prior_draw(gcache, rng, u)
    return gcache.atoms[t]


# --- level-one Polya urn ------------------------------------------------------

def polya_step_p(history, g0_draw, alpha, rng):
    """Next draw of the urn: fresh from the G0 branch w.p. alpha/(alpha+m-1),
    else a uniformly chosen earlier draw."""
    m1 = len(history)
    if m1 == 0 or rng.random() < alpha / (alpha + m1):
        return g0_draw(rng)
    return history[rng.integers(m1)]


def polya_sequence(M, g0_draw, alpha, rng):
    """M urn draws with their table labels (first-occurrence order)."""
    draws, labels = [], []
    for m in range(M):
        if m == 0 or rng.random() < alpha / (alpha + m):
            draws.append(g0_draw(rng))
            labels.append(max(labels, default=-1) + 1)
        else:
            c = rng.integers(m)
            draws.append(draws[c])
            labels.append(labels[c])
    return draws, np.array(labels)


def crp_labels(n, alpha, u_new, u_pick):
    """Sequential Chinese restaurant seating from supplied uniforms."""
    labels = np.empty(n, np.int64)
    sizes = []
    for x in range(n):
        if x == 0 or u_new[x] * (alpha + x) < alpha:
            labels[x] = len(sizes)
            sizes.append(1)
        else:
            c = np.searchsorted(np.cumsum(sizes), u_pick[x] * x, side="right")
            c = min(int(c), len(sizes) - 1)
            labels[x] = c
            sizes[c] += 1
    return labels

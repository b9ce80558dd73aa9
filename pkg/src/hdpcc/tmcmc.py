"""Block update of the precision hyperparameters by transformation-based MCMC.

The target is prior x the three Polya urn likelihoods implied by the current
seating: rows at tables inside each (i, j, k), level-one tables at G0 tables
inside each (j, k), and G0 tables at distinct values inside each group k.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, NumericError
from .model import alphas


@dataclass
class TmcmcConfig:
    mix: float = 0.5            # probability of an additive move
    add_scale: float = 0.05
    mult_scale: float = 0.05    # u ~ U(-a, a), eta = exp(u)
    signs: Optional[np.ndarray] = None   # fixed direction signs; random when None
    steps: int = 1
    jacobian: bool = True       # False only to demonstrate the biased sampler

    def __post_init__(self):
        if not 0 <= self.mix <= 1:
            raise DomainError("mix probability must lie in [0,1]")
        if not (np.all(np.asarray(self.add_scale) > 0) and self.mult_scale > 0):
            raise DomainError("step scales must be positive")


@dataclass
class Bounds:
    mu: tuple = (0.0, 1.0)
    beta: tuple = (-1.0, 1.0)

    def arrays(self, d):
        lo = np.concatenate([[self.mu[0]], np.full(d, self.beta[0])] * 3)
        hi = np.concatenate([[self.mu[1]], np.full(d, self.beta[1])] * 3)
        return lo, hi


def ewens_loglik(alpha, n_items, n_blocks, const=0.0):
    """log of the sequential urn probability of a partition.

    sum over items 2..n of log(alpha or block size)/(alpha + index - 1);
    `const` carries the alpha-free sum of log Gamma(block sizes).
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(alpha)) or np.any(alpha <= 0):
        raise NumericError("urn concentration must be positive and finite")
    n_items = np.asarray(n_items)
    n_blocks = np.asarray(n_blocks)
    val = np.where(n_items > 0,
                   (n_blocks - 1) * np.log(alpha) - (gammaln(alpha + n_items) - gammaln(alpha + 1)),
                   0.0)
    return float(np.sum(val) + const)


@dataclass
class UrnSummary:
    """Sufficient statistics of the three seatings for the hyperparameter update."""
    tau: np.ndarray       # (N, J) tables per triplet
    M: int
    const_G: float
    n_g0: np.ndarray      # (2, J) level-one tables per (j, k)
    r_g0: np.ndarray      # (2, J) G0 tables per (j, k)
    const_G0: float
    r_h: np.ndarray       # (2,) G0 tables per group
    s_h: np.ndarray       # (2,) distinct values per group
    const_H: float
    group: np.ndarray

    @classmethod
    def from_state(cls, state, group):
        N, J, M = state.labels.shape
        tau = state.labels.max(axis=2) + 1
        flat = (np.arange(N * J)[:, None] * M + state.labels.reshape(N * J, M)).ravel()
        sizes = np.bincount(flat, minlength=N * J * M)
        const_G = float(np.sum(gammaln(sizes[sizes > 0])))
        n_g0 = np.zeros((2, J), np.int64)
        r_g0 = np.zeros((2, J), np.int64)
        r_h = np.zeros(2, np.int64)
        s_h = np.zeros(2, np.int64)
        const_G0 = const_H = 0.0
        for k in (0, 1):
            rows = group == k
            vals_k = []
            for j in range(J):
                seat = state.seat[rows, j][state.tval[rows, j] >= 0]
                cnt = np.bincount(seat, minlength=len(state.g0_val[k * J + j]))
                n_g0[k, j] = seat.size
                r_g0[k, j] = cnt.size
                const_G0 += float(np.sum(gammaln(cnt[cnt > 0])))
                vals_k.append(state.g0_val[k * J + j])
            allv = np.concatenate(vals_k) if vals_k else np.empty(0, np.int64)
            _, cnt = np.unique(allv, return_counts=True)
            r_h[k] = allv.size
            s_h[k] = cnt.size
            const_H += float(np.sum(gammaln(cnt)))
        return cls(tau, M, const_G, n_g0, r_g0, const_G0, r_h, s_h, const_H, group)

    def loglik(self, level, hp, env):
        aG, aG0, aH = alphas(hp, env)
        if level == "G":
            a = np.broadcast_to(aG[:, None], self.tau.shape)
            return ewens_loglik(a, np.full(self.tau.shape, self.M), self.tau, self.const_G)
        if level == "G0":
            a = np.broadcast_to(aG0[:, None], self.n_g0.shape)
            return ewens_loglik(a, self.n_g0, self.r_g0, self.const_G0)
        if level == "H":
            return ewens_loglik(np.full(2, aH), self.r_h, self.s_h, self.const_H)
        raise DomainError(f"unknown level {level!r}")

    def total(self, hp, env):
        return sum(self.loglik(lv, hp, env) for lv in ("G", "G0", "H"))


def urn_loglik(level, state, hp, env, group):
    return UrnSummary.from_state(state, group).loglik(level, hp, env)


def urn_walk_loglik(labels_seq, alpha):
    """Plain sequential walk over one label sequence; used as an oracle."""
    counts = {}
    s = 0.0
    for x, lab in enumerate(labels_seq):
        if x > 0:
            num = alpha if lab not in counts else counts[lab]
            s += np.log(num / (alpha + x))
        counts[lab] = counts.get(lab, 0) + 1
    return s


# --- generic transformation moves --------------------------------------------

def propose(x, cfg, rng):
    """Return (x_new, log_jacobian, kind)."""
    q = x.shape[0]
    if cfg.signs is not None:
        b = np.asarray(cfg.signs, dtype=float)
    else:
        b = np.where(rng.random(q) < 0.5, -1.0, 1.0)
    if rng.random() < cfg.mix:
        eps = abs(rng.standard_normal())
        return x + b * np.asarray(cfg.add_scale) * eps, 0.0, "add"
    u = rng.uniform(-cfg.mult_scale, cfg.mult_scale)
    return x * np.exp(u * b), float(u * b.sum()), "mult"


def log_accept_ratio(lp_new, lp_old, log_jac, jacobian=True):
    if not np.isfinite(lp_new):
        return -np.inf
    return lp_new - lp_old + (log_jac if jacobian else 0.0)


def tmcmc_step(x, lp, logpost, cfg, rng, lo, hi):
    """One Metropolis step; proposals outside [lo, hi] are rejected outright."""
    xn, lj, _ = propose(x, cfg, rng)
    if np.any(xn < lo) or np.any(xn > hi):
        return x, lp, False
    lpn = logpost(xn)
    r = log_accept_ratio(lpn, lp, lj, cfg.jacobian)
    if np.log(rng.random()) < r:
        return xn, lpn, True
    return x, lp, False


def tmcmc_chain(x0, logpost, cfg, rng, lo, hi, n):
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    lp = logpost(x)
    out = np.empty((n, x.shape[0]))
    acc = 0
    for t in range(n):
        x, lp, a = tmcmc_step(x, lp, logpost, cfg, rng, lo, hi)
        acc += a
        out[t] = x
    return out, acc / max(n, 1)


def tmcmc_block_update(state, env, group, cfg, rng, bounds=Bounds(), summary=None):
    """cfg.steps block moves of all 3 + 3d hyperparameters. Returns (hp, n_accepted)."""
    summary = summary or UrnSummary.from_state(state, group)
    hp = state.hp
    lo, hi = bounds.arrays(hp.d)

    def logpost(v):
        try:
            return summary.total(hp.with_vector(v), env)
        except NumericError:
            return -np.inf

    x = hp.vector()
    lp = logpost(x)
    n_acc = 0
    for _ in range(cfg.steps):
        x, lp, a = tmcmc_step(x, lp, logpost, cfg, rng, lo, hi)
        n_acc += a
    return hp.with_vector(x), n_acc

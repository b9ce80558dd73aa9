"""Parameter types, the Bernoulli kernel and the log-linear precision maps."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError, ShapeError

PCLAMP = 1e-12
LEVELS = ("G", "G0", "H")


def clamp_p(p):
    return np.clip(p, PCLAMP, 1.0 - PCLAMP)


def _check_p(p):
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0.0)) or np.any(~(p < 1.0)):
        raise DomainError(f"probability outside (0,1): {p}")
    return p


def log_bernoulli_kernel(x, p):
    """log f(x|p) for an allele pair x (last axis of size 2)."""
    p = _check_p(p)
    x = np.asarray(x)
    n1 = x[..., 0] + x[..., 1]
    return n1 * np.log(p) + (2 - n1) * np.log1p(-p)


def bernoulli_kernel(x, p):
    return np.exp(log_bernoulli_kernel(x, p))


def locus_product_likelihood(x, p, loci=None):
    """Sum of per-locus log kernels.

    x: (L, 2) allele pairs, p: (L,) probabilities, loci: index array or slice
    (0-based); None means every locus. An empty selection gives 0.
    """
    x = np.asarray(x)
    p = np.asarray(p, dtype=float)
    if loci is not None:
        x = x[loci]
        p = p[loci]
    if np.size(p) == 0:
        return 0.0
    return float(np.sum(log_bernoulli_kernel(x, p)))


@dataclass(frozen=True)
class BaseMeasure:
    """Independent Beta(nu1, nu2) on each of L loci."""
    nu1: float = 1.0
    nu2: float = 1.0

    def __post_init__(self):
        if not (self.nu1 > 0 and self.nu2 > 0):
            raise DomainError("base measure shapes must be positive")

    def draw(self, rng, n, L):
        return clamp_p(rng.beta(self.nu1, self.nu2, size=(n, L)))


@dataclass
class HyperParams:
    mu_G: float
    beta_G: np.ndarray
    mu_G0: float
    beta_G0: np.ndarray
    mu_H: float
    beta_H: np.ndarray
    # (scale, offset) for G, G0, H
    consts: tuple = ((1.0, 0.0), (1.0, 0.0), (1.0, 0.0))

    def __post_init__(self):
        for name in ("beta_G", "beta_G0", "beta_H"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if not (self.beta_G.shape == self.beta_G0.shape == self.beta_H.shape):
            raise ShapeError("beta vectors must share dimension d")

    @property
    def d(self):
        return self.beta_G.shape[0]

    @classmethod
    def default(cls, d, consts=((1.0, 0.0),) * 3):
        z = np.zeros(d)
        return cls(0.5, z, 0.5, z.copy(), 0.5, z.copy(), tuple(map(tuple, consts)))

    def vector(self):
        return np.concatenate([[self.mu_G], self.beta_G, [self.mu_G0], self.beta_G0,
                               [self.mu_H], self.beta_H])

    def with_vector(self, v):
        d = self.d
        v = np.asarray(v, dtype=float)
        return HyperParams(v[0], v[1:1 + d], v[1 + d], v[2 + d:2 + 2 * d],
                           v[2 + 2 * d], v[3 + 2 * d:3 + 3 * d], self.consts)

    def mu_beta(self, level):
        if level == "G":
            return self.mu_G, self.beta_G
        if level == "G0":
            return self.mu_G0, self.beta_G0
        if level == "H":
            return self.mu_H, self.beta_H
        raise DomainError(f"unknown precision level {level!r}")

    def equals(self, other):
        return np.array_equal(self.vector(), other.vector()) and self.consts == other.consts


def _alpha(level, hp, e):
    mu, beta = hp.mu_beta(level)
    scale, offset = hp.consts[LEVELS.index(level)]
    with np.errstate(over="ignore", invalid="ignore"):
        a = scale * np.exp(offset + mu + np.asarray(e) @ beta)
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise NumericError(f"precision alpha_{level} is not finite and positive")
    return a


def precision(level, hp, env, i=None, k=None):
    """alpha for one level: G needs (i, k) with i indexing within group k,
    G0 needs k, H needs neither."""
    if level == "G":
        if i is None or k is None:
            raise DomainError("level G needs (i, k)")
        return float(_alpha("G", hp, env.group(k)[i]))
    if level == "G0":
        if k is None:
            raise DomainError("level G0 needs k")
        return float(_alpha("G0", hp, env.group_mean[k]))
    if level == "H":
        return float(_alpha("H", hp, env.grand_mean))
    raise DomainError(f"unknown precision level {level!r}")


def alphas(hp, env):
    """All precisions at once: (alpha_G per individual, alpha_G0 per group, alpha_H)."""
    return (_alpha("G", hp, env.E), _alpha("G0", hp, env.group_mean),
            float(_alpha("H", hp, env.grand_mean)))


@dataclass
class AlleleProbMatrix:
    """The M probability rows of one (i, j, k) triplet.

    Labels are 0-based and compact in first-occurrence order; z is 0-based.
    """
    p: np.ndarray
    labels: np.ndarray
    z: int
    tau: int = field(init=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        self.tau = int(np.unique(self.labels).size)

    def check(self):
        if np.any(self.p <= 0) or np.any(self.p >= 1):
            raise DomainError("row probabilities must lie in (0,1)")
        for t in range(self.tau):
            rows = self.p[self.labels == t]
            if not np.all(rows == rows[0]):
                raise DomainError(f"rows of dish {t} differ")
        return True

    def loglik(self, x, loci=None):
        return locus_product_likelihood(x, self.p[self.z], loci)

"""Synthetic case-control datasets: the null model and five structured regimes.

Regimes:
  1  gene-gene and gene-environment dependence
  2  null (identical to generate_null)
  3  environment-only case status
  4  genetic and gene-gene effects, environment decoupled
  5  independent additive genetic and environmental scores
"""
import os
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .data.config import RunConfig
from .data.genotypes import (EnvMatrix, GenotypeTensor, write_environment, write_genotypes)
from .errors import DomainError, ValidationError
from .model import BaseMeasure, clamp_p

MIXING = (0.1, 0.4, 0.2, 0.15, 0.15)
DEFAULT_EFFECTS = {
    "dpl_shift": 0.8,       # planted locus: cases q + shift * (1 - q), controls q * (1 - shift)
    "env_shift": 1.5,       # mean shift of case covariates (regime 3)
    "env_beta": 1.0,        # covariate tilt of sub-population membership (regime 1)
    "gene_weight": 1.0,     # regime 5 genetic score weight
    "env_weight": 1.0,      # regime 5 environmental score weight
    "noise": 0.5,
    "mixing": MIXING,
}


@dataclass
class Dims:
    J: int
    Lj: tuple
    N0: int
    N1: int
    M: int = 10
    d: int = 1

    def __post_init__(self):
        self.Lj = tuple(int(x) for x in np.broadcast_to(np.atleast_1d(self.Lj), (self.J,)))
        if self.J < 1 or min(self.Lj) < 1 or self.N0 < 1 or self.N1 < 1 or self.d < 1 or self.M < 2:
            raise ValidationError(f"invalid dimensions {self}")

    @property
    def N(self):
        return self.N0 + self.N1

    @property
    def L(self):
        return max(self.Lj)


def parse_dims(text):
    """`J=2,L=40,N0=30,N1=30[,M=10][,d=1]`; L may list one value per gene as 30:40."""
    kw = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ValidationError(f"bad dimension item {part!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        try:
            if k == "L":
                kw["Lj"] = tuple(int(x) for x in v.split(":"))
            elif k in ("J", "N0", "N1", "M", "d"):
                kw[k] = int(v)
            else:
                raise ValidationError(f"unknown dimension {k!r}")
        except ValueError:
            raise ValidationError(f"dimension {k} needs an integer, got {v!r}") from None
    missing = {"J", "Lj", "N0", "N1"} - kw.keys()
    if missing:
        raise ValidationError(f"missing dimensions: {', '.join(sorted(missing))}")
    if len(kw["Lj"]) not in (1, kw["J"]):
        raise ValidationError("L needs one value or one per gene")
    return Dims(**kw)


@dataclass
class Dataset:
    tensor: GenotypeTensor
    env: EnvMatrix
    regime: int
    truth: dict = field(default_factory=dict)     # hypothesis family -> should reject
    dpl: dict = field(default_factory=dict)       # gene index -> planted locus (0-based)
    effects: dict = field(default_factory=dict)

    def write(self, out):
        os.makedirs(out, exist_ok=True)
        write_genotypes(self.tensor, os.path.join(out, "genotypes.tsv"))
        write_environment(self.env, self.tensor, os.path.join(out, "environment.csv"))
        with open(os.path.join(out, "truth.csv"), "w") as f:
            f.write("key,value\n")
            f.write(f"regime,{self.regime}\n")
            for k, v in self.truth.items():
                f.write(f"reject_{k},{int(v)}\n")
            for j, r in sorted(self.dpl.items()):
                f.write(f"dpl_{self.tensor.genes[j]},{r + 1}\n")


def _ids(N0, N1):
    w = len(str(N0 + N1))
    return [f"ind{n:0{w}d}" for n in range(N0 + N1)]


def _tensor(P, dims, rng):
    """Alleles ~ Bernoulli(P) on observed loci; P has shape (N, J, L)."""
    al = (rng.random(P.shape + (2,)) < P[..., None]).astype(np.int8)
    group = np.r_[np.zeros(dims.N0, int), np.ones(dims.N1, int)]
    return GenotypeTensor.from_arrays(al, dims.Lj, group, ids=_ids(dims.N0, dims.N1))


def urn_vectors(M, L, alpha, base, rng):
    """M draws from the Polya urn with base measure `base` and precision alpha."""
    out = np.empty((M, L))
    for m in range(M):
        if m == 0 or rng.random() * (alpha + m) < alpha:
            out[m] = base.draw(rng, 1, L)[0]
        else:
            out[m] = out[rng.integers(m)]
    return out


def null_alpha_H(config):
    mu = 0.5 * (config.mu_lower + config.mu_upper)
    return config.scale_H * np.exp(config.offset_H + mu)


def generate_null(dims, config=None, seed=0, alpha_H=None):
    """All regressions zero; each gene's M vectors come from the base-measure urn
    and cases share the control vectors."""
    config = config or RunConfig(M=dims.M)
    g = rngmod.stream(seed, 0, "simgen", 2)
    base = BaseMeasure(config.nu1, config.nu2)
    a = null_alpha_H(config) if alpha_H is None else alpha_H
    M = dims.M
    P = np.empty((dims.N, dims.J, dims.L))
    for j in range(dims.J):
        V = urn_vectors(M, dims.L, a, base, g)
        z = g.integers(M, size=dims.N)
        P[:, j] = V[z]
    tensor = _tensor(P, dims, g)
    env = EnvMatrix(g.standard_normal((dims.N, dims.d)), tensor.group)
    return tensor, env


def _subpop_vectors(S, dims, base, g):
    return base.draw(g, S * dims.J, dims.L).reshape(S, dims.J, dims.L)


def _plant(dims, g):
    return {j: int(g.integers(dims.Lj[j])) for j in range(dims.J)}


def _shift(q, s):
    return clamp_p(q + s * (1.0 - q))


def generate_regime(regime, dims, effects=None, seed=0, config=None):
    eff = dict(DEFAULT_EFFECTS)
    eff.update(effects or {})
    if regime not in (1, 2, 3, 4, 5):
        raise DomainError(f"unknown regime {regime!r}; expected 1..5")
    config = config or RunConfig(M=dims.M)
    if regime == 2:
        t, e = generate_null(dims, config, seed)
        return Dataset(t, e, 2, {"genes": False, "environment": False, "interaction": False},
                       {}, eff)
    g = rngmod.stream(seed, 0, "simgen", regime)
    base = BaseMeasure(config.nu1, config.nu2)
    mix = np.asarray(eff["mixing"], float)
    mix = mix / mix.sum()
    S = mix.size
    B = _subpop_vectors(S, dims, base, g)
    N, J = dims.N, dims.J
    case = np.r_[np.zeros(dims.N0, bool), np.ones(dims.N1, bool)]
    dpl = {}

    if regime in (1, 4):
        E = g.standard_normal((N, dims.d))
        if regime == 1:
            # covariates tilt sub-population membership (gene-environment)
            score = np.linspace(-1, 1, S)
            logits = np.log(mix)[None, :] + eff["env_beta"] * E[:, :1] * score[None, :]
            pr = np.exp(logits - logits.max(axis=1, keepdims=True))
            pr /= pr.sum(axis=1, keepdims=True)
            s = np.array([g.choice(S, p=p) for p in pr])
        else:
            s = g.choice(S, size=N, p=mix)
        # one membership for all genes (gene-gene dependence)
        P = B[s].copy()
        dpl = _plant(dims, g)
        for j, r in dpl.items():
            shift = eff["dpl_shift"]
            if regime == 1:
                shift = shift * 2.0 / (1.0 + np.exp(-eff["env_beta"] * E[case, 0]))
                shift = np.minimum(shift, 1.0)
            P[case, j, r] = _shift(P[case, j, r], shift)
            P[~case, j, r] = clamp_p(P[~case, j, r] * (1.0 - eff["dpl_shift"]))
        truth = {"genes": eff["dpl_shift"] != 0,
                 "environment": regime == 1 and eff["env_beta"] != 0,
                 "interaction": True}
    elif regime == 3:
        s = g.choice(S, size=(N, J), p=mix)
        P = B[s, np.arange(J)[None, :]]
        E = g.standard_normal((N, dims.d))
        E[case] += eff["env_shift"]
        truth = {"genes": False, "environment": eff["env_shift"] != 0, "interaction": False}
    else:
        # regime 5: liability from independent additive scores
        pool = 6 * N
        s = g.choice(S, size=(pool, J), p=mix)
        Pp = B[s, np.arange(J)[None, :]]
        dpl = _plant(dims, g)
        risk = {j: float(g.random() < 0.5) for j in dpl}
        Ep = g.standard_normal((pool, dims.d))
        al = (g.random(Pp.shape + (2,)) < Pp[..., None]).astype(np.int8)
        gen = np.zeros(pool)
        for j, r in dpl.items():
            x = al[:, j, r].sum(axis=1).astype(float)
            gen += (x - x.mean()) * (1 if risk[j] else -1)
        liab = (eff["gene_weight"] * gen + eff["env_weight"] * Ep[:, 0]
                + eff["noise"] * g.standard_normal(pool))
        thr = np.median(liab)
        ctrl = np.flatnonzero(liab <= thr)
        cas = np.flatnonzero(liab > thr)
        if ctrl.size < dims.N0 or cas.size < dims.N1:
            raise ValidationError("liability pool too small for the requested group sizes")
        pick = np.r_[g.choice(ctrl, dims.N0, replace=False), g.choice(cas, dims.N1, replace=False)]
        E = Ep[pick]
        al = al[pick]
        for j in range(J):
            al[:, j, dims.Lj[j]:] = 0
        group = case.astype(int)
        tensor = GenotypeTensor.from_arrays(al, dims.Lj, group, ids=_ids(dims.N0, dims.N1))
        truth = {"genes": eff["gene_weight"] != 0, "environment": eff["env_weight"] != 0,
                 "interaction": False}
        return Dataset(tensor, EnvMatrix(E, tensor.group), 5, truth, dpl, eff)

    tensor = _tensor(P, dims, g)
    return Dataset(tensor, EnvMatrix(E, tensor.group), regime, truth, dpl, eff)


def allele_frequencies(tensor, k):
    """(J, L) minor-allele frequency per locus within group k (padding -> nan)."""
    rows = tensor.group == k
    f = tensor.alleles[rows].mean(axis=(0, 3)).astype(float)
    f[~tensor.locus_mask] = np.nan
    return f

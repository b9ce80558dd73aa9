"""Test statistics, null calibration, verdicts and disease-locus scans."""
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logit

from . import _kernels as kern
from . import rng as rngmod
from .errors import CalibrationError, ShapeError, ValidationError
from .model import LEVELS, clamp_p

MIN_CALIBRATION_SAMPLES = 100
CENTRAL_PERCENTILE = 10.0
DPL_FRACTION = 0.02


# --- partitions ---------------------------------------------------------------

@dataclass
class Partition:
    labels: np.ndarray
    count: int = field(init=False)

    def __post_init__(self):
        lab = np.asarray(self.labels)
        _, first, inv = np.unique(lab, return_index=True, return_inverse=True)
        rank = np.empty(first.size, np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(first.size)
        self.labels = rank[inv.ravel()]
        self.count = int(first.size)

    def __len__(self):
        return self.labels.size


def cluster_distance(c1, c2):
    """max of the two directed mismatch fractions of the overlap table."""
    a = c1 if isinstance(c1, Partition) else Partition(c1)
    b = c2 if isinstance(c2, Partition) else Partition(c2)
    if len(a) != len(b):
        raise ShapeError(f"partitions of {len(a)} and {len(b)} items")
    if len(a) == 0:
        return 0.0
    return float(kern.contingency_distance(a.labels, b.labels, len(a), a.count, b.count))


def neighbor_radius(D):
    """10th percentile of the off-diagonal pairwise distances."""
    n = D.shape[0]
    if n < 2:
        return 0.0
    return float(np.percentile(D[np.triu_indices(n, 1)], CENTRAL_PERCENTILE))


def central_index(partitions, eps_c=None):
    """Index of the partition with the most others within eps_c; ties go to the smallest."""
    P = np.array([p.labels if isinstance(p, Partition) else Partition(p).labels
                  for p in partitions], np.int64)
    if P.shape[0] <= 1:
        return 0
    D = kern.pairwise_distances(P, int(P.max()) + 1)
    if eps_c is None:
        eps_c = neighbor_radius(D)
    counts = (D <= eps_c).sum(axis=1) - 1
    return int(np.argmax(counts))


def individual_partitions(state, rows):
    """Concatenate genes: item (j, m) carries label (j, t)."""
    lab = state.labels[rows]
    J, M = lab.shape[1], lab.shape[2]
    return (lab + (np.arange(J) * M)[None, :, None]).reshape(len(rows), J * M)


# --- per-sweep statistics -----------------------------------------------------------

def logit_pbar(state, i, j, Lj):
    """logit of the locus-averaged probability of every row of triplet (i, j)."""
    return logit(clamp_p(state.rows_p(i, j)[:, :Lj].mean(axis=1)))


@dataclass
class GeneStats:
    central: tuple
    d_hat: np.ndarray
    d_E: np.ndarray
    dpl: list

    @property
    def d_star(self):
        return float(self.d_hat.max())

    @property
    def d_star_E(self):
        return float(self.d_E.max())


def gene_statistics(state, model, dpl=True):
    t = model.tensor
    centrals = []
    for k in (0, 1):
        rows = np.flatnonzero(model.group == k)
        P = individual_partitions(state, rows)
        D = kern.pairwise_distances(P, t.J * state.labels.shape[2])
        eps = neighbor_radius(D)
        counts = (D <= eps).sum(axis=1) - 1
        centrals.append(int(rows[np.argmax(counts)]) if rows.size > 1 else int(rows[0]))
    i0, i1 = centrals
    J = t.J
    d_hat = np.empty(J)
    d_E = np.empty(J)
    per_locus = []
    for j in range(J):
        Lj = int(t.Lj[j])
        d_hat[j] = cluster_distance(state.labels[i0, j], state.labels[i1, j])
        d_E[j] = float(np.linalg.norm(logit_pbar(state, i0, j, Lj) - logit_pbar(state, i1, j, Lj)))
        if dpl:
            a = logit(state.rows_p(i0, j)[:, :Lj])
            b = logit(state.rows_p(i1, j)[:, :Lj])
            per_locus.append(np.sqrt(((a - b) ** 2).sum(axis=0)))
    return GeneStats((i0, i1), d_hat, d_E, per_locus)


def covariance_estimate(x1, x2):
    """(cov, corr, degenerate) of paired replicates."""
    x1 = np.asarray(x1, float)
    x2 = np.asarray(x2, float)
    if x1.size < 2:
        raise ValidationError("need at least 2 replicates")
    c = float(np.cov(x1, x2)[0, 1])
    s1, s2 = x1.std(ddof=1), x2.std(ddof=1)
    if s1 == 0 and s2 == 0:
        return 0.0, 0.0, True
    corr = c / (s1 * s2) if s1 > 0 and s2 > 0 else 0.0
    return c, float(corr), False


def replicate_logits(state, model, R):
    """(R, N, J) logit p-bar of the allocated row, each replicate redrawn from its
    full conditional given everything else (fresh caches per replicate)."""
    from .gibbs import TripletContext, build_caches, draw_row_value

    t = model.tensor
    work = state.copy()
    out = np.empty((R, t.N, t.J))
    for r in range(R):
        caches = build_caches(work, model, tag=("cov", r))
        g = rngmod.stream(state.seed, state.sweep, "cov-rows", r)
        for i in range(t.N):
            for j in range(t.J):
                ctx = TripletContext(work, model, caches, i, j)
                v = draw_row_value(ctx, int(work.z[i, j]), g)
                Lj = int(t.Lj[j])
                out[r, i, j] = logit(clamp_p(work.values.p[v, :Lj].mean()))
    return out


def interaction_covariance(state=None, model=None, i=0, j1=0, j2=1, R_cov=50, sampler=None,
                           replicates=None):
    """C(i, j1, j2, k): covariance across conditionally iid replicates.

    `sampler(r)` may replace the model replicates with any (x1, x2) source.
    Returns (cov, corr, degenerate).
    """
    if R_cov < 2:
        raise ValidationError("R_cov must be at least 2")
    if sampler is not None:
        pairs = np.array([sampler(r) for r in range(R_cov)], float)
        return covariance_estimate(pairs[:, 0], pairs[:, 1])
    if replicates is None:
        replicates = replicate_logits(state, model, R_cov)
    return covariance_estimate(replicates[:, i, j1], replicates[:, i, j2])


def sweep_statistics(state, model, dpl=True, covariance=False, r_cov=50):
    """Records (stat, indices, value) for one sweep."""
    t = model.tensor
    recs = []
    hp = state.hp
    for level in LEVELS:
        mu, beta = hp.mu_beta(level)
        recs.append((f"mu_{level}", (), mu))
        recs.extend((f"beta_{level}", (c,), b) for c, b in enumerate(beta))
    tau = state.tau
    recs.extend(("tau", (i, j), tau[i, j]) for i in range(t.N) for j in range(t.J))
    gs = gene_statistics(state, model, dpl)
    recs.extend(("central", (k,), gs.central[k]) for k in (0, 1))
    recs.extend(("d_hat", (j,), gs.d_hat[j]) for j in range(t.J))
    recs.extend(("d_E", (j,), gs.d_E[j]) for j in range(t.J))
    recs.append(("d_star", (), gs.d_star))
    recs.append(("d_star_E", (), gs.d_star_E))
    if dpl:
        for j, d in enumerate(gs.dpl):
            recs.extend(("dpl", (j, r), x) for r, x in enumerate(d))
    if covariance and t.J > 1:
        reps = replicate_logits(state, model, r_cov)
        for i in range(t.N):
            for j1 in range(t.J):
                for j2 in range(j1 + 1, t.J):
                    c, _, _ = covariance_estimate(reps[:, i, j1], reps[:, i, j2])
                    recs.append(("C", (i, j1, j2, int(model.group[i])), c))
    return recs


# --- calibration and tests ------------------------------------------------------------

# statistic -> transform giving the quantity whose small values support the null
HYPOTHESIS_STATS = {
    "d_star": np.asarray, "d_star_E": np.asarray, "d_hat": np.asarray, "d_E": np.asarray,
    "beta_G": np.abs, "beta_G0": np.abs, "beta_H": np.abs, "C": np.abs,
}


def stat_key(stat, idx):
    return stat if not idx else f"{stat}[{','.join(map(str, idx))}]"


def tested_series(traces):
    """(stat, idx) -> transformed posterior samples for every testable statistic."""
    out = {}
    for stat, fn in HYPOTHESIS_STATS.items():
        for idx, x in traces.series(stat).items():
            out[(stat, idx)] = fn(x)
    return out


def quantile_with_ties(x, q):
    """Linear-interpolation quantile eps plus the tie weight lam making
    P(x < eps) + lam * P(x == eps) = q on the calibration samples."""
    x = np.asarray(x, float)
    eps = float(np.quantile(x, q))
    lt = float(np.mean(x < eps))
    eq = float(np.mean(x == eps))
    lam = float(np.clip((q - lt) / eq, 0.0, 1.0)) if eq > 0 else 0.0
    return eps, lam


def null_probability(x, eps, lam=0.0):
    x = np.asarray(x, float)
    return float(np.mean(x < eps) + lam * np.mean(x == eps))


@dataclass
class Thresholds:
    values: dict            # (stat, idx) -> (eps, lam)
    q: float = 0.55

    def write(self, path):
        with open(path, "w") as f:
            f.write(f"# q={self.q!r}\nstatistic,indices,epsilon,tie_weight\n")
            for (stat, idx), (eps, lam) in sorted(self.values.items()):
                f.write(f"{stat},{'-' if not idx else ':'.join(map(str, idx))},{eps!r},{lam!r}\n")

    @classmethod
    def read(cls, path):
        from .errors import ParseError
        vals, q = {}, 0.55
        with open(path) as f:
            for n, line in enumerate(f, 1):
                line = line.strip()
                if line.startswith("# q="):
                    q = float(line[4:])
                    continue
                if not line or line.startswith("#") or line.startswith("statistic,"):
                    continue
                parts = line.split(",")
                if len(parts) not in (3, 4):
                    raise ParseError(f"{path}: expected statistic,indices,epsilon[,tie_weight]", n)
                try:
                    idx = () if parts[1] == "-" else tuple(int(x) for x in parts[1].split(":"))
                    eps = float(parts[2])
                    lam = float(parts[3]) if len(parts) == 4 else 0.0
                except ValueError:
                    raise ParseError(f"{path}: bad number", n) from None
                vals[(parts[0], idx)] = (eps, lam)
        return cls(vals, q)


def calibrate_thresholds(traces, q=0.55, min_samples=MIN_CALIBRATION_SAMPLES):
    """Per statistic, eps = q-quantile of its null posterior samples."""
    if not 0 < q < 1:
        raise ValidationError("quantile level must lie in (0,1)")
    series = tested_series(traces)
    if not series:
        raise CalibrationError("null traces hold no testable statistics")
    vals = {}
    for key, x in series.items():
        if x.size < min_samples:
            raise CalibrationError(f"{stat_key(*key)}: {x.size} samples, need {min_samples}")
        vals[key] = quantile_with_ties(x, q)
    return Thresholds(vals, q)


@dataclass
class TestRow:
    hypothesis: str
    statistic: str
    epsilon: float
    probability: float

    @property
    def verdict(self):
        return "accept" if self.probability > 0.5 else "reject"


def _hypothesis_name(stat, idx, genes):
    g = lambda j: genes[j] if genes else str(j)
    if stat == "d_star":
        return "no_gene_effect"
    if stat == "d_star_E":
        return "no_gene_effect_euclidean"
    if stat == "d_hat":
        return f"no_effect_gene_{g(idx[0])}"
    if stat == "d_E":
        return f"no_effect_gene_{g(idx[0])}_euclidean"
    if stat.startswith("beta_"):
        return f"{stat}_{idx[0] + 1}_zero"
    if stat == "C":
        return f"no_interaction_i{idx[0]}_{g(idx[1])}_{g(idx[2])}_k{idx[3]}"
    return stat_key(stat, idx)


INTERPRETATIONS = {
    (False, False, False): "genes not significant; no environmental effect detected",
    (False, False, True): "genes not significant; gene-gene interaction present without "
                          "environmental modulation, unrelated to disease status",
    (False, True, False): "genes not significant; environment alters all genes without "
                          "affecting disease status",
    (False, True, True): "genes not significant; environment alters genes and their "
                         "interaction, not in a way responsible for disease status",
    (True, False, False): "genes significant; disease of purely genetic nature",
    (True, False, True): "genes significant; disease status attributable to gene-gene "
                         "interaction with no environmental role",
    (True, True, False): "genes significant and environment significant; marginal gene "
                         "effects drive disease status",
    (True, True, True): "genes significant and environment significant; environment "
                        "influences gene-gene interaction which affects disease status",
}


@dataclass
class TestReport:
    rows: list
    tau_hist: dict = field(default_factory=dict)    # (k, j) -> counts over tau = 1..M
    genes: list = None

    def row(self, statistic):
        for r in self.rows:
            if r.statistic == statistic:
                return r
        raise KeyError(statistic)

    @property
    def flags(self):
        genes = any(r.verdict == "reject" for r in self.rows if r.statistic == "d_star")
        env = any(r.verdict == "reject" for r in self.rows if r.statistic.startswith("beta_"))
        inter = any(r.verdict == "reject" for r in self.rows if r.statistic.startswith("C["))
        return genes, env, inter

    @property
    def interpretation(self):
        return INTERPRETATIONS[self.flags]

    def csv(self):
        lines = ["hypothesis,statistic,epsilon,posterior_prob,verdict"]
        lines += [f"{r.hypothesis},{r.statistic},{r.epsilon!r},{r.probability!r},{r.verdict}"
                  for r in self.rows]
        return "\n".join(lines) + "\n"

    def summary(self):
        out = ["hypothesis tests (accept the null iff its posterior probability > 0.5)"]
        for r in self.rows:
            out.append(f"  {r.hypothesis:<40s} {r.statistic:<16s} eps={r.epsilon:<10.4g} "
                       f"P={r.probability:.3f} {r.verdict}")
        genes, env, inter = self.flags
        out.append(f"interpretation: genes={'significant' if genes else 'not significant'}, "
                   f"environment={'significant' if env else 'not significant'}, "
                   f"interaction={'significant' if inter else 'not significant'}: "
                   f"{self.interpretation}")
        for (k, j), h in sorted(self.tau_hist.items()):
            g = self.genes[j] if self.genes else j
            out.append(f"tau histogram group {k} gene {g}: " + " ".join(map(str, h)))
        return "\n".join(out) + "\n"

    def write(self, directory):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "report.csv"), "w") as f:
            f.write(self.csv())
        with open(os.path.join(directory, "summary.txt"), "w") as f:
            f.write(self.summary())
        with open(os.path.join(directory, "tau_hist.csv"), "w") as f:
            f.write("group,gene,tau,count\n")
            for (k, j), h in sorted(self.tau_hist.items()):
                g = self.genes[j] if self.genes else j
                f.writelines(f"{k},{g},{t + 1},{c}\n" for t, c in enumerate(h))


def tau_histograms(traces):
    meta = traces.meta
    group = meta.get("group")
    M = meta.get("M")
    hist = {}
    for (i, j), x in traces.series("tau").items():
        k = int(group[i]) if group else 0
        m = M or int(x.max())
        h = hist.setdefault((k, j), np.zeros(m, np.int64))
        h += np.bincount(x.astype(np.int64) - 1, minlength=m)[:m]
    return {key: h.tolist() for key, h in hist.items()}


def run_tests(traces, thresholds):
    """Posterior probability of every null event and the 0.5 verdict."""
    genes = traces.meta.get("genes")
    rows = []
    for (stat, idx), x in sorted(tested_series(traces).items()):
        key = (stat, idx)
        if key not in thresholds.values:
            raise ValidationError(f"no threshold for statistic {stat_key(stat, idx)}")
        eps, lam = thresholds.values[key]
        rows.append(TestRow(_hypothesis_name(stat, idx, genes), stat_key(stat, idx), eps,
                            null_probability(x, eps, lam)))
    return TestReport(rows, tau_histograms(traces), genes)


# --- disease-predisposing loci -------------------------------------------------------

@dataclass
class DplGene:
    gene: str
    distance: np.ndarray
    flags: np.ndarray


def flag_top(d, fraction=DPL_FRACTION):
    """Flag loci at or above the k-th largest distance, k = ceil(fraction * L)."""
    d = np.asarray(d, float)
    if d.size == 0 or np.all(d == d[0]):
        return np.zeros(d.size, bool)
    k = max(1, math.ceil(fraction * d.size))
    cut = np.sort(d)[::-1][k - 1]
    return d >= cut


def dpl_scan(traces):
    """Posterior mean per-locus distance between the central case and control."""
    genes = traces.meta.get("genes")
    series = traces.series("dpl")
    by_gene = {}
    for (j, r), x in series.items():
        by_gene.setdefault(j, {})[r] = float(np.mean(x))
    out = []
    for j in sorted(by_gene):
        loci = by_gene[j]
        d = np.array([loci[r] for r in range(len(loci))])
        if d.size < 50:
            warnings.warn(f"gene {j} has {d.size} loci; the top-2% cut keeps "
                          f"{max(1, math.ceil(DPL_FRACTION * d.size))} locus", stacklevel=2)
        out.append(DplGene(genes[j] if genes else str(j), d, flag_top(d)))
    return out


def write_dpl(result, path):
    with open(path, "w") as f:
        f.write("gene_id,locus_index,distance,flag\n")
        for g in result:
            f.writelines(f"{g.gene},{r + 1},{d!r},{int(fl)}\n"
                         for r, (d, fl) in enumerate(zip(g.distance, g.flags)))

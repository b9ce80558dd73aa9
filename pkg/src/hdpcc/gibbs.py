"""Chain state and one full Gibbs sweep.

Bookkeeping follows a three-level restaurant franchise:

* level one: inside triplet (i, j, k) the M rows sit at tables (`labels`);
  each table holds a value id (`tval`).
* level two: inside (j, k) every level-one table sits at a G0 table (`seat`);
  G0 table l of cache c = k*J + j holds value `g0_val[c][l]`.
* level three: inside group k the G0 tables of all genes are grouped by
  value. The base measure is continuous, so distinct values are the H tables.

Values (L-vectors of allele probabilities) live in a `ValueStore` and are
referenced by integer id everywhere.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from . import rng as rngmod
from .errors import StateAuditError
from .model import BaseMeasure, HyperParams, alphas, clamp_p
from .tmcmc import Bounds, TmcmcConfig, UrnSummary, tmcmc_block_update
from .urns import extend_gap, g0_cache, h_cache


class ValueStore:
    def __init__(self, p):
        p = np.asarray(p, dtype=float)
        self.p = clamp_p(p) if p.size else p.reshape(0, p.shape[-1] if p.ndim == 2 else 0)
        self.logp = np.log(self.p)
        self.log1mp = np.log1p(-self.p)

    @property
    def V(self):
        return self.p.shape[0]

    def add(self, newp):
        newp = clamp_p(np.asarray(newp, dtype=float))
        ids = np.arange(self.V, self.V + newp.shape[0], dtype=np.int64)
        self.p = np.concatenate([self.p, newp])
        self.logp = np.concatenate([self.logp, np.log(newp)])
        self.log1mp = np.concatenate([self.log1mp, np.log1p(-newp)])
        return ids

    def subset(self, ids):
        s = ValueStore.__new__(ValueStore)
        s.p, s.logp, s.log1mp = self.p[ids], self.logp[ids], self.log1mp[ids]
        return s

    def copy(self):
        return self.subset(np.arange(self.V))


@dataclass
class ChainState:
    labels: np.ndarray      # (N, J, M) table of each row
    tval: np.ndarray        # (N, J, M) value id of table t, -1 past tau
    seat: np.ndarray        # (N, J, M) G0 table of table t, -1 past tau
    z: np.ndarray           # (N, J)
    g0_val: list            # per cache c = k*J + j: value id of each G0 table
    values: ValueStore
    imputed: np.ndarray     # (N, J, L, 2) alleles on padded loci, zero elsewhere
    hp: HyperParams
    seed: int
    sweep: int = 0
    cache_hint: np.ndarray = None
    accepted: int = 0

    @property
    def shape(self):
        return self.labels.shape

    @property
    def tau(self):
        return self.labels.max(axis=2) + 1

    def rows_p(self, i, j):
        """(M, L) probability rows of triplet (i, j)."""
        return self.values.p[self.tval[i, j][self.labels[i, j]]]

    def copy(self):
        return ChainState(self.labels.copy(), self.tval.copy(), self.seat.copy(), self.z.copy(),
                          [g.copy() for g in self.g0_val], self.values.copy(),
                          self.imputed.copy(), self.hp.with_vector(self.hp.vector()),
                          self.seed, self.sweep,
                          None if self.cache_hint is None else self.cache_hint.copy(),
                          self.accepted)

    def equals(self, other):
        return (np.array_equal(self.labels, other.labels)
                and np.array_equal(self.tval, other.tval)
                and np.array_equal(self.seat, other.seat)
                and np.array_equal(self.z, other.z)
                and len(self.g0_val) == len(other.g0_val)
                and all(np.array_equal(a, b) for a, b in zip(self.g0_val, other.g0_val))
                and np.array_equal(self.values.p, other.values.p)
                and np.array_equal(self.imputed, other.imputed)
                and self.hp.equals(other.hp)
                and self.seed == other.seed and self.sweep == other.sweep
                and np.array_equal(self.cache_hint, other.cache_hint))


@dataclass
class Model:
    """Everything a sweep needs that is not chain state."""
    tensor: object
    env: object
    config: object
    base: BaseMeasure = None
    flat: bool = False          # prior-only runs: no data coupling
    n1: np.ndarray = field(default=None, repr=False)
    n2: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.base is None:
            self.base = BaseMeasure(self.config.nu1, self.config.nu2)
        self.refresh_counts()

    def refresh_counts(self):
        t = self.tensor
        if self.flat:
            self.n1 = np.zeros((t.N, t.J, t.L), np.int64)
            self.n2 = self.n1.copy()
        else:
            s = t.allele_sums()
            self.n1 = s
            self.n2 = np.where(t.mask, 2 - s, 0).astype(np.int64)

    @property
    def group(self):
        return self.tensor.group

    @property
    def tmcmc(self):
        c = self.config
        return TmcmcConfig(mix=c.tmcmc_mix, add_scale=c.tmcmc_add_scale,
                           mult_scale=c.tmcmc_mult_scale, steps=c.tmcmc_steps)

    @property
    def bounds(self):
        c = self.config
        return Bounds((c.mu_lower, c.mu_upper), (c.beta_lower, c.beta_upper))


# --- registry -------------------------------------------------------------

class DishRegistry:
    """Counts at every level, recomputed from the labels of a state."""

    def __init__(self, state, group):
        N, J, M = state.labels.shape
        self.J = J
        flat = (np.arange(N * J)[:, None] * M + state.labels.reshape(N * J, M)).ravel()
        self.mult = np.bincount(flat, minlength=N * J * M).reshape(N, J, M)
        self.xi = []        # per cache: value ids of G0 tables
        self.n_ljk = []     # per cache: level-one tables at each G0 table
        self.eta = []       # per group: distinct values
        self.n_sk = []      # per group: G0 tables holding each value
        for k in (0, 1):
            rows = group == k
            allv = []
            for j in range(J):
                c = k * J + j
                seat = state.seat[rows, j][state.tval[rows, j] >= 0]
                self.xi.append(state.g0_val[c])
                self.n_ljk.append(np.bincount(seat, minlength=len(state.g0_val[c])))
                allv.append(state.g0_val[c])
            allv = np.concatenate(allv)
            u, cnt = np.unique(allv, return_counts=True)
            self.eta.append(u)
            self.n_sk.append(cnt)

    def n_dot_jk(self, j, k):
        return int(self.n_ljk[k * self.J + j].sum())

    def n_dot_k(self, k):
        return int(self.n_sk[k].sum())


def audit(state, model):
    """Recount everything from labels; raise StateAuditError on any mismatch."""
    problems = []
    N, J, M = state.labels.shape
    lab = state.labels
    tau = lab.max(axis=2) + 1
    V = state.values.V
    # canonical first-occurrence labels
    run_max = np.maximum.accumulate(lab, axis=2)
    prev = np.concatenate([np.full((N, J, 1), -1), run_max[:, :, :-1]], axis=2)
    if np.any(lab > prev + 1) or np.any(lab < 0):
        problems.append("labels not compact in first-occurrence order")
    t_idx = np.arange(M)[None, None, :]
    live = t_idx < tau[:, :, None]
    if np.any((state.tval >= 0) != live) or np.any((state.seat >= 0) != live):
        problems.append("table arrays disagree with tau")
    if np.any(state.tval >= V):
        problems.append("table references unknown value")
    reg = DishRegistry(state, model.group)
    if np.any(reg.mult.sum(axis=2) != M):
        problems.append("row multiplicities do not sum to M")
    for k in (0, 1):
        rows = np.flatnonzero(model.group == k)
        for j in range(J):
            c = k * J + j
            g = state.g0_val[c]
            tv = state.tval[rows, j]
            st = state.seat[rows, j]
            ok = tv >= 0
            if np.any(st[ok] >= len(g)):
                problems.append(f"seat out of range in cache {c}")
                continue
            if np.any(g[st[ok]] != tv[ok]):
                problems.append(f"table value differs from its G0 table in cache {c}")
            if np.any(reg.n_ljk[c] == 0):
                problems.append(f"empty G0 table in cache {c}")
            if reg.n_ljk[c].sum() != ok.sum():
                problems.append(f"G0 counts do not match table count in cache {c}")
        if reg.n_sk[k].sum() != sum(len(state.g0_val[k * J + j]) for j in range(J)):
            problems.append(f"value counts do not match G0 tables in group {k}")
    if np.any(state.z < 0) or np.any(state.z >= M):
        problems.append("allocation out of range")
    pad = ~model.tensor.mask
    if np.any(state.imputed[~pad] != 0) or np.any((state.imputed != 0) & (state.imputed != 1)):
        problems.append("imputed alleles outside padded loci or not binary")
    if problems:
        raise StateAuditError("; ".join(problems))
    return 0


# --- initial state ------------------------------------------------------------

def ancestral_structure(model, hp, rng):
    """Draw labels, seating and values from the prior urns."""
    t = model.tensor
    N, J, L, M = t.N, t.J, t.L, model.config.M
    aG, aG0, aH = alphas(hp, model.env)
    store = ValueStore(np.empty((0, L)))
    labels = np.zeros((N, J, M), np.int64)
    tval = np.full((N, J, M), -1, np.int64)
    seat = np.full((N, J, M), -1, np.int64)
    g0_val = [None] * (2 * J)
    for k in (0, 1):
        h_sizes, h_vals = [], []
        rows = np.flatnonzero(t.group == k)
        for j in range(J):
            g_sizes, g_vals = [], []
            for i in rows:
                tab_sizes = []
                for m in range(M):
                    if m == 0 or rng.random() * (aG[i] + m) < aG[i]:
                        tab = len(tab_sizes)
                        tab_sizes.append(1)
                        labels[i, j, m] = tab
                        n = sum(g_sizes)
                        if n == 0 or rng.random() * (aG0[k] + n) < aG0[k]:
                            nh = sum(h_sizes)
                            if nh == 0 or rng.random() * (aH + nh) < aH:
                                v = int(store.add(model.base.draw(rng, 1, L))[0])
                                h_vals.append(v)
                                h_sizes.append(1)
                            else:
                                s = rng.choice(len(h_sizes), p=np.array(h_sizes) / nh)
                                h_sizes[s] += 1
                                v = h_vals[s]
                            seat[i, j, tab] = len(g_sizes)
                            g_sizes.append(1)
                            g_vals.append(v)
                        else:
                            l = rng.choice(len(g_sizes), p=np.array(g_sizes) / n)
                            g_sizes[l] += 1
                            seat[i, j, tab] = l
                        tval[i, j, tab] = g_vals[seat[i, j, tab]]
                    else:
                        tab = rng.choice(len(tab_sizes), p=np.array(tab_sizes) / m)
                        tab_sizes[tab] += 1
                        labels[i, j, m] = tab
            g0_val[k * J + j] = np.array(g_vals, np.int64)
    return labels, tval, seat, g0_val, store


def init_state(model, seed, hp=None):
    """Prior draw of the seating; z uniform; padded alleles by fair coins."""
    t = model.tensor
    if hp is None:
        c = model.config
        hp = HyperParams.default(model.env.d, c.consts)
        hp.mu_G = hp.mu_G0 = hp.mu_H = 0.5 * (c.mu_lower + c.mu_upper)
    g = rngmod.stream(seed, 0, "init")
    labels, tval, seat, g0_val, store = ancestral_structure(model, hp, g)
    z = g.integers(model.config.M, size=(t.N, t.J))
    imputed = g.integers(2, size=(t.N, t.J, t.L, 2)).astype(np.int8)
    imputed[t.mask] = 0
    st = ChainState(labels, tval, seat, z, g0_val, store, imputed, hp, int(seed), 0,
                    np.zeros(2 + 2 * t.J, np.int64))
    return st


# --- caches (steps 1-3) ---------------------------------------------------------

class SweepCaches:
    def __init__(self, state, model, registry, aG0, aH, tag=()):
        cfg = model.config
        t = model.tensor
        J, L = t.J, t.L
        n = state.sweep + 1
        self.J = J
        self.h = []
        self.g = []
        store = state.values
        hint = state.cache_hint if state.cache_hint is not None else np.zeros(2 + 2 * J, int)

        def fresh(k_, g_):
            return store.add(model.base.draw(g_, k_, L))

        for k in (0, 1):
            hc = h_cache(registry.eta[k], registry.n_sk[k], aH, fresh,
                         rngmod.stream(state.seed, n, *tag, "h", k),
                         chunk=cfg.presim_atoms, max_atoms=cfg.max_atoms)
            hc.ensure(max(cfg.presim_atoms, int(hint[k])))
            self.h.append(hc)
        for k in (0, 1):
            for j in range(J):
                c = k * J + j
                gc = g0_cache(registry.xi[c], registry.n_ljk[c], aG0[k], self.h[k],
                              rngmod.stream(state.seed, n, *tag, "g0", j, k),
                              chunk=cfg.presim_atoms, max_atoms=cfg.max_atoms)
                gc.ensure(max(cfg.presim_atoms, int(hint[2 + c])))
                extend_gap(gc, cfg.eps_trunc)
                self.g.append(gc)

    def pack(self, k):
        """Value-aggregated G0 caches of group k, concatenated with offsets."""
        aggs = [c.aggregate() for c in self.g[k * self.J:(k + 1) * self.J]]
        off = np.zeros(len(aggs) + 1, np.int64)
        off[1:] = np.cumsum([a[0].size for a in aggs])
        vals = np.concatenate([a[0] for a in aggs])
        W = np.concatenate([a[1] for a in aggs])
        Wcum = np.concatenate([a[2] for a in aggs])
        rem = np.array([c.gap for c in self.g[k * self.J:(k + 1) * self.J]])
        return vals, W, Wcum, rem, off

    def sizes(self):
        return np.array([c.K for c in self.h] + [c.K for c in self.g], np.int64)

    def fingerprint(self):
        import hashlib
        h = hashlib.blake2b(digest_size=8)
        for c in self.h + self.g:
            h.update(c.sticks.tobytes())
            h.update(np.asarray(c.atoms).tobytes())
        return h.hexdigest()


# --- steps 4-5: the triplet phases ---------------------------------------------

def phase_triplets(model, k):
    """(i, j, cache) rows of phase k in canonical order."""
    rows = np.flatnonzero(model.group == k)
    J = model.tensor.J
    return np.array([(i, j, j) for i in rows for j in range(J)], np.int64).reshape(-1, 3)


def split_blocks(n, workers):
    """Contiguous near-equal blocks [lo, hi) for `workers` workers."""
    edges = np.linspace(0, n, workers + 1).round().astype(int)
    return [(edges[w], edges[w + 1]) for w in range(workers)]


def run_phase(state, model, caches, k, U, out, executor=None, workers=1, audit_hook=None):
    """Update every triplet of group k; grow caches at a barrier and re-run failures."""
    t = model.tensor
    J = t.J
    trip = phase_triplets(model, k)
    lab_out, tv_out, z_out, imp_out = out
    aG = alphas(state.hp, model.env)[0]
    pending = trip
    rounds = 0
    while len(pending):
        rounds += 1
        vals, W, Wcum, rem, off = caches.pack(k)
        vs = state.values
        uidx = pending[:, 0] * J + pending[:, 1]
        status = np.zeros(len(pending), np.int64)
        before = caches.fingerprint() if audit_hook else None

        def work(lo_hi):
            lo, hi = lo_hi
            if hi > lo:
                kern.run_block(pending[lo:hi], model.n1, model.n2, t.Lj, t.L, model.config.M,
                               state.labels, state.tval, state.z, aG, vals, W, Wcum, rem, off,
                               vs.logp, vs.log1mp, vs.p, U, uidx[lo:hi],
                               lab_out, tv_out, z_out, imp_out, status[lo:hi])

        blocks = split_blocks(len(pending), workers)
        if executor is None or workers == 1:
            for b in blocks:
                work(b)
        else:
            list(executor.map(work, blocks))
        if audit_hook:
            audit_hook(before, caches.fingerprint())
        failed = status != kern.OK
        if not failed.any():
            break
        for c in np.unique(pending[failed, 2]):
            caches.g[k * J + c].grow()
        pending = pending[failed]
    return rounds


# --- step 6: level-two reseating ----------------------------------------------

def reseat(state, model, caches, aG0):
    """Seat level-one tables at G0 tables given values and the instantiated H_k."""
    t = model.tensor
    J = t.J
    n = state.sweep + 1
    V = state.values.V
    seat = np.full(state.tval.shape, -1, np.int64)
    g0_val = [None] * (2 * J)
    for k in (0, 1):
        hc = caches.h[k]
        extend_gap(hc, model.config.eps_trunc)
        beta = np.bincount(hc.atoms, weights=hc.sticks, minlength=V)
        rows = np.flatnonzero(t.group == k)
        for j in range(J):
            tv = state.tval[rows, j]
            ii, tt = np.nonzero(tv >= 0)
            vals = tv[ii, tt]
            u = rngmod.stream(state.seed, n, "reseat", j, k).random((len(vals), 2))
            tabs_of = {}
            sizes = []
            gv = []
            out = np.empty(len(vals), np.int64)
            for x, v in enumerate(vals):
                own = tabs_of.setdefault(v, [])
                a = aG0[k] * beta[v]
                c = sum(sizes[l] for l in own)
                if not own or u[x, 0] * (a + c) < a:
                    own.append(len(sizes))
                    out[x] = len(sizes)
                    sizes.append(1)
                    gv.append(v)
                else:
                    sz = np.array([sizes[l] for l in own], float)
                    l = own[min(int(np.searchsorted(np.cumsum(sz), u[x, 1] * c, side="right")),
                                len(own) - 1)]
                    out[x] = l
                    sizes[l] += 1
            seat[rows[ii], j, tt] = out
            g0_val[k * J + j] = np.array(gv, np.int64)
    state.seat = seat
    state.g0_val = g0_val


def prune_values(state):
    used = np.unique(state.tval[state.tval >= 0])
    remap = np.full(state.values.V, -1, np.int64)
    remap[used] = np.arange(used.size)
    state.values = state.values.subset(used)
    live = state.tval >= 0
    state.tval[live] = remap[state.tval[live]]
    state.g0_val = [remap[g] for g in state.g0_val]


# --- the sweep ----------------------------------------------------------------

def sweep(state, model, executor=None, workers=1, audit_every=False, audit_hook=None):
    """Advance the chain by one sweep in place and return it."""
    t = model.tensor
    M = model.config.M
    n = state.sweep + 1
    registry = DishRegistry(state, model.group)
    aG, aG0, aH = alphas(state.hp, model.env)
    caches = SweepCaches(state, model, registry, aG0, aH)
    B = kern.block_size(M, t.L)
    U = rngmod.stream(state.seed, n, "triplets").random((t.N * t.J, B))
    lab_out = state.labels.copy()
    tv_out = np.full_like(state.tval, -1)
    z_out = state.z.copy()
    imp_out = state.imputed.copy()
    out = (lab_out, tv_out, z_out, imp_out)
    for k in (0, 1):
        run_phase(state, model, caches, k, U, out, executor, workers, audit_hook)
    state.labels, state.tval, state.z, state.imputed = lab_out, tv_out, z_out, imp_out
    reseat(state, model, caches, aG0)
    state.cache_hint = caches.sizes()
    prune_values(state)
    summary = UrnSummary.from_state(state, model.group)
    hp, acc = tmcmc_block_update(state, model.env, model.group, model.tmcmc,
                                 rngmod.stream(state.seed, n, "tmcmc"), model.bounds, summary)
    state.hp = hp
    state.accepted += acc
    state.sweep = n
    if audit_every:
        audit(state, model)
    return state


# --- single-step operations ------------------------------------------------------

class TripletContext:
    """Frozen cache and data for stand-alone updates of one triplet."""

    def __init__(self, state, model, caches, i, j):
        k = int(model.group[i])
        self.i, self.j, self.k = i, j, k
        self.gc = caches.g[k * model.tensor.J + j]
        self.state, self.model = state, model
        self.n1 = model.n1[i, j]
        self.n2 = model.n2[i, j]
        self.Lj = int(model.tensor.Lj[j])
        self.alpha = float(alphas(state.hp, model.env)[0][i])
        self.prepare()

    def prepare(self):
        vs = self.state.values
        self.vals, self.W, self.Wcum = self.gc.aggregate()
        self.memo = np.full(vs.V, np.nan)
        self.S = np.empty(self.vals.size)
        self.log_tail, self.log_cl, self.flat_c, self.log_rem = kern.prepare(
            self.vals, self.W, self.Wcum, self.gc.gap, self.memo, vs.logp, vs.log1mp,
            self.n1, self.n2, self.Lj, self.S)


def _compact(state, i, j):
    M = state.labels.shape[2]
    lab = state.labels[i, j].copy()
    tv = np.full(M + 1, -1, np.int64)
    tv[:M] = state.tval[i, j]
    cnt = np.zeros(M + 1, np.int64)
    np.add.at(cnt, lab, 1)
    return lab, tv, cnt, int(lab.max()) + 1


def _retry(ctx, fn):
    while True:
        res = fn()
        if res is not None:
            return res
        ctx.gc.grow()
        ctx.prepare()


def update_t(ctx, m, rng):
    """Gibbs draw of the table of row m; returns its new (compacted) label."""
    st, M = ctx.state, ctx.state.labels.shape[2]
    vs = st.values
    u1, u2 = rng.random(), rng.random()
    uc = np.full(M, u1)
    ua = np.full(M, u2)

    def attempt():
        lab, tv, cnt, tau = _compact(st, ctx.i, ctx.j)
        tau, status = kern.t_scan(np.array([m]), lab, tv, cnt, tau, M, st.z[ctx.i, ctx.j],
                                  ctx.alpha, ctx.log_cl, ctx.flat_c, ctx.vals, ctx.vals.size,
                                  ctx.S, ctx.log_tail, ctx.Wcum, ctx.log_rem, ctx.memo,
                                  vs.logp, vs.log1mp, ctx.n1, ctx.n2, ctx.Lj, uc, ua)
        if status != kern.OK:
            return None
        kern.canonical_relabel(lab, tv, cnt, tau, M)
        return lab, tv[:M]

    lab, tv = _retry(ctx, attempt)
    st.labels[ctx.i, ctx.j] = lab
    st.tval[ctx.i, ctx.j] = tv
    st.seat[ctx.i, ctx.j] = np.where(tv >= 0, st.seat[ctx.i, ctx.j], -1)
    return int(lab[m])


def draw_row_value(ctx, m, rng):
    """Value id row m would take under a fresh draw of its table; state untouched."""
    st, M = ctx.state, ctx.state.labels.shape[2]
    vs = st.values
    uc = np.full(M, rng.random())
    ua = np.full(M, rng.random())

    def attempt():
        lab, tv, cnt, tau = _compact(st, ctx.i, ctx.j)
        tau, status = kern.t_scan(np.array([m]), lab, tv, cnt, tau, M, st.z[ctx.i, ctx.j],
                                  ctx.alpha, ctx.log_cl, ctx.flat_c, ctx.vals, ctx.vals.size,
                                  ctx.S, ctx.log_tail, ctx.Wcum, ctx.log_rem, ctx.memo,
                                  vs.logp, vs.log1mp, ctx.n1, ctx.n2, ctx.Lj, uc, ua)
        return None if status != kern.OK else int(tv[lab[m]])

    return _retry(ctx, attempt)


def update_phi(ctx, t, rng):
    """Redraw the atom of table t; every row at t takes the new value."""
    st, M = ctx.state, ctx.state.labels.shape[2]
    u = np.full(M, rng.random())

    def attempt():
        lab, tv, cnt, tau = _compact(st, ctx.i, ctx.j)
        status = kern.phi_refresh(np.array([t]), lab, tv, tau, st.z[ctx.i, ctx.j],
                                  ctx.vals, ctx.vals.size, ctx.S, ctx.log_tail, ctx.Wcum,
                                  ctx.log_rem, u)
        return None if status != kern.OK else tv[:M]

    tv = _retry(ctx, attempt)
    st.tval[ctx.i, ctx.j] = tv
    return int(tv[t])


def update_z(ctx, rng):
    st = ctx.state
    vs = st.values
    memo = np.full(vs.V, np.nan)
    z = kern.z_draw(st.labels[ctx.i, ctx.j], st.tval[ctx.i, ctx.j], st.labels.shape[2], memo,
                    vs.logp, vs.log1mp, ctx.n1, ctx.n2, ctx.Lj, rng.random())
    st.z[ctx.i, ctx.j] = z
    return int(z)


def impute_missing(ctx, rng):
    st = ctx.state
    L = st.imputed.shape[2]
    prow = st.rows_p(ctx.i, ctx.j)[st.z[ctx.i, ctx.j]]
    out = st.imputed[ctx.i, ctx.j]
    kern.impute(prow, ctx.Lj, L, rng.random(2 * L), out)
    return out[ctx.Lj:]


def build_caches(state, model, tag=()):
    """Steps 1-3 for stand-alone use: registry plus fresh caches for the next sweep."""
    registry = DishRegistry(state, model.group)
    _, aG0, aH = alphas(state.hp, model.env)
    return SweepCaches(state, model, registry, aG0, aH, tag)

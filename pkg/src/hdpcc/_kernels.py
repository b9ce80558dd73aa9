"""Compiled inner loops for the per-triplet Gibbs updates.

Tables of one triplet are kept compact: `lab` (M,) maps rows to tables
0..tau-1, `tv` holds the value id of each table and `cnt` its multiplicity.
All randomness arrives as pre-drawn uniforms so results depend only on the
inputs, never on which thread runs them.

Uniform block layout per triplet (B = 3M + 1 + 2L):
  [0, M)        table choice for each row in the t-scan
  [M, 2M)       value choice when row m opens a new table
  [2M, 3M)      value choice in the phi refresh of table t
  3M            allocation z
  [3M+1, ...)   two alleles per padded locus
"""
import numpy as np
from numba import njit

OK = 0
NEED_ATOMS = 1


def block_size(M, L):
    return 3 * M + 1 + 2 * L


@njit(cache=True, nogil=True)
def value_loglik(logp, log1mp, v, n1, n2, Lj):
    s = 0.0
    for r in range(Lj):
        s += n1[r] * logp[v, r] + n2[r] * log1mp[v, r]
    return s


@njit(cache=True, nogil=True)
def log_kernel_bound(n1, n2, Lj):
    """log sup_p prod_r p^n1 (1-p)^n2, reached at p = n1/(n1+n2)."""
    s = 0.0
    for r in range(Lj):
        a = n1[r]
        b = n2[r]
        if a > 0 and b > 0:
            n = a + b
            s += a * np.log(a / n) + b * np.log(b / n)
    return s


@njit(cache=True, nogil=True)
def memo_ll(memo, logp, log1mp, v, n1, n2, Lj):
    x = memo[v]
    if np.isnan(x):
        x = value_loglik(logp, log1mp, v, n1, n2, Lj)
        memo[v] = x
    return x


@njit(cache=True, nogil=True)
def posterior_prefix(atoms, w, K, memo, logp, log1mp, n1, n2, Lj, S):
    """Fill S[:K] with prefix sums of w_a f_a exp(-m); return m = max log f."""
    m = -np.inf
    for a in range(K):
        x = memo_ll(memo, logp, log1mp, atoms[a], n1, n2, Lj)
        if x > m:
            m = x
    acc = 0.0
    for a in range(K):
        acc += w[a] * np.exp(memo[atoms[a]] - m)
        S[a] = acc
    return m


@njit(cache=True, nogil=True)
def value_prefix(vals, W, D, memo, logp, log1mp, n1, n2, Lj, S):
    """S[:D] = prefix sums of W_v f_v exp(-m) over distinct values; returns m."""
    m = -np.inf
    for a in range(D):
        x = memo_ll(memo, logp, log1mp, vals[a], n1, n2, Lj)
        if x > m:
            m = x
    acc = 0.0
    for a in range(D):
        acc += W[a] * np.exp(memo[vals[a]] - m)
        S[a] = acc
    return m


@njit(cache=True, nogil=True)
def retro_pick(S, K, log_tail, u):
    """Index t with S[t-1] <= u c_l and S[t] >= u c_u, or -1 if more atoms are needed.

    S holds scaled prefix sums, c_l = S[K-1], c_u = c_l + exp(log_tail).
    """
    cl = S[K - 1]
    cu = cl + np.exp(log_tail)
    target = u * cu
    if not target <= cl:
        return -1
    t = np.searchsorted(S[:K], target)
    if t >= K:
        return -1
    lo = S[t - 1] if t > 0 else 0.0
    if lo <= u * cl:
        return t
    return -1


@njit(cache=True, nogil=True)
def value_pick(S, D, log_tail, u):
    """Certified inverse-CDF pick over values aggregated from a truncated cache.

    S[v] are scaled prefix sums of W_v f_v over distinct values in order of
    first appearance. Unbuilt stick mass (scaled bound exp(log_tail)) may
    land on any value, so it widens both sides of the bracket:
    S[v-1] + tail <= u c_l and S[v] >= u c_u. Returns -1 if undecided.
    """
    cl = S[D - 1]
    tail = np.exp(log_tail)
    target = u * (cl + tail)
    if not target <= cl:
        return -1
    v = np.searchsorted(S[:D], target)
    if v >= D:
        return -1
    lo = S[v - 1] if v > 0 else 0.0
    if lo + tail <= u * cl:
        return v
    return -1


@njit(cache=True, nogil=True)
def prior_pick(cum, K, u):
    """Atom index from the sticks alone, or -1 when u lies in the unbuilt tail."""
    t = np.searchsorted(cum[:K], u)
    if t >= K:
        return -1
    return t


@njit(cache=True, nogil=True)
def categorical_log(lw, n, u):
    m = -np.inf
    for t in range(n):
        if lw[t] > m:
            m = lw[t]
    tot = 0.0
    for t in range(n):
        tot += np.exp(lw[t] - m)
    target = u * tot
    acc = 0.0
    for t in range(n):
        acc += np.exp(lw[t] - m)
        if target < acc:
            return t
    # rounding: last positive entry
    for t in range(n - 1, -1, -1):
        if lw[t] > -np.inf:
            return t
    return n - 1


@njit(cache=True, nogil=True)
def remove_row(lab, tv, cnt, tau, m, M):
    t0 = lab[m]
    cnt[t0] -= 1
    lab[m] = -1
    if cnt[t0] == 0:
        for t in range(t0, tau - 1):
            cnt[t] = cnt[t + 1]
            tv[t] = tv[t + 1]
        cnt[tau - 1] = 0
        tv[tau - 1] = -1
        tau -= 1
        for mm in range(M):
            if lab[mm] > t0:
                lab[mm] -= 1
    return tau


@njit(cache=True, nogil=True)
def canonical_relabel(lab, tv, cnt, tau, M):
    """Renumber tables in order of first occurrence over rows."""
    newid = np.full(tau, -1, np.int64)
    nxt = 0
    for m in range(M):
        t = lab[m]
        if newid[t] < 0:
            newid[t] = nxt
            nxt += 1
    tv2 = tv.copy()
    cnt2 = cnt.copy()
    for t in range(tau):
        tv[newid[t]] = tv2[t]
        cnt[newid[t]] = cnt2[t]
    for m in range(M):
        lab[m] = newid[lab[m]]


@njit(cache=True, nogil=True)
def new_value(is_z, vals, D, S, log_tail, Wcum, log_rem, u):
    """Value id for a fresh table: posterior pick for the data row, prior otherwise."""
    if is_z:
        v = value_pick(S, D, log_tail, u)
    else:
        v = value_pick(Wcum, D, log_rem, u)
    if v < 0:
        return -1
    return vals[v]


@njit(cache=True, nogil=True)
def t_scan(rows, lab, tv, cnt, tau, M, z, alpha, log_cl, flat_c,
           vals, D, S, log_tail, Wcum, log_rem, memo, logp, log1mp, n1, n2, Lj,
           u_choice, u_atom):
    """Gibbs update of the table label for each row in `rows`.

    Row z carries the data kernel; other rows carry a flat one. Returns
    (tau, status).
    """
    lw = np.empty(M + 1)
    for m in rows:
        tau = remove_row(lab, tv, cnt, tau, m, M)
        if m == z:
            for t in range(tau):
                lw[t] = np.log(cnt[t]) + memo_ll(memo, logp, log1mp, tv[t], n1, n2, Lj)
            lw[tau] = np.log(alpha) + log_cl
        else:
            for t in range(tau):
                lw[t] = np.log(cnt[t])
            lw[tau] = np.log(alpha * flat_c)
        t = categorical_log(lw, tau + 1, u_choice[m])
        if t == tau:
            v = new_value(m == z, vals, D, S, log_tail, Wcum, log_rem, u_atom[m])
            if v < 0:
                return tau, NEED_ATOMS
            tv[tau] = v
            cnt[tau] = 1
            lab[m] = tau
            tau += 1
        else:
            cnt[t] += 1
            lab[m] = t
    return tau, OK


@njit(cache=True, nogil=True)
def phi_refresh(tables, lab, tv, tau, z, vals, D, S, log_tail, Wcum, log_rem, u_phi):
    """Redraw the value of each listed table from G0 times its pooled kernel."""
    tz = lab[z]
    for t in tables:
        v = new_value(t == tz, vals, D, S, log_tail, Wcum, log_rem, u_phi[t])
        if v < 0:
            return NEED_ATOMS
        tv[t] = v
    return OK


@njit(cache=True, nogil=True)
def z_draw(lab, tv, M, memo, logp, log1mp, n1, n2, Lj, u):
    lw = np.empty(M)
    for m in range(M):
        lw[m] = memo_ll(memo, logp, log1mp, tv[lab[m]], n1, n2, Lj)
    return categorical_log(lw, M, u)


@njit(cache=True, nogil=True)
def impute(prow, Lj, L, u, out):
    for r in range(Lj, L):
        for c in range(2):
            out[r, c] = 1 if u[2 * r + c] < prow[r] else 0


@njit(cache=True, nogil=True)
def prepare(vals, W, Wcum, rem, memo, logp, log1mp, n1, n2, Lj, S):
    """Per-triplet posterior prefix. Returns (log_tail, log_cl, flat_c, log_rem)."""
    D = vals.shape[0]
    m_ll = value_prefix(vals, W, D, memo, logp, log1mp, n1, n2, Lj, S)
    logb = log_kernel_bound(n1, n2, Lj)
    log_rem = np.log(rem) if rem > 0 else -np.inf
    log_tail = log_rem + logb - m_ll
    log_cl = np.log(S[D - 1]) + m_ll
    return log_tail, log_cl, Wcum[D - 1], log_rem


@njit(cache=True, nogil=True)
def triplet_update(n1, n2, Lj, L, M, lab_in, tv_in, z_in, alpha,
                   vals, W, Wcum, rem, logp, log1mp, p, u,
                   lab_out, tv_out, imp_out, memo, S):
    """Full scan of one triplet: t-scan, phi refresh, z, imputation.

    (vals, W, Wcum) describe the truncated G0 cache aggregated by distinct
    value; rem is its unbuilt stick mass. Returns (z, status); outputs are
    written only when status is OK.
    """
    D = vals.shape[0]
    memo[:] = np.nan
    log_tail, log_cl, flat_c, log_rem = prepare(vals, W, Wcum, rem, memo, logp, log1mp,
                                                n1, n2, Lj, S)
    lab = lab_in.copy()
    tv = np.full(M + 1, -1, np.int64)
    cnt = np.zeros(M + 1, np.int64)
    tau = 0
    for m in range(M):
        cnt[lab[m]] += 1
        if lab[m] + 1 > tau:
            tau = lab[m] + 1
    for t in range(tau):
        tv[t] = tv_in[t]
    z = z_in

    rows = np.arange(M)
    tau, st = t_scan(rows, lab, tv, cnt, tau, M, z, alpha, log_cl, flat_c,
                     vals, D, S, log_tail, Wcum, log_rem, memo, logp, log1mp, n1, n2, Lj,
                     u[0:M], u[M:2 * M])
    if st != OK:
        return z, st
    canonical_relabel(lab, tv, cnt, tau, M)
    st = phi_refresh(np.arange(tau), lab, tv, tau, z, vals, D, S, log_tail, Wcum, log_rem,
                     u[2 * M:3 * M])
    if st != OK:
        return z, st
    z = z_draw(lab, tv, M, memo, logp, log1mp, n1, n2, Lj, u[3 * M])
    impute(p[tv[lab[z]]], Lj, L, u[3 * M + 1:], imp_out)
    for m in range(M):
        lab_out[m] = lab[m]
    for t in range(M):
        tv_out[t] = tv[t] if t < tau else -1
    return z, OK


@njit(cache=True, nogil=True)
def run_block(trip, n1, n2, Ljs, L, M, labels, tval, zs, alpha_G,
              c_vals, c_W, c_Wcum, c_rem, c_off, logp, log1mp, p, U, uidx,
              lab_out, tv_out, z_out, imp_out, status):
    """Update the triplets listed in `trip` (rows of (i, j, cache)) in order."""
    V = logp.shape[0]
    memo = np.empty(V)
    dmax = 1
    for c in range(c_off.shape[0] - 1):
        if c_off[c + 1] - c_off[c] > dmax:
            dmax = c_off[c + 1] - c_off[c]
    S = np.empty(dmax)
    for q in range(trip.shape[0]):
        i = trip[q, 0]
        j = trip[q, 1]
        c = trip[q, 2]
        lo = c_off[c]
        hi = c_off[c + 1]
        zz, st = triplet_update(n1[i, j], n2[i, j], Ljs[j], L, M, labels[i, j], tval[i, j],
                                zs[i, j], alpha_G[i], c_vals[lo:hi], c_W[lo:hi],
                                c_Wcum[lo:hi], c_rem[c], logp, log1mp, p, U[uidx[q]],
                                lab_out[i, j], tv_out[i, j], imp_out[i, j], memo, S)
        status[q] = st
        if st == OK:
            z_out[i, j] = zz


@njit(cache=True, nogil=True)
def contingency_distance(a, b, n, ka, kb):
    """max of the two directed mismatch fractions between label vectors."""
    tab = np.zeros((ka, kb), np.int64)
    for x in range(n):
        tab[a[x], b[x]] += 1
    s1 = 0
    for r in range(ka):
        mx = 0
        for c in range(kb):
            if tab[r, c] > mx:
                mx = tab[r, c]
        s1 += mx
    s2 = 0
    for c in range(kb):
        mx = 0
        for r in range(ka):
            if tab[r, c] > mx:
                mx = tab[r, c]
        s2 += mx
    d1 = 1.0 - s1 / n
    d2 = 1.0 - s2 / n
    return d1 if d1 > d2 else d2


@njit(cache=True, nogil=True)
def pairwise_distances(P, nlab):
    """All pairwise partition distances between the rows of P (labels 0..nlab-1)."""
    N, n = P.shape
    D = np.zeros((N, N))
    for x in range(N):
        for y in range(x + 1, N):
            d = contingency_distance(P[x], P[y], n, nlab, nlab)
            D[x, y] = d
            D[y, x] = d
    return D

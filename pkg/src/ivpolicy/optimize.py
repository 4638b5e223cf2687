"""Maximise the empirical objective over quadrant and linear-index rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import linprog

from .core_model import (
    GT, LE, LINEAR, ORIENTATIONS, QUADRANT, ConfigError, ObservationTable, Policy, PolicyClassSpec,
    empirical_objective, evaluate_policy, _gamma,
)

EXHAUSTIVE_QUADRANT = "exhaustive_quadrant"
HYPERPLANE_ENUMERATION = "hyperplane_enumeration"
LOCAL_SEARCH = "local_search"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveResult:
    policy: Policy
    objective: float
    method: str
    exact: bool
    ties: int

    def to_json(self) -> dict:
        return {"policy": self.policy.to_json(), "objective": self.objective, "method": self.method,
                "exact": self.exact, "tie_count": self.ties}


def _x_of(table):
    return table.x if isinstance(table, ObservationTable) else np.asarray(table, dtype=float)


def verify_solution(result: SolveResult, scores, table) -> bool:
    """Recompute the objective of ``result.policy`` and compare exactly."""
    try:
        a = result.policy.assign(_x_of(table))
        return empirical_objective(scores, a) == result.objective
    except (ValueError, ConfigError):
        return False


def _finish(policy, scores, table, method, exact, ties):
    obj = empirical_objective(scores, policy.assign(_x_of(table)))
    res = SolveResult(policy, obj, method, exact, int(ties))
    if not verify_solution(res, scores, table):
        raise SolverError("objective recomputation disagrees with the reported value")
    return res


def _tolerance(g):
    # treated-sum comparisons: anything this close is a tie of the same assignment class
    return 1e-10 * max(1.0, float(np.sum(np.abs(g))))


def _mid(a, b):
    c = a + (b - a) / 2.0
    return c if a <= c < b else a


def _candidate(u, k):
    """Threshold for cut k over sorted unique values u (k=0 and k=len(u) are sentinels)."""
    if k == 0:
        return -np.inf
    if k == len(u):
        return np.inf
    return _mid(u[k - 1], u[k])


# ---------------------------------------------------------------- quadrant


@njit(cache=True, nogil=True)
def _quad_pass(order1, start1, r2, g, u1, u2, gt1, gt2, target, tol, counting):
    n = g.shape[0]
    col = np.zeros(u2)
    if gt1:
        for i in range(n):
            col[r2[i]] += g[i]
    best = -np.inf
    cnt = 0
    f1 = -1
    f2 = -1
    for k1 in range(u1 + 1):
        if k1 > 0:
            for t in range(start1[k1 - 1], start1[k1]):
                i = order1[t]
                if gt1:
                    col[r2[i]] -= g[i]
                else:
                    col[r2[i]] += g[i]
        s = 0.0
        for k in range(u2):
            s += col[k]
        pre = 0.0
        for k2 in range(u2 + 1):
            if k2 > 0:
                pre += col[k2 - 1]
            tsum = s - pre if gt2 else pre
            if counting:
                if tsum >= target - tol:
                    cnt += 1
                    if f1 < 0:
                        f1 = k1
                        f2 = k2
            elif tsum > best:
                best = tsum
    return best, cnt, f1, f2


def solve_quadrant(scores, table, spec: PolicyClassSpec) -> SolveResult:
    """Exact maximiser over all sample-distinguishable quadrant rules.

    Candidates are midpoints between consecutive sorted unique values plus
    -inf/+inf, for each of the four orientations. Co-optimal candidates are
    counted and the lexicographically first (orientation, t1, t2) wins,
    orientations ordered (le,le), (le,gt), (gt,le), (gt,gt).
    """
    if spec.kind != QUADRANT:
        raise ConfigError("solve_quadrant needs a quadrant class")
    g = _gamma(scores)
    x = _x_of(table)
    if g.size < 1:
        raise ValueError("no rows")
    if x.shape[0] != g.size:
        raise ValueError("scores and table differ in length")
    f = spec.design(x)
    u1, r1 = np.unique(f[:, 0], return_inverse=True)
    u2, r2 = np.unique(f[:, 1], return_inverse=True)
    r1 = r1.reshape(-1)
    r2 = r2.reshape(-1).astype(np.int64)
    order1 = np.argsort(r1, kind="stable").astype(np.int64)
    start1 = np.concatenate([[0], np.cumsum(np.bincount(r1, minlength=len(u1)))]).astype(np.int64)
    tol = _tolerance(g)
    args = [tuple(o == GT for o in orient) for orient in ORIENTATIONS]
    bests = [
        _quad_pass(order1, start1, r2, g, len(u1), len(u2), gt1, gt2, 0.0, tol, False)[0]
        for gt1, gt2 in args
    ]
    top = max(bests)
    ties = 0
    choice = None
    for oi, (gt1, gt2) in enumerate(args):
        if bests[oi] < top - tol:
            continue
        _, cnt, k1, k2 = _quad_pass(order1, start1, r2, g, len(u1), len(u2), gt1, gt2, top, tol, True)
        ties += cnt
        if choice is None and cnt > 0:
            choice = (oi, k1, k2)
    oi, k1, k2 = choice
    policy = Policy(QUADRANT, spec, (_candidate(u1, k1), _candidate(u2, k2)), ORIENTATIONS[oi])
    res = _finish(policy, g, x, EXHAUSTIVE_QUADRANT, True, ties)
    _check_value(res, g, top, tol)
    return res


def _check_value(res, g, top_sum, tol):
    n = g.size
    if abs(res.objective - (2.0 * top_sum - g.sum()) / n) > 4 * tol / n + 1e-12:
        raise SolverError("enumerated optimum and recomputed objective disagree")


# ---------------------------------------------------------------- linear, d = 2


# Directions closer than this (radians) count as parallel. Points on decimal
# grids such as (0.2, 0), (0.4, 0.4), (0.6, 0.8) are collinear on paper but
# form a 1e-17 triangle in floating point; splitting them would need a
# hyperplane no float policy can reproduce.
ANGLE_TOL = 1e-10


@njit(cache=True, nogil=True, inline="always")
def _flip(vx, vy):
    return vy < 0.0 or (vy == 0.0 and vx < 0.0)


@njit(cache=True, nogil=True)
def _pivot_setup(x, p, oth, vx, vy, nx, ny, ang, side):
    n = x.shape[0]
    m = 0
    for j in range(n):
        ax = x[j, 0] - x[p, 0]
        ay = x[j, 1] - x[p, 1]
        if ax == 0.0 and ay == 0.0:
            continue
        oth[m] = j
        vx[m] = ax
        vy[m] = ay
        if _flip(ax, ay):
            nx[m] = -ax
            ny[m] = -ay
        else:
            nx[m] = ax
            ny[m] = ay
        ang[m] = np.arctan2(ny[m], nx[m])
        # the sweep starts just clockwise of every normalized direction
        side[m] = not _flip(ax, ay)
        m += 1
    if m == 0:
        return m, np.zeros(0, dtype=np.int64)
    order = np.argsort(ang[:m], kind="mergesort")
    return m, order


@njit(cache=True, nogil=True)
def _group_end(order, q, m, ang):
    qe = q + 1
    while qe < m and ang[order[qe]] - ang[order[qe - 1]] <= ANGLE_TOL:
        qe += 1
    return qe


@njit(cache=True, nogil=True)
def _positions(x, p, oth, order, q, qe, nx, ny, tpos, onl):
    # order along the line by its dominant raw coordinate, so nearly
    # collinear points are ranked without any rounding
    a = order[q]
    c = 1 if abs(ny[a]) >= abs(nx[a]) else 0
    k = 0
    for t in range(q, qe):
        b = order[t]
        tpos[k] = x[oth[b], c]
        onl[k] = b
        k += 1
    tpos[k] = x[p, c]
    onl[k] = -1
    k += 1
    po = np.argsort(tpos[:k], kind="mergesort")
    return k, po


@njit(cache=True, nogil=True)
def _lin2_scan(x, g, total, target, tol, counting):
    n = x.shape[0]
    oth = np.empty(n, np.int64)
    vx = np.empty(n)
    vy = np.empty(n)
    nx = np.empty(n)
    ny = np.empty(n)
    ang = np.empty(n)
    side = np.zeros(n, np.bool_)
    tpos = np.empty(n + 1)
    onl = np.empty(n + 1, np.int64)
    gsum = np.empty(n + 1)
    best = -np.inf
    cnt = 0
    hit = np.full(5, -1, np.int64)
    for p in range(n):
        m, order = _pivot_setup(x, p, oth, vx, vy, nx, ny, ang, side)
        if m == 0:
            continue
        pg = 0.0
        for j in range(n):
            if x[j, 0] == x[p, 0] and x[j, 1] == x[p, 1]:
                pg += g[j]
        s_a = 0.0
        for q in range(m):
            if side[q]:
                s_a += g[oth[q]]
        q = 0
        ev = 0
        while q < m:
            qe = _group_end(order, q, m, ang)
            s_off = s_a
            s_on = pg
            for t in range(q, qe):
                b = order[t]
                s_on += g[oth[b]]
                if side[b]:
                    s_off -= g[oth[b]]
            k, po = _positions(x, p, oth, order, q, qe, nx, ny, tpos, onl)
            ng = 0
            prev = 0.0
            for t in range(k):
                b = onl[po[t]]
                val = pg if b < 0 else g[oth[b]]
                if t == 0 or tpos[po[t]] != prev:
                    gsum[ng] = val
                    ng += 1
                else:
                    gsum[ng - 1] += val
                prev = tpos[po[t]]
            pre = 0.0
            for c in range(ng + 1):
                if c > 0:
                    pre += gsum[c - 1]
                for dirn in range(2):
                    sa = s_off + (pre if dirn == 0 else s_on - pre)
                    for orient in range(2):
                        tsum = sa if orient == 0 else total - sa
                        if counting:
                            if tsum >= target - tol:
                                cnt += 1
                                if hit[0] < 0:
                                    hit[0] = p
                                    hit[1] = ev
                                    hit[2] = c
                                    hit[3] = dirn
                                    hit[4] = orient
                        elif tsum > best:
                            best = tsum
            for t in range(q, qe):
                b = order[t]
                if side[b]:
                    s_a -= g[oth[b]]
                    side[b] = False
                else:
                    s_a += g[oth[b]]
                    side[b] = True
            q = qe
            ev += 1
    return best, cnt, hit


@njit(cache=True, nogil=True)
def _lin2_mask(x, p, ev_target, cut, dirn, orient):
    n = x.shape[0]
    oth = np.empty(n, np.int64)
    vx = np.empty(n)
    vy = np.empty(n)
    nx = np.empty(n)
    ny = np.empty(n)
    ang = np.empty(n)
    side = np.zeros(n, np.bool_)
    tpos = np.empty(n + 1)
    onl = np.empty(n + 1, np.int64)
    in_a = np.zeros(n, np.bool_)
    m, order = _pivot_setup(x, p, oth, vx, vy, nx, ny, ang, side)
    q = 0
    ev = 0
    while q < m:
        qe = _group_end(order, q, m, ang)
        if ev == ev_target:
            for t in range(m):
                in_a[oth[t]] = side[t]
            k, po = _positions(x, p, oth, order, q, qe, nx, ny, tpos, onl)
            grp = -1
            prev = 0.0
            for t in range(k):
                if t == 0 or tpos[po[t]] != prev:
                    grp += 1
                prev = tpos[po[t]]
                to_a = (grp < cut) if dirn == 0 else (grp >= cut)
                b = onl[po[t]]
                if b >= 0:
                    in_a[oth[b]] = to_a
                else:
                    for j in range(n):
                        if x[j, 0] == x[p, 0] and x[j, 1] == x[p, 1]:
                            in_a[j] = to_a
            break
        for t in range(q, qe):
            side[order[t]] = not side[order[t]]
        q = qe
        ev += 1
    if orient == 1:
        for j in range(n):
            in_a[j] = not in_a[j]
    return in_a


def _beta_for(f, mask):
    """Max-margin separating (intercept, slopes) in raw feature units."""
    n, d = f.shape
    if mask.all():
        return np.r_[1.0, np.zeros(d)]
    if not mask.any():
        return np.r_[-1.0, np.zeros(d)]
    mu = f.mean(axis=0)
    sd = f.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    fs = (f - mu) / sd
    sgn = np.where(mask, 1.0, -1.0)
    a_ub = np.column_stack([-sgn[:, None] * np.column_stack([np.ones(n), fs]), np.ones(n)])
    c = np.r_[np.zeros(d + 1), -1.0]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n), bounds=[(-1, 1)] * (d + 1) + [(0, None)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-12:
        raise SolverError("enumerated dichotomy is not strictly separable")
    w = res.x[1 : d + 1] / sd
    v = f @ w
    b0 = -0.5 * (np.max(v[~mask]) + np.min(v[mask]))
    beta = np.r_[b0, w]
    if not np.array_equal((beta[0] + f @ beta[1:]) >= 0, mask):
        raise SolverError("separating hyperplane does not reproduce the enumerated assignment")
    return beta


def _solve_linear_1d(g, f, spec, x):
    v = f[:, 0]
    u, r = np.unique(v, return_inverse=True)
    r = r.reshape(-1)
    sums = np.bincount(r, weights=g, minlength=len(u))
    pre = np.concatenate([[0.0], np.cumsum(sums)])
    total = float(np.sum(g))
    tol = _tolerance(g)
    # candidate order: never, always, x <= c for each cut, x >= c for each cut
    cands = [(0.0, ("never", 0)), (total, ("always", 0))]
    for k in range(1, len(u)):
        cands.append((pre[k], ("le", k)))
    for k in range(1, len(u)):
        cands.append((total - pre[k], ("ge", k)))
    top = max(c[0] for c in cands)
    hits = [c for c in cands if c[0] >= top - tol]
    kind, k = hits[0][1]
    if kind == "never":
        beta = (-1.0, 0.0)
    elif kind == "always":
        beta = (1.0, 0.0)
    elif kind == "le":
        c = _mid(u[k - 1], u[k])
        beta = (c, -1.0)
    else:
        a, b = u[k - 1], u[k]
        c = a + (b - a) / 2.0
        c = c if a < c <= b else b
        beta = (-c, 1.0)
    policy = Policy(LINEAR, spec, beta=beta)
    res = _finish(policy, g, x, HYPERPLANE_ENUMERATION, True, len(hits))
    _check_value(res, g, top, tol)
    return res


def _solve_linear_2d(g, f, spec, x):
    f = np.ascontiguousarray(f, dtype=float)
    total = float(np.sum(g))
    tol = _tolerance(g)
    best, _, _ = _lin2_scan(f, g, total, 0.0, tol, False)
    top = max(best, 0.0, total)
    # trivial rules first in the tie order
    ties = int(0.0 >= top - tol) + int(total >= top - tol)
    if best >= top - tol:
        _, cnt, hit = _lin2_scan(f, g, total, top, tol, True)
        ties += cnt
    if 0.0 >= top - tol:
        mask = np.zeros(g.size, dtype=bool)
    elif total >= top - tol:
        mask = np.ones(g.size, dtype=bool)
    else:
        mask = _lin2_mask(f, int(hit[0]), int(hit[1]), int(hit[2]), int(hit[3]), int(hit[4]))
    beta = _beta_for(f, mask)
    policy = Policy(LINEAR, spec, beta=tuple(beta))
    res = _finish(policy, g, x, HYPERPLANE_ENUMERATION, True, ties)
    _check_value(res, g, top, tol)
    return res


# ---------------------------------------------------------------- local search


def _profile(fs, g, w):
    """Best threshold on the index fs @ w: (treated sum, cut value, side)."""
    s = fs @ w
    o = np.argsort(s, kind="stable")
    ss = s[o]
    pre = np.concatenate([[0.0], np.cumsum(g[o])])
    total = pre[-1]
    brk = np.flatnonzero(ss[:-1] < ss[1:]) + 1
    ks = np.concatenate([[0], brk, [len(s)]])
    upper = total - pre[ks]
    lower = pre[ks]
    iu, il = int(np.argmax(upper)), int(np.argmax(lower))
    if upper[iu] >= lower[il]:
        return upper[iu], _cut(ss, ks[iu]), 1
    return lower[il], _cut(ss, ks[il]), -1


def _cut(ss, k):
    if k == 0:
        return ss[0] - 1.0
    if k == len(ss):
        return ss[-1] + 1.0
    return ss[k - 1] + (ss[k] - ss[k - 1]) / 2.0


def _local_search(g, f, spec, x, restarts, seed):
    n, d = f.shape
    mu = f.mean(axis=0)
    sd = f.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    fs = (f - mu) / sd
    rng = np.random.default_rng(seed)
    tol = _tolerance(g)
    best = None
    for _ in range(max(1, restarts)):
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        val, cut, sgn = _profile(fs, g, w)
        step = 0.5
        while step > 1e-3:
            moved = False
            for j in range(d):
                for delta in (step, -step):
                    w2 = w.copy()
                    w2[j] += delta
                    nrm = np.linalg.norm(w2)
                    if nrm == 0:
                        continue
                    w2 /= nrm
                    v2, c2, s2 = _profile(fs, g, w2)
                    if v2 > val + tol:
                        w, val, cut, sgn, moved = w2, v2, c2, s2, True
            if not moved:
                step *= 0.5
        if best is None or val > best[0] + tol:
            best = (val, w, cut, sgn)
    _, w, cut, sgn = best
    # treat iff sgn * (fs @ w - cut) >= 0, mapped back to raw features
    slopes = sgn * w / sd
    b0 = -sgn * cut - float(np.sum(slopes * mu))
    beta = np.r_[b0, slopes]
    if not np.any(beta):
        beta = np.r_[-1.0, np.zeros(d)]
    policy = Policy(LINEAR, spec, beta=tuple(beta))
    return _finish(policy, g, x, LOCAL_SEARCH, False, 1)


def solve_linear(scores, table, spec: PolicyClassSpec, restarts: int = 20, seed=0, method: str = "auto") -> SolveResult:
    """Maximise over rules ``beta . (1, features) >= 0``.

    With at most two effective features the maximum is exact (every
    sample dichotomy a line can produce is enumerated). Otherwise, or with
    ``method="local"``, the best of ``restarts`` coordinate searches over
    the slope direction is returned with ``exact=False``; the intercept is
    profiled out exactly for each direction.
    """
    if spec.kind != LINEAR:
        raise ConfigError("solve_linear needs a linear class")
    g = _gamma(scores)
    x = _x_of(table)
    if x.shape[0] != g.size:
        raise ValueError("scores and table differ in length")
    f = spec.design(x)
    d = f.shape[1]
    if d < 1:
        raise ConfigError("linear rules need at least one feature")
    if method == "local" or d > 2:
        return _local_search(g, f, spec, x, restarts, seed)
    if method != "auto":
        raise ConfigError(f"unknown method {method!r}")
    if d == 1:
        return _solve_linear_1d(g, f, spec, x)
    return _solve_linear_2d(g, f, spec, x)


def solve(scores, table, spec: PolicyClassSpec, restarts: int = 20, seed=0) -> SolveResult:
    if spec.kind == QUADRANT:
        return solve_quadrant(scores, table, spec)
    return solve_linear(scores, table, spec, restarts, seed)


__all__ = [
    "SolveResult", "SolverError", "solve", "solve_linear", "solve_quadrant", "verify_solution",
    "EXHAUSTIVE_QUADRANT", "HYPERPLANE_ENUMERATION", "LOCAL_SEARCH", "LE", "GT",
]

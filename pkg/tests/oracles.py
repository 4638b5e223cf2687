"""Independent brute-force references used across the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from ivpolicy.optimize import ANGLE_TOL


def quadrant_bruteforce(x2, g):
    """Best treated sum over every quadrant rule, evaluated directly."""
    x2 = np.asarray(x2, dtype=float)
    g = np.asarray(g, dtype=float)
    cuts = []
    for j in range(2):
        u = np.unique(x2[:, j])
        cuts.append(np.concatenate([[-np.inf], (u[:-1] + u[1:]) / 2, [np.inf]]))
    best = -np.inf
    for s1, s2 in itertools.product((0, 1), repeat=2):
        below1 = x2[None, :, 0] <= cuts[0][:, None]        # (cut, unit)
        below2 = x2[None, :, 1] <= cuts[1][:, None]
        a1 = below1 if s1 == 0 else ~below1
        a2 = below2 if s2 == 0 else ~below2
        mask = a1[:, None, :] & a2[None, :, :]             # every (t1, t2) pair
        best = max(best, float(np.mean(np.where(mask, g, -g), axis=-1).max()))
    return best


def linear_bruteforce_2d(x2, g):
    """Best objective over halfplane rules via critical-angle cells.

    Between consecutive directions orthogonal to some x_i - x_j the order of
    projections is fixed, so one direction per cell plus an exhaustive
    threshold scan reaches every realizable dichotomy.
    """
    x2 = np.asarray(x2, dtype=float)
    g = np.asarray(g, dtype=float)
    n = len(g)
    i, j = np.triu_indices(n, 1)
    dv = x2[j] - x2[i]
    keep = np.any(dv != 0, axis=1)
    ang = np.arctan2(dv[keep, 1], dv[keep, 0]) + np.pi / 2
    ang = np.unique(np.mod(np.concatenate([ang, ang + np.pi]), 2 * np.pi))
    if ang.size == 0:
        mids = np.array([0.0])
    else:
        # directions within the solver's angular tolerance form one critical angle
        brk = np.diff(ang) > ANGLE_TOL
        lo = ang[np.r_[True, brk]]          # first angle of each cluster
        hi = ang[np.r_[brk, True]]          # last angle of each cluster
        mids = (hi + np.r_[lo[1:], lo[0] + 2 * np.pi]) / 2
    proj = x2 @ np.vstack([np.cos(mids), np.sin(mids)])     # (unit, cell)
    order = np.argsort(proj, axis=0)
    ss = np.take_along_axis(proj, order, axis=0)
    pre = np.vstack([np.zeros((1, mids.size)), np.cumsum(g[order], axis=0)])
    edge = np.ones((1, mids.size), dtype=bool)
    ok = np.vstack([edge, ss[1:] > ss[:-1], edge])            # thresholds between distinct projections
    upper = np.where(ok, pre[-1] - pre, -np.inf)
    # near-ties in the running sums are settled by exact evaluation below, not by argmax
    k, cell = np.nonzero(upper >= upper.max(axis=0) - 1e-9)
    rank = np.argsort(order, axis=0)
    masks = rank[:, cell].T >= k[:, None]                     # (candidate, unit): top of the order is treated
    masks = np.vstack([masks, np.zeros((1, n), dtype=bool), np.ones((1, n), dtype=bool)])
    # exact evaluation of each cell's best dichotomy
    return float(np.mean(np.where(masks, g, -g), axis=1).max())


def linear_bruteforce_1d(x1, g):
    x1 = np.asarray(x1, dtype=float)
    g = np.asarray(g, dtype=float)
    u = np.unique(x1)
    best = max(np.mean(g), -np.mean(g))
    for c in (u[:-1] + u[1:]) / 2:
        for a in (x1 <= c, x1 >= c):
            best = max(best, float(np.mean(np.where(a, g, -g))))
    return best


def cell_probabilities(dgp, x):
    """P(D=d, Z=z | x) under the compliance-type design."""
    zp = dgp.instrument_prob(x)
    a, nt = dgp.always_share, dgp.never_share
    p1, p0 = 1 - nt, a
    return {(1, 1): zp * p1, (0, 1): zp * (1 - p1), (1, 0): (1 - zp) * p0, (0, 0): (1 - zp) * (1 - p0)}


def true_cell_means(dgp, x):
    """E[Y | D=d, Z=z, x], written from the type means."""
    mu = dgp.type_means(x)
    a, nt = dgp.always_share, dgp.never_share
    c = 1 - a - nt
    out = {}
    if c + a > 0:
        out[(1, 1)] = (c * mu["mu_c1"] + a * mu["mu_a1"]) / (c + a)
    if c + nt > 0:
        out[(0, 0)] = (c * mu["mu_c0"] + nt * mu["mu_n0"]) / (c + nt)
    if a > 0:
        out[(1, 0)] = mu["mu_a1"]
    if nt > 0:
        out[(0, 1)] = mu["mu_n0"]
    return out


def expected_component(dgp, x, theta, scheme, criterion, mode, r):
    """Average over x of E[score | x] with nuisances ``theta`` plugged in.

    The score is linear in Y given (D, Z), so the conditional expectation is
    a sum over the four (d, z) cells with Y replaced by its true cell mean.
    """
    from types import SimpleNamespace

    from ivpolicy.bounds import compute_bounds
    from ivpolicy.scores import orthogonal_bounds, orthogonal_score, plugin_score

    plug = compute_bounds(None, theta, scheme, r)
    base = criterion.baseline.assign(x) if criterion.baseline is not None else None
    if mode == "plugin":
        return float(np.mean(plugin_score(plug, criterion, base)))
    names = ("tau_low", "tau_high", "y0_high", "y0_low", "y1_high", "y1_low")
    pv = {k: getattr(plug, k) for k in names}
    probs = cell_probabilities(dgp, x)
    means = true_cell_means(dgp, x)
    n = x.shape[0]
    total = np.zeros(n)
    for (d, z), pr in probs.items():
        if (d, z) not in means:
            continue
        obs = SimpleNamespace(y=means[(d, z)], d=np.full(n, float(d)), z=np.full(n, float(z)))
        ob = orthogonal_bounds(obs, plug.theta, plug.theta.zprob, r, scheme, plug.selection, plug)
        total += pr * orthogonal_score(pv, ob, criterion, base)
    return float(np.mean(total))


def perturbed(theta, x, t, scale=0.1):
    """theta + t * h with a smooth bounded direction h per component."""
    kw = {}
    for j, name in enumerate(("h1", "h0", "m10", "m01", "p1", "p0", "m11", "m00", "zprob")):
        # positive directions: with mixed signs the second-order cross terms
        # can nearly cancel and leave a cubic remainder on this t grid
        h = scale * (0.5 + 0.5 * np.sin(np.pi * x[:, 0]) * x[:, 1] ** (1 + j % 3))
        kw[name] = np.asarray(getattr(theta, name), dtype=float) + t * h
    return theta.replace(**kw, m_obs=None)


def drift_slope(dgp, x, scheme, criterion, mode, r, ts=(0.2, 0.1, 0.05, 0.025)):
    """Log-log slope of |E[score(theta + t h)] - E[score(theta)]| against t."""
    th = dgp.true_nuisance(x)
    v0 = expected_component(dgp, x, th, scheme, criterion, mode, r)
    drift = [abs(expected_component(dgp, x, perturbed(th, x, t), scheme, criterion, mode, r) - v0) for t in ts]
    if max(drift) < 1e-13:
        return float("inf"), drift
    slope = np.polyfit(np.log(ts), np.log(drift), 1)[0]
    return float(slope), drift

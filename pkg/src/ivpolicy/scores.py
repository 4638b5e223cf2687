"""Per-unit policy scores for each ambiguity criterion.

A score has the form

    gamma = phi0 + sum_l a_l * phi_l * 1{phi_l(plug-in) >= 0}

and the optimal rule in a class maximises mean((2 pi - 1) * gamma).
In orthogonal mode every phi carries its influence-function adjustment,
while the indicators keep using plug-in values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    BALKE_PEARL, MANSKI, MANSKI_PEPPER, POINT_LATE, Y_OPS, BoundsEstimate, EnvelopeSelection, _KIND,
    compute_bounds,
)
from .core_model import ConfigError, OutcomeRange, Policy
from .nuisance import PointNuisance

MAXIMIN_WELFARE = "maximin_welfare"
MAXIMIN_IMPACT = "maximin_impact"
MINIMAX_REGRET = "minimax_regret"
MINIMAX_REGRET_BASELINE = "minimax_regret_baseline"
HURWICZ_WELFARE = "hurwicz_welfare"
HURWICZ_IMPACT = "hurwicz_impact"
CRITERIA = (MAXIMIN_WELFARE, MAXIMIN_IMPACT, MINIMAX_REGRET, MINIMAX_REGRET_BASELINE, HURWICZ_WELFARE,
            HURWICZ_IMPACT)
WELFARE_KINDS = (MAXIMIN_WELFARE, HURWICZ_WELFARE)

PLUGIN = "plugin"
ORTHOGONAL = "orthogonal"
MODES = (PLUGIN, ORTHOGONAL)


@dataclass(frozen=True)
class Criterion:
    kind: str
    delta: float | None = None
    delta0: float | None = None
    delta1: float | None = None
    baseline: Policy | None = None

    def __post_init__(self):
        if self.kind not in CRITERIA:
            raise ConfigError(f"unknown criterion {self.kind!r}")
        need = {HURWICZ_IMPACT: ("delta",), HURWICZ_WELFARE: ("delta0", "delta1")}.get(self.kind, ())
        for name in need:
            v = getattr(self, name)
            if v is None:
                raise ConfigError(f"{self.kind} needs {name}")
            if not 0.0 <= float(v) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.kind == MINIMAX_REGRET_BASELINE and self.baseline is None:
            raise ConfigError("minimax_regret_baseline needs a baseline policy")

    @property
    def needs_y_bounds(self) -> bool:
        return self.kind in WELFARE_KINDS

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for name in ("delta", "delta0", "delta1"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        if self.baseline is not None:
            out["baseline"] = self.baseline.to_json()
        return out


@dataclass(frozen=True, eq=False)
class InfluenceAdjustment:
    alphas: tuple
    terms: tuple
    total: np.ndarray


@dataclass(frozen=True, eq=False)
class OrthogonalBounds:
    """Orthogonalised bound values and the adjustments that produced them."""

    values: dict
    adjustments: dict


@dataclass(frozen=True, eq=False)
class ScoreVector:
    gamma: np.ndarray
    mode: str
    criterion: Criterion
    scheme: str
    phi0: np.ndarray
    phi: np.ndarray            # (n, L)
    signs: np.ndarray          # (L,)
    indicators: np.ndarray     # (n, L) bool, from plug-in values
    phi0_adjustment: np.ndarray
    phi_adjustment: np.ndarray  # (n, L)
    adjustment: np.ndarray     # gamma minus plug-in gamma, from the components
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.gamma.shape[0])

    def recombine(self) -> np.ndarray:
        return self.phi0 + np.sum(self.signs * self.phi * self.indicators, axis=1)


# ---------------------------------------------------------------- plug-in


def _bound_dict(b) -> dict:
    names = ("tau_low", "tau_high") + Y_OPS
    return {k: (None if getattr(b, k, None) is None else np.atleast_1d(np.asarray(getattr(b, k), dtype=float)))
            for k in names}


def _structure(criterion: Criterion, vals: dict, ind_vals: dict, baseline_assign):
    """phi0, phi (n, L), signs, indicators for one criterion."""
    kind = criterion.kind
    th, tl = vals["tau_high"], vals["tau_low"]
    n = th.shape[0]
    empty = (np.zeros((n, 0)), np.zeros(0), np.zeros((n, 0), dtype=bool))
    if kind in WELFARE_KINDS and vals["y1_low"] is None:
        raise ConfigError(f"{kind} needs potential-outcome bounds; scheme only provides CATE bounds")
    if kind == MINIMAX_REGRET:
        phi = np.column_stack([th, -tl])
        ind = np.column_stack([ind_vals["tau_high"] >= 0, -ind_vals["tau_low"] >= 0])
        return np.zeros(n), phi, np.array([1.0, -1.0]), ind
    if kind == MAXIMIN_IMPACT:
        return (tl.copy(),) + empty
    if kind == MAXIMIN_WELFARE:
        return (vals["y1_low"] - vals["y0_low"],) + empty
    if kind == HURWICZ_IMPACT:
        dl = float(criterion.delta)
        return (dl * th + (1 - dl) * tl,) + empty
    if kind == HURWICZ_WELFARE:
        d0, d1 = float(criterion.delta0), float(criterion.delta1)
        w1 = d1 * vals["y1_high"] + (1 - d1) * vals["y1_low"]
        w0 = d0 * vals["y0_high"] + (1 - d0) * vals["y0_low"]
        return (w1 - w0,) + empty
    # baseline regret: the baseline decides which bound is relevant
    if baseline_assign is None:
        raise ConfigError("baseline assignment required for minimax_regret_baseline")
    b = np.asarray(baseline_assign).reshape(-1)
    return (np.where(b == 1, th, tl),) + empty


def _combine(phi0, phi, signs, ind):
    return phi0 + np.sum(signs * phi * ind, axis=1)


def plugin_score(bounds, criterion: Criterion, baseline_assign=None):
    """Score from bound values (array in, array out; scalars allowed)."""
    vals = _bound_dict(bounds)
    phi0, phi, signs, ind = _structure(criterion, vals, vals, baseline_assign)
    g = _combine(phi0, phi, signs, ind)
    return g if np.ndim(getattr(bounds, "tau_low")) else float(g[0])


# ---------------------------------------------------------------- adjustments


def _obs(obs):
    return (np.asarray(obs.y, dtype=float), np.asarray(obs.d, dtype=float), np.asarray(obs.z, dtype=float))


def influence_adjust_balke_pearl(obs, theta: PointNuisance, zhat, r: OutcomeRange, which: str = "upper") -> InfluenceAdjustment:
    """Influence-function adjustment for the CATE upper or lower bound.

    alpha1 = Z/zhat - (1-Z)/(1-zhat)                       times (Y - h(Z))
    alpha2 = D(1-Z)/(1-zhat) - (1-D)Z/zhat                 times (Y - m(D,Z))
    alpha3 = (m10 - Y_L)(1-Z)/(1-zhat) - (Y_U - m01)Z/zhat  times (D - p(Z))
    The lower bound swaps Y_U and Y_L in alpha3.
    """
    if which not in ("upper", "lower"):
        raise ValueError("which must be 'upper' or 'lower'")
    y, d, z = _obs(obs)
    zh = np.asarray(zhat, dtype=float)
    t = theta
    lo, hi = (r.y_low, r.y_high) if which == "upper" else (r.y_high, r.y_low)
    w1 = z / zh
    w0 = (1 - z) / (1 - zh)
    a1 = w1 - w0
    a2 = d * w0 - (1 - d) * w1
    a3 = (t.m10 - lo) * w0 - (hi - t.m01) * w1
    h_obs = np.where(z == 1, t.h1, t.h0)
    m_obs = np.where(d == 1, np.where(z == 1, t.m11, t.m10), np.where(z == 1, t.m01, t.m00))
    p_obs = np.where(z == 1, t.p1, t.p0)
    terms = (a1 * (y - h_obs), a2 * (y - m_obs), a3 * (d - p_obs))
    return InfluenceAdjustment((a1, a2, a3), terms, terms[0] + terms[1] + terms[2])


def psi_adjustment(obs, theta: PointNuisance, zhat, zval: int, d: int, fill):
    """Adjustment for m(d,z) P(D=d|z) + fill P(D=1-d|z) at instrument value zval."""
    y, dd, z = _obs(obs)
    zh = np.asarray(zhat, dtype=float)
    wz = z / zh if zval == 1 else (1 - z) / (1 - zh)
    m = theta.m(d, zval)
    p = theta.p(zval)
    if d == 1:
        return wz * (dd * (y - m) + (m - fill) * (dd - p))
    return wz * ((1 - dd) * (y - m) - (m - fill) * (dd - p))


def _fills(r):
    return {"y0_high": (0, r.y_high), "y0_low": (0, r.y_low), "y1_high": (1, r.y_high), "y1_low": (1, r.y_low)}


def orthogonal_bounds(obs, theta: PointNuisance, zhat, r: OutcomeRange | None, scheme: str,
                      selection: EnvelopeSelection | None = None, plugin: BoundsEstimate | None = None, *,
                      miv_reversed: bool = False) -> OrthogonalBounds:
    """Bound values plus influence adjustments.

    For min/max envelopes the component chosen by the plug-in selection is
    the one that gets adjusted.
    """
    if plugin is None:
        raise ConfigError("plug-in bounds are required")
    pv = _bound_dict(plugin)
    y, d, z = _obs(obs)
    adj: dict = {}
    if scheme == BALKE_PEARL:
        adj["tau_high"] = influence_adjust_balke_pearl(obs, theta, zhat, r, "upper").total
        adj["tau_low"] = influence_adjust_balke_pearl(obs, theta, zhat, r, "lower").total
        own = {"y1_high": 1, "y1_low": 1, "y0_high": 0, "y0_low": 0}
        for op, (dd, fill) in _fills(r).items():
            adj[op] = psi_adjustment(obs, theta, zhat, own[op], dd, fill)
    elif scheme in (MANSKI, MANSKI_PEPPER):
        if selection is None:
            raise ConfigError(f"{scheme} orthogonalisation needs the envelope selection")
        zh = np.asarray(zhat, dtype=float)
        top = 0 if miv_reversed else 1
        for op, (dd, fill) in _fills(r).items():
            c = {zz: psi_adjustment(obs, theta, zhat, zz, dd, fill) for zz in (0, 1)}
            sel = selection.selected[op]
            chosen = np.where(sel == 1, c[1], c[0])
            if scheme == MANSKI:
                adj[op] = chosen
                continue
            own = top if _KIND[op] == "min" else 1 - top
            w_own = zh if own == 1 else 1 - zh
            comp_own = selection.candidates[op][:, own]
            comp_sel = selection.value(op)
            sign = 1.0 if own == 1 else -1.0
            adj[op] = w_own * c[own] + (1 - w_own) * chosen + sign * (comp_own - comp_sel) * (z - zh)
        adj["tau_high"] = adj["y1_high"] - adj["y0_low"]
        adj["tau_low"] = adj["y1_low"] - adj["y0_high"]
    elif scheme == POINT_LATE:
        zh = np.asarray(zhat, dtype=float)
        a1 = z / zh - (1 - z) / (1 - zh)
        t = theta
        h_obs = np.where(z == 1, t.h1, t.h0)
        p_obs = np.where(z == 1, t.p1, t.p0)
        late = pv["tau_high"]
        a = (a1 * (y - h_obs) - late * a1 * (d - p_obs)) / (t.p1 - t.p0)
        adj["tau_high"] = a
        adj["tau_low"] = a
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    values = {k: (None if pv[k] is None or k not in adj else pv[k] + adj[k]) for k in pv}
    return OrthogonalBounds(values, adj)


def orthogonal_score(plugin_vals: dict, orth: OrthogonalBounds, criterion: Criterion, baseline_assign=None):
    """Score with orthogonal components and plug-in indicators."""
    phi0, phi, signs, ind = _structure(criterion, orth.values, plugin_vals, baseline_assign)
    return _combine(phi0, phi, signs, ind)


# ---------------------------------------------------------------- batch


def build_scores(table, nuisances, scheme: str, criterion: Criterion, mode: str, r: OutcomeRange | None = None, *,
                 epsilon_late: float = 0.05, miv_reversed: bool = False, offset: float = 0.0,
                 bounds: BoundsEstimate | None = None) -> ScoreVector:
    """Scores for every unit from cross-fitted nuisances.

    ``offset`` is a per-treated-unit cost subtracted from the CATE bounds
    (and the treated-arm outcome bounds) before scoring.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    r = r if r is not None else table.outcome_range
    if bounds is None:
        bounds = compute_bounds(table, nuisances, scheme, r, epsilon_late=epsilon_late, miv_reversed=miv_reversed)
    base = criterion.baseline.assign(table.x) if criterion.baseline is not None else None
    pb = bounds.shifted(offset)
    pv = _bound_dict(pb)
    phi0_p, phi_p, signs, ind = _structure(criterion, pv, pv, base)
    gamma_p = _combine(phi0_p, phi_p, signs, ind)
    diag = {"crossed_units": bounds.crossed, "clip_counts": dict(bounds.clip_counts),
            "envelope_ties": _envelope_ties(bounds.selection)}
    if mode == PLUGIN:
        zeros = np.zeros_like(gamma_p)
        return ScoreVector(gamma_p, mode, criterion, scheme, phi0_p, phi_p, signs, ind, zeros,
                           np.zeros_like(phi_p), zeros.copy(), diag)
    theta = bounds.theta
    orth = orthogonal_bounds(table, theta, theta.zprob, r, scheme, bounds.selection, bounds,
                             miv_reversed=miv_reversed)
    ov = {k: (None if v is None else v - offset if k in ("tau_low", "tau_high", "y1_low", "y1_high") else v)
          for k, v in orth.values.items()}
    phi0_o, phi_o, _, _ = _structure(criterion, ov, pv, base)
    gamma_o = _combine(phi0_o, phi_o, signs, ind)
    phi0_adj = phi0_o - phi0_p
    phi_adj = phi_o - phi_p
    adj_total = phi0_adj + np.sum(signs * phi_adj * ind, axis=1)
    return ScoreVector(gamma_o, mode, criterion, scheme, phi0_o, phi_o, signs, ind, phi0_adj, phi_adj,
                       adj_total, diag)


def _envelope_ties(sel: EnvelopeSelection | None) -> int:
    if sel is None:
        return 0
    return int(sum(np.count_nonzero(c[:, 0] == c[:, 1]) for c in sel.candidates.values()))

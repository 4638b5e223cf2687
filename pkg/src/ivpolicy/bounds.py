"""Per-unit bounds on E[Y(d) | x] and on the CATE under several IV schemes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core_model import ConfigError, DataError, NumericalError, OutcomeRange
from .nuisance import CrossFitNuisances, PointNuisance

MANSKI = "manski"
BALKE_PEARL = "balke_pearl"
MANSKI_PEPPER = "manski_pepper"
POINT_LATE = "point_late"
SCHEMES = (MANSKI, BALKE_PEARL, MANSKI_PEPPER, POINT_LATE)

Y_OPS = ("y0_high", "y0_low", "y1_high", "y1_low")
_KIND = {"y0_high": "min", "y1_high": "min", "y0_low": "max", "y1_low": "max"}


@dataclass(frozen=True, eq=False)
class EnvelopeSelection:
    """Candidates and chosen index for each min/max operator.

    ``candidates[op]`` has shape (n, 2); column j holds the component built
    from instrument value z=j. ``selected[op]`` is 0 or 1 per unit.
    """

    candidates: dict
    selected: dict

    def value(self, op: str) -> np.ndarray:
        c = self.candidates[op]
        return c[np.arange(c.shape[0]), self.selected[op]]

    def kind(self, op: str) -> str:
        return _KIND[op]


@dataclass(frozen=True, eq=False)
class BoundsEstimate:
    tau_low: np.ndarray
    tau_high: np.ndarray
    scheme: str
    y0_low: np.ndarray | None = None
    y0_high: np.ndarray | None = None
    y1_low: np.ndarray | None = None
    y1_high: np.ndarray | None = None
    selection: EnvelopeSelection | None = None
    clip_counts: dict = field(default_factory=dict)
    theta: PointNuisance | None = None

    @property
    def n(self) -> int:
        return int(np.asarray(self.tau_low).reshape(-1).shape[0])

    @property
    def has_y_bounds(self) -> bool:
        return self.y0_low is not None

    @property
    def crossed(self) -> int:
        """Units whose CATE interval is empty (lower above upper)."""
        return int(np.count_nonzero(np.asarray(self.tau_low) > np.asarray(self.tau_high)))

    def shifted(self, offset: float) -> BoundsEstimate:
        """Subtract a per-treated-unit cost from every treated-arm quantity."""
        if offset == 0:
            return self
        sub = lambda v: None if v is None else np.asarray(v) - offset  # noqa: E731
        return BoundsEstimate(sub(self.tau_low), sub(self.tau_high), self.scheme, self.y0_low, self.y0_high,
                              sub(self.y1_low), sub(self.y1_high), self.selection, self.clip_counts, self.theta)


def psi(m, p, d: int, fill):
    """m(d,z) P(D=d | z) + fill * P(D=1-d | z), with p = P(D=1 | z)."""
    if d == 1:
        return m * p + fill * (1 - p)
    return m * (1 - p) + fill * p


def _check(theta: PointNuisance, r: OutcomeRange, with_h=True):
    tol = 1e-9 * r.width
    names = ["m10", "m01", "m11", "m00"] + (["h1", "h0"] if with_h else [])
    for name in names:
        v = np.asarray(getattr(theta, name))
        if np.any(v < r.y_low - tol) or np.any(v > r.y_high + tol):
            raise DataError(f"{name} outside outcome range [{r.y_low}, {r.y_high}]")
    for name in ("p1", "p0"):
        v = np.asarray(getattr(theta, name))
        if np.any(v < 0) or np.any(v > 1):
            raise DataError(f"{name} outside [0, 1]")


def balke_pearl_bounds(theta: PointNuisance, r: OutcomeRange) -> BoundsEstimate:
    """Bounds under one-sided monotone compliance (no defiers).

    The CATE width is (p(0,x) + 1 - p(1,x)) * (Y_U - Y_L).
    """
    _check(theta, r)
    t = theta
    lo, hi = r.y_low, r.y_high
    tau_high = t.h1 - t.h0 + t.p0 * (t.m10 - lo) + (1 - t.p1) * (hi - t.m01)
    tau_low = t.h1 - t.h0 + t.p0 * (t.m10 - hi) + (1 - t.p1) * (lo - t.m01)
    return BoundsEstimate(
        np.asarray(tau_low, dtype=float), np.asarray(tau_high, dtype=float), BALKE_PEARL,
        y0_low=np.asarray(psi(t.m00, t.p0, 0, lo), dtype=float),
        y0_high=np.asarray(psi(t.m00, t.p0, 0, hi), dtype=float),
        y1_low=np.asarray(psi(t.m11, t.p1, 1, lo), dtype=float),
        y1_high=np.asarray(psi(t.m11, t.p1, 1, hi), dtype=float),
    )


def _pick(c0, c1, kind):
    # lowest index wins ties
    sel = (c1 < c0) if kind == "min" else (c1 > c0)
    return sel.astype(np.int64), np.where(sel, c1, c0)


def _psi_pair(t: PointNuisance, d: int, fill):
    return psi(t.m(d, 0), t.p0, d, fill), psi(t.m(d, 1), t.p1, d, fill)


def manski_bounds(theta: PointNuisance, r: OutcomeRange) -> BoundsEstimate:
    """Intersection bounds over instrument values under mean independence."""
    _check(theta, r, with_h=False)
    t = theta.as_arrays()
    lo, hi = r.y_low, r.y_high
    fills = {"y0_high": (0, hi), "y0_low": (0, lo), "y1_high": (1, hi), "y1_low": (1, lo)}
    cand, sel, val = {}, {}, {}
    for op, (d, fill) in fills.items():
        c0, c1 = (np.atleast_1d(np.asarray(c, dtype=float)) for c in _psi_pair(t, d, fill))
        sel[op], val[op] = _pick(c0, c1, _KIND[op])
        cand[op] = np.column_stack([c0, c1])
    return BoundsEstimate(
        val["y1_low"] - val["y0_high"], val["y1_high"] - val["y0_low"], MANSKI,
        y0_low=val["y0_low"], y0_high=val["y0_high"], y1_low=val["y1_low"], y1_high=val["y1_high"],
        selection=EnvelopeSelection(cand, sel),
    )


def manski_pepper_bounds(theta: PointNuisance, zprob, r: OutcomeRange, reversed_direction: bool = False) -> BoundsEstimate:
    """Bounds under a monotone instrument, E[Y(d)|Z=0,x] <= E[Y(d)|Z=1,x].

    Upper envelopes use Y_U and lower envelopes use Y_L inside the
    psi components. ``reversed_direction`` assumes the opposite ordering,
    which swaps the roles of z=0 and z=1.
    """
    _check(theta, r, with_h=False)
    t = theta.as_arrays()
    zp = np.atleast_1d(np.asarray(zprob, dtype=float))
    if np.any(zp <= 0) or np.any(zp >= 1):
        raise DataError("instrument probability must lie strictly inside (0, 1)")
    lo, hi = r.y_low, r.y_high
    top = 0 if reversed_direction else 1
    w = {1: zp, 0: 1 - zp}
    cand, sel, val, rest = {}, {}, {}, {}
    for op, (d, fill) in {"y0_high": (0, hi), "y0_low": (0, lo), "y1_high": (1, hi), "y1_low": (1, lo)}.items():
        c0, c1 = (np.atleast_1d(np.asarray(c, dtype=float)) for c in _psi_pair(t, d, fill))
        sel[op], val[op] = _pick(c0, c1, _KIND[op])
        cand[op] = np.column_stack([c0, c1])
        # the instrument value at the end of the ordering keeps its own component
        own = top if _KIND[op] == "min" else 1 - top
        rest[op] = c1 if own == 1 else c0
    wt, wb = w[top], w[1 - top]
    y1_high = wt * rest["y1_high"] + wb * val["y1_high"]
    y0_low = wb * rest["y0_low"] + wt * val["y0_low"]
    y1_low = wb * rest["y1_low"] + wt * val["y1_low"]
    y0_high = wt * rest["y0_high"] + wb * val["y0_high"]
    tau_high = wt * rest["y1_high"] + wb * val["y1_high"] - wt * val["y0_low"] - wb * rest["y0_low"]
    tau_low = wt * val["y1_low"] + wb * rest["y1_low"] - wt * rest["y0_high"] - wb * val["y0_high"]
    return BoundsEstimate(
        tau_low, tau_high, MANSKI_PEPPER,
        y0_low=y0_low, y0_high=y0_high, y1_low=y1_low, y1_high=y1_high,
        selection=EnvelopeSelection(cand, sel),
    )


def point_late(theta: PointNuisance, epsilon_late: float = 0.05):
    """(h(1,x) - h(0,x)) / (p(1,x) - p(0,x)); refuses weak first stages."""
    fs = np.asarray(theta.p1 - theta.p0, dtype=float)
    weak = np.flatnonzero(np.abs(np.atleast_1d(fs)) < epsilon_late)
    if weak.size:
        i = int(weak[0])
        raise NumericalError(
            f"first stage |p1 - p0| = {abs(np.atleast_1d(fs)[i]):.3g} below epsilon_late={epsilon_late} at unit {i}"
        )
    return (theta.h1 - theta.h0) / fs


def clip_nuisance(theta: PointNuisance, r: OutcomeRange, eta: float):
    """Clip means into the outcome range and probabilities into [eta, 1-eta].

    Probabilities exactly 0 or 1 are kept: they encode one-sided compliance
    detected during cross-fitting.
    """
    t = theta.as_arrays()
    counts = {"mean_clip": 0, "probability_clip": 0}
    kw = {}
    for name in ("h1", "h0", "m10", "m01", "m11", "m00"):
        v = np.atleast_1d(getattr(t, name))
        c = np.clip(v, r.y_low, r.y_high)
        counts["mean_clip"] += int(np.count_nonzero(c != v))
        kw[name] = c
    for name in ("p1", "p0", "zprob"):
        v = np.atleast_1d(getattr(t, name))
        keep = (v == 0.0) | (v == 1.0) if name != "zprob" else np.zeros(v.shape, dtype=bool)
        c = np.where(keep, v, np.clip(v, eta, 1 - eta))
        counts["probability_clip"] += int(np.count_nonzero(c != v))
        kw[name] = c
    m_obs = None if t.m_obs is None else np.clip(np.atleast_1d(t.m_obs), r.y_low, r.y_high)
    return PointNuisance(**kw, m_obs=m_obs), counts


def resolve_theta(nuisances) -> tuple[PointNuisance, float]:
    if isinstance(nuisances, CrossFitNuisances):
        return nuisances.theta, nuisances.eta
    if isinstance(nuisances, PointNuisance):
        return nuisances, 0.01
    raise TypeError(f"expected CrossFitNuisances or PointNuisance, got {type(nuisances).__name__}")


def compute_bounds(table, nuisances, scheme: str, r: OutcomeRange | None = None, *,
                   epsilon_late: float = 0.05, miv_reversed: bool = False) -> BoundsEstimate:
    """Bounds for every unit from (cross-fitted) nuisance values."""
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    r = r if r is not None else getattr(table, "outcome_range", None)
    if r is None and scheme != POINT_LATE:
        raise ConfigError("an outcome range is required for partial-identification bounds")
    theta, eta = resolve_theta(nuisances)
    if table is not None and np.atleast_1d(theta.h1).shape[0] != table.n:
        raise DataError("nuisances and table have different row counts")
    if r is not None:
        theta, counts = clip_nuisance(theta, r, eta)
    else:
        counts = {}
    if scheme == BALKE_PEARL:
        b = balke_pearl_bounds(theta, r)
    elif scheme == MANSKI:
        b = manski_bounds(theta, r)
    elif scheme == MANSKI_PEPPER:
        b = manski_pepper_bounds(theta, theta.zprob, r, miv_reversed)
    else:
        late = np.atleast_1d(np.asarray(point_late(theta, epsilon_late), dtype=float))
        b = BoundsEstimate(late, late.copy(), POINT_LATE)
    return BoundsEstimate(
        np.atleast_1d(b.tau_low), np.atleast_1d(b.tau_high), b.scheme,
        *(None if v is None else np.atleast_1d(v) for v in (b.y0_low, b.y0_high, b.y1_low, b.y1_high)),
        selection=b.selection, clip_counts=counts, theta=theta,
    )

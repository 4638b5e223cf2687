"""Synthetic IV designs with known nuisances, and Monte Carlo regret studies.

Units are complier, always-taker or never-taker (no defiers). Covariates are
uniform on [0, 1]^k_x and outcomes live in [0, 1]. Every design is
parameterised through the midpoint of the true CATE interval,

    mid(x) = (tau_high(x) + tau_low(x)) / 2,

whose half-width is (always + never) / 2 under one-sided monotone
compliance. Complier effects are solved from mid(x) given the noncomplier
means, so the bound shapes are controlled directly.

Ground truth here is written out from the compliance-type model, not by
calling the estimation modules.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .core_model import ConfigError, ObservationTable, OutcomeRange, Policy, PolicyClassSpec, QUADRANT
from .nuisance import LearnerSpec, PointNuisance, crossfit
from .optimize import solve, solve_linear, solve_quadrant
from .scores import (
    HURWICZ_IMPACT, HURWICZ_WELFARE, MAXIMIN_IMPACT, MAXIMIN_WELFARE, MINIMAX_REGRET, MINIMAX_REGRET_BASELINE,
    MODES, Criterion, build_scores,
)

PROFILES = ("separated", "smooth_crossing", "point_mass", "constant")
UNIT = OutcomeRange(0.0, 1.0)
MARGIN_GRID = (0.0125, 0.025, 0.05, 0.1, 0.2)


@dataclass(frozen=True)
class SyntheticDGP:
    """Compliance-type design on the unit box.

    profile
        separated: mid = kappa * min(s1 - x1, s2 - x2), scaled so that both
            bounds stay at least ``gap`` away from zero; the minimax-regret
            score 2*mid is positive exactly on {x1 < s1, x2 < s2}.
        smooth_crossing: mid = amplitude * (x1 - s1); each bound crosses zero
            with bounded density.
        point_mass: mid = -w + amplitude * max(0, x1 - s1), so the upper
            bound is exactly zero on x1 <= s1.
        constant: mid = level.
    noncomplier
        flat: always-taker and never-taker means are 1/2 + shift and
            1/2 - shift (``noncomplier_shift``, default 0).
        peaked: a Gaussian bump of height ``peak_height`` centred at
            ``peak_center`` (default ``split``) raises the always-taker mean
            and lowers the never-taker mean; complier effects compensate so
            mid(x) is unchanged.
        ridge: same, but the bump only depends on x1 (a ridge along the
            line x1 = peak_center[0]).
        With ``compensate=False`` complier effects ignore the bump, so the
        CATE bounds move with it and mid(x) is no longer the profile alone.
    """

    k_x: int = 2
    profile: str = "separated"
    always_share: float = 0.2
    never_share: float = 0.2
    z_center: float = 0.5
    z_slope: float = 0.0
    gap: float = 0.1
    amplitude: float = 0.5
    split: tuple[float, float] = (0.5, 0.5)
    level: float = 0.0
    noncomplier: str = "flat"
    peak_height: float = 0.4
    peak_width: float = 0.1
    peak_center: tuple[float, float] | None = None
    compensate: bool = True
    noncomplier_shift: float = 0.0
    noise: str = "uniform"
    noise_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "split", tuple(float(s) for s in self.split))
        if self.peak_center is not None:
            object.__setattr__(self, "peak_center", tuple(float(s) for s in self.peak_center))
        if self.k_x < 1:
            raise ConfigError("k_x must be >= 1")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        a, nt = self.always_share, self.never_share
        if a < 0 or nt < 0 or a + nt >= 1:
            raise ConfigError("need always >= 0, never >= 0 and always + never < 1")
        if self.noncomplier not in ("flat", "peaked", "ridge"):
            raise ConfigError(f"unknown noncomplier shape {self.noncomplier!r}")
        if self.noise not in ("uniform", "bernoulli"):
            raise ConfigError(f"unknown noise model {self.noise!r}")
        if not 0 <= self.noise_scale <= 1:
            raise ConfigError("noise_scale must be in [0, 1]")
        lo, hi = self.z_center - abs(self.z_slope) / 2, self.z_center + abs(self.z_slope) / 2
        if lo <= 0 or hi >= 1:
            raise ConfigError("instrument probability must stay inside (0, 1)")
        if len(self.split) != 2 or not all(0 < s < 1 for s in self.split):
            raise ConfigError("split must be two values in (0, 1)")
        if self.profile == "separated" and self.gap >= self.half_width:
            raise ConfigError("separated profile needs gap < (always + never) / 2")
        if self.k_x < 2 and self.profile == "separated":
            raise ConfigError("separated profile uses two covariates")
        probe = np.random.default_rng(12345).random((4096, self.k_x))
        corners = np.array(np.meshgrid(*[[0.0, 1.0]] * self.k_x)).reshape(self.k_x, -1).T
        grid = np.vstack([probe, corners, np.tile(np.r_[self.split, [0.5] * (self.k_x - 2)][: self.k_x], (1, 1))])
        means = self.type_means(grid)
        for k, v in means.items():
            if np.any(v < 0) or np.any(v > 1):
                raise ConfigError(f"design implies {k} outside [0, 1]; reduce amplitude or peak_height")

    # ---- primitives

    @property
    def half_width(self) -> float:
        return (self.always_share + self.never_share) / 2

    @property
    def complier_share(self) -> float:
        return 1.0 - self.always_share - self.never_share

    def sample_x(self, n: int, seed) -> np.ndarray:
        return np.random.default_rng(seed).random((n, self.k_x))

    def instrument_prob(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.z_center + self.z_slope * (x[:, 0] - 0.5)

    def midpoint(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        s1, s2 = self.split
        w = self.half_width
        if self.profile == "separated":
            kappa = (w - self.gap) / max(min(s1, s2), 1 - min(s1, s2))
            return kappa * np.minimum(s1 - x[:, 0], s2 - x[:, 1])
        if self.profile == "smooth_crossing":
            return self.amplitude * (x[:, 0] - s1)
        if self.profile == "point_mass":
            return -w + self.amplitude * np.maximum(0.0, x[:, 0] - s1)
        return np.full(x.shape[0], float(self.level))

    def _bump(self, x):
        if self.noncomplier == "flat":
            return np.zeros(x.shape[0])
        c = np.asarray(self.peak_center if self.peak_center is not None else self.split)
        k = 1 if self.noncomplier == "ridge" else min(2, x.shape[1])
        r2 = np.sum((x[:, :k] - c[:k]) ** 2, axis=1)
        return self.peak_height * np.exp(-r2 / (2 * self.peak_width ** 2))

    def type_means(self, x) -> dict:
        """Mean outcome by compliance type and arm (only identified cells)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a, nt, c = self.always_share, self.never_share, self.complier_share
        b = self._bump(x)
        mu_a1 = 0.5 + self.noncomplier_shift + b
        mu_n0 = 0.5 - self.noncomplier_shift - b
        effect = self.midpoint(x)
        if self.compensate:
            effect = effect - a * (mu_a1 - 0.5) - nt * (0.5 - mu_n0)
        effect = effect / c
        return {"mu_c1": 0.5 + effect / 2, "mu_c0": 0.5 - effect / 2, "mu_a1": mu_a1, "mu_n0": mu_n0}

    # ---- truth

    def true_nuisance(self, x) -> PointNuisance:
        mu = self.type_means(x)
        a, nt, c = self.always_share, self.never_share, self.complier_share
        n = mu["mu_c1"].shape[0]
        full = lambda v: np.full(n, float(v))  # noqa: E731
        m11 = (c * mu["mu_c1"] + a * mu["mu_a1"]) / (c + a)
        m00 = (c * mu["mu_c0"] + nt * mu["mu_n0"]) / (c + nt)
        # unidentified cells get the range midpoint when empty
        m10 = mu["mu_a1"] if a > 0 else full(0.5)
        m01 = mu["mu_n0"] if nt > 0 else full(0.5)
        h1 = c * mu["mu_c1"] + a * mu["mu_a1"] + nt * mu["mu_n0"]
        h0 = c * mu["mu_c0"] + a * mu["mu_a1"] + nt * mu["mu_n0"]
        return PointNuisance(h1=h1, h0=h0, m10=m10, m01=m01, p1=full(c + a), p0=full(a), m11=m11, m00=m00,
                             zprob=self.instrument_prob(x))

    def true_bounds(self, x, scheme: str = "balke_pearl") -> dict:
        """True bounds written out per compliance type."""
        mu = self.type_means(x)
        a, nt, c = self.always_share, self.never_share, self.complier_share
        eff = c * (mu["mu_c1"] - mu["mu_c0"])
        if scheme == "point_late":
            late = mu["mu_c1"] - mu["mu_c0"]
            return {"tau_low": late, "tau_high": late.copy()}
        if scheme == "balke_pearl":
            # E[Y(1)] = c mu_c1 + a mu_a1 + nt * (unknown in [0, 1]); similarly for Y(0)
            y1_low = c * mu["mu_c1"] + a * mu["mu_a1"]
            y1_high = y1_low + nt
            y0_low = c * mu["mu_c0"] + nt * mu["mu_n0"]
            y0_high = y0_low + a
            return {
                "tau_high": eff + a * mu["mu_a1"] + nt * (1 - mu["mu_n0"]),
                "tau_low": eff + a * (mu["mu_a1"] - 1) - nt * mu["mu_n0"],
                "y1_low": y1_low, "y1_high": y1_high, "y0_low": y0_low, "y0_high": y0_high,
            }
        if scheme in ("manski", "manski_pepper"):
            # with a randomised instrument both arms give the same bracket
            # except that the z=0 arm sees compliers untreated (and z=1 for D=0)
            z = self.instrument_prob(x)
            y1 = {1: (c * mu["mu_c1"] + a * mu["mu_a1"], nt), 0: (a * mu["mu_a1"], c + nt)}
            y0 = {0: (c * mu["mu_c0"] + nt * mu["mu_n0"], a), 1: (nt * mu["mu_n0"], c + a)}
            lo = {k: np.maximum(y[0][0], y[1][0]) for k, y in (("y1", y1), ("y0", y0))}
            hi = {k: np.minimum(y[0][0] + y[0][1], y[1][0] + y[1][1]) for k, y in (("y1", y1), ("y0", y0))}
            if scheme == "manski_pepper":
                hi = {k: z * (y[1][0] + y[1][1]) + (1 - z) * hi[k] for k, y in (("y1", y1), ("y0", y0))}
                lo = {k: (1 - z) * y[0][0] + z * lo[k] for k, y in (("y1", y1), ("y0", y0))}
            return {"tau_high": hi["y1"] - lo["y0"], "tau_low": lo["y1"] - hi["y0"],
                    "y1_low": lo["y1"], "y1_high": hi["y1"], "y0_low": lo["y0"], "y0_high": hi["y0"]}
        raise ConfigError(f"unknown scheme {scheme!r}")

    def true_scores(self, x, criterion: Criterion, scheme: str = "balke_pearl") -> np.ndarray:
        return _criterion_value(self.true_bounds(x, scheme), criterion, x)

    def to_json(self) -> dict:
        out = asdict(self)
        out["split"] = list(self.split)
        if self.peak_center is not None:
            out["peak_center"] = list(self.peak_center)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> SyntheticDGP:
        obj = dict(obj)
        for key in ("split", "peak_center"):
            if obj.get(key) is not None:
                obj[key] = tuple(obj[key])
        try:
            return cls(**obj)
        except TypeError as e:
            raise ConfigError(str(e)) from None


def _criterion_value(b: dict, crit: Criterion, x) -> np.ndarray:
    th, tl = b["tau_high"], b["tau_low"]
    k = crit.kind
    if k == MINIMAX_REGRET:
        return np.where(th >= 0, th, 0.0) + np.where(tl < 0, tl, 0.0)
    if k == MAXIMIN_IMPACT:
        return tl
    if k == HURWICZ_IMPACT:
        return crit.delta * th + (1 - crit.delta) * tl
    if k == MINIMAX_REGRET_BASELINE:
        return np.where(crit.baseline.assign(x) == 1, th, tl)
    if "y1_low" not in b:
        raise ConfigError(f"{k} needs outcome bounds, not available for this scheme")
    if k == MAXIMIN_WELFARE:
        return b["y1_low"] - b["y0_low"]
    if k == HURWICZ_WELFARE:
        return (crit.delta1 * b["y1_high"] + (1 - crit.delta1) * b["y1_low"]
                - crit.delta0 * b["y0_high"] - (1 - crit.delta0) * b["y0_low"])
    raise ConfigError(f"unknown criterion {k!r}")


@dataclass(frozen=True, eq=False)
class TruthRecord:
    x: np.ndarray
    theta: PointNuisance
    bounds: dict
    compliance_type: np.ndarray   # 0 complier, 1 always, 2 never
    dgp: SyntheticDGP

    def scores(self, criterion: Criterion, scheme: str = "balke_pearl") -> np.ndarray:
        b = self.bounds if scheme == "balke_pearl" else self.dgp.true_bounds(self.x, scheme)
        return _criterion_value(b, criterion, self.x)


def generate(dgp: SyntheticDGP, n: int, seed) -> tuple[ObservationTable, TruthRecord]:
    """Draw n units: covariates, type, instrument, treatment D(Z) and Y(D)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.random((n, dgp.k_x))
    u_type = rng.random(n)
    u_z = rng.random(n)
    u_y = rng.random(n)
    a, nt = dgp.always_share, dgp.never_share
    typ = np.where(u_type < a, 1, np.where(u_type < a + nt, 2, 0)).astype(np.int8)
    z = (u_z < dgp.instrument_prob(x)).astype(np.int8)
    d = np.where(typ == 1, 1, np.where(typ == 2, 0, z)).astype(np.int8)
    mu = dgp.type_means(x)
    mean = np.select([typ == 1, typ == 2, d == 1], [mu["mu_a1"], mu["mu_n0"], mu["mu_c1"]], mu["mu_c0"])
    if dgp.noise == "bernoulli":
        y = (u_y < mean).astype(float)
    else:
        r = dgp.noise_scale * np.minimum(mean, 1 - mean)
        y = np.clip(mean + r * (2 * u_y - 1), 0.0, 1.0)
    table = ObservationTable(y, d, z, x, UNIT)
    truth = TruthRecord(table.x, dgp.true_nuisance(x), dgp.true_bounds(x), typ, dgp)
    return table, truth


def best_in_class(dgp: SyntheticDGP, spec: PolicyClassSpec, criterion: Criterion, n_oracle: int, seed,
                  scheme: str = "balke_pearl") -> Policy:
    """Exact maximiser of the true-score objective on an oracle sample."""
    if spec.kind != QUADRANT and spec.effective_dim > 2:
        raise ConfigError("best-in-class proxy needs an exactly solvable class (quadrant or linear d <= 2)")
    x = dgp.sample_x(n_oracle, seed)
    g = dgp.true_scores(x, criterion, scheme)
    res = solve_quadrant(g, x, spec) if spec.kind == QUADRANT else solve_linear(g, x, spec)
    return res.policy


# ---------------------------------------------------------------- margin


def margin_diagnostic(bounds, t_grid) -> dict:
    """Share of units with 0 < |component| <= t, for each bound component."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be positive and strictly ascending")
    get = (lambda k: bounds[k]) if isinstance(bounds, dict) else (lambda k: getattr(bounds, k))
    out = {}
    for name in ("tau_high", "tau_low"):
        v = np.abs(np.asarray(get(name), dtype=float))
        nz = np.sort(v[v > 0])
        out[name] = np.searchsorted(nz, t, side="right") / v.size
    return out


def linear_fit(t, curve) -> tuple[float, float, float]:
    """Least-squares line through (t, curve): slope, intercept, R^2."""
    t = np.asarray(t, dtype=float)
    c = np.asarray(curve, dtype=float)
    slope, icpt = np.polyfit(t, c, 1)
    resid = c - (slope * t + icpt)
    ss = float(np.sum((c - c.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), r2


# ---------------------------------------------------------------- studies


@dataclass(frozen=True)
class StudyConfig:
    dgp: SyntheticDGP
    n_grid: tuple[int, ...] = (500, 2000, 8000)
    replications: int = 100
    criterion: Criterion = Criterion(MINIMAX_REGRET)
    scheme: str = "balke_pearl"
    learner: LearnerSpec = LearnerSpec()
    folds: int = 2
    eta: float = 0.01
    policy_class: PolicyClassSpec = PolicyClassSpec(QUADRANT, (0, 1))
    modes: tuple[str, ...] = MODES
    n_oracle: int = 20000
    n_eval: int = 200000
    seed: int = 0
    restarts: int = 10

    def __post_init__(self):
        grid = tuple(int(v) for v in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "modes", tuple(self.modes))
        if len(grid) < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid must be strictly ascending")
        if self.replications < 2:
            raise ConfigError("need at least 2 replications")
        if any(m not in MODES for m in self.modes):
            raise ConfigError(f"modes must be among {MODES}")
        if self.n_oracle < 1 or self.n_eval < 1:
            raise ConfigError("oracle and evaluation sizes must be positive")

    def to_json(self) -> dict:
        return {
            "dgp": self.dgp.to_json(), "n_grid": list(self.n_grid), "replications": self.replications,
            "criterion": self.criterion.to_json(), "scheme": self.scheme, "learner": asdict(self.learner),
            "folds": self.folds, "eta": self.eta, "policy_class": self.policy_class.to_json(),
            "modes": list(self.modes), "n_oracle": self.n_oracle, "n_eval": self.n_eval, "seed": self.seed,
            "restarts": self.restarts,
        }


@dataclass(frozen=True, eq=False)
class RegretReport:
    config: StudyConfig
    records: list              # (n, mode, replication, regret)
    summary: dict              # mode -> n -> {mean, se}
    slopes: dict               # mode -> {slope, intercept, r2, points}
    paired: dict               # n -> {mean_difference, t, p_value} (orthogonal minus plug-in)
    oracle_value: float
    oracle_se: float
    kappa: dict = field(default_factory=dict)
    margin: dict = field(default_factory=dict)   # t grid and curve per bound, on the evaluation sample

    def mean_regret(self, mode: str) -> np.ndarray:
        return np.array([self.summary[mode][n]["mean"] for n in self.config.n_grid])

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "summary": {m: {str(n): v for n, v in s.items()} for m, s in self.summary.items()},
            "slopes": self.slopes,
            "paired": {str(n): v for n, v in self.paired.items()},
            "oracle_value": self.oracle_value,
            "oracle_se": self.oracle_se,
            "training_size": {str(n): v for n, v in self.kappa.items()},
            "margin": self.margin,
        }

    def rows(self):
        return [("n", "mode", "replication", "regret")] + [tuple(r) for r in self.records]


class StudyError(RuntimeError):
    pass


def _rep_seeds(master, n_idx, rep):
    s = np.random.SeedSequence([int(master), int(n_idx), int(rep)]).generate_state(2)
    return int(s[0]), int(s[1])


class _Evaluator:
    """Population objective on a fixed evaluation sample."""

    def __init__(self, cfg: StudyConfig, seed):
        self.x = cfg.dgp.sample_x(cfg.n_eval, seed)
        self.g = cfg.dgp.true_scores(self.x, cfg.criterion, cfg.scheme)

    def value(self, policy: Policy) -> float:
        return float(np.mean((2.0 * policy.assign(self.x) - 1.0) * self.g))

    def se(self, policy: Policy) -> float:
        v = (2.0 * policy.assign(self.x) - 1.0) * self.g
        return float(np.std(v, ddof=1) / math.sqrt(v.size))


def _one_replication(cfg: StudyConfig, n_idx: int, rep: int, evaluator: _Evaluator, target: float):
    n = cfg.n_grid[n_idx]
    data_seed, fit_seed = _rep_seeds(cfg.seed, n_idx, rep)
    table, _ = generate(cfg.dgp, n, data_seed)
    nu = crossfit(table, cfg.learner, cfg.folds, cfg.eta, fit_seed)
    out = []
    bounds = None
    for mode in cfg.modes:
        sv = build_scores(table, nu, cfg.scheme, cfg.criterion, mode, UNIT, bounds=bounds)
        res = solve(sv, table, cfg.policy_class, cfg.restarts, fit_seed)
        out.append((n, mode, rep, target - evaluator.value(res.policy)))
    return out


def run_study(cfg: StudyConfig, threads: int = 1, progress=None) -> RegretReport:
    """Regret of the estimated rule against the best-in-class proxy.

    Each replication draws fresh data, cross-fits nuisances, scores in every
    requested mode and solves. Regret is measured on a fixed evaluation
    sample; replications are independent and aggregated in index order, so
    ``threads`` changes speed only.
    """
    root = np.random.SeedSequence(int(cfg.seed)).generate_state(2)
    star = best_in_class(cfg.dgp, cfg.policy_class, cfg.criterion, cfg.n_oracle, int(root[0]), cfg.scheme)
    ev = _Evaluator(cfg, int(root[1]))
    target = ev.value(star)
    jobs = [(i, r) for i in range(len(cfg.n_grid)) for r in range(cfg.replications)]

    def run(job):
        i, r = job
        try:
            return _one_replication(cfg, i, r, ev, target)
        except Exception as e:  # re-raised with the failing replication
            raise StudyError(f"replication {r} at n={cfg.n_grid[i]} failed: {e}") from e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = []
        for j in jobs:
            results.append(run(j))
            if progress is not None:
                progress(j)
    records = [rec for block in results for rec in block]
    rep = _summarise(cfg, records, target, ev.se(star))
    if cfg.scheme != "point_late":
        curve = margin_diagnostic(cfg.dgp.true_bounds(ev.x, cfg.scheme), MARGIN_GRID)
        rep.margin.update({"t": list(MARGIN_GRID), **{k: v.tolist() for k, v in curve.items()}})
    return rep


def _summarise(cfg, records, target, oracle_se) -> RegretReport:
    by = {(n, m): {} for n in cfg.n_grid for m in cfg.modes}
    for n, m, r, v in records:
        by[(n, m)][r] = v
    summary, slopes = {}, {}
    for m in cfg.modes:
        summary[m] = {}
        for n in cfg.n_grid:
            v = np.array([by[(n, m)][r] for r in sorted(by[(n, m)])])
            summary[m][n] = {"mean": float(v.mean()), "se": float(v.std(ddof=1) / math.sqrt(v.size))}
        slopes[m] = _slope(cfg.n_grid, [summary[m][n]["mean"] for n in cfg.n_grid])
    paired = {}
    if "orthogonal" in cfg.modes and "plugin" in cfg.modes:
        for n in cfg.n_grid:
            o = np.array([by[(n, "orthogonal")][r] for r in sorted(by[(n, "orthogonal")])])
            p = np.array([by[(n, "plugin")][r] for r in sorted(by[(n, "plugin")])])
            diff = o - p
            if np.all(diff == 0):
                t, pv = 0.0, 1.0
            else:
                tt = stats.ttest_rel(o, p, alternative="less")
                t, pv = float(tt.statistic), float(tt.pvalue)
            paired[n] = {"mean_difference": float(diff.mean()), "t": t, "p_value": pv}
    kappa = {n: n * (1 - 1 / cfg.folds) for n in cfg.n_grid}
    return RegretReport(cfg, records, summary, slopes, paired, float(target), float(oracle_se), kappa)


def _slope(grid, means):
    """Log-log fit of mean regret on n; undefined when a mean is not positive."""
    grid = np.asarray(grid, dtype=float)
    means = np.asarray(means, dtype=float)
    if grid.size < 3 or np.any(means <= 0):
        return {"slope": None, "intercept": None, "r2": None, "points": int(grid.size)}
    s, c, r2 = linear_fit(np.log(grid), np.log(means))
    return {"slope": s, "intercept": c, "r2": r2, "points": int(grid.size)}

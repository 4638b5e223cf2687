"""Data containers, treatment rules and objective evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

QUADRANT = "quadrant"
LINEAR = "linear"
LE, GT = "le", "gt"
# lexicographic order used by the exact quadrant solver
ORIENTATIONS = ((LE, LE), (LE, GT), (GT, LE), (GT, GT))


class ConfigError(ValueError):
    """Invalid configuration or parameter combination."""


class DataError(ValueError):
    """Input data violates a documented requirement."""


class NumericalError(RuntimeError):
    """A numerical precondition failed (empty cell, weak first stage, ...)."""


@dataclass(frozen=True)
class OutcomeRange:
    y_low: float
    y_high: float

    def __post_init__(self):
        lo, hi = float(self.y_low), float(self.y_high)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ConfigError("outcome range must be finite")
        if not lo < hi:
            raise ConfigError(f"outcome range needs y_low < y_high, got [{lo}, {hi}]")
        object.__setattr__(self, "y_low", lo)
        object.__setattr__(self, "y_high", hi)

    @property
    def width(self) -> float:
        return self.y_high - self.y_low


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ObservationTable:
    """Rows of (outcome, treatment, instrument, covariates).

    Arrays are copied and made read-only on construction.
    """

    y: np.ndarray
    d: np.ndarray
    z: np.ndarray
    x: np.ndarray
    outcome_range: OutcomeRange | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        n = y.shape[0]
        if n < 1:
            raise DataError("table has no rows")
        if x.ndim != 2 or x.shape[0] != n or x.shape[1] < 1:
            raise DataError(f"covariates must be an (n, k_x>=1) matrix with n={n}")
        d = self._binary(self.d, "d", n)
        z = self._binary(self.z, "z", n)
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(x)):
            raise DataError("non-finite value in y or x")
        r = self.outcome_range
        if r is not None:
            bad = np.flatnonzero((y < r.y_low) | (y > r.y_high))
            if bad.size:
                raise DataError(
                    f"outcome of row {bad[0]} ({y[bad[0]]!r}) outside [{r.y_low}, {r.y_high}]"
                )
        object.__setattr__(self, "y", _frozen(y.copy()))
        object.__setattr__(self, "d", _frozen(d))
        object.__setattr__(self, "z", _frozen(z))
        object.__setattr__(self, "x", _frozen(x.copy()))

    @staticmethod
    def _binary(v, name, n):
        a = np.asarray(v).reshape(-1)
        if a.shape[0] != n:
            raise DataError(f"{name} has {a.shape[0]} rows, expected {n}")
        af = a.astype(float)
        bad = np.flatnonzero((af != 0) & (af != 1))
        if bad.size:
            raise DataError(f"{name} must be 0/1; row {bad[0]} has {a[bad[0]]!r}")
        return af.astype(np.int8)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def k_x(self) -> int:
        return int(self.x.shape[1])

    def with_range(self, r: OutcomeRange | None) -> ObservationTable:
        return ObservationTable(self.y, self.d, self.z, self.x, r)

    def subset(self, rows) -> ObservationTable:
        rows = np.asarray(rows)
        return ObservationTable(self.y[rows], self.d[rows], self.z[rows], self.x[rows], self.outcome_range)


@dataclass(frozen=True)
class PolicyClassSpec:
    """Which covariates a rule may use, plus optional monomial expansion.

    ``feature_expansion`` is a tuple of ``(feature, power)`` pairs appended
    after the raw features, e.g. ``((0, 2), (0, 3))`` for x0**2 and x0**3.
    """

    kind: str
    feature_indices: tuple[int, ...]
    feature_expansion: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.kind not in (QUADRANT, LINEAR):
            raise ConfigError(f"unknown policy class {self.kind!r}")
        fi = tuple(int(i) for i in self.feature_indices)
        if not fi:
            raise ConfigError("feature_indices must be non-empty")
        exp = tuple((int(f), int(p)) for f, p in self.feature_expansion)
        for f, p in exp:
            if p < 2:
                raise ConfigError(f"expansion power must be >= 2, got {p}")
        object.__setattr__(self, "feature_indices", fi)
        object.__setattr__(self, "feature_expansion", exp)
        if self.kind == QUADRANT and self.effective_dim != 2:
            raise ConfigError("quadrant rules need exactly 2 effective features")

    @property
    def effective_dim(self) -> int:
        return len(self.feature_indices) + len(self.feature_expansion)

    def check(self, k_x: int) -> None:
        used = list(self.feature_indices) + [f for f, _ in self.feature_expansion]
        for f in used:
            if not 0 <= f < k_x:
                raise ConfigError(f"feature index {f} outside [0, {k_x})")

    def design(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        self.check(x.shape[1])
        cols = [x[:, f] for f in self.feature_indices]
        cols += [x[:, f] ** p for f, p in self.feature_expansion]
        return np.column_stack(cols)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "features": list(self.feature_indices)}
        if self.feature_expansion:
            out["expansion"] = [[f, p] for f, p in self.feature_expansion]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> PolicyClassSpec:
        exp = obj.get("expansion", [])
        if isinstance(exp, dict):
            exp = [(int(f), int(p)) for f, ps in sorted(exp.items(), key=lambda kv: int(kv[0])) for p in ps]
        return cls(obj["kind"], tuple(obj["features"]), tuple(tuple(e) for e in exp))


@dataclass(frozen=True)
class Policy:
    """A deterministic treatment rule.

    Quadrant: treat iff ``x1 s1 t1`` and ``x2 s2 t2`` with ``s`` in {le, gt}.
    Linear: treat iff ``beta . (1, x) >= 0`` over the expanded features.
    """

    kind: str
    spec: PolicyClassSpec
    thresholds: tuple[float, float] | None = None
    orientation: tuple[str, str] | None = None
    beta: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind != self.spec.kind:
            raise ConfigError("policy kind differs from its class spec")
        if self.kind == QUADRANT:
            if self.thresholds is None or self.orientation is None:
                raise ConfigError("quadrant policy needs thresholds and orientation")
            o = tuple(self.orientation)
            if len(o) != 2 or any(s not in (LE, GT) for s in o):
                raise ConfigError(f"bad orientation {o!r}")
            t = tuple(float(v) for v in self.thresholds)
            if len(t) != 2 or any(np.isnan(v) for v in t):
                raise ConfigError("quadrant policy needs two thresholds")
            object.__setattr__(self, "orientation", o)
            object.__setattr__(self, "thresholds", t)
        else:
            if self.beta is None:
                raise ConfigError("linear policy needs beta")
            b = tuple(float(v) for v in self.beta)
            if not all(np.isfinite(b)):
                raise ConfigError("beta must be finite")
            if all(v == 0.0 for v in b):
                raise ConfigError("beta must not be all zero")
            object.__setattr__(self, "beta", b)

    def assign(self, x: np.ndarray) -> np.ndarray:
        f = self.spec.design(x)
        if self.kind == QUADRANT:
            out = np.ones(f.shape[0], dtype=bool)
            for j in range(2):
                if self.orientation[j] == LE:
                    out &= f[:, j] <= self.thresholds[j]
                else:
                    out &= f[:, j] > self.thresholds[j]
            return out.astype(np.int8)
        b = np.asarray(self.beta)
        if b.shape[0] != f.shape[1] + 1:
            raise ConfigError(f"beta has length {b.shape[0]}, expected {f.shape[1] + 1}")
        index = b[0] + f @ b[1:]
        return (index >= 0).astype(np.int8)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "class": self.spec.to_json()}
        if self.kind == QUADRANT:
            out["thresholds"] = [_enc_inf(t) for t in self.thresholds]
            out["orientation"] = list(self.orientation)
        else:
            out["beta"] = list(self.beta)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> Policy:
        spec = PolicyClassSpec.from_json(obj["class"])
        if obj["kind"] == QUADRANT:
            return cls(QUADRANT, spec, tuple(_dec_inf(t) for t in obj["thresholds"]), tuple(obj["orientation"]))
        return cls(LINEAR, spec, beta=tuple(obj["beta"]))


def _enc_inf(v: float):
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return float(v)


def _dec_inf(v) -> float:
    return float(v)


def evaluate_policy(policy: Policy, table: ObservationTable) -> np.ndarray:
    """Treatment assignment in {0,1} for every row of ``table``."""
    return policy.assign(table.x)


def _gamma(scores) -> np.ndarray:
    return np.asarray(getattr(scores, "gamma", scores), dtype=float)


def empirical_objective(scores, assignment) -> float:
    """(1/n) sum_i (2 pi_i - 1) gamma_i."""
    g = _gamma(scores)
    a = np.asarray(assignment)
    if g.size == 0:
        raise ValueError("empty score vector")
    if a.shape != g.shape:
        raise ValueError(f"assignment length {a.shape} differs from scores {g.shape}")
    return float(np.mean((2.0 * a - 1.0) * g))


def population_objective(dgp, policy: Policy, criterion, n_oracle: int, seed, scheme: str = "balke_pearl") -> float:
    """Monte Carlo value of E[(2 pi(X) - 1) Gamma(X)] under a synthetic design."""
    if n_oracle < 1:
        raise ValueError("n_oracle must be >= 1")
    x = dgp.sample_x(n_oracle, seed)
    gamma = dgp.true_scores(x, criterion, scheme)
    a = policy.assign(x)
    return float(np.mean((2.0 * a - 1.0) * gamma))

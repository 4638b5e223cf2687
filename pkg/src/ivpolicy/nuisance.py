"""Conditional-mean learners and K-fold cross-fitting of the nuisance vector.

The nuisance vector at covariate value x is

    h(z, x)    = E[Y | Z=z, X=x]
    m(d, z, x) = E[Y | D=d, Z=z, X=x]
    p(z, x)    = P(D=1 | Z=z, X=x)
    zprob(x)   = P(Z=1 | X=x)
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.spatial import cKDTree

from .core_model import ConfigError, NumericalError, ObservationTable, OutcomeRange

BOOSTED = "boosted_stumps"
KNN = "knn"


@dataclass(frozen=True)
class PointNuisance:
    """Nuisance values at one or many units (scalars or aligned arrays)."""

    h1: np.ndarray
    h0: np.ndarray
    m10: np.ndarray
    m01: np.ndarray
    p1: np.ndarray
    p0: np.ndarray
    m11: np.ndarray
    m00: np.ndarray
    zprob: np.ndarray
    m_obs: np.ndarray | None = None

    def as_arrays(self) -> PointNuisance:
        kw = {f.name: (None if getattr(self, f.name) is None else np.asarray(getattr(self, f.name), dtype=float))
              for f in fields(self)}
        return PointNuisance(**kw)

    def m(self, d: int, z: int):
        return {(1, 1): self.m11, (1, 0): self.m10, (0, 1): self.m01, (0, 0): self.m00}[(d, z)]

    def h(self, z: int):
        return self.h1 if z == 1 else self.h0

    def p(self, z: int):
        return self.p1 if z == 1 else self.p0

    def replace(self, **kw) -> PointNuisance:
        cur = {f.name: getattr(self, f.name) for f in fields(self)}
        cur.update(kw)
        return PointNuisance(**cur)


# ---------------------------------------------------------------- folds


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    fold_of: np.ndarray
    K: int

    def rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.K)


def make_folds(n: int, K: int, seed) -> FoldAssignment:
    """Random partition of ``range(n)`` into K folds of size floor/ceil(n/K)."""
    if K < 2 or K > n:
        raise ConfigError(f"need 2 <= K <= n, got K={K}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % K
    fold_of.setflags(write=False)
    return FoldAssignment(fold_of, int(K))


# ---------------------------------------------------------------- learners


@dataclass(frozen=True)
class LearnerSpec:
    """Learner choice and hyperparameters.

    Boosting: ``n_rounds`` in [1, 10000], ``learning_rate`` in (0, 1],
    ``max_depth`` in [1, 6], ``subsample`` in (0, 1] (1 means deterministic
    full-sample fits; below 1 each round draws rows with the fold seed),
    ``min_leaf`` >= 1 rows on each side of any split.
    k-NN: ``k`` >= 1, or None for ceil(n_train ** (2/3)).
    """

    kind: str = BOOSTED
    n_rounds: int = 200
    learning_rate: float = 0.1
    max_depth: int = 1
    subsample: float = 1.0
    min_leaf: int = 1
    k: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (BOOSTED, KNN):
            raise ConfigError(f"unknown learner {self.kind!r}")
        if not 1 <= self.n_rounds <= 10000:
            raise ConfigError("n_rounds must be in [1, 10000]")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError("learning_rate must be in (0, 1]")
        if not 1 <= self.max_depth <= 6:
            raise ConfigError("max_depth must be in [1, 6]")
        if not 0 < self.subsample <= 1:
            raise ConfigError("subsample must be in (0, 1]")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")
        if self.k is not None and self.k < 1:
            raise ConfigError("k must be >= 1")

    def build(self, seed=None):
        if self.kind == BOOSTED:
            return BoostedTrees(self.n_rounds, self.learning_rate, self.max_depth, self.subsample,
                                self.seed if seed is None else seed, self.min_leaf)
        return NearestNeighbours(self.k)


class _Tree:
    """Regression tree stored as flat arrays; leaves have feature == -1."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _add(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.value) - 1

    def predict(self, x):
        out = np.empty(x.shape[0])
        stack = [(0, np.arange(x.shape[0]))]
        while stack:
            node, idx = stack.pop()
            f = self.feature[node]
            if f < 0:
                out[idx] = self.value[node]
                continue
            go_left = x[idx, f] <= self.threshold[node]
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out


def _best_split(xs_sorted, r_sorted, valid):
    """Best squared-error split over sorted positions; first maximum wins."""
    n = r_sorted.shape[0]
    cs = np.cumsum(r_sorted)[:-1]
    nl = np.arange(1, n, dtype=float)
    tot = cs[-1] + r_sorted[-1] if n > 1 else 0.0
    gain = cs * cs / nl + (tot - cs) ** 2 / (n - nl)
    gain = np.where(valid, gain, -np.inf)
    pos = int(np.argmax(gain))
    return gain[pos], pos, cs[pos], tot


def _midpoint(a, b):
    c = a + (b - a) / 2.0
    return c if a <= c < b else a


class BoostedTrees:
    """Least-squares gradient boosting of shallow regression trees.

    Splits are chosen over midpoints of sorted unique feature values by
    squared-error gain; ties go to the lower midpoint and then to the lower
    feature index.
    """

    def __init__(self, n_rounds=200, learning_rate=0.1, max_depth=1, subsample=1.0, seed=0, min_leaf=1):
        self.min_leaf = max(1, int(min_leaf))
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.subsample = subsample
        self.seed = seed

    def fit(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = x.shape
        # a constant target is reproduced exactly, not via a rounded mean
        self.base_ = float(y[0]) if np.all(y == y[0]) else float(np.mean(y))
        resid = y - self.base_
        self.trees_ = []
        self.stumps_ = None
        if n < 2:
            return self
        orders = [np.argsort(x[:, j], kind="stable") for j in range(p)]
        if self.max_depth == 1 and self.subsample == 1:
            self._fit_stumps(x, resid, orders)
            return self
        rng = np.random.default_rng(self.seed) if self.subsample < 1 else None
        for _ in range(self.n_rounds):
            rows = None
            if rng is not None:
                rows = np.sort(rng.choice(n, size=max(2, int(self.subsample * n)), replace=False))
            tree = self._grow(x, resid, orders, rows)
            resid = resid - self.learning_rate * tree.predict(x)
            self.trees_.append(tree)
        return self

    def _leaf_ok(self, valid):
        # a split after sorted position i leaves i+1 rows on the left
        k = self.min_leaf
        if k > 1:
            m = valid.shape[0] + 1
            pos = np.arange(valid.shape[0])
            valid = valid & (pos + 1 >= k) & (m - pos - 1 >= k)
        return valid

    def _fit_stumps(self, x, resid, orders):
        sorted_x = [x[o, j] for j, o in enumerate(orders)]
        valid = [self._leaf_ok(xs[:-1] < xs[1:]) for xs in sorted_x]
        feats, thrs, lefts, rights = [], [], [], []
        n = x.shape[0]
        for _ in range(self.n_rounds):
            best = None
            for j, o in enumerate(orders):
                if not valid[j].any():
                    continue
                g, pos, sl, tot = _best_split(sorted_x[j], resid[o], valid[j])
                if best is None or g > best[0]:
                    best = (g, j, pos, sl, tot)
            if best is None:
                break
            _, j, pos, sl, tot = best
            nl = pos + 1
            lv, rv = sl / nl, (tot - sl) / (n - nl)
            thr = _midpoint(sorted_x[j][pos], sorted_x[j][pos + 1])
            resid = resid - self.learning_rate * np.where(x[:, j] <= thr, lv, rv)
            feats.append(j)
            thrs.append(thr)
            lefts.append(lv)
            rights.append(rv)
        self.stumps_ = (feats, thrs, lefts, rights)

    def _grow(self, x, resid, orders, rows):
        n = x.shape[0]
        member = np.ones(n, dtype=bool) if rows is None else np.isin(np.arange(n), rows)
        tree = _Tree()
        # depth-first growth keeps node numbering deterministic
        root = tree._add(0.0)
        stack = [(root, member, 0)]
        while stack:
            node, mask, depth = stack.pop()
            cnt = int(mask.sum())
            tree.value[node] = float(resid[mask].sum() / cnt) if cnt else 0.0
            if depth >= self.max_depth or cnt < 2:
                continue
            best = None
            for j, order in enumerate(orders):
                o = order[mask[order]]
                xs = x[o, j]
                valid = self._leaf_ok(xs[:-1] < xs[1:])
                if not valid.any():
                    continue
                g, pos, _, _ = _best_split(xs, resid[o], valid)
                if best is None or g > best[0]:
                    best = (g, j, _midpoint(xs[pos], xs[pos + 1]))
            if best is None:
                continue
            _, j, thr = best
            go_left = x[:, j] <= thr
            li = tree._add(0.0)
            ri = tree._add(0.0)
            tree.feature[node], tree.threshold[node] = j, thr
            tree.left[node], tree.right[node] = li, ri
            stack.append((ri, mask & ~go_left, depth + 1))
            stack.append((li, mask & go_left, depth + 1))
        return tree

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[0], self.base_)
        if getattr(self, "stumps_", None) is not None:
            for j, t, lv, rv in zip(*self.stumps_):
                out += self.learning_rate * np.where(x[:, j] <= t, lv, rv)
            return out
        for tree in self.trees_:
            out += self.learning_rate * tree.predict(x)
        return out


class NearestNeighbours:
    """k-NN mean regression on covariates standardized with training moments."""

    def __init__(self, k=None):
        self.k = k

    def fit(self, x, y):
        x = np.asarray(x, dtype=float)
        self.mu_ = x.mean(axis=0)
        sd = x.std(axis=0)
        self.sd_ = np.where(sd > 0, sd, 1.0)
        self.y_ = np.asarray(y, dtype=float)
        n = x.shape[0]
        k = self.k if self.k is not None else math.ceil(n ** (2.0 / 3.0))
        self.k_ = int(min(k, n))
        self.tree_ = cKDTree((x - self.mu_) / self.sd_)
        return self

    def predict(self, x):
        q = (np.asarray(x, dtype=float) - self.mu_) / self.sd_
        if np.all(self.y_ == self.y_[0]):
            return np.full(q.shape[0], self.y_[0])
        _, idx = self.tree_.query(q, k=self.k_)
        idx = np.asarray(idx).reshape(q.shape[0], self.k_)
        return self.y_[idx].mean(axis=1)


# ---------------------------------------------------------------- cross-fitting

_NAMES = ("h1", "h0", "m10", "m01", "p1", "p0", "m11", "m00", "zprob")


@dataclass(frozen=True, eq=False)
class CrossFitNuisances:
    """Out-of-fold nuisance predictions for every row.

    ``structural`` lists, per fold, cells that were empty in that fold's
    training split: "always" (no D=1 among Z=0, so p(0,x)=0 exactly) and
    "never" (no D=0 among Z=1, so p(1,x)=1 exactly).
    """

    folds: FoldAssignment
    eta: float
    theta: PointNuisance
    outcome_range: OutcomeRange | None
    structural: tuple[tuple[str, ...], ...]
    clip_counts: dict = field(default_factory=dict)

    @property
    def fold_of(self):
        return self.folds.fold_of

    @property
    def n(self):
        return int(self.fold_of.shape[0])


def _fit_predict(spec, seed, xtr, ytr, xte):
    return spec.build(seed).fit(xtr, ytr).predict(xte)


def _fold_seeds(seed, K):
    ss = np.random.SeedSequence(seed if seed is not None else 0)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(K)]


def _fit_fold(table, spec, train, test, fseed, midpoint):
    y, d, z, x = table.y, table.d, table.z, table.x
    out = {}
    flags = []
    xte = x[test]
    seeds = np.random.SeedSequence(fseed).generate_state(9)
    for zz in (0, 1):
        rows = train[z[train] == zz]
        if rows.size == 0:
            raise NumericalError(f"no rows with z={zz} in a training split")
        out[f"h{zz}"] = _fit_predict(spec, int(seeds[zz]), x[rows], y[rows], xte)
    for dd, zz in ((1, 1), (0, 0), (1, 0), (0, 1)):
        rows = train[(d[train] == dd) & (z[train] == zz)]
        key = f"m{dd}{zz}"
        if rows.size == 0:
            if (dd, zz) == (1, 0):
                flags.append("always")
                out[key] = np.full(test.size, midpoint)
                continue
            if (dd, zz) == (0, 1):
                flags.append("never")
                out[key] = np.full(test.size, midpoint)
                continue
            raise NumericalError(f"empty (d={dd}, z={zz}) cell in a training split")
        out[key] = _fit_predict(spec, int(seeds[2 + 2 * dd + zz]), x[rows], y[rows], xte)
    for zz in (0, 1):
        rows = train[z[train] == zz]
        out[f"p{zz}"] = _fit_predict(spec, int(seeds[6 + zz]), x[rows], d[rows].astype(float), xte)
    out["zprob"] = _fit_predict(spec, int(seeds[8]), x[train], z[train].astype(float), xte)
    return out, tuple(flags)


def crossfit(table: ObservationTable, learner: LearnerSpec, K: int, eta: float, seed, threads: int = 1) -> CrossFitNuisances:
    """Fit the nuisance vector on K-1 folds and predict on the held-out fold.

    Probabilities are trimmed to [eta, 1-eta]; outcome regressions are
    clipped to the table's outcome range when one is attached. Results do
    not depend on ``threads``.
    """
    if not 0 < eta < 0.5:
        raise ConfigError(f"eta must be in (0, 0.5), got {eta}")
    folds = make_folds(table.n, K, seed)
    fseeds = _fold_seeds(seed, K)
    r = table.outcome_range
    midpoint = 0.5 * (r.y_low + r.y_high) if r is not None else float(np.mean(table.y))
    jobs = [(np.flatnonzero(folds.fold_of != k), folds.rows(k), fseeds[k]) for k in range(K)]

    def run(job):
        train, test, fs = job
        return _fit_fold(table, learner, train, test, fs, midpoint)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    arrays = {k: np.empty(table.n) for k in _NAMES}
    counts = {"propensity_trim": 0, "instrument_trim": 0, "outcome_clip": 0}
    structural = []
    for (_, test, _), (out, flags) in zip(jobs, results):
        structural.append(flags)
        for name in ("h1", "h0", "m10", "m01", "m11", "m00"):
            v = out[name]
            if r is not None:
                c = np.clip(v, r.y_low, r.y_high)
                counts["outcome_clip"] += int(np.count_nonzero(c != v))
                v = c
            arrays[name][test] = v
        for name in ("p1", "p0"):
            v = out[name]
            if (name == "p0" and "always" in flags) or (name == "p1" and "never" in flags):
                arrays[name][test] = 0.0 if name == "p0" else 1.0
                continue
            c = np.clip(v, eta, 1 - eta)
            counts["propensity_trim"] += int(np.count_nonzero(c != v))
            arrays[name][test] = c
        v = out["zprob"]
        c = np.clip(v, eta, 1 - eta)
        counts["instrument_trim"] += int(np.count_nonzero(c != v))
        arrays["zprob"][test] = c

    d, z = table.d, table.z
    m_obs = np.select(
        [(d == 1) & (z == 1), (d == 1) & (z == 0), (d == 0) & (z == 1)],
        [arrays["m11"], arrays["m10"], arrays["m01"]],
        arrays["m00"],
    )
    for a in arrays.values():
        a.setflags(write=False)
    theta = PointNuisance(**arrays, m_obs=m_obs)
    return CrossFitNuisances(folds, float(eta), theta, r, tuple(structural), counts)


def predict_at(nuisances: CrossFitNuisances, i: int) -> PointNuisance:
    """Nuisance values for row i, all from the model that did not see row i."""
    if not 0 <= i < nuisances.n:
        raise IndexError(f"row {i} outside [0, {nuisances.n})")
    t = nuisances.theta
    kw = {name: float(getattr(t, name)[i]) for name in _NAMES}
    return PointNuisance(**kw, m_obs=float(t.m_obs[i]))

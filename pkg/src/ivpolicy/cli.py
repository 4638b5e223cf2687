"""Command-line front end: ``ivpolicy {fit,bounds,scores,simulate,validate}``.

Exit codes: 0 ok, 2 configuration/schema error, 3 data error, 4 numerical
precondition failure (empty cell, weak first stage).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .bounds import SCHEMES, compute_bounds
from .core_model import (
    ConfigError, DataError, NumericalError, ObservationTable, OutcomeRange, Policy, PolicyClassSpec,
)
from .nuisance import LearnerSpec, crossfit
from .optimize import solve
from .scores import CRITERIA, MODES, ORTHOGONAL, PLUGIN, Criterion, build_scores
from .simulate import StudyConfig, SyntheticDGP, run_study

SCHEMA_VERSION = 1
EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4

_LEARNER = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["boosted_stumps", "knn"]},
        "n_rounds": {"type": "integer", "minimum": 1, "maximum": 10000},
        "learning_rate": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "max_depth": {"type": "integer", "minimum": 1, "maximum": 6},
        "subsample": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "min_leaf": {"type": "integer", "minimum": 1},
        "k": {"type": ["integer", "null"], "minimum": 1},
        "seed": {"type": "integer"},
    },
}
_POLICY_CLASS = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "features"],
    "properties": {
        "kind": {"enum": ["quadrant", "linear"]},
        "features": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "expansion": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        },
    },
}
_CRITERION = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(CRITERIA)},
        "delta": {"type": "number", "minimum": 0, "maximum": 1},
        "delta0": {"type": "number", "minimum": 0, "maximum": 1},
        "delta1": {"type": "number", "minimum": 0, "maximum": 1},
        "baseline": {"type": "string"},
    },
}

RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "input", "columns", "scheme", "criterion", "policy_class"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "input": {"type": "string"},
        "columns": {
            "type": "object",
            "additionalProperties": False,
            "required": ["y", "d", "z", "x"],
            "properties": {
                "y": {"type": "string"}, "d": {"type": "string"}, "z": {"type": "string"},
                "x": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            },
        },
        "scheme": {"enum": list(SCHEMES)},
        "criterion": _CRITERION,
        "mode": {"enum": list(MODES)},
        "folds": {"type": "integer", "minimum": 2},
        "eta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "learner": _LEARNER,
        "policy_class": _POLICY_CLASS,
        "outcome_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "score_offset": {"type": "number"},
        "epsilon_late": {"type": "number", "exclusiveMinimum": 0},
        "miv_reversed": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0},
        "restarts": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
    },
}

STUDY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "dgp", "n_grid", "replications"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "dgp": {"type": "object"},
        "n_grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "replications": {"type": "integer", "minimum": 2},
        "criterion": _CRITERION,
        "scheme": {"enum": list(SCHEMES)},
        "learner": _LEARNER,
        "folds": {"type": "integer", "minimum": 2},
        "eta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "policy_class": _POLICY_CLASS,
        "modes": {"type": "array", "items": {"enum": list(MODES)}, "minItems": 1},
        "n_oracle": {"type": "integer", "minimum": 1},
        "n_eval": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "restarts": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
    },
}

COUNTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["cells", "row_totals", "col_totals", "total"],
    "properties": {
        "description": {"type": "string"},
        "rows": {"type": "string"},
        "cols": {"type": "string"},
        "cells": {
            "type": "array", "minItems": 2, "maxItems": 2,
            "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "integer", "minimum": 0}},
        },
        "row_totals": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "integer"}},
        "col_totals": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "integer"}},
        "total": {"type": "integer"},
    },
}


# ---------------------------------------------------------------- serialisation


def fmt(v) -> str:
    """17 significant digits; infinities and NaN as quoted words."""
    v = float(v)
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON with fixed-precision floats and sorted keys."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v).strip('"')
    return str(v)


def write_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([_csv_cell(v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------- input


def _resolve(path: str, base: Path) -> Path:
    if path.startswith("bundled:"):
        return Path(str(resources.files("ivpolicy") / "data" / path[len("bundled:"):]))
    p = Path(path)
    return p if p.is_absolute() else base / p


def load_json(path: Path, schema: dict) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {where}: {e.message}") from None
    return obj


def read_table(path: Path, columns: dict, outcome_range: OutcomeRange | None) -> ObservationTable:
    """Read a headed CSV; every mapped column must be present and non-empty."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise DataError(f"input file not found: {path}") from None
    if not rows:
        raise DataError(f"{path}: empty file (header row required)")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    wanted = [columns["y"], columns["d"], columns["z"], *columns["x"]]
    idx = {}
    for name in wanted:
        if name not in header:
            raise DataError(f"{path}: column {name!r} not in header")
        idx[name] = header.index(name)
    out = {name: np.empty(len(body)) for name in wanted}
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}: data row {r} has {len(row)} fields, header has {len(header)}")
        for name in wanted:
            cell = row[idx[name]].strip()
            if cell == "" or cell.lower() in ("na", "nan", "null"):
                raise DataError(f"{path}: missing value in column {name!r}, data row {r}")
            try:
                out[name][r] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} in column {name!r}, data row {r}") from None
    x = np.column_stack([out[c] for c in columns["x"]])
    return ObservationTable(out[columns["y"]], out[columns["d"]], out[columns["z"]], x, outcome_range)


# ---------------------------------------------------------------- pipeline


class Run:
    """A validated fit/bounds/scores configuration."""

    def __init__(self, cfg: dict, base: Path, seed: int | None = None, threads: int = 1):
        self.cfg = cfg
        self.base = base
        self.seed = int(cfg.get("seed", 0) if seed is None else seed)
        self.threads = max(1, int(threads))
        r = cfg.get("outcome_range")
        self.range = OutcomeRange(*r) if r is not None else None
        self.scheme = cfg["scheme"]
        if self.range is None and self.scheme != "point_late":
            raise ConfigError("outcome_range is required unless scheme is point_late")
        self.spec = PolicyClassSpec.from_json(cfg["policy_class"])
        self.spec.check(len(cfg["columns"]["x"]))
        self.learner = LearnerSpec(**cfg.get("learner", {}))
        self.mode = cfg.get("mode", ORTHOGONAL)
        self.folds = int(cfg.get("folds", 5))
        self.eta = float(cfg.get("eta", 0.01))
        self.offset = float(cfg.get("score_offset", 0.0))
        self.eps = float(cfg.get("epsilon_late", 0.05))
        self.miv_reversed = bool(cfg.get("miv_reversed", False))
        self.restarts = int(cfg.get("restarts", 20))
        c = dict(cfg["criterion"])
        if "baseline" in c:
            path = _resolve(c["baseline"], base)
            try:
                with open(path) as fh:
                    c["baseline"] = Policy.from_json(json.load(fh))
            except (OSError, json.JSONDecodeError, KeyError) as e:
                raise ConfigError(f"cannot read baseline policy {path}: {e}") from None
        self.criterion = Criterion(**c)
        if self.criterion.needs_y_bounds and self.scheme == "point_late":
            raise ConfigError(f"{self.criterion.kind} needs outcome bounds; point_late gives none")
        self.table = read_table(_resolve(cfg["input"], base), cfg["columns"], self.range)
        self._nu = None
        self._bounds = None

    @property
    def nuisances(self):
        if self._nu is None:
            self._nu = crossfit(self.table, self.learner, self.folds, self.eta, self.seed, self.threads)
        return self._nu

    @property
    def bounds(self):
        if self._bounds is None:
            self._bounds = compute_bounds(self.table, self.nuisances, self.scheme, self.range,
                                          epsilon_late=self.eps, miv_reversed=self.miv_reversed)
        return self._bounds

    def scores(self, mode: str):
        return build_scores(self.table, self.nuisances, self.scheme, self.criterion, mode, self.range,
                            epsilon_late=self.eps, miv_reversed=self.miv_reversed, offset=self.offset,
                            bounds=self.bounds)

    def clip_counts(self) -> dict:
        out = dict(self.nuisances.clip_counts)
        out.update(self.bounds.clip_counts)
        return out


def cmd_fit(run: Run) -> str:
    sv = run.scores(run.mode)
    res = solve(sv, run.table, run.spec, run.restarts, run.seed)
    assign = res.policy.assign(run.table.x)
    g = sv.gamma
    out = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "policy": res.policy.to_json(),
        "objective": res.objective,
        "method": res.method,
        "exact": res.exact,
        "treated_share": float(np.mean(assign)),
        "tie_count": res.ties,
        "clipping_counts": run.clip_counts(),
        "score_summary": {
            "mode": sv.mode, "criterion": run.criterion.to_json(), "scheme": run.scheme, "n": sv.n,
            "mean": float(np.mean(g)), "sd": float(np.std(g)), "min": float(np.min(g)), "max": float(np.max(g)),
            "positive_share": float(np.mean(g > 0)), "mean_adjustment": float(np.mean(sv.adjustment)),
        },
        "diagnostics": {
            "crossed_units": sv.diagnostics["crossed_units"],
            "envelope_ties": sv.diagnostics["envelope_ties"],
            "one_sided_compliance_folds": [list(f) for f in run.nuisances.structural],
        },
        "seed": run.seed,
    }
    return dumps(out) + "\n"


def cmd_bounds(run: Run) -> str:
    b = run.bounds
    ops = ("y0_high", "y0_low", "y1_high", "y1_low")
    header = ["row", "y0_low", "y0_high", "y1_low", "y1_high", "tau_low", "tau_high"] + [f"select_{o}" for o in ops]
    rows = [header]
    for i in range(b.n):
        ys = [None if getattr(b, k) is None else getattr(b, k)[i] for k in ("y0_low", "y0_high", "y1_low", "y1_high")]
        sel = [None if b.selection is None else int(b.selection.selected[o][i]) for o in ops]
        rows.append([i, *ys, b.tau_low[i], b.tau_high[i], *sel])
    return write_csv(rows)


def cmd_scores(run: Run) -> str:
    sp, so = run.scores(PLUGIN), run.scores(ORTHOGONAL)
    L = sp.phi.shape[1]
    header = ["row", "gamma_plugin", "gamma_orthogonal", "phi0_plugin", "phi0_orthogonal"]
    for l in range(L):
        header += [f"phi{l + 1}_plugin", f"phi{l + 1}_orthogonal", f"indicator{l + 1}", f"sign{l + 1}"]
    header += ["adjustment"]
    rows = [header]
    for i in range(sp.n):
        r = [i, sp.gamma[i], so.gamma[i], sp.phi0[i], so.phi0[i]]
        for l in range(L):
            r += [sp.phi[i, l], so.phi[i, l], bool(sp.indicators[i, l]), int(sp.signs[l])]
        r.append(so.adjustment[i])
        rows.append(r)
    return write_csv(rows)


def study_from_json(obj: dict, seed: int | None = None) -> StudyConfig:
    kw = {}
    if "criterion" in obj:
        c = dict(obj["criterion"])
        if "baseline" in c:
            raise ConfigError("baseline-policy criteria are not supported in studies")
        kw["criterion"] = Criterion(**c)
    if "learner" in obj:
        kw["learner"] = LearnerSpec(**obj["learner"])
    if "policy_class" in obj:
        kw["policy_class"] = PolicyClassSpec.from_json(obj["policy_class"])
    for k in ("scheme", "folds", "eta", "n_oracle", "n_eval", "restarts"):
        if k in obj:
            kw[k] = obj[k]
    if "modes" in obj:
        kw["modes"] = tuple(obj["modes"])
    kw["seed"] = int(obj.get("seed", 0) if seed is None else seed)
    return StudyConfig(SyntheticDGP.from_json(obj["dgp"]), tuple(obj["n_grid"]), int(obj["replications"]), **kw)


def cmd_simulate(cfg: StudyConfig, threads: int = 1) -> tuple[str, str]:
    rep = run_study(cfg, threads=threads)
    body = rep.to_json()
    body["schema_version"] = SCHEMA_VERSION
    body["command"] = "simulate"
    return dumps(body) + "\n", write_csv(rep.rows())


class MarginMismatch(DataError):
    pass


def cmd_validate(counts: dict) -> str:
    """Check row, column and grand totals of a 2x2 (D rows, Z columns) table."""
    c = np.asarray(counts["cells"], dtype=np.int64)
    bad = []
    for j, (got, want) in enumerate(zip(c.sum(axis=1), counts["row_totals"])):
        if got != want:
            bad.append(f"row_totals[{j}] (D={j}): cells sum to {got}, file says {want}")
    for j, (got, want) in enumerate(zip(c.sum(axis=0), counts["col_totals"])):
        if got != want:
            bad.append(f"col_totals[{j}] (Z={j}): cells sum to {got}, file says {want}")
    if c.sum() != counts["total"]:
        bad.append(f"total: cells sum to {c.sum()}, file says {counts['total']}")
    if bad:
        raise MarginMismatch("margin mismatch: " + "; ".join(bad))
    n = int(c.sum())
    out = {
        "schema_version": SCHEMA_VERSION, "command": "validate", "status": "pass",
        "cells": c.tolist(), "row_totals": list(counts["row_totals"]), "col_totals": list(counts["col_totals"]),
        "total": n,
        "instrument_share": (float(c[:, 1].sum() / n) if n else None),
        "treated_share_by_instrument": [
            (float(c[1, z] / c[:, z].sum()) if c[:, z].sum() else None) for z in (0, 1)
        ],
    }
    return dumps(out) + "\n"


# ---------------------------------------------------------------- entry point


def _emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ivpolicy", description="Treatment rules from IV data with bounded effects.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("fit", "estimate the optimal rule in a policy class"),
        ("bounds", "per-unit bounds CSV"),
        ("scores", "per-unit scores CSV, plug-in and orthogonal side by side"),
        ("simulate", "Monte Carlo regret study"),
        ("validate", "check margins of a 2x2 treatment-by-instrument count table"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="JSON config (counts file for validate)")
        sp.add_argument("--output", "-o", help="output path (default: config 'output' or stdout)")
        if name != "validate":
            sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
            sp.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg_path = Path(args.config) if not args.config.startswith("bundled:") else _resolve(args.config, Path("."))
    base = cfg_path.resolve().parent
    try:
        if args.command == "validate":
            counts = load_json(cfg_path, COUNTS_SCHEMA)
            _emit(cmd_validate(counts), Path(args.output) if args.output else None)
            return 0
        if args.command == "simulate":
            obj = load_json(cfg_path, STUDY_SCHEMA)
            study = study_from_json(obj, args.seed)
            out = args.output or obj.get("output")
            report, rows = cmd_simulate(study, args.threads)
            if out is None:
                _emit(report, None)
            else:
                path = Path(out) if args.output else _resolve(out, base)
                _emit(report, path)
                _emit(rows, path.with_suffix(".csv"))
            return 0
        obj = load_json(cfg_path, RUN_SCHEMA)
        run = Run(obj, base, args.seed, args.threads)
        text = {"fit": cmd_fit, "bounds": cmd_bounds, "scores": cmd_scores}[args.command](run)
        out = args.output or obj.get("output")
        _emit(text, None if out is None else (Path(out) if args.output else _resolve(out, base)))
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

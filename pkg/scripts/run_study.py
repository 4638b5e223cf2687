"""Run a regret study from a JSON config and print a short summary.

    python scripts/run_study.py scripts/configs/dominance.json [--replications 20] [--threads 4]

The full report (JSON) and per-replication CSV go to the config's output path.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from ivpolicy.cli import STUDY_SCHEMA, _resolve, cmd_simulate, load_json, study_from_json


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--replications", type=int, default=None, help="override R for a quick look")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    path = Path(args.config)
    obj = load_json(path, STUDY_SCHEMA)
    if args.replications is not None:
        obj["replications"] = args.replications
    cfg = study_from_json(obj, args.seed)
    t0 = time.time()
    report, rows = cmd_simulate(cfg, args.threads)
    out = _resolve(obj.get("output", path.stem + "_report.json"), path.resolve().parent)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report)
    out.with_suffix(".csv").write_text(rows)
    rep = json.loads(report)
    print(f"{path.name}: R={cfg.replications}, {time.time() - t0:.0f}s -> {out}")
    for mode, s in rep["summary"].items():
        means = "  ".join(f"n={n}: {v['mean']:.4f} ({v['se']:.4f})" for n, v in s.items())
        print(f"  {mode:<10} {means}  slope={rep['slopes'][mode]['slope']}")
    for n, p in rep["paired"].items():
        print(f"  n={n}: orthogonal - plugin = {p['mean_difference']:.4f}, one-sided p = {p['p_value']:.3g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

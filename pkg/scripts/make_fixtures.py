"""Regenerate the small CSV fixtures bundled in src/ivpolicy/data.

    python3 scripts/make_fixtures.py

Outputs are deterministic; the committed files were produced by this script.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ivpolicy.simulate import SyntheticDGP, generate

DATA = Path(__file__).resolve().parents[1] / "src" / "ivpolicy" / "data"


def write(path, table, y_digits=6, x_digits=4):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "d", "z"] + [f"x{j + 1}" for j in range(table.k_x)])
        for i in range(table.n):
            w.writerow([f"{table.y[i]:.{y_digits}f}", int(table.d[i]), int(table.z[i])]
                       + [f"{v:.{x_digits}f}" for v in table.x[i]])


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    mixed = SyntheticDGP(k_x=3, profile="smooth_crossing", amplitude=0.6, always_share=0.15, never_share=0.2,
                         z_slope=0.3, noise="uniform", noise_scale=0.8)
    table, _ = generate(mixed, 200, 20240501)
    write(DATA / "fixture.csv", table)

    full = SyntheticDGP(k_x=2, profile="smooth_crossing", amplitude=0.6, always_share=0.0, never_share=0.0)
    table, _ = generate(full, 200, 20240502)
    write(DATA / "full_compliance.csv", table)

    # outcome depends on treatment only, so every regression fits exactly
    rng = np.random.default_rng(20240503)
    n = 200
    z = (rng.random(n) < 0.5).astype(int)
    x = np.round(rng.random((n, 2)), 4)
    y = np.where(z == 1, 0.75, 0.25)
    with open(DATA / "zero_residual.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "d", "z", "x1", "x2"])
        for i in range(n):
            w.writerow([f"{y[i]:.2f}", z[i], z[i], f"{x[i, 0]:.4f}", f"{x[i, 1]:.4f}"])


if __name__ == "__main__":
    main()

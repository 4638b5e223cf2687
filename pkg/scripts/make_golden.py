"""Refresh tests/golden from a reference run of the CLI on the bundled fixture.

Only rerun this after an intentional numerical change; the golden tests then
pin the new outputs.
"""

from pathlib import Path

from ivpolicy.cli import main

ROOT = Path(__file__).resolve().parents[1]
CFG = ROOT / "src" / "ivpolicy" / "data" / "fixture_config.json"
GOLD = ROOT / "tests" / "golden"

if __name__ == "__main__":
    GOLD.mkdir(parents=True, exist_ok=True)
    for cmd, name in (("fit", "fit_fixture.json"), ("bounds", "bounds_fixture.csv"), ("scores", "scores_fixture.csv")):
        assert main([cmd, str(CFG), "--output", str(GOLD / name)]) == 0

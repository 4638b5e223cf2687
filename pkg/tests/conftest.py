import numpy as np
import pytest

from ivpolicy.nuisance import PointNuisance

ACCEPTANCE_LINES = {}


def record_acceptance(number, ok, detail):
    line = f"acceptance {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def theta(**kw):
    """PointNuisance with defaults that satisfy the h = p*m identities."""
    base = dict(m11=0.5, m00=0.5, m10=0.5, m01=0.5, p1=0.8, p0=0.1, zprob=0.5)
    base.update({k: np.asarray(v, dtype=float) for k, v in kw.items()})
    if "h1" not in base:
        base["h1"] = base["m11"] * base["p1"] + base["m01"] * (1 - base["p1"])
    if "h0" not in base:
        base["h0"] = base["m10"] * base["p0"] + base["m00"] * (1 - base["p0"])
    return PointNuisance(**{k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in base.items()})


def random_monotone_theta(rng, n):
    """Nuisances implied by a random compliance-type model (no defiers)."""
    a = rng.uniform(0, 0.4, n)
    nt = rng.uniform(0, 0.4, n)
    c = 1 - a - nt
    mc1, mc0, ma, mn = (rng.random(n) for _ in range(4))
    m11 = (c * mc1 + a * ma) / (c + a)
    m00 = (c * mc0 + nt * mn) / (c + nt)
    return PointNuisance(
        h1=c * mc1 + a * ma + nt * mn, h0=c * mc0 + a * ma + nt * mn,
        m10=ma, m01=mn, p1=c + a, p0=a, m11=m11, m00=m00, zprob=rng.uniform(0.2, 0.8, n),
    ), dict(a=a, nt=nt, c=c, mc1=mc1, mc0=mc0, ma=ma, mn=mn)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

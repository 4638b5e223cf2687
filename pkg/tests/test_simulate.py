import numpy as np
import pytest

from ivpolicy import ConfigError, LearnerSpec, Policy, PolicyClassSpec, balke_pearl_bounds, manski_bounds
from ivpolicy.bounds import manski_pepper_bounds
from ivpolicy.scores import (
    HURWICZ_IMPACT, HURWICZ_WELFARE, MAXIMIN_IMPACT, MAXIMIN_WELFARE, MINIMAX_REGRET, MINIMAX_REGRET_BASELINE,
    Criterion,
)
from ivpolicy.simulate import (
    MARGIN_GRID, UNIT, StudyConfig, StudyError, SyntheticDGP, _Evaluator, best_in_class, generate, linear_fit,
    margin_diagnostic, run_study,
)
from oracles import cell_probabilities

QUAD = PolicyClassSpec("quadrant", (0, 1))


def test_full_compliance_gives_d_equal_z():
    table, truth = generate(SyntheticDGP(profile="constant", always_share=0, never_share=0, level=0.2), 500, 1)
    assert np.array_equal(table.d, table.z)
    assert np.all(truth.compliance_type == 0)


def test_cell_frequencies():
    dgp = SyntheticDGP(always_share=0.15, never_share=0.25, z_slope=0.4)
    table, _ = generate(dgp, 100_000, 2)
    probs = cell_probabilities(dgp, table.x)
    for (d, z), pr in probs.items():
        hit = ((table.d == d) & (table.z == z)).astype(float)
        p = pr.mean()
        se = np.sqrt(np.sum(pr * (1 - pr))) / table.n
        assert abs(hit.mean() - p) <= 3 * se, (d, z)


def test_truth_record_matches_bounds_module():
    for dgp in (SyntheticDGP(), SyntheticDGP(profile="smooth_crossing", noncomplier="peaked", z_slope=0.3),
                SyntheticDGP(profile="point_mass", always_share=0.1, never_share=0.3, noncomplier="ridge")):
        x = dgp.sample_x(3000, 5)
        th = dgp.true_nuisance(x)
        mod = {"balke_pearl": balke_pearl_bounds(th, UNIT), "manski": manski_bounds(th, UNIT),
               "manski_pepper": manski_pepper_bounds(th, th.zprob, UNIT)}
        for scheme, b in mod.items():
            tb = dgp.true_bounds(x, scheme)
            for k in ("tau_low", "tau_high", "y0_low", "y0_high", "y1_low", "y1_high"):
                np.testing.assert_allclose(tb[k], getattr(b, k), atol=1e-12, rtol=0, err_msg=f"{scheme} {k}")


def test_truth_attached_to_generate():
    dgp = SyntheticDGP(profile="smooth_crossing")
    table, truth = generate(dgp, 200, 6)
    b = balke_pearl_bounds(truth.theta, UNIT)
    np.testing.assert_allclose(truth.bounds["tau_high"], b.tau_high, atol=1e-12, rtol=0)
    assert np.array_equal(truth.x, table.x)


def test_generate_is_deterministic():
    a, _ = generate(SyntheticDGP(), 300, 7)
    b, _ = generate(SyntheticDGP(), 300, 7)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.d, b.d)


def test_separated_profile_keeps_gap():
    dgp = SyntheticDGP(gap=0.1)
    b = dgp.true_bounds(dgp.sample_x(50_000, 8))
    assert np.min(np.abs(b["tau_high"])) >= 0.1 - 1e-12
    assert np.min(np.abs(b["tau_low"])) >= 0.1 - 1e-12


def test_dgp_validation():
    with pytest.raises(ConfigError):
        SyntheticDGP(always_share=0.6, never_share=0.5)
    with pytest.raises(ConfigError):
        SyntheticDGP(gap=0.3)
    with pytest.raises(ConfigError):
        SyntheticDGP(profile="smooth_crossing", amplitude=5.0)
    with pytest.raises(ConfigError):
        SyntheticDGP(z_center=0.9, z_slope=0.4)


def test_dgp_json_roundtrip():
    dgp = SyntheticDGP(noncomplier="peaked", peak_center=(0.3, 0.7), split=(0.4, 0.6))
    assert SyntheticDGP.from_json(dgp.to_json()) == dgp


def test_best_in_class_positive_scores_treat_everyone():
    dgp = SyntheticDGP(profile="constant", level=0.3)
    x = dgp.sample_x(2000, 0)
    assert np.all(dgp.true_scores(x, Criterion(MINIMAX_REGRET)) > 0)
    star = best_in_class(dgp, QUAD, Criterion(MINIMAX_REGRET), 2000, 0)
    assert star.assign(x).all()


def test_best_in_class_full_compliance_same_for_all_criteria():
    dgp = SyntheticDGP(profile="smooth_crossing", always_share=0, never_share=0, amplitude=0.6)
    base = Policy("quadrant", QUAD, (0.2, 0.9), ("gt", "le"))
    crits = [Criterion(MAXIMIN_WELFARE), Criterion(MAXIMIN_IMPACT), Criterion(MINIMAX_REGRET),
             Criterion(MINIMAX_REGRET_BASELINE, baseline=base), Criterion(HURWICZ_WELFARE, delta0=0.5, delta1=0.1),
             Criterion(HURWICZ_IMPACT, delta=0.9)]
    x = dgp.sample_x(4000, 3)
    assigns = [best_in_class(dgp, QUAD, c, 4000, 3).assign(x) for c in crits]
    for a in assigns[1:]:
        assert np.array_equal(a, assigns[0])


def test_best_in_class_stable_in_oracle_size():
    dgp = SyntheticDGP(profile="smooth_crossing", amplitude=0.4)
    cfg = StudyConfig(dgp, n_eval=200_000, replications=2)
    ev = _Evaluator(cfg, 99)
    a = best_in_class(dgp, QUAD, Criterion(MINIMAX_REGRET), 20_000, 1)
    b = best_in_class(dgp, QUAD, Criterion(MINIMAX_REGRET), 40_000, 1)
    assert abs(ev.value(a) - ev.value(b)) < ev.se(a)


def test_best_in_class_rejects_heuristic_class():
    with pytest.raises(ConfigError):
        best_in_class(SyntheticDGP(k_x=3), PolicyClassSpec("linear", (0, 1, 2)), Criterion(MINIMAX_REGRET), 100, 0)


def test_margin_separated_is_zero_below_gap():
    dgp = SyntheticDGP(gap=0.1)
    curve = margin_diagnostic(dgp.true_bounds(dgp.sample_x(50_000, 1)), MARGIN_GRID)
    for name, v in curve.items():
        assert np.all(v[np.array(MARGIN_GRID) < 0.1] == 0), name


def test_margin_smooth_crossing_is_linear():
    dgp = SyntheticDGP(profile="smooth_crossing", amplitude=0.5)
    curve = margin_diagnostic(dgp.true_bounds(dgp.sample_x(100_000, 2)), MARGIN_GRID)
    for name, v in curve.items():
        slope, _, r2 = linear_fit(MARGIN_GRID, v)
        assert slope > 0 and r2 >= 0.9, name


def test_margin_large_t_limit():
    b = {"tau_high": np.array([0.0, 0.5, -2.0, 3.0]), "tau_low": np.array([0.0, 0.0, 0.0, 0.0])}
    curve = margin_diagnostic(b, [0.1, 1.0, 1e9])
    assert curve["tau_high"].tolist() == [0.0, 0.25, 0.75]
    assert curve["tau_low"].tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        margin_diagnostic(b, [0.2, 0.1])


def _small_cfg(**kw):
    base = dict(dgp=SyntheticDGP(noise_scale=0.5), n_grid=(200, 400, 800), replications=3,
                learner=LearnerSpec(n_rounds=20), n_oracle=3000, n_eval=20_000, seed=4, eta=0.05)
    base.update(kw)
    return StudyConfig(**base)


def test_study_determinism_and_threads():
    cfg = _small_cfg()
    a, b, c = run_study(cfg), run_study(cfg), run_study(cfg, threads=3)
    assert a.records == b.records == c.records
    assert a.to_json() == c.to_json()


def test_study_regret_nonnegative_within_noise():
    rep = run_study(_small_cfg())
    assert min(r[3] for r in rep.records) >= -2 * rep.oracle_se
    assert set(rep.summary) == {"plugin", "orthogonal"}
    assert rep.kappa[400] == 200.0
    assert rep.slopes["plugin"]["points"] == 3


def test_forced_oracle_policy_has_zero_regret():
    cfg = _small_cfg()
    root = np.random.SeedSequence(cfg.seed).generate_state(2)
    star = best_in_class(cfg.dgp, cfg.policy_class, cfg.criterion, cfg.n_oracle, int(root[0]))
    ev = _Evaluator(cfg, int(root[1]))
    # the study measures regret against exactly this value
    target = run_study(cfg).oracle_value
    assert target == ev.value(star)
    assert target - ev.value(Policy.from_json(star.to_json())) == 0.0


def test_study_config_validation():
    with pytest.raises(ConfigError):
        _small_cfg(n_grid=(400, 200))
    with pytest.raises(ConfigError):
        _small_cfg(replications=1)
    with pytest.raises(ConfigError):
        _small_cfg(modes=("bayes",))


def test_failing_replication_names_index():
    # one-sided data in a 2x2 design with no never-takers and no compliers leaves the (0,0) cell empty
    cfg = _small_cfg(dgp=SyntheticDGP(profile="constant", always_share=0.95, never_share=0.0, gap=0.0), n_grid=(50, 60, 70))
    with pytest.raises(StudyError, match="replication 0"):
        run_study(cfg)

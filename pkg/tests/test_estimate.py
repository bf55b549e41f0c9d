"""OOD error estimators, MAPE, and the R^2 admission gate."""

import itertools

import numpy as np
import pytest

from divshift import (
    EstimationConfig,
    EstimationReport,
    EstimateRow,
    LineFit,
    Method,
    Notion,
    TransformKind,
    ValidationError,
    ZeroTruth,
    aline_d,
    aline_s,
    build_estimation_report,
    clamp_to_notion_range,
    gate_by_r2,
    mape,
    ols_fit,
)


def _fit(slope, intercept, notion=Notion.TOP1, r2=1.0, n=10):
    return LineFit(slope=slope, intercept=intercept, r2=r2, n_points=n, notion=notion)


def test_aline_s_arithmetic():
    est = aline_s(_fit(0.5, 0.1), [0.2])
    assert est[0] == 0.2


def test_aline_s_identity_line():
    errs = np.array([0.05, 0.2, 0.45])
    est = aline_s(_fit(1.0, 0.0), errs)
    assert np.array_equal(est, errs)


def test_aline_s_clamps_into_notion_range():
    est = aline_s(_fit(2.0, 0.5), [0.4])
    assert est[0] == 1.0
    clamped, mask = clamp_to_notion_range(Notion.TOP1, [1.3, 0.5, -0.1])
    assert list(clamped) == [1.0, 0.5, 0.0]
    assert list(mask) == [True, False, True]


def _planted_world(n_models=19, slope=1.7, intercept=0.03):
    ids = [f"m{i:02d}" for i in range(n_models)]
    id_errors = np.linspace(0.05, 0.4, n_models)
    errs = dict(zip(ids, id_errors))
    pairs = list(itertools.combinations(ids, 2))
    dis_id = np.array([(errs[a] + errs[b]) / 2.0 for a, b in pairs])
    dis_ood = slope * dis_id + intercept
    true_ood = slope * id_errors + intercept
    return ids, id_errors, pairs, dis_id, dis_ood, true_ood


def test_planted_line_both_methods_recover_exactly():
    ids, id_errors, pairs, dis_id, dis_ood, true_ood = _planted_world()
    fit = ols_fit(dis_id, dis_ood, notion=Notion.HD)
    assert abs(fit.slope - 1.7) < 1e-10
    assert abs(fit.intercept - 0.03) < 1e-10

    est_s = aline_s(fit, id_errors)
    assert mape(est_s, true_ood) < 1e-8

    config = EstimationConfig(notion=Notion.HD, method=Method.ALINE_D)
    est_d = aline_d(fit, ids, id_errors, pairs, dis_ood, config)
    assert mape(est_d, true_ood) < 1e-8


def test_aline_d_planted_solution_three_models():
    ids = ["a", "b", "c"]
    v = np.array([0.3, 0.5, 0.2])
    slope, intercept = 1.4, 0.02
    id_errors = (v - intercept) / slope
    pairs = [("a", "b"), ("a", "c"), ("b", "c")]
    dis_ood = [(v[0] + v[1]) / 2, (v[0] + v[2]) / 2, (v[1] + v[2]) / 2]
    fit = _fit(slope, intercept, notion=Notion.HD)
    config = EstimationConfig(notion=Notion.HD, method=Method.ALINE_D)
    est = aline_d(fit, ids, id_errors, pairs, dis_ood, config)
    assert np.max(np.abs(est - v)) < 1e-8


def test_aline_d_two_models_matches_dense_solve_oracle():
    ids = ["a", "b"]
    id_errors = np.array([0.1, 0.3])
    pairs = [("a", "b")]
    dis_ood = [0.4]
    fit = _fit(1.2, 0.05)
    config = EstimationConfig(notion=Notion.TOP1, method=Method.ALINE_D)
    est = aline_d(fit, ids, id_errors, pairs, dis_ood, config)
    # hand-built 3-equation system solved through the normal equations
    a = np.array([[0.5, 0.5], [1.0, 0.0], [0.0, 1.0]])
    rhs = np.array([0.4, 1.2 * 0.1 + 0.05, 1.2 * 0.3 + 0.05])
    oracle = np.linalg.solve(a.T @ a, a.T @ rhs)
    assert np.max(np.abs(est - oracle)) < 1e-12


def test_aline_d_large_anchor_weight_reduces_to_aline_s(rng):
    ids = [f"m{i}" for i in range(8)]
    id_errors = rng.uniform(0.05, 0.5, size=8)
    pairs = list(itertools.combinations(ids, 2))
    dis_ood = rng.uniform(0.1, 0.8, size=len(pairs))
    fit = _fit(1.5, 0.04, notion=Notion.HD)
    config = EstimationConfig(
        notion=Notion.HD, method=Method.ALINE_D, alined_anchor_weight=1e6
    )
    est_d = aline_d(fit, ids, id_errors, pairs, dis_ood, config)
    est_s = aline_s(fit, id_errors)
    assert np.max(np.abs(est_d - est_s)) < 1e-6


def test_aline_d_model_order_invariance(rng):
    ids = [f"m{i}" for i in range(6)]
    id_errors = rng.uniform(0.05, 0.5, size=6)
    pairs = list(itertools.combinations(ids, 2))
    dis_ood = rng.uniform(0.1, 0.9, size=len(pairs))
    fit = _fit(1.3, 0.02, notion=Notion.HD)
    config = EstimationConfig(notion=Notion.HD, method=Method.ALINE_D)
    est = dict(zip(ids, aline_d(fit, ids, id_errors, pairs, dis_ood, config)))
    order = rng.permutation(6)
    ids2 = [ids[i] for i in order]
    est2 = dict(
        zip(ids2, aline_d(fit, ids2, id_errors[order], pairs, dis_ood, config))
    )
    for m in ids:
        assert abs(est[m] - est2[m]) < 1e-9


def test_estimation_config_validation():
    with pytest.raises(ValidationError):
        EstimationConfig(notion=Notion.HD, r2_gate=0.0)
    with pytest.raises(ValidationError):
        EstimationConfig(notion=Notion.HD, r2_gate=1.5)
    with pytest.raises(ValidationError):
        EstimationConfig(notion=Notion.HD, alined_anchor_weight=0.0)


def test_aline_s_needs_notion():
    bare = LineFit(slope=1.0, intercept=0.0, r2=1.0, n_points=2)
    with pytest.raises(ValidationError):
        aline_s(bare, [0.1])


def test_mape_examples():
    assert mape([1.1], [1.0]) == pytest.approx(10.0, abs=1e-12)
    assert mape([0.2, 0.5], [0.2, 0.5]) == 0.0
    assert mape([0.2, 0.4], [0.25, 0.5]) == pytest.approx(20.0, abs=1e-12)
    with pytest.raises(ZeroTruth):
        mape([0.1], [0.0])
    with pytest.raises(ValidationError):
        mape([], [])


def test_estimation_report_construction():
    ids, id_errors, pairs, dis_id, dis_ood, true_ood = _planted_world(n_models=5)
    fit = ols_fit(dis_id, dis_ood, notion=Notion.HD)
    config = EstimationConfig(notion=Notion.HD, method=Method.ALINE_S)
    report = build_estimation_report(
        fit, ids, id_errors, pairs, dis_ood, config,
        split_id="shift1",
        true_errors=dict(zip(ids, true_ood)),
        gated=True,
    )
    assert report.mape < 1e-8
    assert report.gated and report.split_id == "shift1"
    assert [r.model_id for r in report.rows] == list(ids)
    assert not any(r.clamped for r in report.rows)
    # without truths there is no MAPE; restricting ids drops models
    partial = build_estimation_report(
        fit, ids, id_errors, pairs, dis_ood, config,
        split_id="shift1", estimated_ids=ids[1:],
    )
    assert partial.mape is None
    assert [r.model_id for r in partial.rows] == list(ids[1:])
    assert all(r.true_error is None for r in partial.rows)


def test_estimation_report_rejects_nonfinite():
    fit = _fit(1.0, 0.0, notion=Notion.HD)
    with pytest.raises(ValidationError):
        EstimationReport(
            split_id="s",
            notion=Notion.HD,
            method=Method.ALINE_S,
            fit=fit,
            rows=(EstimateRow(model_id="m", estimate=float("nan")),),
        )


def test_report_flags_clamped_extrapolations():
    ids = ["a", "b"]
    fit = _fit(3.0, 0.2)
    config = EstimationConfig(notion=Notion.TOP1, method=Method.ALINE_S)
    report = build_estimation_report(
        fit, ids, [0.1, 0.5], [("a", "b")], [0.4], config, split_id="s"
    )
    assert [r.clamped for r in report.rows] == [False, True]
    assert report.rows[1].estimate == 1.0


def test_gate_by_r2():
    def fits(*r2s):
        return {
            notion: LineFit(slope=1, intercept=0, r2=r, n_points=5, notion=notion)
            for notion, r in zip(Notion, r2s)
        }

    table = {
        "good": fits(0.99, 0.97, 0.96, 0.98),
        "bad": fits(0.99, 0.94, 0.99, 0.99),
    }
    assert gate_by_r2(table, 0.95, list(Notion)) == ["good"]
    assert gate_by_r2(table, 0.0, list(Notion)) == ["good", "bad"]
    with pytest.raises(ValidationError):
        gate_by_r2({"s": {Notion.TOP1: table["good"][Notion.TOP1]}}, 0.95, list(Notion))

import json
import math

import numpy as np
import pytest

from robinspec import harness
from robinspec.errors import BracketViolationBeyondBudget, InsufficientSignal, RobinSpecError
from robinspec.geometry import square
from robinspec.harness import (
    DeltaRule,
    ExperimentConfig,
    MeshSettings,
    ResultTable,
    audit_monotone,
    bracket_check,
    fmt,
    remainder_fit,
    run_experiment,
    write_csv,
)
from robinspec.model1d import interval_eigs, robin_neumann

COARSE = MeshSettings(h=0.25, hb_factor=0.5, corner_rings=2)


def test_fmt_and_csv(tmp_path):
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3" and fmt(True) == "1" and fmt("x") == "x"
    text = write_csv(tmp_path / "a" / "t.csv", ("a", "b"), [(1, 2.5), (2, math.pi)])
    assert text.splitlines() == ["a,b", "1,2.5", "2,3.1415926535897931"]
    assert (tmp_path / "a" / "t.csv").read_text() == text


def test_delta_rules():
    assert DeltaRule()(20.0) == pytest.approx(3 * math.log(20) / 20)
    assert DeltaRule("fixed", 0.2)(7.0) == 0.2
    assert DeltaRule("power", 2.0, 0.5)(16.0) == pytest.approx(0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("square(1)", (20.0, 10.0))
    with pytest.raises(ValueError):
        ExperimentConfig("square(1)", (10.0,), delta_rule=DeltaRule("fixed", 0.1))
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"polygon": "square(1)", "alphas": [10], "colour": "red"})


def test_config_yaml_roundtrip(tmp_path):
    (tmp_path / "poly.yaml").write_text("sides:\n  - {start: [0, 0], end: [1, 0]}\n  - {end: [1, 1]}\n"
                                        "  - {end: [0, 1]}\n  - {end: [0, 0]}\n")
    (tmp_path / "cfg.yaml").write_text("polygon: poly.yaml\nalphas: [10, 20]\nn_max: 1\n"
                                       "mesh: {h: 0.2, refinements: 1}\ndelta_rule: {kind: log, value: 3}\n")
    cfg = ExperimentConfig.load(tmp_path / "cfg.yaml")
    assert cfg.polygon == str(tmp_path / "poly.yaml")
    assert cfg.mesh.h == 0.2 and cfg.alphas == (10.0, 20.0)
    json.dumps(cfg.as_dict())


def test_remainder_fit_exact_model():
    a = np.array([10.0, 20.0, 40.0, 80.0])
    fit = remainder_fit(a, 3.0 / a, np.zeros(4), model="1/alpha")
    assert fit.coefficient == pytest.approx(3.0, abs=1e-6)
    assert fit.exponent == pytest.approx(1.0, abs=1e-9)
    assert fit.consistent
    assert fit.r_squared == pytest.approx(1.0)


def test_remainder_fit_constant_not_consistent_with_decay():
    a = np.array([10.0, 20.0, 40.0])
    fit = remainder_fit(a, np.full(3, math.pi**2), model="log/sqrt")
    assert not fit.consistent
    const = remainder_fit(a, np.full(3, math.pi**2), model="const")
    assert const.coefficient == pytest.approx(math.pi**2)


def test_remainder_fit_insufficient_signal():
    with pytest.raises(InsufficientSignal):
        remainder_fit([10, 20, 40], [1e-3, 1e-3, 1e-3], [1e-3, 1e-3, 1e-3])


def test_partial_table_is_flagged(monkeypatch):
    real = harness._solve_polygon

    def flaky(poly_ref, alpha, n, mesh, seed):
        if alpha > 15:
            raise RobinSpecError("solver gave up")
        return real(poly_ref, alpha, n, mesh, seed)

    monkeypatch.setattr(harness, "_solve_polygon", flaky)
    cfg = ExperimentConfig("square(1)", (10.0, 20.0), n_max=1, mesh=COARSE)
    t = run_experiment(cfg, write=False)
    assert t.partial
    assert all(math.isnan(r.E_fem) for r in t.rows if r.alpha == 20.0)
    assert all(not math.isnan(r.E_fem) for r in t.rows if r.alpha == 10.0)
    assert "20" in t.meta["errors"]


def test_run_experiment_writes_identical_outputs(tmp_path):
    cfg = ExperimentConfig("square(1)", (10.0, 20.0), n_max=1, mesh=COARSE, name="tiny")
    out = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        run_experiment(ExperimentConfig(**{**cfg.__dict__, "output": str(d)}))
        out.append((d / "tiny.csv").read_bytes())
        man = json.loads((d / "tiny.manifest.json").read_text())
        assert man["seed"] == 0 and "versions" in man and man["meta"]["mesh_hashes"]
    assert out[0] == out[1]
    assert out[0].decode().splitlines()[0] == ",".join(ResultTable.HEADER)


def test_parallel_matches_serial():
    base = dict(polygon="square(1)", alphas=(10.0, 20.0), n_max=1, mesh=COARSE)
    a = run_experiment(ExperimentConfig(**base), write=False).to_csv()
    b = run_experiment(ExperimentConfig(**base, workers=2), write=False).to_csv()
    assert a == b


def test_square_table_trends(square_table):
    t = square_table
    assert not t.partial and t.meta["K"] == 4 and t.meta["cluster_match"]
    g5 = [abs(r.gap) for r in t.select(5)]
    assert all(x > y for x, y in zip(g5, g5[1:]))
    # corner levels approach -2 alpha^2; the relative gap at least halves once per alpha doubling
    rel = [abs(r.E_fem / r.alpha**2 + 2.0) for r in t.select(1)]
    assert any(y <= 0.5 * x for x, y in zip(rel, rel[1:]))
    assert all(audit_monotone(t).values())


# Coefficient of |gap_5| against log(alpha)/sqrt(alpha) over alpha = 10, 20, 40, frozen from the run (20% band).
SQUARE_FIT_COEFFICIENT = 4.53


def test_square_remainder_fit(square_table):
    sel = [r for r in square_table.select(5) if r.alpha <= 40.0]
    fit = remainder_fit([r.alpha for r in sel], [r.gap for r in sel], [r.budget for r in sel], "log/sqrt",
                        noise_factor=2.0)
    assert fit.consistent and fit.exponent > 1.0
    assert fit.coefficient == pytest.approx(SQUARE_FIT_COEFFICIENT, rel=0.2)
    # at alpha = 80 the gap is inside the FEM budget, so the default 10x noise filter leaves too few points
    assert square_table.fits["k5"]["status"] == "insufficient signal"


@pytest.mark.xfail(strict=True, reason="at desk-scale alpha the side levels lie above the prediction "
                                       "(exact separable value: gap +5.2 at alpha=10)")
def test_side_levels_below_prediction_plus_budget(square_table):
    for r in square_table.rows:
        if r.cluster == "side":
            assert r.E_fem <= r.predicted + r.budget


def test_triangle_resonance(triangle_table):
    sel = triangle_table.select(4)
    wrong = [abs(r.gap) for r in sel]
    right = [abs(r.E_fem + r.alpha**2) for r in sel]
    assert right[-1] < right[0]
    assert all(abs(w - math.pi**2) < 1.0 for w in wrong)
    fit = remainder_fit([r.alpha for r in sel], [r.gap for r in sel], [r.budget for r in sel], "const")
    assert fit.coefficient == pytest.approx(math.pi**2, rel=0.05)


def test_half_disk_thm3_gap(half_disk_table):
    sel = half_disk_table.select(3)
    assert abs(sel[1].gap) < abs(sel[0].gap)


def test_bracket_square_small_delta():
    rep = bracket_check(square(1.0), 20.0, 0.15, 8)
    assert rep.passed and rep.K == 4
    for j in range(4):
        assert -2.2 <= rep.pieces[f"N:V{j}"][0] / 400.0 <= -1.9
    # side strips separate: Robin/Neumann across the strip plus the Neumann ground state 0 along it
    mu = interval_eigs(robin_neumann(20.0, 0.15), 1)[0]
    for j in range(4):
        assert rep.pieces[f"N:W{j}"][0] == pytest.approx(mu, rel=1e-3)
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0] == ",".join(rep.HEADER)


def test_bracket_violation_raises(monkeypatch):
    real = harness._solve_polygon

    def shifted(*a, **k):
        vals, bud, res, mid, dofs = real(*a, **k)
        return vals - 500.0, bud, res, mid, dofs

    monkeypatch.setattr(harness, "_solve_polygon", shifted)
    with pytest.raises(BracketViolationBeyondBudget) as exc:
        bracket_check(square(1.0), 20.0, 0.3, 4, COARSE)
    assert not exc.value.report.passed

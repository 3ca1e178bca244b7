import numpy as np
import pytest

from medpc import SimulationConfig, curve_sweep, run
from medpc.errors import SimulationFailure
from medpc.montecarlo import CSV_COLUMNS, with_overrides

QUICK = SimulationConfig(n_reps=40, n=500, truth_method="quadrature")


@pytest.fixture(scope="module")
def quick_report():
    return run(QUICK)


def test_report_invariants(quick_report):
    assert len(quick_report.rows) == 6
    for r in quick_report.rows:
        assert r.rmse >= abs(r.bias)
        assert 0.0 <= r.coverage <= 1.0
        assert r.n_fail == 0 and r.n_ok == 40
        assert r.mc_se_coverage == pytest.approx(np.sqrt(r.coverage * (1 - r.coverage) / 40))


def test_direct_is_total_minus_indirect(quick_report):
    for rate in QUICK.alpha_rates:
        e = quick_report.estimates
        np.testing.assert_allclose(e[("zeta", rate)], e[("delta", rate)] - e[("psi", rate)],
                                   atol=1e-12)


def test_single_replicate_deterministic(tmp_path):
    cfg = with_overrides(QUICK, n_reps=1)
    run(cfg).to_csv(tmp_path / "a.csv")
    run(cfg).to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_order_invariant(quick_report):
    order = np.random.default_rng(0).permutation(QUICK.n_reps)
    other = run(QUICK, order=order)
    for a, b in zip(quick_report.rows, other.rows):
        assert a == b


def test_worker_count_invariant(quick_report):
    other = run(QUICK, workers=2)
    for a, b in zip(quick_report.rows, other.rows):
        assert a == b


def test_csv_schema(quick_report, tmp_path):
    quick_report.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 7


def test_text_table_has_reference(quick_report):
    text = quick_report.to_text()
    assert "Indirect" in text and "ref:" in text


def test_zero_noise_calibration():
    cfg = SimulationConfig(n_reps=200, n=100_000, alpha_rates=(0.3,), c1=0.0, c2=0.0,
                           truth_method="quadrature")
    report = run(cfg)
    for r in report.rows:
        assert abs(r.bias) < 0.01
        assert 0.92 <= r.coverage <= 0.98, r


def test_fitted_mode_runs():
    cfg = SimulationConfig(n_reps=5, n=2000, nuisance_mode="fitted", truth_method="quadrature")
    report = run(cfg)
    assert [r.alpha_rate for r in report.rows] == [None] * 3
    assert all(r.n_fail == 0 for r in report.rows)


def test_failures_are_counted():
    # a single record cannot support a two-parameter projection
    cfg = SimulationConfig(n_reps=3, n=1, alpha_rates=(0.3,), truth_method="quadrature")
    with pytest.raises(SimulationFailure) as err:
        run(cfg)
    assert err.value.report.rows[0].n_fail == 3


def test_invalid_config():
    with pytest.raises(ValueError):
        SimulationConfig(n_reps=0)
    with pytest.raises(ValueError):
        SimulationConfig(eval_x=1.5)


@pytest.fixture(scope="module")
def curves(spec):
    return curve_sweep(spec, np.round(np.arange(101) * 0.01, 12))


class TestCurves:
    def test_additive(self, curves):
        e = curves["estimands"]
        assert np.max(np.abs(e["delta"] - e["psi"] - e["zeta"])) < 1e-12

    def test_unit_interval(self, curves):
        for table in ("nuisances", "estimands"):
            for k, v in curves[table].items():
                assert np.all((v >= 0) & (v <= 1)), k

    def test_crossing_reported(self, curves):
        # psi stays well below one half under this design
        assert curves["psi_crossing"] is None
        assert curves["estimands"]["psi"].max() < 0.5

    def test_projection_columns(self, curves):
        p = curves["projections"]
        assert set(p) == {"x", "psi_true", "psi_proj", "delta_true", "delta_proj",
                          "zeta_true", "zeta_proj"}

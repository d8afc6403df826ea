import json
import math

import pytest

import quasistab as qs


def test_heleshaw_symbol_and_gap():
    assert qs.hs_symbol(0) == 0.0
    assert qs.hs_symbol(1) == 0.0
    assert qs.hs_symbol(2) == pytest.approx(-6.0, abs=1e-12)
    assert qs.hs_symbol(-3) == pytest.approx(-24.0, abs=1e-12)
    assert qs.hs_gap() == pytest.approx(6.0, abs=1e-12)


def test_rd_exponents_reference_point():
    e = qs.rd_exponents(2, 5.0, 4.0, 0.275)
    assert e["s_c"] == pytest.approx(16.0 / 15.0, abs=1e-12)
    assert e["mu"] == pytest.approx(7.0 / 60.0, abs=1e-12)
    assert e["alpha_crit"] == pytest.approx(0.275 + 8.0 / 15.0, abs=1e-12)


def test_rd_exponents_rejects_the_window_violations():
    with pytest.raises(qs.ConstraintError):
        qs.rd_exponents(2, 5.0, 3.0, 0.275)
    with pytest.raises(qs.ConstraintError):
        qs.rd_exponents(2, 5.0, 4.0, 0.2)


def test_critical_weight_exponent_degenerate_limit():
    assert qs.critical_weight_exponent(1.0, 2.0, 0.5) == -math.inf
    assert qs.critical_weight_exponent(4.0, 0.925, 0.275) == pytest.approx(
        0.275 + 8.0 / 15.0, abs=1e-12
    )


def test_fit_decay_clean_exponential():
    times = [0.05 * i for i in range(41)]
    norms = [3.0 * math.exp(-2.0 * t) for t in times]
    fit = qs.fit_decay(times, norms)
    assert fit["omega_fit"] == pytest.approx(2.0, abs=1e-10)
    assert fit["k_fit"] == pytest.approx(1.0, abs=1e-10)
    assert fit["window_ok"]


def test_fit_decay_needs_enough_samples():
    with pytest.raises(qs.InsufficientDataError):
        qs.fit_decay([0.0, 1.0], [1.0, 0.5])


def test_run_scenario_heleshaw(tmp_path):
    config = tmp_path / "hs.json"
    config.write_text(
        json.dumps(
            {
                "scenario": "hs-smoke",
                "model": "heleshaw",
                "params": {"n_points": 64},
                "experiment": {
                    "modes": [{"k": 2, "cos": 1.0}],
                    "t_end": 5.0,
                    "n_samples": 51,
                },
            }
        )
    )
    rep_a = qs.run_scenario(config, tmp_path / "a", seed=1)
    rep_b = qs.run_scenario(config, tmp_path / "b", seed=1)
    assert rep_a["status"] == "ok"
    assert rep_a["omega_fit"] == pytest.approx(6.0, rel=1e-3)
    assert (tmp_path / "a" / "report.json").read_bytes() == (
        tmp_path / "b" / "report.json"
    ).read_bytes()
    assert (tmp_path / "a" / "trajectory.csv").exists()
    assert (tmp_path / "a" / "decay.svg").exists()


def test_run_scenario_schema_error(tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"model": "heleshaw"}))
    rep = qs.run_scenario(config, tmp_path / "bad", seed=0)
    assert rep["status"] == "schema-error"
    assert "experiment" in rep["detail"]

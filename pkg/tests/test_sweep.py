import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from radialmix.functionals import compute_constants
from radialmix.ledger import LEDGER_COLUMNS, EnergyLedger
from radialmix.sweep import (
    DecayRateEstimator,
    ScalingExponentEstimator,
    SweepResult,
    SweepSettings,
    balance_study,
    envelope_checks,
    fit_rate,
    mixing_time,
    run_single,
    run_sweep,
    scaling_exponent,
)

FAST = SweepSettings(n_cells=256)


def _synthetic(lam, t_max=10.0, n=201):
    t = np.linspace(0, t_max, n)
    x = 2.0 * np.exp(-2 * lam * t)
    rows = []
    for ti, xi in zip(t, x):
        row = {c: 1.0 for c in LEDGER_COLUMNS}
        row.update(t=ti, x_sq=xi, l2_sq=xi / 2, phi=xi / 2, w=xi / 2)
        rows.append(row)
    return EnergyLedger(rows)


def test_mixing_time_of_pure_exponential():
    # norm ratio exp(-lam t) reaches e^{-2} at t = 2/lam
    assert mixing_time(_synthetic(0.7)) == pytest.approx(2 / 0.7, rel=1e-9)
    assert mixing_time(_synthetic(0.01)) is None
    with pytest.raises(ValueError):
        mixing_time(_synthetic(0.7), threshold=0.0)


def test_decay_rate_recovers_synthetic_rate():
    led = _synthetic(0.4)
    est = fit_rate(led)
    assert est.rate_ == pytest.approx(0.4, rel=1e-10)
    assert est.exponential_ and est.residual_ < 1e-10
    np.testing.assert_allclose(est.predict(led["t"]), led["x_sq"], rtol=1e-9)


def test_decay_estimator_follows_sklearn_conventions():
    est = DecayRateEstimator(window=(0.3, 1e-2), min_points=5)
    assert est.get_params() == {"window": (0.3, 1e-2), "min_points": 5}
    twin = clone(est).set_params(min_points=7)
    assert twin.min_points == 7 and est.min_points == 5
    with pytest.raises(NotFittedError):
        est.predict([0.0])
    t = np.linspace(0, 5, 50)
    with pytest.raises(ValueError):
        est.fit(t, np.exp(-0.01 * t))  # never enters the window
    with pytest.raises(ValueError):
        est.fit(t, np.ones(49))


def test_decay_estimator_flags_nonexponential_decay():
    t = np.linspace(0, 10, 400)
    est = DecayRateEstimator(window=(0.9, 1e-6)).fit(t, np.exp(-(t**3)))
    assert not est.exponential_


def test_scaling_exponent_recovers_power_law():
    nu = np.array([1e-3, 3e-4, 1e-4, 3e-5, 1e-5])
    s, err = scaling_exponent(nu, 2.5 * nu ** (1 / 3))
    assert s == pytest.approx(1 / 3, rel=1e-12) and err < 1e-10
    est = ScalingExponentEstimator().fit(nu, nu**0.5)
    np.testing.assert_allclose(est.predict(nu), nu**0.5, rtol=1e-10)
    with pytest.raises(ValueError):
        scaling_exponent([1e-3, 5e-4, 2e-4, 1e-4], [1, 2, 3, 4])  # one decade only
    with pytest.raises(ValueError):
        scaling_exponent(nu, -nu)


def test_envelope_of_synthetic_decay():
    rep = envelope_checks(_synthetic(0.4), 1.0, 1e-2, 1, compute_constants(1.0))
    assert rep.phi_ok and rep.phi_ratio_max == pytest.approx(1.0)
    assert rep.l2_monotone


@pytest.mark.parametrize("plan", [[], [(1.0, 1e-3, 0)], [(1.0, 2.0, 1)], [(0.5, 1e-3, 1)]])
def test_run_sweep_rejects_bad_plans(plan):
    with pytest.raises(ValueError):
        run_sweep(plan, FAST)


def test_single_run_row():
    row = run_single(1.0, 1e-2, 1, FAST)
    assert row["status"] == "ok"
    assert row["envelope_phi_ok"]
    assert row["lambda_fit"] > row["lambda_thm"] > 0
    assert row["tau_mix"] > 0 and row["C0_fit"] >= 1


def test_sweep_order_duplicates_and_csv():
    plan = [(1.0, 1e-2, 2), (1.0, 1e-2, 1), (1.0, 1e-2, 1)]
    res = run_sweep(plan, FAST)
    assert [r["k"] for r in res.rows] == [1, 1, 2]
    assert res.duplicates == [(1.0, 1e-2, 1)]
    assert "duplicates=1" in res.summary()
    text = res.to_csv()
    header, first = text.splitlines()[:2]
    assert header.split(",")[-1] == "status"
    assert ",true," in first and first.endswith(",ok")
    assert text == run_sweep(list(reversed(plan)), FAST).to_csv()


def test_failed_row_keeps_sweep_alive():
    row = run_single(1.0, 1e-2, 1, SweepSettings(n_cells=256, width=3.0))
    assert row["status"].startswith("failed")
    csv = SweepResult([row]).to_csv()
    assert ",nan," in csv


def test_balance_study_converges():
    study = balance_study(1.0, r_max=6.0, n_cells=192, dt=2e-2, t_max=2.0)
    assert study.ok()
    for ratio in study.ratios.values():
        assert 3.5 < ratio < 4.5
    assert math.isinf(type(study)(study.coarse, dict.fromkeys(study.coarse, 0.0)).ratios["dtf"])

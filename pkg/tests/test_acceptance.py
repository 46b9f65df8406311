"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N ...: PASS|FAIL`` line with the
measured quantities, then asserts.
"""
import math

import numpy as np
import pytest

from radialmix import cli
from radialmix.functionals import (
    compute_constants,
    gronwall_bound_check,
    make_recorder,
    rates_and_times,
)
from radialmix.grid import build_grid, weighted_norm_sq
from radialmix.lemmas import run_lemma_suite, summarize
from radialmix.solver import (
    FlowConfig,
    ModeState,
    build_stepper,
    default_dt,
    default_record_every,
    evolve,
    heat_mode_exact,
    initial_profile,
)
from radialmix.sweep import SweepSettings, balance_study, run_single, run_sweep, scaling_exponent

NUS = (1e-3, 3e-4, 1e-4, 3e-5, 1e-5)


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok

    return emit


def _heat_error(n_cells, dt):
    grid = build_grid(8.0, n_cells)
    cfg = FlowConfig(1.0, 0.01, 0, dt, 1.0)
    f = build_stepper(cfg, grid).advance(np.exp(-grid.centers**2), cfg.n_steps)
    exact = heat_mode_exact(1.0, 0.01, 1.0, grid)
    return math.sqrt(weighted_norm_sq(grid, f - exact, 0) / weighted_norm_sq(grid, exact, 0))


def test_criterion_1_heat_mode_oracle(report):
    e1 = _heat_error(2048, 1e-3)
    e2 = _heat_error(4096, 5e-4)
    ratio = e1 / e2
    ok = e1 <= 1e-4 and 3.5 <= ratio <= 4.5
    assert report(1, "heat-mode oracle", ok, f"rel L2 error {e1:.3e}, halving ratio {ratio:.3f}")


def test_criterion_2_sup_norm_heat_decay(report):
    nu, dt = 0.01, 0.1
    grid = build_grid(40.0, 2048)
    f = np.exp(-grid.centers**2).astype(complex)
    n0 = math.sqrt(weighted_norm_sq(grid, f, 0))
    stepper = build_stepper(FlowConfig(1.0, nu, 0, dt, 10 / nu), grid)
    done, vals = 0, []
    for t in np.linspace(0.1 / nu, 10 / nu, 400):
        n = int(round(t / dt))
        f = stepper.advance(f, n - done)
        done = n
        vals.append(math.sqrt(nu * n * dt) * np.abs(f).max() / n0)
    vals = np.array(vals)
    peak = int(vals.argmax())
    tail = vals[peak:]
    ok = bool(np.all(np.isfinite(vals)) and np.all(tail[1:] <= tail[:-1] * 1.01))
    assert report(2, "sup-norm heat decay", ok,
                  f"max sqrt(nu t)|f|_inf/|f0|_2 = {vals.max():.4f} at t = {(0.1 + 9.9 * peak / 399) / nu:.1f}")


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_criterion_3_energy_balances(report, p):
    study = balance_study(p, nu=1e-2, ell=1, r_max=6.0, n_cells=384, dt=1e-2, t_max=4.0, record_every=2)
    worst = max(study.coarse.values())
    slowest = min(study.ratios.values())
    assert report(3, f"energy balances p={p:g}", study.ok(),
                  f"max residual {worst:.2e}, min refinement ratio {slowest:.3f}")


def test_criterion_4_lemma_suite(report):
    reports = run_lemma_suite()
    summary = summarize(reports)
    failures = sum(total - passed for total, passed, _ in summary.values())
    detail = ", ".join(f"{k} {p}/{t} min margin {m:.2e}" for k, (t, p, m) in summary.items())
    assert report(4, "lemma suite", failures == 0 and len(reports) == 75000, detail)


def test_criterion_5_constants(report):
    worst = math.inf
    for p in np.round(np.arange(1.0, 4.0001, 0.1), 10):
        consts = compute_constants(p)
        worst = min(worst, min(consts.constraint_margins().values()))
    c1, c2 = compute_constants(1.0), compute_constants(2.0)
    spots = [abs(c1.c1 - 10), abs(c1.c3 - 4), abs(c2.c1 - 64), abs(c2.c3 - 2**1.5)]
    ok = worst >= -1e-12 and max(spots) <= 1e-12
    assert report(5, "constants and constraints", ok, f"min relative slack {worst:.2e}, spot error {max(spots):.1e}")


def test_criterion_6_phi_envelope(report):
    rows = run_sweep([(p, nu, k) for p in (1.0, 2.0) for nu in (1e-2, 1e-3) for k in (1, 2)]).rows
    ok = all(r["envelope_phi_ok"] and r["status"] == "ok" for r in rows)
    bad = [(r["p"], r["nu"], r["k"]) for r in rows if not r["envelope_phi_ok"]]
    assert report(6, "Phi envelope", ok, f"{len(rows) - len(bad)}/{len(rows)} runs within 1 + 1e-4")


@pytest.mark.parametrize("p, target, tol", [(1.0, 1 / 3, 0.05), (2.0, 1 / 2, 0.08)])
def test_criterion_7_scaling_exponent(report, p, target, tol):
    rows = run_sweep([(p, nu, 1) for nu in NUS]).rows
    assert all(r["status"] == "ok" for r in rows)
    slope, err = scaling_exponent([r["nu"] for r in rows], [r["lambda_fit"] for r in rows])
    ok = abs(slope - target) <= tol
    assert report(7, f"scaling exponent p={p:g}", ok, f"slope {slope:.4f} +- {err:.1e}, target {target:.4f} +- {tol}")


def test_criterion_8_k_monotonicity(report):
    rows = run_sweep([(1.0, 1e-4, k) for k in (1, 2, 4)]).rows
    lam = [r["lambda_fit"] for r in rows]
    se = [r["fit_stderr"] for r in rows]
    ok = all(lam[i + 1] >= lam[i] - (se[i] + se[i + 1]) for i in range(2))
    assert report(8, "k-monotonicity", ok, "lambda_fit " + ", ".join(f"k={r['k']}: {r['lambda_fit']:.4g}" for r in rows))


def test_criterion_9_gronwall_bound(report):
    p, nu, ell = 2.0, 1e-3, 1
    consts = compute_constants(p)
    t_end = rates_and_times(consts, nu, ell).T_nuk_ln
    grid = build_grid(8.0, 512)
    f0 = initial_profile("gaussian_monomial", ell, grid)
    dt = default_dt(grid, f0, p, nu, ell)
    cfg = FlowConfig(p, nu, ell, dt, t_end, default_record_every(dt, t_end))
    ledger = evolve(ModeState(f0, 0.0, cfg), build_stepper(cfg, grid), make_recorder(grid, ell, nu, consts))
    rep = gronwall_bound_check(ledger, p, nu, ell, consts)
    ok = not ledger.failed and rep.ok and ledger["t"][-1] >= t_end - dt * cfg.record_every
    assert report(9, "Gronwall bound", ok, f"{len(ledger)} rows to t = {ledger['t'][-1]:.1f}, min margin {rep.min_margin:.3g}")


def test_criterion_10_determinism(report, tmp_path, capsys):
    plan = "1:1e-2:1; 2:1e-2:1; 1:1e-3:2"
    files = []
    for name, workers in (("a", "1"), ("b", "1"), ("c", "2")):
        assert cli.dispatch(["sweep", "--plan", plan, "--cells", "256", "--seed", "3",
                             "--workers", workers, "--out", str(tmp_path / name)]) == 0
        files.append((tmp_path / name / "sweep.csv").read_bytes())
    for name in ("d", "e"):
        assert cli.dispatch(["verify-lemmas", "--p", "2", "--seed", "0", "--out", str(tmp_path / name)]) == 0
        files.append((tmp_path / name / "lemmas.csv").read_bytes())
    capsys.readouterr()
    ok = files[0] == files[1] == files[2] and files[3] == files[4]
    assert report(10, "determinism", ok, "sweep.csv (serial x2, pooled) and lemmas.csv byte-identical")

"""Parameter sweeps, decay-rate fits and envelope checks.

The two regressions are written as scikit-learn estimators so they can be
cross-validated or dropped into a pipeline:

* :class:`DecayRateEstimator` fits ``x_sq(t) ~ C exp(-2 lambda t)`` on the part
  of a trajectory where the X-norm lies inside a window of fractions of its
  initial value.
* :class:`ScalingExponentEstimator` fits ``lambda ~ A nu^s`` on a log-log scale.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .functionals import (
    balance_residuals,
    compute_constants,
    make_recorder,
    rates_and_times,
)
from .grid import build_grid
from .ledger import EnergyLedger, atomic_write_text, format_float
from .solver import FlowConfig, ModeState, build_stepper, default_dt, evolve, initial_profile

__all__ = [
    "DEFAULT_WINDOW",
    "ASYMPTOTIC_WINDOW",
    "DEFAULT_THRESHOLD",
    "mixing_time",
    "DecayRateEstimator",
    "fit_rate",
    "ScalingExponentEstimator",
    "scaling_exponent",
    "EnvelopeReport",
    "envelope_checks",
    "SweepSettings",
    "SweepResult",
    "run_single",
    "run_sweep",
    "BalanceStudy",
    "balance_study",
]

DEFAULT_WINDOW = (0.5, 1e-3)
# Late-time window: the slowest structure, localised near the origin, only
# dominates once the X-norm has dropped below roughly nu of its initial value.
ASYMPTOTIC_WINDOW = (1e-8, 1e-12)
DEFAULT_THRESHOLD = math.exp(-2.0)
MIN_WINDOW_ROWS = 10
NONEXP_RESIDUAL = 1e-2


def _relative_x(ledger: EnergyLedger) -> tuple[np.ndarray, np.ndarray]:
    t = ledger["t"]
    x = ledger["x_sq"]
    if len(x) == 0 or x[0] <= 0:
        raise ValueError("ledger needs a positive initial x_sq")
    return t, x / x[0]


def mixing_time(ledger: EnergyLedger, threshold: float = DEFAULT_THRESHOLD) -> float | None:
    """First time the X-norm falls to ``threshold`` times its initial value.

    Interpolates linearly in ``log x_sq`` between ledger rows.  Returns
    ``None`` when the threshold is not reached within the ledger.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold!r}")
    t, x = _relative_x(ledger)
    target = threshold**2
    if x[0] <= target:
        return float(t[0])
    below = np.nonzero(x <= target)[0]
    if below.size == 0:
        return None
    j = below[0]
    if x[j] <= 0:
        return float(t[j])
    y0, y1 = math.log(x[j - 1]), math.log(x[j])
    frac = (math.log(target) - y0) / (y1 - y0)
    return float(t[j - 1] + frac * (t[j] - t[j - 1]))


class DecayRateEstimator(RegressorMixin, BaseEstimator):
    """Least-squares exponential decay rate of the X-norm.

    Parameters
    ----------
    window : tuple of float
        ``(upper, lower)`` fractions of the initial ``x_sq``; only samples
        inside the window enter the fit.
    min_points : int
        Minimum number of samples required inside the window.

    Attributes
    ----------
    rate_ : float
        Decay rate of the norm, minus the slope of ``0.5 log x_sq``.
    stderr_ : float
        Standard error of ``rate_``.
    residual_ : float
        RMS misfit of ``0.5 log x_sq`` divided by its range in the window.
    exponential_ : bool
        ``residual_ < 1e-2``; false flags algebraic or super-exponential decay.
    """

    def __init__(self, window=DEFAULT_WINDOW, min_points: int = MIN_WINDOW_ROWS):
        self.window = window
        self.min_points = min_points

    def fit(self, X, y):
        t = np.asarray(X, dtype=float).reshape(-1)
        x = np.asarray(y, dtype=float).reshape(-1)
        if t.shape != x.shape:
            raise ValueError("times and x_sq must have the same length")
        if x.size == 0 or not x[0] > 0:
            raise ValueError("x_sq must start positive")
        hi, lo = max(self.window), min(self.window)
        rel = x / x[0]
        mask = (rel <= hi) & (rel >= lo) & (rel > 0)
        n = int(mask.sum())
        if n < self.min_points:
            raise ValueError(
                f"only {n} samples inside the window {self.window}; "
                "use a longer t_max or a finer record stride"
            )
        tw = t[mask]
        yw = 0.5 * np.log(rel[mask])
        (slope, intercept), cov = np.polyfit(tw, yw, 1, cov="unscaled")
        resid = yw - (slope * tw + intercept)
        dof = max(n - 2, 1)
        s2 = float(resid @ resid) / dof
        span = float(yw.max() - yw.min())
        self.rate_ = float(-slope)
        self.intercept_ = float(intercept)
        self.stderr_ = float(math.sqrt(s2 * cov[0, 0]))
        self.residual_ = float(math.sqrt(float(resid @ resid) / n) / span) if span > 0 else 0.0
        self.exponential_ = self.residual_ < NONEXP_RESIDUAL
        self.n_points_ = n
        self.x0_ = float(x[0])
        return self

    def predict(self, X):
        check_is_fitted(self, "rate_")
        t = np.asarray(X, dtype=float).reshape(-1)
        return self.x0_ * np.exp(2 * (self.intercept_ - self.rate_ * t))


def fit_rate(ledger: EnergyLedger, window=DEFAULT_WINDOW) -> DecayRateEstimator:
    """Fit the decay rate of ``ledger['x_sq']`` inside ``window``."""
    return DecayRateEstimator(window=window).fit(ledger["t"], ledger["x_sq"])


class ScalingExponentEstimator(RegressorMixin, BaseEstimator):
    """Power-law exponent ``s`` in ``rate ~ A nu^s`` by log-log least squares.

    Attributes
    ----------
    slope_, stderr_, intercept_ : float
    """

    def __init__(self, min_points: int = 4, min_decades: float = 2.0):
        self.min_points = min_points
        self.min_decades = min_decades

    def fit(self, X, y):
        nu = np.asarray(X, dtype=float).reshape(-1)
        rate = np.asarray(y, dtype=float).reshape(-1)
        if nu.shape != rate.shape:
            raise ValueError("nu and rates must have the same length")
        if np.any(nu <= 0) or np.any(rate <= 0) or not np.all(np.isfinite(rate)):
            raise ValueError("nu and rates must be positive and finite")
        if np.unique(nu).size < self.min_points:
            raise ValueError(f"need at least {self.min_points} distinct nu values")
        if math.log10(nu.max() / nu.min()) < self.min_decades - 1e-9:
            raise ValueError(f"nu values must span at least {self.min_decades} decades")
        lx, ly = np.log(nu), np.log(rate)
        (slope, intercept), cov = np.polyfit(lx, ly, 1, cov="unscaled")
        resid = ly - (slope * lx + intercept)
        s2 = float(resid @ resid) / max(len(lx) - 2, 1)
        self.slope_ = float(slope)
        self.intercept_ = float(intercept)
        self.stderr_ = float(math.sqrt(s2 * cov[0, 0]))
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        return np.exp(self.intercept_) * np.asarray(X, dtype=float) ** self.slope_


def scaling_exponent(nus, rates) -> tuple[float, float]:
    """Return ``(slope, standard error)`` of ``log rate`` against ``log nu``."""
    est = ScalingExponentEstimator().fit(nus, rates)
    return est.slope_, est.stderr_


@dataclass
class EnvelopeReport:
    phi_ratio_max: float
    phi_ok: bool
    C0_fit: float
    l2_monotone: bool


def envelope_checks(ledger: EnergyLedger, p: float, nu: float, ell: int, consts, tol_env: float = 1e-4) -> EnvelopeReport:
    """Exponential envelopes of the modified energy and of ``W``.

    The functional must satisfy ``Phi(t) e^{lambda_thm t} <= Phi(0)``; for
    ``W`` only the prefactor ``max_t W(t) e^{lambda_W t} / W(0)`` is reported.
    """
    if ell < 1:
        raise ValueError("envelopes are defined for ell >= 1")
    rates = rates_and_times(consts, nu, ell)
    t = ledger["t"] - ledger["t"][0]
    phi = ledger["phi"]
    w = ledger["w"]
    phi_ratio = phi * np.exp(rates.lambda_thm * t) / phi[0]
    w_ratio = w * np.exp(rates.lambda_w * t) / w[0]
    l2 = ledger["l2_sq"]
    return EnvelopeReport(
        phi_ratio_max=float(phi_ratio.max()),
        phi_ok=bool(phi_ratio.max() <= 1 + tol_env),
        C0_fit=float(w_ratio.max()),
        l2_monotone=bool(np.all(np.diff(l2) <= 1e-14 * l2[0])),
    )


@dataclass(frozen=True)
class SweepSettings:
    """Simulation defaults shared by every run of a sweep."""

    r_max: float = 8.0
    n_cells: int = 1024
    width: float = 1.0
    profile: str = "gaussian_monomial"
    seed: int = 0
    dt: float | None = None
    window: tuple = ASYMPTOTIC_WINDOW
    threshold: float = DEFAULT_THRESHOLD
    tol_env: float = 1e-4
    # ledger stride as a fraction of 1/lambda_nu
    record_fraction: float = 2e-3
    workers: int = 1


SWEEP_COLUMNS = (
    "p", "nu", "k", "lambda_fit", "tau_mix", "lambda_thm", "lambda_W", "T_nuk_ln",
    "envelope_phi_ok", "C0_fit", "fit_stderr", "fit_residual", "status",
)


def run_single(p: float, nu: float, k: int, settings: SweepSettings = SweepSettings()) -> dict:
    """Simulate one ``(p, nu, k)`` triple and summarise it as a sweep row."""
    consts = compute_constants(p)
    rates = rates_and_times(consts, nu, k)
    row = {
        "p": float(p), "nu": float(nu), "k": int(k),
        "lambda_fit": math.nan, "tau_mix": None,
        "lambda_thm": rates.lambda_thm, "lambda_W": rates.lambda_w, "T_nuk_ln": rates.T_nuk_ln,
        "envelope_phi_ok": False, "C0_fit": math.nan,
        "fit_stderr": math.nan, "fit_residual": math.nan, "status": "ok",
    }
    try:
        grid = build_grid(settings.r_max, settings.n_cells)
        f0 = initial_profile(settings.profile, k, grid, settings.width, settings.seed)
        dt = settings.dt or default_dt(grid, f0, p, nu, k)
        t_max = min(5 * rates.T_nuk_ln, 2 / nu)
        stride = max(1, int(round(settings.record_fraction / rates.lambda_nu / dt)))
        cfg = FlowConfig(p, nu, k, dt, t_max, stride)
        x0 = None
        floor = 0.1 * min(settings.window)

        def stop(r):
            nonlocal x0
            if x0 is None:
                x0 = r["x_sq"]
            return r["x_sq"] < floor * x0

        ledger = evolve(ModeState(f0, 0.0, cfg), build_stepper(cfg, grid),
                        make_recorder(grid, k, nu, consts), stop=stop)
        if ledger.failed:
            row["status"] = f"failed: {ledger.message}"
            return row
        env = envelope_checks(ledger, p, nu, k, consts, settings.tol_env)
        row["envelope_phi_ok"] = env.phi_ok
        row["C0_fit"] = env.C0_fit
        row["tau_mix"] = mixing_time(ledger, settings.threshold)
        if row["tau_mix"] is None:
            row["status"] = "mixing threshold not reached"
        fit = fit_rate(ledger, settings.window)
        row["lambda_fit"] = fit.rate_
        row["fit_stderr"] = fit.stderr_
        row["fit_residual"] = fit.residual_
    except Exception as exc:  # one bad run must not abort the sweep
        row["status"] = f"failed: {type(exc).__name__}: {exc}"
    return row


def _run_task(args):
    return run_single(*args)


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    @property
    def duplicates(self) -> list:
        keys = Counter((r["p"], r["nu"], r["k"]) for r in self.rows)
        return sorted(k for k, n in keys.items() if n > 1)

    def select(self, p=None, k=None) -> list:
        return [r for r in self.rows if (p is None or r["p"] == p) and (k is None or r["k"] == k)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            out = []
            for c in SWEEP_COLUMNS:
                v = r[c]
                if v is None:
                    out.append("")
                elif isinstance(v, bool):
                    out.append("true" if v else "false")
                elif isinstance(v, int) or isinstance(v, str):
                    out.append(str(v))
                else:
                    out.append(format_float(v))
            writer.writerow(out)
        return buf.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())

    def summary(self) -> str:
        done = sum(r["status"] == "ok" for r in self.rows)
        line = f"runs={len(self.rows)} ok={done} failed={len(self.rows) - done}"
        if self.duplicates:
            line += f" duplicates={len(self.duplicates)}"
        return line


def run_sweep(plan, settings: SweepSettings = SweepSettings()) -> SweepResult:
    """Run every ``(p, nu, k)`` triple of ``plan``.

    Runs execute in a process pool when ``settings.workers > 1``.  The result
    is ordered by ``(p, nu, k)`` and then by plan position, independently of
    completion order.
    """
    plan = [(float(p), float(nu), int(k)) for p, nu, k in plan]
    if not plan:
        raise ValueError("sweep plan is empty")
    for p, nu, k in plan:
        if k < 1 or not 0 < nu <= 1 or nu / k > 1:
            raise ValueError(f"run (p={p}, nu={nu}, k={k}) violates nu/k <= 1 with k >= 1")
        if p < 1:
            raise ValueError(f"run (p={p}, nu={nu}, k={k}) has p < 1")
    tasks = [(p, nu, k, settings) for p, nu, k in plan]
    if settings.workers > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            rows = list(pool.map(_run_task, tasks))
    else:
        rows = [_run_task(t) for t in tasks]
    order = sorted(range(len(plan)), key=lambda i: (plan[i], i))
    return SweepResult([rows[i] for i in order])


@dataclass(frozen=True)
class BalanceStudy:
    """Balance residuals at two resolutions; ``ratios`` is coarse over fine."""

    coarse: dict
    fine: dict

    @property
    def ratios(self) -> dict:
        return {k: self.coarse[k] / self.fine[k] if self.fine[k] > 0 else math.inf for k in self.coarse}

    def ok(self, tol: float = 1e-2, min_ratio: float = 3.0) -> bool:
        return all(self.coarse[k] <= tol and self.ratios[k] >= min_ratio for k in self.coarse)


def _balance_run(p, nu, ell, grid, dt, t_max, record_every, width):
    consts = compute_constants(p)
    cfg = FlowConfig(p, nu, ell, dt, t_max, record_every)
    f0 = initial_profile("gaussian_monomial", ell, grid, width)
    ledger = evolve(ModeState(f0, 0.0, cfg), build_stepper(cfg, grid), make_recorder(grid, ell, nu, consts))
    if ledger.failed:
        raise RuntimeError(ledger.message)
    return balance_residuals(ledger, p, nu).residuals


def balance_study(
    p: float,
    nu: float = 1e-2,
    ell: int = 1,
    r_max: float = 6.0,
    n_cells: int = 384,
    dt: float = 1e-2,
    t_max: float = 4.0,
    record_every: int = 2,
    width: float = 1.0,
) -> BalanceStudy:
    """Residuals of the four balances before and after halving ``dt`` and ``h``.

    ``record_every`` is kept fixed, so the difference quotients of the refined
    run also use half the time spacing.
    """
    grid = build_grid(r_max, n_cells)
    coarse = _balance_run(p, nu, ell, grid, dt, t_max, record_every, width)
    fine = _balance_run(p, nu, ell, grid.refine(2), dt / 2, t_max, record_every, width)
    return BalanceStudy(coarse, fine)

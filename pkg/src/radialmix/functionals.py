"""Hypocoercive energy functional, its explicit constants, and energy balances.

For a band ``k >= 1`` the modified energy

    Phi = 1/2 [ ||f||^2 + a ||grad f||^2 + 2 p b <r^{p-1} d_theta f, d_r f>
                + c ||r^{p-1} d_theta f||^2 ]

with ``a, b, c`` scaled in ``nu`` and ``k`` decays at least like
``exp(-2 eps0 nu^{p/(p+2)} k^{2/(p+2)} t)``.  Everything here is evaluated
per mode: a complex radial profile ``g`` standing for ``g(r) e^{i ell theta}``,
with ``d_theta`` acting as multiplication by ``i ell``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    RadialGrid,
    check_field,
    face_derivative,
    gradient_norm_sq,
    inner,
    mode_laplacian,
    radial_derivative,
    weighted_norm_sq,
)
from .ledger import EnergyLedger

__all__ = [
    "CONSTRAINT_SLACK",
    "HypoConstants",
    "RateBundle",
    "compute_constants",
    "hardy_constant",
    "coefficients_abc",
    "rates_and_times",
    "x_norm_sq",
    "cross_term",
    "phi_functional",
    "w_functional",
    "energy_row",
    "make_recorder",
    "ResidualReport",
    "balance_residuals",
    "GronwallReport",
    "gronwall_bound_check",
]

CONSTRAINT_SLACK = 1e-12


def hardy_constant(p: float) -> float:
    """Constant ``c_p`` of the weighted Hardy-type inequality.

    ``1`` at ``p = 1`` and ``2`` for ``p >= 2``.  On ``(1, 2)`` the argument
    yields ``1 / (p (p-1)^{1/p})`` while the statement asks for at least 2, so
    the larger of the two is used.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p!r}")
    if p == 1:
        return 1.0
    if p >= 2:
        return 2.0
    return max(2.0, 1.0 / (p * (p - 1) ** (1.0 / p)))


@dataclass(frozen=True)
class HypoConstants:
    p: float
    c1: float
    c2: float
    c3: float
    c_p: float
    delta: float
    alpha0: float
    beta0: float
    gamma0: float
    eps0: float
    C_p: float

    def constraints(self) -> dict[str, tuple[float, float]]:
        """Each scaled coefficient constraint as a ``(lhs, rhs)`` pair, ``lhs <= rhs``."""
        p, a0, b0, g0 = self.p, self.alpha0, self.beta0, self.gamma0
        return {
            "restrictionab": (a0**2 / b0, 0.25),
            "restrictionabc": (b0**2 / (a0 * g0), 1.0 / self.c1),
            "restrictionbc": (2.0 * g0 * (p - 1) ** 2, b0 ** ((p - 1) / p) / self.c2),
            "restb0a0": (3.0, self.c3 / (a0 * b0 ** (1.0 / p))),
            "restb0c0": (3.0, self.c3 * b0 ** ((p - 1) / p) / g0),
        }

    def constraint_margins(self) -> dict[str, float]:
        """Relative slack ``(rhs - lhs) / max(|lhs|, |rhs|)`` of each constraint."""
        out = {}
        for name, (lhs, rhs) in self.constraints().items():
            scale = max(abs(lhs), abs(rhs))
            out[name] = (rhs - lhs) / scale if scale > 0 else 0.0
        return out

    def constraints_ok(self, slack: float = CONSTRAINT_SLACK) -> bool:
        return all(m >= -slack for m in self.constraint_margins().values())


def compute_constants(p: float) -> HypoConstants:
    """Explicit constants of the hypocoercivity estimate for exponent ``p``."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p!r}")
    p = float(p)
    c1 = 4 * p**2 * (2 + p**2 / 2)
    c3 = 2 ** ((3 * p - 1) / p) * p ** (-2 / p)
    c_p = hardy_constant(p)
    c2 = 1.0 / ((1.0 / c_p) * p ** (2 * (p - 1) / p) * 2 ** (-(2 + 1 / p)))
    first = 1.0 / (2 * c2 * (p - 1) ** 2) if p > 1 else math.inf
    delta = min(first, c3 / 3)
    beta0 = min(delta**2 / (4 * c1**2), c3 * delta / (3 * c1)) ** (p / (p + 2))
    alpha0 = (c1 / delta) * beta0 ** ((p + 1) / p)
    gamma0 = delta * beta0 ** ((p - 1) / p)
    eps0 = beta0 ** (1 / p) / (2 * c3)
    return HypoConstants(
        p=p, c1=c1, c2=c2, c3=c3, c_p=c_p, delta=delta,
        alpha0=alpha0, beta0=beta0, gamma0=gamma0, eps0=eps0,
        C_p=4 * (p - 1) ** 2,
    )


def _check_nu_k(nu: float, k: int) -> None:
    if not 0 < nu <= 1:
        raise ValueError(f"nu must lie in (0, 1], got {nu!r}")
    if k < 1:
        raise ValueError(f"band k must be >= 1, got {k!r}")


def coefficients_abc(consts: HypoConstants, nu: float, k: int) -> tuple[float, float, float]:
    """Weights ``(alpha, beta, gamma)`` of the functional at diffusivity ``nu``, band ``k``."""
    _check_nu_k(nu, k)
    p = consts.p
    alpha = consts.alpha0 * nu ** (2 / (p + 2)) * k ** (-2 / (p + 2))
    beta = consts.beta0 * nu ** ((2 - p) / (p + 2)) * k ** (-4 / (p + 2))
    gamma = consts.gamma0 * nu ** (-2 * (p - 1) / (p + 2)) * k ** (-6 / (p + 2))
    return alpha, beta, gamma


@dataclass(frozen=True)
class RateBundle:
    lambda_nu: float
    lambda_thm: float
    lambda_w: float
    T_nuk: float
    T_nuk_ln: float
    log_factor: float


def rates_and_times(consts: HypoConstants, nu: float, k: int) -> RateBundle:
    _check_nu_k(nu, k)
    p = consts.p
    slope = 2 * (p - 1) / (p + 2)
    lambda_nu = nu ** (p / (p + 2)) / (1 + slope * abs(math.log(nu)))
    lambda_thm = 2 * consts.eps0 * nu ** (p / (p + 2)) * k ** (2 / (p + 2))
    log_factor = 1 + slope * (abs(math.log(nu)) + math.log(k))
    return RateBundle(
        lambda_nu=lambda_nu,
        lambda_thm=lambda_thm,
        lambda_w=lambda_thm / log_factor,
        T_nuk=1 / lambda_thm,
        T_nuk_ln=log_factor / lambda_thm,
        log_factor=log_factor,
    )


def x_norm_sq(grid: RadialGrid, g, p: float) -> float:
    return weighted_norm_sq(grid, g, 0) + weighted_norm_sq(grid, g, p - 1)


def cross_term(grid: RadialGrid, g, ell: int, p: float) -> float:
    """``Re int (i ell g) conj(d_r g) r^{p-1} r dr`` with centred differences."""
    g = check_field(grid, g)
    dg = radial_derivative(grid, g)
    return float(np.real(inner(grid, 1j * ell * g, dg, grid.centers ** (p - 1))))


def _phi_parts(grid, g, ell, p):
    return (
        weighted_norm_sq(grid, g, 0),
        gradient_norm_sq(grid, g, ell),
        cross_term(grid, g, ell, p),
        ell**2 * weighted_norm_sq(grid, g, p - 1),
    )


def _phi(consts, nu, ell, l2, grad, cross, wtheta):
    alpha, beta, gamma = coefficients_abc(consts, nu, ell)
    value = 0.5 * (l2 + alpha * grad + 2 * consts.p * beta * cross + gamma * wtheta)
    if value < 0:
        raise ArithmeticError(
            f"negative functional {value!r}: coefficient constraints are violated"
        )
    return value


def phi_functional(grid: RadialGrid, g, ell: int, nu: float, consts: HypoConstants) -> float:
    """The modified energy of mode ``ell`` (requires ``ell >= 1``)."""
    return _phi(consts, nu, ell, *_phi_parts(grid, g, ell, consts.p))


def w_functional(grid: RadialGrid, g, consts: HypoConstants) -> float:
    """``||g||^2 / 2 + (gamma0 / 4) ||r^{p-1} g||^2``, equivalent to the X-norm."""
    return 0.5 * weighted_norm_sq(grid, g, 0) + 0.25 * consts.gamma0 * weighted_norm_sq(
        grid, g, consts.p - 1
    )


def energy_row(grid: RadialGrid, g, t: float, ell: int, nu: float, consts: HypoConstants) -> dict:
    """Every ledger column for the profile ``g`` at time ``t``."""
    g = check_field(grid, g)
    p = consts.p
    r = grid.centers
    l2, grad, cross, wtheta = _phi_parts(grid, g, ell, p)
    lap = mode_laplacian(grid, g, ell)
    dface = face_derivative(grid, g)
    rf = grid.faces[1:]
    wm2 = ell**2 * weighted_norm_sq(grid, g, p - 2)
    wdr = grid.h * np.sum(rf ** (2 * p - 1) * np.abs(dface) ** 2)
    dg = radial_derivative(grid, g)
    phi = _phi(consts, nu, ell, l2, grad, cross, wtheta) if ell >= 1 and nu > 0 else math.nan
    return {
        "t": t,
        "l2_sq": l2,
        "grad_sq": grad,
        "wtheta_sq": wtheta,
        "cross": cross,
        "lap_sq": weighted_norm_sq(grid, lap, 0),
        "wgrad_sq": ell**2 * wdr + ell**2 * wm2,
        "wm2_sq": wm2,
        "x_sq": x_norm_sq(grid, g, p),
        "phi": phi,
        "w": w_functional(grid, g, consts),
        "mix_drlap": float(np.real(inner(grid, 1j * ell * dg, lap, r ** (p - 1)))),
        "mix_m2lap": float(np.real(inner(grid, 1j * ell * g, lap, r ** (p - 2)))),
    }


def make_recorder(grid: RadialGrid, ell: int, nu: float, consts: HypoConstants):
    """Recorder callback for :func:`radialmix.solver.evolve`."""

    def record(g, t):
        return energy_row(grid, g, t, ell, nu, consts)

    return record


@dataclass
class ResidualReport:
    """Maximum relative mismatch of each energy balance over the ledger."""

    residuals: dict[str, float]
    times: np.ndarray
    lhs: dict[str, np.ndarray]
    rhs: dict[str, np.ndarray]

    def max_residual(self) -> float:
        return max(self.residuals.values())


def balance_residuals(ledger: EnergyLedger, p: float, nu: float) -> ResidualReport:
    """Compare central-difference time derivatives with the balance right-hand sides.

    Residuals are ``max_t |lhs - rhs|`` divided by the largest magnitude of
    either side over the same times.
    """
    if len(ledger) < 3:
        raise ValueError("need at least 3 ledger rows to form central differences")
    t = ledger["t"]
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("ledger rows must be uniformly spaced in time")
    h = dt[0]

    def ddt(col):
        return (col[2:] - col[:-2]) / (2 * h)

    c = {name: ledger[name] for name in ledger.columns}
    mid = slice(1, -1)
    lhs = {
        "dtf": ddt(0.5 * c["l2_sq"]),
        "dtnablaf": ddt(0.5 * c["grad_sq"]),
        "dtscalar": ddt(c["cross"]),
        "rdtheta": ddt(0.5 * c["wtheta_sq"]),
    }
    rhs = {
        "dtf": -nu * c["grad_sq"][mid],
        "dtnablaf": -nu * c["lap_sq"][mid] - p * c["cross"][mid],
        "dtscalar": -p * c["wtheta_sq"][mid]
        - 2 * nu * c["mix_drlap"][mid]
        - nu * p * c["mix_m2lap"][mid],
        "rdtheta": -nu * c["wgrad_sq"][mid] + 2 * nu * (p - 1) ** 2 * c["wm2_sq"][mid],
    }
    residuals = {}
    for name in lhs:
        scale = max(np.max(np.abs(lhs[name])), np.max(np.abs(rhs[name])))
        err = np.max(np.abs(lhs[name] - rhs[name]))
        residuals[name] = float(err / scale) if scale > 0 else 0.0
    return ResidualReport(residuals, t[mid], lhs, rhs)


@dataclass
class GronwallReport:
    margins: np.ndarray
    min_margin: float

    @property
    def ok(self) -> bool:
        return self.min_margin >= 0


def gronwall_bound_check(ledger: EnergyLedger, p: float, nu: float, ell: int, consts: HypoConstants) -> GronwallReport:
    """Margin of the short-time weighted bound at every ledger row.

    ``||r^{p-1} f(t)||^2 <= (||r^{p-1} f_in||^2 + C_p^p/2 ||f_in||^2) e^{nu t}``.
    """
    if ell < 1:
        raise ValueError("the weighted bound is stated for ell >= 1")
    t = ledger["t"]
    weighted = ledger["wtheta_sq"] / ell**2
    l2 = ledger["l2_sq"]
    bound = (weighted[0] + 0.5 * consts.C_p**p * l2[0]) * np.exp(nu * (t - t[0]))
    margins = bound - weighted
    return GronwallReport(margins, float(margins.min()))

"""Crank-Nicolson evolution of a single angular mode.

Mode ``ell`` of the sheared drift-diffusion problem obeys

    d_t f + i ell r^p f = nu (d_rr + r^{-1} d_r - ell^2 r^{-2}) f,

a skew term plus a dissipative one.  The implicit trapezoidal rule applied to
that operator is norm-contractive for every time step, which is the discrete
counterpart of the basic energy identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .grid import RadialGrid, check_field, laplacian_bands, weighted_norm_sq
from .ledger import EnergyLedger

__all__ = [
    "NumericalError",
    "FlowConfig",
    "ModeState",
    "Stepper",
    "initial_profile",
    "core_radius",
    "default_dt",
    "default_record_every",
    "build_stepper",
    "step",
    "evolve",
    "heat_mode_exact",
]

PROFILE_KINDS = ("gaussian_monomial", "gaussian_polynomial")
TARGET_ROWS = 2000
# Entries below FLUSH_BELOW are zeroed every FLUSH_EVERY steps.  Long runs
# decay through the subnormal range, where arithmetic is ~100x slower.
FLUSH_BELOW = 1e-300
FLUSH_EVERY = 32


class NumericalError(RuntimeError):
    """A solve produced a singular system or non-finite values."""


@dataclass(frozen=True)
class FlowConfig:
    """Physical and numerical parameters of one trajectory.

    ``nu = 0`` is accepted for pure-advection diagnostics even though the
    analysis needs ``nu > 0``.
    """

    p: float
    nu: float
    ell: int
    dt: float
    t_max: float
    record_every: int = 1

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p!r}")
        if not 0 <= self.nu <= 1:
            raise ValueError(f"nu must lie in [0, 1], got {self.nu!r}")
        if int(self.ell) != self.ell or self.ell < 0:
            raise ValueError(f"ell must be a nonnegative integer, got {self.ell!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.t_max >= 0:
            raise ValueError(f"t_max must be nonnegative, got {self.t_max!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError(f"record_every must be a positive integer, got {self.record_every!r}")
        if self.ell >= 1 and self.nu / self.ell > 1:
            raise ValueError("need nu / ell <= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class ModeState:
    field: np.ndarray
    t: float
    config: FlowConfig


def initial_profile(
    kind: str,
    ell: int,
    grid: RadialGrid,
    width: float = 1.0,
    seed: int | None = None,
) -> np.ndarray:
    """Smooth profile vanishing like ``r^ell`` at the origin, unit L^2 norm.

    ``gaussian_monomial`` is ``r^ell exp(-(r/width)^2)``;
    ``gaussian_polynomial`` multiplies it by ``a0 + a1 r^2 + a2 r^4`` with
    coefficients drawn uniformly from ``[-1, 1]`` using ``seed``.
    """
    if kind not in PROFILE_KINDS:
        raise ValueError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}")
    if not 0 < width < grid.r_max / 4:
        raise ValueError(f"width must lie in (0, r_max/4) = (0, {grid.r_max / 4}), got {width!r}")
    r = grid.centers
    g = r**ell * np.exp(-((r / width) ** 2))
    if kind == "gaussian_polynomial":
        a = np.random.default_rng(seed).uniform(-1.0, 1.0, size=3)
        g = g * (a[0] + a[1] * r**2 + a[2] * r**4)
    norm = math.sqrt(weighted_norm_sq(grid, g, 0))
    if norm == 0:
        raise ValueError("profile vanishes identically on this grid")
    return (g / norm).astype(complex)


def core_radius(grid: RadialGrid, g, mass_fraction: float = 0.99) -> float:
    """Smallest cell-face radius enclosing ``mass_fraction`` of ``int |g|^2 r dr``."""
    g = check_field(grid, g)
    mass = np.cumsum(np.abs(g) ** 2 * grid.centers)
    if mass[-1] == 0:
        return grid.r_max
    j = int(np.searchsorted(mass, mass_fraction * mass[-1]))
    return float(grid.faces[min(j + 1, grid.n_cells)])


def default_dt(grid: RadialGrid, g, p: float, nu: float, ell: int) -> float:
    """Accuracy-motivated step: resolve the core rotation and the cell diffusion time."""
    advective = 0.5 / (ell * core_radius(grid, g) ** p) if ell > 0 else math.inf
    diffusive = 0.1 * grid.h**2 / nu if nu > 0 else math.inf
    return min(advective, diffusive, 1e-2)


def default_record_every(dt: float, t_max: float, rows: int = TARGET_ROWS) -> int:
    return max(1, int(round(t_max / dt)) // rows)


class Stepper:
    """Factorised trapezoidal pair ``(I - dt/2 A, I + dt/2 A)`` for one mode.

    Immutable after construction, so one instance can be shared by several
    trajectories.
    """

    def __init__(self, config: FlowConfig, grid: RadialGrid):
        self.config = config
        self.grid = grid
        lower, diag, upper = laplacian_bands(grid, config.ell)
        nu = config.nu
        self.a_lower = (nu * lower).astype(complex)
        self.a_diag = -1j * config.ell * grid.centers**config.p + nu * diag
        self.a_upper = (nu * upper).astype(complex)
        half = 0.5 * config.dt
        self._rl = half * self.a_lower[1:]
        self._rd = 1.0 + half * self.a_diag
        self._ru = half * self.a_upper[:-1]
        dl, d, du, du2, ipiv, info = lapack.zgttrf(
            -half * self.a_lower[1:], 1.0 - half * self.a_diag, -half * self.a_upper[:-1]
        )
        if info != 0:
            raise NumericalError(f"singular implicit matrix (zgttrf info={info})")
        self._lu = (dl, d, du, du2, ipiv)
        for arr in (self.a_lower, self.a_diag, self.a_upper, self._rl, self._rd, self._ru):
            arr.flags.writeable = False

    def advance(self, f: np.ndarray, n_steps: int = 1) -> np.ndarray:
        """Return the field after ``n_steps`` trapezoidal steps."""
        rl, rd, ru = self._rl, self._rd, self._ru
        dl, d, du, du2, ipiv = self._lu
        f = np.asarray(f, dtype=complex)
        for i in range(n_steps):
            rhs = rd * f
            rhs[:-1] += ru * f[1:]
            rhs[1:] += rl * f[:-1]
            f, info = lapack.zgttrs(dl, d, du, du2, ipiv, rhs)
            if info != 0:
                raise NumericalError(f"tridiagonal solve failed (zgttrs info={info})")
            if i % FLUSH_EVERY == FLUSH_EVERY - 1:
                f[np.abs(f) < FLUSH_BELOW] = 0
        return f


def build_stepper(config: FlowConfig, grid: RadialGrid) -> Stepper:
    return Stepper(config, grid)


def step(state: ModeState, stepper: Stepper) -> ModeState:
    """Advance ``state`` by one time step."""
    if state.config != stepper.config:
        raise ValueError("state and stepper were built for different configurations")
    f = stepper.advance(state.field, 1)
    if not np.all(np.isfinite(f)):
        raise NumericalError(f"non-finite field after step at t={state.t + state.config.dt}")
    return ModeState(f, state.t + state.config.dt, state.config)


def evolve(state: ModeState, stepper: Stepper, recorder, stop=None) -> EnergyLedger:
    """Step to ``t_max`` recording diagnostics every ``record_every`` steps.

    ``recorder(field, t)`` returns one ledger row.  ``stop(row)`` may end the
    run early once it returns true.  On a numerical failure the rows recorded
    so far are returned with ``failed`` set.  The last state reached is kept
    in ``ledger.final_state``.
    """
    if state.config != stepper.config:
        raise ValueError("state and stepper were built for different configurations")
    cfg = state.config
    ledger = EnergyLedger()
    f = check_field(stepper.grid, state.field).astype(complex)
    t0 = state.t
    row = recorder(f, t0)
    ledger.append(row)
    done = 0
    total = cfg.n_steps
    while done + cfg.record_every <= total:
        if stop is not None and stop(row):
            break
        try:
            f_new = stepper.advance(f, cfg.record_every)
        except NumericalError as exc:
            ledger.failed, ledger.message = True, str(exc)
            break
        if not np.all(np.isfinite(f_new)):
            ledger.failed = True
            ledger.message = f"non-finite field between t={t0 + done * cfg.dt:.6g} and the next record"
            break
        f = f_new
        done += cfg.record_every
        row = recorder(f, t0 + done * cfg.dt)
        ledger.append(row)
    ledger.final_state = ModeState(f, t0 + done * cfg.dt, cfg)
    return ledger


def heat_mode_exact(width: float, nu: float, t: float, grid: RadialGrid) -> np.ndarray:
    """Radially symmetric heat evolution of ``exp(-(r/width)^2)`` in the plane."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    s = width**2 + 4.0 * nu * t
    return (width**2 / s) * np.exp(-(grid.centers**2) / s)

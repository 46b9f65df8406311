"""Real 2D fields from angular modes, and plain-text snapshot frames."""
from __future__ import annotations

import io
import math

import numpy as np

from .grid import RadialGrid
from .ledger import atomic_write_text, format_float
from .solver import FlowConfig, NumericalError, build_stepper, default_dt, initial_profile

__all__ = ["theta_samples", "assemble_field2d", "frame_to_text", "snapshot_frames", "write_frames"]


def theta_samples(n_theta: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n_theta) / n_theta


def assemble_field2d(modes, n_theta: int) -> np.ndarray:
    """Sample ``g0(r) + sum_{ell>=1} 2 Re(g_ell(r) e^{i ell theta})``.

    Parameters
    ----------
    modes : iterable of (int, array)
        Pairs ``(ell, g_ell)`` with distinct ``ell >= 0``; negative bands are
        implied by conjugate symmetry.
    n_theta : int
        Number of equispaced angles, at least 8.

    Returns
    -------
    ndarray, shape (n_r, n_theta)
    """
    if int(n_theta) != n_theta or n_theta < 8:
        raise ValueError(f"n_theta must be an integer >= 8, got {n_theta!r}")
    modes = list(modes)
    if not modes:
        raise ValueError("need at least one mode")
    ells = [int(ell) for ell, _ in modes]
    if any(ell < 0 for ell in ells):
        raise ValueError("mode numbers must be nonnegative")
    if len(set(ells)) != len(ells):
        raise ValueError(f"duplicate mode numbers in {ells}")
    theta = theta_samples(n_theta)
    n_r = np.asarray(modes[0][1]).shape[0]
    out = np.zeros((n_r, n_theta))
    for ell, g in modes:
        g = np.asarray(g)
        if g.shape != (n_r,):
            raise ValueError("all radial profiles must share one grid")
        if ell == 0:
            out += g.real[:, None]
        else:
            out += 2 * np.real(g[:, None] * np.exp(1j * ell * theta)[None, :])
    return out


def frame_to_text(r: np.ndarray, theta: np.ndarray, field: np.ndarray, t: float) -> str:
    """Matrix with ``theta`` as first row, ``r`` as first column, ``t`` in the corner."""
    buf = io.StringIO()
    buf.write(",".join([format_float(t)] + [format_float(x) for x in theta]) + "\n")
    for rj, row in zip(r, field):
        buf.write(",".join([format_float(rj)] + [format_float(x) for x in row]) + "\n")
    return buf.getvalue()


def snapshot_frames(
    grid: RadialGrid,
    ells,
    p: float,
    nu: float,
    t_max: float,
    n_frames: int = 5,
    n_theta: int = 64,
    dt: float | None = None,
    profile: str = "gaussian_monomial",
    width: float = 1.0,
    seed: int | None = None,
) -> list[tuple[float, np.ndarray]]:
    """Evolve each band independently and assemble frames at equispaced times.

    All bands share one time step so the frames are synchronous.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be positive")
    ells = [int(e) for e in ells]
    if len(set(ells)) != len(ells):
        raise ValueError(f"duplicate mode numbers in {ells}")
    fields = {ell: initial_profile(profile, ell, grid, width, seed) for ell in ells}
    if dt is None:
        dt = min(default_dt(grid, fields[ell], p, nu, ell) for ell in ells)
    times = np.linspace(0.0, t_max, n_frames) if n_frames > 1 else np.array([0.0])
    steps = [int(round(t / dt)) for t in times]
    steppers = {ell: build_stepper(FlowConfig(p, nu, ell, dt, t_max), grid) for ell in ells}
    frames = []
    done = 0
    for n in steps:
        for ell in ells:
            fields[ell] = steppers[ell].advance(fields[ell], n - done)
            if not np.all(np.isfinite(fields[ell])):
                raise NumericalError(f"non-finite field in band {ell}")
        done = n
        frames.append((n * dt, assemble_field2d(fields.items(), n_theta)))
    return frames


def write_frames(out_dir, grid: RadialGrid, frames, n_theta: int) -> list:
    theta = theta_samples(n_theta)
    width = max(4, int(math.log10(max(len(frames), 1))) + 1)
    paths = []
    for i, (t, field) in enumerate(frames):
        path = f"{out_dir}/frame_{i:0{width}d}.csv"
        atomic_write_text(path, frame_to_text(grid.centers, theta, field, t))
        paths.append(path)
    return paths

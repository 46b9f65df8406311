"""Property checks of the two weighted inequalities for single-band profiles.

Spectral-gap substitute, for every ``sigma > 0``::

    sigma^{(p-1)/p} ||g||^2 <= sigma ||g/r||^2 + ||r^{p-1} g||^2
                            <= sigma ||grad g||^2 + ||r^{p-1} g||^2

Weighted Hardy-type bound::

    (1/c_p) sigma^{1/p} ||r^{p-2} g||^2 <= sigma ||grad g||^2 + ||r^{p-1} g||^2
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .functionals import hardy_constant
from .grid import RadialGrid, build_grid, check_field, gradient_norm_sq, weighted_norm_sq
from .ledger import atomic_write_text, format_float

__all__ = [
    "TOL",
    "SUITE_PS",
    "SUITE_ELLS",
    "SUITE_SIGMAS",
    "InequalityReport",
    "sample_admissible",
    "check_spectral_gap",
    "check_weighted_hardy",
    "run_lemma_suite",
    "summarize",
    "reports_to_csv",
    "lemma_grid",
]

TOL = 1e-8
SUITE_PS = (1.0, 1.25, 1.5, 2.0, 3.0)
SUITE_ELLS = (1, 2, 5)
SUITE_SIGMAS = tuple(np.logspace(-6, 2, 25))

REPORT_COLUMNS = ("lemma", "p", "ell", "sample", "sigma", "lhs", "rhs", "margin", "pass")


def lemma_grid() -> RadialGrid:
    """Mesh wide enough for the broadest samples (``width = 2``, ``ell = 5``)."""
    return build_grid(16.0, 2048)


@dataclass(frozen=True)
class InequalityReport:
    lemma: str
    p: float
    ell: int
    sigma: float
    lhs: float
    rhs: float
    sample: int = -1
    chain_ok: bool = True
    tol: float = TOL

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def relative_margin(self) -> float:
        return self.margin / self.rhs if self.rhs > 0 else 0.0

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tol * self.rhs and self.chain_ok


def sample_admissible(ell: int, grid: RadialGrid, count: int, seed: int) -> list[np.ndarray]:
    """Seeded profiles ``r^ell (a0 + a1 r^2 + a2 r^4) exp(-(r/w)^2)`` of unit L^2 norm.

    ``a_i`` are uniform on ``[-1, 1]`` and ``w`` uniform on ``[0.5, 2]``.
    """
    if ell < 1:
        raise ValueError("samples are drawn for bands ell >= 1")
    rng = np.random.default_rng(seed)
    r = grid.centers
    out = []
    for _ in range(count):
        a = rng.uniform(-1.0, 1.0, size=3)
        w = rng.uniform(0.5, 2.0)
        g = r**ell * (a[0] + a[1] * r**2 + a[2] * r**4) * np.exp(-((r / w) ** 2))
        out.append(g / np.sqrt(weighted_norm_sq(grid, g, 0)))
    return out


def _norms(grid: RadialGrid, g, ell: int, p: float) -> dict:
    g = check_field(grid, g)
    return {
        "l2": weighted_norm_sq(grid, g, 0),
        "over_r": weighted_norm_sq(grid, g, -1),
        "grad": gradient_norm_sq(grid, g, ell),
        "w1": weighted_norm_sq(grid, g, p - 1),
        "w2": weighted_norm_sq(grid, g, p - 2),
    }


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")


def _spectral(n: dict, ell, p, sigma, sample=-1) -> InequalityReport:
    lhs = sigma ** ((p - 1) / p) * n["l2"]
    middle = sigma * n["over_r"] + n["w1"]
    right = sigma * n["grad"] + n["w1"]
    # grad_sq >= ell^2 ||g/r||^2 >= ||g/r||^2 holds term by term
    chain = n["grad"] >= ell**2 * n["over_r"] * (1 - 1e-14) and middle <= right * (1 + 1e-14)
    return InequalityReport("spectral_gap", p, ell, sigma, lhs, middle, sample, bool(chain))


def _hardy(n: dict, ell, p, sigma, sample=-1) -> InequalityReport:
    lhs = sigma ** (1 / p) * n["w2"] / hardy_constant(p)
    rhs = sigma * n["grad"] + n["w1"]
    return InequalityReport("weighted_hardy", p, ell, sigma, lhs, rhs, sample)


def check_spectral_gap(grid: RadialGrid, g, ell: int, p: float, sigma: float) -> InequalityReport:
    """Evaluate the first (tighter) link; ``chain_ok`` covers the second."""
    _check_sigma(sigma)
    return _spectral(_norms(grid, g, ell, p), ell, p, sigma)


def check_weighted_hardy(grid: RadialGrid, g, ell: int, p: float, sigma: float) -> InequalityReport:
    _check_sigma(sigma)
    return _hardy(_norms(grid, g, ell, p), ell, p, sigma)


def run_lemma_suite(
    ps=SUITE_PS,
    ells=SUITE_ELLS,
    count: int = 100,
    sigmas=SUITE_SIGMAS,
    seed: int = 0,
    grid: RadialGrid | None = None,
) -> list[InequalityReport]:
    """Both inequalities on every ``(p, ell, sample, sigma)`` combination.

    Samples for band ``ell`` are drawn with seed ``seed + ell`` so every
    ``p`` sees the same profiles.
    """
    grid = grid or lemma_grid()
    for s in sigmas:
        _check_sigma(s)
    reports = []
    for ell in ells:
        samples = sample_admissible(ell, grid, count, seed + ell)
        for p in ps:
            for i, g in enumerate(samples):
                n = _norms(grid, g, ell, p)
                for s in sigmas:
                    reports.append(_spectral(n, ell, p, float(s), i))
                    reports.append(_hardy(n, ell, p, float(s), i))
    return reports


def summarize(reports) -> dict[str, tuple[int, int, float]]:
    """Per lemma: ``(total, passed, min relative margin)``."""
    out = {}
    for lemma in sorted({r.lemma for r in reports}):
        sel = [r for r in reports if r.lemma == lemma]
        out[lemma] = (
            len(sel),
            sum(r.passed for r in sel),
            min(r.relative_margin for r in sel),
        )
    return out


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        w.writerow([
            r.lemma, format_float(r.p), r.ell, r.sample, format_float(r.sigma),
            format_float(r.lhs), format_float(r.rhs), format_float(r.margin),
            "true" if r.passed else "false",
        ])
    return buf.getvalue()


def write_reports(path, reports) -> None:
    atomic_write_text(path, reports_to_csv(reports))

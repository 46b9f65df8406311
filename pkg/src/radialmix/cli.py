"""Command-line front end.

Every subcommand resolves its settings from an optional ``key = value``
config file overlaid by flags, validates all of them, and only then starts
computing.  Failures print one line ``radialmix: error=<kind> reason=<text>``
on stderr and exit with 2 (usage), 3 (failed check) or 4 (numerical).
"""
from __future__ import annotations

import argparse
import itertools
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import field2d, lemmas
from .functionals import coefficients_abc, compute_constants, make_recorder, rates_and_times
from .grid import build_grid
from .ledger import atomic_write_text, format_float
from .solver import (
    FlowConfig,
    ModeState,
    NumericalError,
    build_stepper,
    default_dt,
    default_record_every,
    evolve,
    initial_profile,
)
from .sweep import SweepSettings, balance_study, run_sweep, scaling_exponent

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_NUMERICAL = 0, 2, 3, 4

# key -> (type, help); lists are comma separated
OPTIONS = {
    "p": (str, "exponent of the shear profile r^p (comma list where a sweep is allowed)"),
    "nu": (str, "diffusivity (comma list where a sweep is allowed)"),
    "ell": (str, "angular mode number (comma list where a sweep is allowed)"),
    "rmax": (float, "outer radius of the domain"),
    "cells": (int, "number of radial cells"),
    "dt": (float, "time step"),
    "tmax": (float, "final time"),
    "out": (str, "output directory"),
    "seed": (int, "random seed"),
    "width": (float, "Gaussian width of the initial profile"),
    "profile": (str, "initial profile kind"),
    "record_every": (int, "steps between ledger rows"),
    "workers": (int, "worker processes for sweeps"),
    "plan": (str, "explicit sweep plan 'p:nu:k; p:nu:k; ...'"),
    "samples": (int, "profiles per mode in the lemma suite"),
    "ntheta": (int, "angular samples per snapshot frame"),
    "frames": (int, "number of snapshot frames"),
}


class UsageError(Exception):
    pass


class CheckFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Merged settings of one invocation; values are already typed."""

    command: str
    values: dict = field(default_factory=dict)

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    @property
    def out(self) -> Path:
        return Path(self.get("out", "."))


def read_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        if key in values:
            raise UsageError(f"{path}:{n}: duplicate key {key!r}")
        values[key] = value
    return values


def _typed(key, value):
    kind = OPTIONS[key][0]
    try:
        return kind(value)
    except ValueError:
        raise UsageError(f"invalid value for {key}: {value!r}") from None


def _float_list(cfg: RunConfig, key: str, default: str) -> list[float]:
    raw = str(cfg.get(key, default))
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"invalid list for {key}: {raw!r}") from None


def _int_list(cfg: RunConfig, key: str, default: str) -> list[int]:
    vals = _float_list(cfg, key, default)
    if any(v != int(v) for v in vals):
        raise UsageError(f"{key} must hold integers")
    return [int(v) for v in vals]


def _scalar(cfg: RunConfig, key: str, default, kind=float):
    vals = _float_list(cfg, key, str(default))
    if len(vals) != 1:
        raise UsageError(f"{key} takes a single value here")
    if kind is int:
        if vals[0] != int(vals[0]):
            raise UsageError(f"{key} must be an integer")
        return int(vals[0])
    return vals[0]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key = value settings file")
    for key, (_, text) in OPTIONS.items():
        common.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=text)
    parser = _Parser(prog="radialmix", description="Mode-by-mode mixing simulations and checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [
        ("constants", "print the functional constants and constraint margins"),
        ("simulate", "run one trajectory and write ledger.csv"),
        ("sweep", "run a (p, nu, k) plan and write sweep.csv"),
        ("verify-lemmas", "check the weighted inequalities and write lemmas.csv"),
        ("verify-balances", "check the energy balances and write balances.csv"),
        ("snapshot", "write real 2D field frames"),
    ]:
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def resolve(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = read_config_file(args.config) if args.config else {}
    for key in OPTIONS:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    return RunConfig(args.command, {k: _typed(k, v) for k, v in values.items()})


def _grid(cfg, r_max, n_cells):
    try:
        return build_grid(cfg.get("rmax", r_max), cfg.get("cells", n_cells))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _validated(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_constants(cfg: RunConfig) -> int:
    p = _scalar(cfg, "p", 1.0)
    consts = _validated(compute_constants, p)
    nu = cfg.get("nu")
    k = _scalar(cfg, "ell", 1, int)
    if nu is not None:
        nu = _scalar(cfg, "nu", nu)
        _validated(coefficients_abc, consts, nu, k)
    for name in ("p", "c1", "c2", "c3", "c_p", "delta", "alpha0", "beta0", "gamma0", "eps0", "C_p"):
        print(f"{name}={format_float(getattr(consts, name))}")
    margins = consts.constraint_margins()
    for name, m in margins.items():
        print(f"margin_{name}={format_float(m)}")
    if nu is not None:
        a, b, c = coefficients_abc(consts, nu, k)
        rates = rates_and_times(consts, nu, k)
        print(f"alpha={format_float(a)}\nbeta={format_float(b)}\ngamma={format_float(c)}")
        for name in ("lambda_nu", "lambda_thm", "lambda_w", "T_nuk", "T_nuk_ln"):
            print(f"{name}={format_float(getattr(rates, name))}")
    passed = sum(m >= -1e-12 for m in margins.values())
    print(f"constraints: {passed}/{len(margins)} pass")
    if passed != len(margins):
        raise CheckFailure(f"{len(margins) - passed} constraint(s) violated for p={p}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    p, nu, ell = _scalar(cfg, "p", 1.0), _scalar(cfg, "nu", 1e-3), _scalar(cfg, "ell", 1, int)
    grid = _grid(cfg, 8.0, 1024)
    f0 = _validated(initial_profile, cfg.get("profile", "gaussian_monomial"), ell, grid,
                    cfg.get("width", 1.0), cfg.get("seed", 0))
    consts = _validated(compute_constants, p)
    t_max = cfg.get("tmax")
    if t_max is None:
        if nu > 0 and ell >= 1:
            t_max = _validated(rates_and_times, consts, nu, ell).T_nuk_ln
        else:
            raise UsageError("--tmax is required when nu = 0 or ell = 0")
    dt = cfg.get("dt") or default_dt(grid, f0, p, nu, ell)
    every = cfg.get("record_every") or default_record_every(dt, t_max)
    config = _validated(FlowConfig, p, nu, ell, dt, t_max, every)
    ledger = evolve(ModeState(f0, 0.0, config), build_stepper(config, grid),
                    make_recorder(grid, ell, nu, consts))
    ledger.write_csv(cfg.out / "ledger.csv")
    l2 = ledger["l2_sq"]
    print(f"rows={len(ledger)} t_end={format_float(ledger['t'][-1])} l2_sq_end={format_float(l2[-1])}")
    if ledger.failed:
        raise NumericalError(ledger.message)
    if np.any(np.diff(l2) > 1e-12 * l2[0]):
        raise CheckFailure("l2_sq increased along the trajectory")
    return EXIT_OK


def _parse_plan(text: str) -> list[tuple[float, float, int]]:
    plan = []
    for item in text.split(";"):
        if not item.strip():
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise UsageError(f"plan entries are p:nu:k, got {item.strip()!r}")
        try:
            p, nu, k = float(parts[0]), float(parts[1]), float(parts[2])
        except ValueError:
            raise UsageError(f"invalid plan entry {item.strip()!r}") from None
        if k != int(k):
            raise UsageError(f"k must be an integer in {item.strip()!r}")
        plan.append((p, nu, int(k)))
    return plan


def cmd_sweep(cfg: RunConfig) -> int:
    if "plan" in cfg.values:
        plan = _parse_plan(cfg.values["plan"])
    else:
        plan = list(itertools.product(
            _float_list(cfg, "p", "1"),
            _float_list(cfg, "nu", "1e-3,3e-4,1e-4,3e-5,1e-5"),
            _int_list(cfg, "ell", "1"),
        ))
    grid = _grid(cfg, 8.0, 1024)
    settings = SweepSettings(
        r_max=grid.r_max, n_cells=grid.n_cells, width=cfg.get("width", 1.0),
        profile=cfg.get("profile", "gaussian_monomial"), seed=cfg.get("seed", 0),
        dt=cfg.get("dt"), workers=cfg.get("workers", 1),
    )
    if settings.workers < 1:
        raise UsageError("workers must be positive")
    # surface bad plans and profiles before anything runs
    _validated(_check_plan, plan)
    _validated(initial_profile, settings.profile, 1, grid, settings.width, settings.seed)
    result = run_sweep(plan, settings)
    result.write_csv(cfg.out / "sweep.csv")
    print(result.summary())
    for p, k in sorted({(r["p"], r["k"]) for r in result.rows}):
        rows = [r for r in result.select(p, k) if r["status"] == "ok"]
        try:
            s, err = scaling_exponent([r["nu"] for r in rows], [r["lambda_fit"] for r in rows])
        except ValueError:
            continue
        print(f"slope p={format_float(p)} k={k}: {s:.6f} +- {err:.2g}")
    failed = [r for r in result.rows if r["status"].startswith("failed")]
    if failed:
        raise NumericalError(f"{len(failed)} run(s) failed, first: {failed[0]['status']}")
    bad = [r for r in result.rows if r["status"] != "ok" or not r["envelope_phi_ok"]]
    if bad:
        raise CheckFailure(f"{len(bad)} run(s) failed the envelope or mixing checks")
    return EXIT_OK


def _check_plan(plan) -> None:
    if not plan:
        raise ValueError("sweep plan is empty")
    for p, nu, k in plan:
        if p < 1 or k < 1 or not 0 < nu <= 1 or nu / k > 1:
            raise ValueError(f"invalid run p={p} nu={nu} k={k}")


def cmd_verify_lemmas(cfg: RunConfig) -> int:
    ps = _float_list(cfg, "p", ",".join(map(str, lemmas.SUITE_PS)))
    ells = _int_list(cfg, "ell", ",".join(map(str, lemmas.SUITE_ELLS)))
    count = cfg.get("samples", 100)
    if not ps or not ells or count < 1 or min(ps) < 1 or min(ells) < 1:
        raise UsageError("need p >= 1, ell >= 1 and a positive sample count")
    grid = _grid(cfg, 16.0, 2048)
    reports = lemmas.run_lemma_suite(ps, ells, count, lemmas.SUITE_SIGMAS, cfg.get("seed", 0), grid)
    lemmas.write_reports(cfg.out / "lemmas.csv", reports)
    print("lemma,total,passed,min_relative_margin")
    failures = 0
    for name, (total, passed, margin) in lemmas.summarize(reports).items():
        print(f"{name},{total},{passed},{format_float(margin)}")
        failures += total - passed
    if failures:
        raise CheckFailure(f"{failures} inequality report(s) failed")
    return EXIT_OK


def cmd_verify_balances(cfg: RunConfig) -> int:
    ps = _float_list(cfg, "p", "1,2")
    nu, ell = _scalar(cfg, "nu", 1e-2), _scalar(cfg, "ell", 1, int)
    grid = _grid(cfg, 6.0, 384)
    dt, t_max, every = cfg.get("dt", 1e-2), cfg.get("tmax", 4.0), cfg.get("record_every", 2)
    for p in ps:
        _validated(FlowConfig, p, nu, ell, dt, t_max, every)
        _validated(initial_profile, "gaussian_monomial", ell, grid, cfg.get("width", 1.0))
    if round(t_max / dt) < 2 * every:
        raise UsageError("need at least three ledger rows; raise tmax or lower record_every")
    lines = ["p,balance,residual,residual_refined,ratio,pass"]
    failures = 0
    for p in ps:
        try:
            study = balance_study(p, nu, ell, grid.r_max, grid.n_cells, dt, t_max, every,
                                  cfg.get("width", 1.0))
        except RuntimeError as exc:
            raise NumericalError(str(exc)) from None
        for name, res in study.coarse.items():
            ok = res <= 1e-2 and study.ratios[name] >= 3.0
            failures += not ok
            lines.append(",".join([format_float(p), name, format_float(res),
                                   format_float(study.fine[name]), format_float(study.ratios[name]),
                                   "true" if ok else "false"]))
    text = "\n".join(lines) + "\n"
    atomic_write_text(cfg.out / "balances.csv", text)
    sys.stdout.write(text)
    if failures:
        raise CheckFailure(f"{failures} balance check(s) failed")
    return EXIT_OK


def cmd_snapshot(cfg: RunConfig) -> int:
    p, nu = _scalar(cfg, "p", 1.0), _scalar(cfg, "nu", 1e-3)
    ells = _int_list(cfg, "ell", "0,1,2")
    grid = _grid(cfg, 8.0, 512)
    n_theta, n_frames = cfg.get("ntheta", 64), cfg.get("frames", 5)
    t_max, dt = cfg.get("tmax", 10.0), cfg.get("dt")
    if n_theta < 8 or n_frames < 1:
        raise UsageError("need ntheta >= 8 and frames >= 1")
    if len(set(ells)) != len(ells):
        raise UsageError(f"duplicate mode numbers in {ells}")
    for ell in ells:
        _validated(FlowConfig, p, nu, ell, dt or 1.0, t_max)
        _validated(initial_profile, cfg.get("profile", "gaussian_monomial"), ell, grid,
                   cfg.get("width", 1.0), cfg.get("seed", 0))
    frames = field2d.snapshot_frames(grid, ells, p, nu, t_max, n_frames, n_theta, dt,
                                     cfg.get("profile", "gaussian_monomial"), cfg.get("width", 1.0),
                                     cfg.get("seed", 0))
    paths = field2d.write_frames(cfg.out, grid, frames, n_theta)
    print(f"frames={len(paths)} dir={cfg.out}")
    return EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify-lemmas": cmd_verify_lemmas,
    "verify-balances": cmd_verify_balances,
    "snapshot": cmd_snapshot,
}


def _fail(kind: str, message: str, code: int) -> int:
    reason = " ".join(str(message).split())
    print(f"radialmix: error={kind} reason={reason}", file=sys.stderr)
    return code


def dispatch(argv=None) -> int:
    """Run one subcommand and return its exit status."""
    try:
        cfg = resolve(argv)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except CheckFailure as exc:
        return _fail("check", exc, EXIT_CHECK)
    except (NumericalError, ArithmeticError) as exc:
        return _fail("numerical", exc, EXIT_NUMERICAL)


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

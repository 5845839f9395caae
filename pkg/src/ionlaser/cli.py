"""Command-line front end.

Every command validates its whole configuration before solving, writes its
results atomically into ``--out`` and finishes with a ``manifest.json`` that
echoes the resolved configuration. A manifest can be fed back through
``--config`` to replay the run.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    AmbiguityError,
    ConfigError,
    ConvergenceError,
    IonLaserError,
    StateValidationError,
    StiffnessError,
    UndefinedCorrelationError,
)
from .lindblad import ModelParams, build_liouvillian
from .observables import (
    MEAN_FLOOR,
    characteristic_function,
    default_axis,
    g2_tau,
    g2_zero,
    has_ring,
    partial_trace_internal,
    phonon_number_distribution,
    poisson_fit,
    radial_profile,
    wigner,
)
from .output import (
    CHI_HEADER,
    G2_HEADER,
    L1_HEADER,
    L2_HEADER,
    PN_HEADER,
    POINTS_HEADER,
    SCHEMA_VERSION,
    TRAJECTORY_HEADER,
    WIGNER_HEADER,
    atomic_write,
    chi_rows,
    config_digest,
    dump_json,
    matrix_csv,
    sha256,
    wigner_rows,
    write_json,
    write_table,
)
from .phase_map import PhasePoint, Region, SweepConfig, sweep
from .quantum_core import (
    SPIN_DIM,
    LevelIndex,
    embed_fock,
    embed_spin,
    ground_vacuum,
    number,
    projector,
    spin_transition,
)
from .solvers import evolve, steady_state
from .tomography import TomographyPlan, run_tomography

log = logging.getLogger("ionlaser")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_AMBIGUITY = 4
EXIT_UNDEFINED = 5
EXIT_ALL_FAILED = 6
EXIT_STIFFNESS = 7
EXIT_STATE = 8

EXIT_CODES = {
    ConfigError: EXIT_CONFIG,
    ConvergenceError: EXIT_CONVERGENCE,
    AmbiguityError: EXIT_AMBIGUITY,
    UndefinedCorrelationError: EXIT_UNDEFINED,
    StiffnessError: EXIT_STIFFNESS,
    StateValidationError: EXIT_STATE,
}

CHECKPOINT = "cells.jsonl"


class _Run:
    """Collects timings and written files for the manifest."""

    def __init__(self, command: str, config: dict, out: Path, fmt: str):
        self.command = command
        self.config = config
        self.out = out
        self.fmt = fmt
        self.files: list[Path] = []
        self.timings: dict[str, float] = {}
        self.signals: list[str] = []

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        yield
        self.timings[name] = round(time.perf_counter() - t0, 6)

    def table(self, stem, header, rows):
        self.files.append(write_table(self.out, stem, header, rows, self.fmt))

    def json(self, name, obj):
        self.files.append(write_json(self.out, name, obj))

    def text(self, name, text):
        path = self.out / name
        atomic_write(path, text)
        self.files.append(path)

    def finish(self):
        manifest = {
            "tool": "ionlaser",
            "version": __version__,
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "config_digest": config_digest(self.config),
            "files": {p.name: sha256(p) for p in sorted(self.files)},
            "timings": self.timings,
            "signals": self.signals,
        }
        atomic_write(self.out / "manifest.json", dump_json(manifest))


# ---------------------------------------------------------------------------
# argument parsing


def _common_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON config file (or a manifest to replay)")
    p.add_argument("--out", type=Path, default=Path("ionlaser-out"), help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--seed", type=int, default=0, help="seed for shot sampling")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _model_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--g-h", type=float, default=0.15, help="blue-sideband coupling g_h")
    p.add_argument("--g-c", type=float, default=2.0, help="red-sideband coupling g_c")
    p.add_argument("--gamma-h", type=float, default=1.0)
    p.add_argument("--gamma-c", type=float, default=100.0)
    p.add_argument("--cutoff", type=int, default=60, help="Fock cutoff N")
    return p


def _grid_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--extent", type=float, default=None,
                   help="half-width of the square grid (default: from <n>)")
    p.add_argument("--points", type=int, default=101, help="points per axis")
    p.add_argument("--matrix", action="store_true", help="also export matrix-form CSV")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ionlaser", description="Single-ion phonon laser simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, model, grid = _common_parent(), _model_parent(), _grid_parent()

    sub.add_parser("steady", parents=[common, model], help="steady state, P(n) and moments")

    p = sub.add_parser("evolve", parents=[common, model], help="master-equation trajectory")
    p.add_argument("--t-max", type=float, default=50.0, help="final time in units of 1/gamma_h")
    p.add_argument("--steps", type=int, default=101, help="number of stored times")
    p.add_argument("--initial", choices=("ground-vacuum", "e1-vacuum"), default="ground-vacuum")

    sub.add_parser("wigner", parents=[common, model, grid], help="steady-state Wigner grid")
    sub.add_parser("charfunc", parents=[common, model, grid], help="steady-state characteristic function")

    p = sub.add_parser("g2", parents=[common, model], help="second-order correlation g2(tau)")
    p.add_argument("--tau-max", type=float, default=8.0, help="largest delay in units of 1/gamma_h")
    p.add_argument("--tau-points", type=int, default=81)
    p.add_argument("--taus", type=float, nargs="+", default=None, help="explicit delay list")

    p = sub.add_parser("phase", parents=[common], help="phase-diagram sweep")
    p.add_argument("--g-h-min", type=float, default=0.05)
    p.add_argument("--g-h-max", type=float, default=4.0)
    p.add_argument("--g-h-points", type=int, default=25)
    p.add_argument("--g-c-min", type=float, default=0.5)
    p.add_argument("--g-c-max", type=float, default=4.0)
    p.add_argument("--g-c-points", type=int, default=5)
    p.add_argument("--gamma-h", type=float, default=1.0)
    p.add_argument("--gamma-c", type=float, default=100.0)
    p.add_argument("--cutoff", type=int, default=60)

    p = sub.add_parser("tomography", parents=[common, model, grid], help="simulated chi tomography")
    p.add_argument("--shots", type=int, default=0, help="shots per setting (0 = exact)")
    p.add_argument("--alpha-extent", type=float, default=None, help="half-width of the alpha grid")
    p.add_argument("--symmetrize", action="store_true", help="enforce chi(-a) = conj(chi(a))")
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def load_config(path: Path, sub: argparse.ArgumentParser) -> dict:
    """Read a JSON config (or a manifest) and map keys onto argument dests."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    if isinstance(data, dict) and "tool" in data and "config" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    dests = {a.dest for a in sub._actions}
    out = {}
    for key, value in data.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest in ("config", "help") or dest not in dests:
            raise ConfigError(key, "unknown configuration key")
        out[dest] = Path(value) if dest == "out" else value
    return out


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        sub = _subparser(parser, args.command)
        sub.set_defaults(**load_config(args.config, sub))
        args = parser.parse_args(argv)
    return args


def resolved_config(args: argparse.Namespace) -> dict:
    skip = {"config", "verbose", "command", "out"}
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        cfg[key] = str(value) if isinstance(value, Path) else value
    return cfg


# ---------------------------------------------------------------------------
# helpers


def _model(args) -> ModelParams:
    return ModelParams(args.g_h, args.g_c, args.gamma_h, args.gamma_c, args.cutoff)


def _axis(extent, points, mean_n, name="points"):
    if points < 1:
        raise ConfigError(name, "must be >= 1")
    if points == 1:
        return np.array([0.0])
    if extent is None:
        return default_axis(mean_n, points)
    if not extent > 0:
        raise ConfigError("extent", "must be > 0")
    return np.linspace(-extent, extent, points)


def _steady(params: ModelParams, run: _Run):
    with run.stage("steady_state"):
        return steady_state(build_liouvillian(params))


# ---------------------------------------------------------------------------
# commands


def cmd_steady(args, run: _Run) -> int:
    params = _model(args)
    res = _steady(params, run)
    rho_ph = partial_trace_internal(res.rho_ss)
    dist = phonon_number_distribution(rho_ph)
    pops = np.real(np.diag(res.rho_ss.matrix)).reshape(SPIN_DIM, -1).sum(axis=1)
    moments = {
        "mean": dist.mean,
        "second_moment": dist.second_moment,
        "variance": dist.variance,
        "g2_zero": None,
        "poisson_fit": None,
    }
    if dist.mean > MEAN_FLOOR:
        z = g2_zero(rho_ph)
        moments["g2_zero"] = {"literal": z.literal, "normally_ordered": z.normally_ordered}
        fit = poisson_fit(dist)
        moments["poisson_fit"] = {"lambda": fit.lam, "tv_distance": fit.tv_distance}
    else:
        run.signals.append("mean phonon number below floor: g2 and Poisson fit undefined")
    run.table("pn", PN_HEADER, ((n, float(p)) for n, p in enumerate(dist.probs)))
    run.json("moments.json", moments)
    run.json("summary.json", {
        "params": params.to_dict(),
        "residual": res.residual,
        "leak": res.leak,
        "method": res.method,
        "unique": res.null_dim_check,
        "populations": {lvl.name: float(pops[lvl]) for lvl in LevelIndex},
    })
    return EXIT_OK


def cmd_evolve(args, run: _Run) -> int:
    params = _model(args)
    if not args.t_max > 0 or args.steps < 1:
        raise ConfigError("t_max/steps", "need t_max > 0 and steps >= 1")
    L = build_liouvillian(params)
    n = params.fock_cutoff
    rho0 = ground_vacuum(n) if args.initial == "ground-vacuum" else projector(LevelIndex.E1, 0, n)
    times = np.linspace(0.0, args.t_max / params.gamma_h, args.steps)
    e_ops = {"mean_n": embed_fock(number(n))}
    for lvl in LevelIndex:
        e_ops[f"pop_{lvl.name.lower()}"] = embed_spin(spin_transition(lvl, lvl), n)
    with run.stage("evolve"):
        traj = evolve(L, rho0, times, e_ops=e_ops, store_states=False)
    rows = zip(
        times * params.gamma_h, traj.expect["mean_n"], traj.expect["pop_g"],
        traj.expect["pop_e1"], traj.expect["pop_e2"], traj.trace_defects,
    )
    run.table("trajectory", TRAJECTORY_HEADER, rows)
    return EXIT_OK


def _grid_sidecar(kind, axes, extra):
    meta = {"kind": kind, "header": extra.pop("header")}
    for name, ax in axes.items():
        meta[name] = {"min": float(ax[0]), "max": float(ax[-1]), "points": len(ax)}
    meta.update(extra)
    return meta


def cmd_wigner(args, run: _Run) -> int:
    params = _model(args)
    res = _steady(params, run)
    rho_ph = partial_trace_internal(res.rho_ss)
    mean = phonon_number_distribution(rho_ph).mean
    axis = _axis(args.extent, args.points, mean)
    with run.stage("wigner"):
        grid = wigner(rho_ph, axis, axis)
    run.table("wigner", WIGNER_HEADER, wigner_rows(grid))
    if args.matrix:
        run.text("wigner_matrix.csv", matrix_csv(grid.values))
    r, prof = radial_profile(grid) if len(axis) > 2 else (np.zeros(0), np.zeros(0))
    run.json("wigner.json", _grid_sidecar("wigner", {"x_axis": axis, "p_axis": axis}, {
        "header": list(WIGNER_HEADER),
        "value_index": "[x, p]",
        "integral": grid.integral() if len(axis) > 1 else None,
        "ring": bool(has_ring(grid)) if len(axis) > 2 else None,
        "radial_profile": {"r": r, "w": prof},
        "mean_n": mean,
    }))
    return EXIT_OK


def cmd_charfunc(args, run: _Run) -> int:
    params = _model(args)
    res = _steady(params, run)
    rho_ph = partial_trace_internal(res.rho_ss)
    mean = phonon_number_distribution(rho_ph).mean
    axis = _axis(args.extent, args.points, mean)
    with run.stage("charfunc"):
        grid = characteristic_function(rho_ph, axis, axis)
    run.table("chi", CHI_HEADER, chi_rows(grid))
    if args.matrix:
        run.text("chi_re_matrix.csv", matrix_csv(grid.values.real))
        run.text("chi_im_matrix.csv", matrix_csv(grid.values.imag))
    flagged = int(np.count_nonzero(grid.accuracy_flag))
    if flagged:
        run.signals.append(f"{flagged} cells with |alpha|^2 >= cutoff")
    run.json("chi.json", _grid_sidecar("charfunc", {"re_alpha": axis, "im_alpha": axis}, {
        "header": list(CHI_HEADER),
        "flagged_cells": flagged,
        "mean_n": mean,
    }))
    return EXIT_OK


def cmd_g2(args, run: _Run) -> int:
    params = _model(args)
    if args.taus is not None:
        taus = np.asarray(args.taus, float)
    else:
        if not args.tau_max > 0 or args.tau_points < 2:
            raise ConfigError("tau_max/tau_points", "need tau_max > 0 and tau_points >= 2")
        taus = np.linspace(0.0, args.tau_max, args.tau_points)
    if np.any(taus < 0) or np.any(np.diff(taus) <= 0):
        raise ConfigError("taus", "must be non-negative and strictly ascending")
    L = build_liouvillian(params)
    with run.stage("steady_state"):
        res = steady_state(L)
    z = g2_zero(res.rho_ss)
    with run.stage("g2_tau"):
        g2 = g2_tau(res.rho_ss, L, taus)
    run.table("g2", G2_HEADER, zip(g2.taus, g2.g2))
    run.json("g2_zero.json", {
        "literal": z.literal,
        "normally_ordered": z.normally_ordered,
        "mean": z.mean,
        "tau_unit": "1/gamma_h",
    })
    return EXIT_OK


def _point_record(i_c, i_h, p: PhasePoint) -> dict:
    rec = asdict(p)
    rec["region"] = p.region.value if p.region else None
    return {"cell": [i_c, i_h], "point": rec}


def _point_from_record(rec) -> PhasePoint:
    data = dict(rec)
    data["region"] = Region(data["region"]) if data.get("region") else None
    if data.get("leak") is None:
        data["leak"] = float("nan")
    return PhasePoint(**data)


def _load_checkpoint(out: Path, digest: str) -> dict:
    ckpt = out / CHECKPOINT
    if not ckpt.exists():
        return {}
    header = ckpt.read_text(encoding="utf-8").splitlines()
    try:
        if not header or json.loads(header[0]).get("config_digest") != digest:
            return {}
    except (json.JSONDecodeError, AttributeError):
        return {}
    done = {}
    for line in header[1:]:
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            break  # torn final line from an interrupted run
        done[tuple(rec["cell"])] = _point_from_record(rec["point"])
    return done


def cmd_phase(args, run: _Run) -> int:
    for name in ("g_h_points", "g_c_points"):
        if getattr(args, name) < 3:
            raise ConfigError(name, "needs at least 3 points")
    config = SweepConfig.log_grid(
        (args.g_h_min, args.g_h_max), args.g_h_points,
        (args.g_c_min, args.g_c_max), args.g_c_points,
        fock_cutoff=args.cutoff, gamma_h=args.gamma_h, gamma_c=args.gamma_c,
        workers=max(1, args.threads),
    )
    # worker count and table format do not change the numbers
    digest = config_digest({k: v for k, v in run.config.items() if k not in ("threads", "format")})
    done = _load_checkpoint(run.out, digest)
    if done:
        log.info("resuming: %d of %d cells already solved", len(done), len(config.cells()))
    ckpt = run.out / CHECKPOINT
    run.out.mkdir(parents=True, exist_ok=True)
    # rewrite so that a torn final line never gets glued to new records
    lines = [json.dumps({"config_digest": digest})]
    lines += [json.dumps(_point_record(*cell, p), allow_nan=True) for cell, p in sorted(done.items())]
    atomic_write(ckpt, "\n".join(lines) + "\n")
    fh = open(ckpt, "a", encoding="utf-8", newline="\n")

    def record(cell, point):
        fh.write(json.dumps(_point_record(*cell, point), allow_nan=True) + "\n")
        fh.flush()

    try:
        with run.stage("sweep"):
            result = sweep(config, done=done, callback=record)
    finally:
        fh.close()
    rows = [
        (p.g_h, p.g_c, p.mean_n, p.g2_zero, p.g2_zero_literal, p.converged, p.leak,
         p.region.value, p.residual, p.error)
        for p in result.points
    ]
    run.table("points", POINTS_HEADER, rows)
    run.table("l1", L1_HEADER, result.l1.points)
    run.table("l2", L2_HEADER, result.l2.points)
    for g_c in result.no_threshold:
        run.signals.append(f"no-threshold-detected at g_c={g_c!r}")
    if not result.l2.points:
        run.signals.append("no-boundary: no converged/non-converged switch in any column")
    run.files.append(ckpt)
    if all(p.error is not None for p in result.points):
        return EXIT_ALL_FAILED
    return EXIT_OK


def cmd_tomography(args, run: _Run) -> int:
    params = _model(args)
    res = _steady(params, run)
    rho_ph = partial_trace_internal(res.rho_ss)
    mean = phonon_number_distribution(rho_ph).mean
    if args.alpha_extent is None:
        plan = TomographyPlan.for_mean(mean, args.points, shots=args.shots, seed=args.seed,
                                       symmetrize=args.symmetrize)
    else:
        a_axis = _axis(args.alpha_extent, args.points, mean, "alpha_extent")
        plan = TomographyPlan(a_axis, a_axis, shots=args.shots, seed=args.seed,
                              symmetrize=args.symmetrize)
    axis = _axis(args.extent, args.points, mean)
    with run.stage("tomography"):
        tomo = run_tomography(rho_ph, plan, axis, axis)
    run.table("chi_measured", CHI_HEADER, chi_rows(tomo.chi_measured))
    run.table("wigner_reconstructed", WIGNER_HEADER, wigner_rows(tomo.wigner_reconstructed))
    if args.matrix:
        run.text("wigner_reconstructed_matrix.csv", matrix_csv(tomo.wigner_reconstructed.values))
    run.json("tomography.json", {
        **tomo.shot_metadata,
        "alpha_axis": {"min": float(plan.alpha_re_axis[0]), "max": float(plan.alpha_re_axis[-1]),
                       "points": len(plan.alpha_re_axis)},
        "thetas": list(plan.thetas),
        "ring": bool(has_ring(tomo.wigner_reconstructed)) if len(axis) > 2 else None,
    })
    return EXIT_OK


COMMANDS = {
    "steady": cmd_steady,
    "evolve": cmd_evolve,
    "wigner": cmd_wigner,
    "charfunc": cmd_charfunc,
    "g2": cmd_g2,
    "phase": cmd_phase,
    "tomography": cmd_tomography,
}


def _exit_code(exc: Exception) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return EXIT_FAILURE


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"ionlaser: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    run = _Run(args.command, resolved_config(args), Path(args.out), args.format)
    try:
        code = COMMANDS[args.command](args, run)
    except ConfigError as exc:
        print(f"ionlaser: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IonLaserError as exc:
        print(f"ionlaser: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    run.finish()
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line driver.

    decwave simulate <config>               wave / heat runs with snapshots
    decwave solve <config>                  laplace / poisson solves
    decwave analyze <config> [--convergence]
    decwave mesh-info <mesh file>

Exit codes: 0 success, 1 config error, 2 mesh error, 3 numerical overflow,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis, io
from .config import SimulationConfig, parse_config
from .dec import assemble_laplacian, build_dual_metrics
from .errors import ConfigError, MeshError, SimulationOverflow, SolverError
from .mesh import load_mesh, validate
from .solvers import (
    auto_dt,
    cfl_bound,
    check_overflow,
    heat_dt_bound,
    heat_init,
    heat_step,
    solve_laplace,
    solve_poisson,
    wave_init,
    wave_step,
)

logger = logging.getLogger("decwave")

EXIT_OK, EXIT_CONFIG, EXIT_MESH, EXIT_OVERFLOW, EXIT_SOLVER = range(5)
DEFAULT_SEED = 42
PROGRESS_EVERY = 100


@dataclass
class RunSummary:
    model: str
    dt: float | None
    dt_bound: float | None
    steps: int
    final_time: float
    max_abs_u: float
    frames: list = field(default_factory=list)
    wall_time: float = 0.0
    status: str = "ok"
    overflow_step: int | None = None
    gauge_fixed: bool = False

    def to_dict(self):
        return {
            "model": self.model,
            "status": self.status,
            "dt": self.dt,
            "dt_bound": self.dt_bound,
            "steps": self.steps,
            "final_time": self.final_time,
            "max_abs_u": self.max_abs_u,
            "n_frames": len(self.frames),
            "overflow_step": self.overflow_step,
            "gauge_fixed": self.gauge_fixed,
            "wall_time_s": self.wall_time,
        }


class _Snapshots:
    def __init__(self, mesh, directory: Path, fmt: str):
        self.mesh = mesh
        self.directory = directory
        self.fmt = fmt
        self.frames = []
        directory.mkdir(parents=True, exist_ok=True)

    def write(self, step, t, u):
        name = io.frame_name(step, self.fmt)
        io.WRITERS[self.fmt](self.mesh, u, self.directory / name)
        self.frames.append((name, step, t))

    def finish(self, summary: RunSummary):
        summary.frames = list(self.frames)
        with open(self.directory / "manifest.csv", "w") as fh:
            fh.write("file,step,time\n")
            for name, step, t in self.frames:
                fh.write(f"{name},{step},{t!r}\n")
        (self.directory / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")


def run(config: SimulationConfig, seed: int = DEFAULT_SEED) -> RunSummary:
    """Execute one configured model, writing frames, manifest and summary.

    Raises SimulationOverflow after writing the partial manifest/summary if
    the field blows up.
    """
    start = time.perf_counter()
    mesh = config.mesh.build()
    op = assemble_laplacian(mesh, build_dual_metrics(mesh))
    snaps = _Snapshots(mesh, Path(config.output_dir), config.output_format)
    rng = np.random.default_rng(seed)

    if config.model in ("laplace", "poisson"):
        if config.model == "laplace":
            sol = solve_laplace(op, config.constraints)
        else:
            sol = solve_poisson(op, config.rhs_field(mesh.n_vertices), config.constraints)
        snaps.write(0, 0.0, sol.u)
        summary = RunSummary(config.model, None, None, 0, 0.0, float(np.max(np.abs(sol.u))),
                             gauge_fixed=sol.gauge_fixed)
        summary.wall_time = time.perf_counter() - start
        snaps.finish(summary)
        return summary

    u0 = config.initial.field(mesh, rng)
    source = config.source
    if config.model == "wave":
        bound = cfl_bound(op, config.c).dt_max
    else:
        bound = heat_dt_bound(op, config.c)
    dt = auto_dt(bound) if config.dt == "auto" else float(config.dt)
    logger.info("%s run: %d vertices, dt = %.6g (bound %.6g), %d steps",
                config.model, mesh.n_vertices, dt, bound, config.steps)

    summary = RunSummary(config.model, dt, bound, config.steps, 0.0, 0.0)
    source.apply(u0, 0.0)
    if config.model == "heat":
        config.constraints.check(mesh.n_vertices)
        config.constraints.apply(u0)
    summary.max_abs_u = float(np.max(np.abs(u0)))
    snaps.write(0, 0.0, u0)

    def record(step, t, u):
        summary.final_time = t
        summary.max_abs_u = max(summary.max_abs_u, float(np.max(np.abs(u))))
        if step % config.snapshot_every == 0:
            snaps.write(step, t, u)
        if step % PROGRESS_EVERY == 0:
            logger.info("step %d / %d, t = %.6g, max|u| = %.4g", step, config.steps, t, np.max(np.abs(u)))

    try:
        if config.model == "wave":
            state = wave_init(op, u0, np.zeros_like(u0), dt, config.c)
            source.apply(state.u_curr, dt)
            check_overflow(state.u_curr, state.time_index)
            record(1, state.time, state.u_curr)
            for _ in range(config.steps - 1):
                state = wave_step(state, op, source)
                record(state.time_index, state.time, state.u_curr)
        else:
            state = heat_init(op, u0, dt, config.c)
            for _ in range(config.steps):
                state = heat_step(state, op, source, config.constraints)
                record(state.time_index, state.time, state.u_curr)
    except SimulationOverflow as exc:
        summary.status = "overflow"
        summary.overflow_step = exc.time_index
        summary.wall_time = time.perf_counter() - start
        snaps.finish(summary)
        raise
    summary.wall_time = time.perf_counter() - start
    snaps.finish(summary)
    return summary


def cmd_analyze(config: SimulationConfig, *, seed: int = DEFAULT_SEED, convergence: bool = False,
                problem: str | None = None, levels: int = 3, out=None) -> dict:
    """Print the stability report (and optionally a convergence table)."""
    out = out or sys.stdout
    mesh = config.mesh.build()
    op = assemble_laplacian(mesh, build_dual_metrics(mesh))
    bound = cfl_bound(op, config.c)
    spectrum = analysis.estimate_lambda_max(op, seed=seed)
    audit = analysis.audit_cfl(op, config.c, spectrum=spectrum)
    report = {
        "dt_max": bound.dt_max,
        "argmin_vertex": bound.argmin_vertex,
        "lambda_max": spectrum.lambda_max,
        "gershgorin_bound": spectrum.gershgorin_bound,
        "spectral_dt": audit.exact_bound,
        "audit_ratio": audit.ratio,
        "heat_dt_bound": heat_dt_bound(op, config.c),
    }
    print(f"cfl dt_max            {bound.dt_max:.6f}  (vertex {bound.argmin_vertex})", file=out)
    print(f"lambda_max            {spectrum.lambda_max:.6f}", file=out)
    print(f"gershgorin_bound      {spectrum.gershgorin_bound:.6f}", file=out)
    print(f"spectral dt limit     {audit.exact_bound:.6f}", file=out)
    print(f"audit ratio           {audit.ratio:.6f}  ({'conservative' if audit.is_conservative else 'NOT conservative'})", file=out)
    print(f"heat dt bound         {report['heat_dt_bound']:.6f}", file=out)
    if config.mesh.generator == "icosphere":
        radius = config.mesh.params["radius"]
        rq = analysis.rayleigh_quotient(op, mesh.vertices[:, 2] / radius)
        report["rayleigh_z"] = rq
        report["rayleigh_z_expected"] = 2.0 / radius**2
        print(f"rayleigh(z/R)         {rq:.6f}  (continuum 2/R^2 = {2.0 / radius**2:.6f})", file=out)

    if convergence:
        if problem is None:
            problem = "sphere_harmonic_wave" if config.mesh.generator == "icosphere" else "flat_standing_wave"
        rows = analysis.convergence_study(problem, levels, c=config.c)
        config.output_dir.mkdir(parents=True, exist_ok=True)
        csv_path = Path(config.output_dir) / "convergence.csv"
        analysis.write_convergence_csv(rows, csv_path)
        print(f"\nconvergence study: {problem}", file=out)
        print(f"{'level':>5} {'h':>12} {'dt':>12} {'error_max':>12} {'order':>7}", file=out)
        for r in rows:
            order = "" if r.observed_order is None else f"{r.observed_order:.3f}"
            print(f"{r.level:>5} {r.h:>12.5g} {r.dt:>12.5g} {r.error_max:>12.4e} {order:>7}", file=out)
        print(f"written {csv_path}", file=out)
        report["convergence"] = rows
    return report


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 42)")
    common.add_argument("--output-dir", type=Path, default=argparse.SUPPRESS, help="override the config output directory")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only log warnings and errors")

    parser = argparse.ArgumentParser(prog="decwave", parents=[common],
                                     description="DEC wave/heat/Laplace/Poisson solvers on triangle meshes")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [("simulate", "run a wave or heat model"),
                            ("solve", "solve a laplace or poisson problem"),
                            ("analyze", "stability and convergence report")]:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("config_path", nargs="?", type=Path, metavar="config")
        p.add_argument("--config", type=Path, dest="config_flag")
        if name == "analyze":
            p.add_argument("--convergence", action="store_true", help="also run a refinement study")
            p.add_argument("--problem", choices=analysis.PROBLEMS)
            p.add_argument("--levels", type=int, default=3)
    p = sub.add_parser("mesh-info", parents=[common], help="print mesh quality report")
    p.add_argument("path", type=Path)
    p.add_argument("--format", choices=["OFF", "OBJ", "off", "obj"])
    return parser


def _load(args):
    path = args.config_flag or args.config_path
    if path is None:
        raise ConfigError("no config file given (positional or --config)")
    config = parse_config(path)
    if getattr(args, "output_dir", None) is not None:
        config = replace(config, output_dir=args.output_dir)
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    quiet = getattr(args, "quiet", False)
    seed = getattr(args, "seed", DEFAULT_SEED)
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO, format="%(levelname)s: %(message)s")
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            if args.command == "mesh-info":
                mesh = load_mesh(args.path, args.format)
                print(validate(mesh).format())
                return EXIT_OK
            config = _load(args)
            if args.command == "analyze":
                cmd_analyze(config, seed=seed, convergence=args.convergence,
                            problem=args.problem, levels=args.levels)
                return EXIT_OK
            expected = ("wave", "heat") if args.command == "simulate" else ("laplace", "poisson")
            if config.model not in expected:
                raise ConfigError(f"'{args.command}' handles models {' and '.join(expected)}, config has {config.model!r}")
            summary = run(config, seed=seed)
            if not quiet:
                print(json.dumps(summary.to_dict(), indent=2))
            return EXIT_OK
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except MeshError as exc:
        logger.error("mesh error: %s", exc)
        return EXIT_MESH
    except SimulationOverflow as exc:
        logger.error("numerical overflow at step %d: %s", exc.time_index, exc)
        return EXIT_OVERFLOW
    except SolverError as exc:
        logger.error("solver error: %s", exc)
        return EXIT_SOLVER
    except ValueError as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

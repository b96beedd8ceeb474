"""Command-line interface: ``sloshdyn {simulate,linearize,bode,modes,check}``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
3 failed checks.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import checks
from .config import ConfigError, ScenarioConfig, parse_scenario
from .dynamics import SingularityError, SingularSystemError
from .freq import (
    FdAccuracyError,
    FreqGrid,
    ResonanceError,
    bode_sweep,
    eigenmodes,
    fd_linearize,
    write_bode_csv,
    write_eigen_csv,
)
from .linmodel import RIGID_LABELS, LinearModel, build_modal, build_physical_single
from .propagate import PropagationError, Trajectory, propagate

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(x) -> str:
    # adding 0.0 turns -0.0 into 0.0 so structural zeros print uniformly
    return format(float(x) + 0.0, ".17g")


# --- file writers --------------------------------------------------------


def trajectory_header(n: int) -> list[str]:
    cols = ["t", "rx", "ry", "rz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz"]
    for i in range(1, n + 1):
        cols += [f"theta_{i}", f"phi_{i}", f"thetadot_{i}", f"phidot_{i}", f"N_{i}"]
    return cols + ["E", "px", "py", "pz", "Lx", "Ly", "Lz"]


def write_trajectory_csv(path, traj: Trajectory) -> None:
    n = traj.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(n))
        for k, t in enumerate(traj.t):
            x = traj.states[k]
            row = [t, *x[:13]]
            for i in range(n):
                row += [*x[13 + 2 * i : 15 + 2 * i], *x[13 + 2 * n + 2 * i : 15 + 2 * n + 2 * i], traj.tensions[k, i]]
            row += [traj.energy[k], *traj.momentum[k], *traj.angular_momentum[k]]
            w.writerow([_fmt(v) for v in row])


def write_matrix_blocks(path, model: LinearModel) -> None:
    """Blocks ``[M]``, ``[D]``, ``[K]``, ``[L_i]``: a column-label row, then labeled rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["coordinates", *model.labels])
        blocks = [("M", model.M, model.labels), ("D", model.D, model.labels), ("K", model.K, model.labels)]
        for i, L in enumerate(model.L, start=1):
            rows = model.labels[6 + 2 * (i - 1) : 8 + 2 * (i - 1)]
            blocks.append((f"L_{i}", L, rows))
        for name, A, rows in blocks:
            cols = model.labels if A.shape[1] == model.size else RIGID_LABELS
            w.writerow([])
            w.writerow([f"[{name}]"])
            w.writerow(["", *cols])
            for label, r in zip(rows, A):
                w.writerow([label, *(_fmt(v) for v in r)])


def read_matrix_blocks(path) -> dict[str, np.ndarray]:
    """Inverse of :func:`write_matrix_blocks` (labels dropped)."""
    out: dict[str, list] = {}
    current = None
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "coordinates":
                continue
            if row[0].startswith("[") and row[0].endswith("]"):
                current = row[0][1:-1]
                out[current] = []
            elif row[0] and current is not None:
                out[current].append([float(v) for v in row[1:]])
    return {k: np.array(v) for k, v in out.items()}


# --- commands ------------------------------------------------------------


def _linear_model(cfg: ScenarioConfig, args, source: str = "analytic") -> LinearModel:
    nominal = cfg.nominal_config(getattr(args, "fz", None), getattr(args, "frame", None))
    system = cfg.system()
    if source == "fd":
        return fd_linearize(system, nominal, cfg.gravity)
    if getattr(args, "form", "modal") == "physical":
        return build_physical_single(system, nominal)
    return build_modal(system, nominal)[0]


def cmd_simulate(cfg: ScenarioConfig, args) -> int:
    write_trajectory_csv(args.output, propagate(cfg.scenario()))
    return EXIT_OK


def cmd_linearize(cfg: ScenarioConfig, args) -> int:
    write_matrix_blocks(args.output, _linear_model(cfg, args))
    return EXIT_OK


def cmd_bode(cfg: ScenarioConfig, args) -> int:
    grid = FreqGrid(args.wmin, args.wmax, args.points)
    model = _linear_model(cfg, args, args.source)
    write_bode_csv(args.output, bode_sweep(model, grid))
    return EXIT_OK


def cmd_modes(cfg: ScenarioConfig, args) -> int:
    write_eigen_csv(args.output, eigenmodes(_linear_model(cfg, args)))
    return EXIT_OK


def cmd_check(cfg: ScenarioConfig, args) -> int:
    nominal = cfg.nominal_config() if cfg.nominal is not None else None
    results = checks.run_suite(cfg.system(), cfg.initial(), cfg.gravity, cfg.settings(), nominal,
                               residual_count=args.residual_states)
    print("check,status,value,tolerance")
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}") from None
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sloshdyn", description="Rigid body with pendulum slosh models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="propagate the nonlinear model and write a trajectory CSV")
    p.add_argument("config", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("linearize", help="write the analytic linear model as labeled matrix blocks")
    p.add_argument("config", type=Path)
    p.add_argument("--frame", choices=("inertial", "body"))
    p.add_argument("--fz", type=float, help="nominal force [N]; overrides the scenario")
    p.add_argument("--form", choices=("modal", "physical"), default="modal")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("bode", help="Bode magnitude of the rigid-body channels")
    p.add_argument("config", type=Path)
    p.add_argument("--wmin", type=_positive_float, required=True)
    p.add_argument("--wmax", type=_positive_float, required=True)
    p.add_argument("--points", type=_positive_int, required=True)
    p.add_argument("--source", choices=("analytic", "fd"), default="analytic")
    p.add_argument("--frame", choices=("inertial", "body"))
    p.add_argument("--fz", type=float)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_bode)

    p = sub.add_parser("modes", help="eigenvalues of the modal model")
    p.add_argument("config", type=Path)
    p.add_argument("--frame", choices=("inertial", "body"))
    p.add_argument("--fz", type=float)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("check", help="run the self-consistency checks on a scenario")
    p.add_argument("config", type=Path)
    p.add_argument("--residual-states", type=_positive_int, default=200)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        cfg = parse_scenario(args.config)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularityError, PropagationError, SingularSystemError, ResonanceError,
            FdAccuracyError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

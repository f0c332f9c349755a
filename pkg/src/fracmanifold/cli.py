"""Command-line front end.

Exit status is 0 on success, 2 for invalid input and 3 when a numerical
procedure fails (no convergence, non-hyperbolic matrix, ...).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from fracmanifold.errors import FracManifoldError, NumericalError, ValidationError
from fracmanifold.io import (
    as_real,
    dump_json,
    encode_complex,
    load_system,
    read_points,
    write_csv,
)

logger = logging.getLogger("fracmanifold")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


@dataclass(frozen=True)
class RunConfig:
    """Parsed command line of one run."""

    subcommand: str
    system_path: str | None = None
    output_path: str | None = None
    seed: int = 0
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("tol_hyp", "shrink", "T", "T_horizon", "radius_override"):
            value = self.options.get(name)
            if value is not None and not value > 0:
                raise ValidationError(f"--{name.replace('_', '-')} must be positive: got {value}")
        for name in ("N", "samples"):
            value = self.options.get(name)
            if value is not None and value < 1:
                raise ValidationError(f"--{name} must be at least 1: got {value}")


# {{{ helpers


def _parse_vector(text: str, name: str) -> np.ndarray:
    try:
        values = [complex(v.strip().replace(" ", "")) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"--{name}: cannot parse {text!r} as comma-separated numbers") from None
    arr = np.array(values)
    return arr.real if np.all(arr.imag == 0) else arr


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)


# }}}


# {{{ subcommands


def _run_ml(cfg: RunConfig) -> None:
    from fracmanifold.mittag_leffler import MLParams, ml_asymptotic, ml_eval, ml_series

    o = cfg.options
    params = MLParams(o["alpha"], o["beta"])
    z = complex(o["re"], o["im"])
    method = o["method"]
    if method == "series":
        result = ml_series(params, z)
    elif method == "asymptotic":
        result = ml_asymptotic(params, z)
    else:
        result = ml_eval(params, z)

    doc = {
        "alpha": params.alpha,
        "beta": params.beta,
        "z": encode_complex(z),
        "value": encode_complex(result.value),
        "method": result.method.value,
        "abs_error_estimate": result.abs_error_estimate,
    }
    _emit(dump_json(doc, cfg.output_path, schema="ml"), cfg.output_path)


def _run_spectrum(cfg: RunConfig) -> None:
    from fracmanifold.spectral import check_hyperbolicity, jordanize

    system = load_system(cfg.system_path)
    tol = cfg.options.get("tol_hyp") or 1.0e-6
    report = check_hyperbolicity(system.A, system.alpha, tol)
    split = jordanize(system.A, system.alpha, 1.0, jordan_blocks=system.jordan_blocks, tol_hyp=tol)

    doc = {
        "alpha": system.alpha,
        "eigenvalues": [encode_complex(v) for v in split.eigenvalues],
        "classification": [
            "unstable" if abs(np.angle(v)) < 0.5 * system.alpha * math.pi else "stable"
            for v in split.eigenvalues
        ],
        "k": split.k,
        "d_u": split.d_u,
        "d_s": split.d_s,
        "margin": report.margin,
        "T": [[encode_complex(v) for v in row] for row in split.T],
        "P": [[encode_complex(v) for v in row] for row in split.P],
        "reconstruction_error": split.reconstruction_error,
    }
    _emit(dump_json(doc, cfg.output_path, schema="spectrum"), cfg.output_path)


def _run_manifold(cfg: RunConfig) -> None:
    from fracmanifold.lp_operator import DEFAULT_N, manifold_graph, prepare
    from fracmanifold.spectral import jordanize, transform_system

    o = cfg.options
    system = load_system(cfg.system_path)
    split = jordanize(system.A, system.alpha, 1.0, jordan_blocks=system.jordan_blocks)
    tsys = transform_system(system, split)
    if tsys.d_s == 0:
        raise ValidationError("system has no stable directions: the stable manifold is the origin")

    op, ratio = prepare(
        tsys, n=o.get("N") or DEFAULT_N, t_horizon=o.get("T_horizon"), seed=cfg.seed
    )
    assert op.system is not None
    samples: Any = o.get("samples") or 21
    if o.get("radius_override") is not None:
        radius = o["radius_override"]
        if radius > op.r:
            raise ValidationError(
                f"--radius-override {radius:g} exceeds the admissible radius r = {op.r:.6g}"
            )
        if op.system.d_s == 1:
            samples = np.linspace(-radius, radius, samples | 1)[:, None]
        else:
            rng = np.random.default_rng(cfg.seed)
            samples = rng.uniform(-radius, radius, (samples, op.system.d_s))

    graph = manifold_graph(op.system, op, samples, seed=cfg.seed)
    x = graph.points @ op.system.splitting.TP.T

    if cfg.output_path is not None:
        write_csv(cfg.output_path, [
            ("xs", graph.x_s),
            ("w", graph.w),
            ("x", x),
            ("iterations", graph.iterations.astype(np.int64)),
            ("residual", graph.residuals),
        ])
    logger.info("computed %d manifold samples", len(graph.x_s))

    if "diagnostics" in o and o["diagnostics"] is not None:
        residuals = graph.residuals[np.isfinite(graph.residuals)]
        doc = {
            "C_est": op.C_est,
            "delta": op.delta,
            "r_star": op.r_star,
            "r": op.r,
            "ml_sup": op.ml_sup,
            "measured_contraction": None if math.isnan(ratio) else ratio,
            "iter_tol": op.iter_tol,
            "N": op.N,
            "T_horizon": op.T_horizon,
            "samples": len(graph.x_s),
            "max_residual": float(residuals.max()) if residuals.size else None,
            "lipschitz_violations": graph.lipschitz_violations(),
        }
        path = None if o["diagnostics"] == "-" else o["diagnostics"]
        _emit(dump_json(doc, path, schema="diagnostics"), path)


def _run_solve(cfg: RunConfig) -> None:
    from fracmanifold.fde_solver import solve_caputo

    o = cfg.options
    system = load_system(cfg.system_path)
    x0 = _parse_vector(o["x0"], "x0")
    if x0.shape != (system.d,):
        raise ValidationError(f"--x0: expected {system.d} components, got {x0.size}")

    traj = solve_caputo(system, x0, o["T"], o["N"])
    if cfg.output_path is not None:
        write_csv(cfg.output_path, [("t", traj.times), ("x", traj.states)])
    else:
        names = ",".join(f"x_{i + 1}" for i in range(system.d))
        sys.stdout.write(f"t,{names}\n")
        states = as_real(traj.states)
        for t, row in zip(traj.times, states):
            sys.stdout.write(",".join([repr(float(t))] + [str(v) for v in row]) + "\n")


def _run_verify(cfg: RunConfig) -> None:
    from fracmanifold.fde_solver import decay_time, verify_manifold_point

    o = cfg.options
    system = load_system(cfg.system_path)
    points = read_points(o["points"], system.d)
    T = o.get("T")
    if T is None:
        T = decay_time(system.alpha, np.linalg.eigvals(system.A))
        logger.info("using T = %.6g", T)

    out = []
    for i, x in enumerate(points):
        v = verify_manifold_point(system, x, T, o["shrink"], N=o["N"])
        out.append({
            "index": i,
            "x": [float(c) for c in np.asarray(as_real(x)).real],
            "verdict": v.verdict.value,
            "ratio": None if math.isinf(v.ratio) else v.ratio,
            "max_norm": v.max_norm,
            "escape_time": v.escape_time,
        })
    doc = {"T": float(T), "shrink": o["shrink"], "N": o["N"], "points": out}
    _emit(dump_json(doc, cfg.output_path, schema="verify"), cfg.output_path)


def _run_counterexample(cfg: RunConfig) -> None:
    from fracmanifold.counterexample import counterexample_report

    report = counterexample_report(cfg.options["alpha"], sigma1=cfg.options["sigma1"])
    _emit(dump_json(report, cfg.output_path, schema="counterexample"), cfg.output_path)


_COMMANDS = {
    "ml": _run_ml,
    "spectrum": _run_spectrum,
    "manifold": _run_manifold,
    "solve": _run_solve,
    "verify": _run_verify,
    "counterexample": _run_counterexample,
}


def run(cfg: RunConfig) -> int:
    """Dispatch ``cfg`` and translate errors into exit codes."""
    try:
        _COMMANDS[cfg.subcommand](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FracManifoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# }}}


# {{{ argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracmanifold",
        description="Stable manifolds of Caputo fractional systems.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    ml = sub.add_parser("ml", help="Mittag-Leffler function")
    ml_sub = ml.add_subparsers(dest="ml_command", required=True)
    ev = ml_sub.add_parser("eval", help="evaluate E_{alpha,beta}(z)")
    ev.add_argument("--alpha", type=float, required=True)
    ev.add_argument("--beta", type=float, default=1.0)
    ev.add_argument("--re", type=float, required=True)
    ev.add_argument("--im", type=float, default=0.0)
    ev.add_argument("--method", choices=("auto", "series", "asymptotic"), default="auto")
    ev.add_argument("--out", help="write JSON here instead of stdout")

    sp = sub.add_parser("spectrum", help="eigenvalues and hyperbolic splitting")
    sp.add_argument("--system", required=True, help="system JSON file")
    sp.add_argument("--tol-hyp", type=float, default=None)
    sp.add_argument("--out", help="write JSON here instead of stdout")

    mf = sub.add_parser("manifold", help="sample the local stable manifold")
    mf.add_argument("--system", required=True, help="system JSON file")
    mf.add_argument("--samples", type=int, default=21)
    mf.add_argument("--radius-override", type=float, default=None,
                    help="sample |x_s| <= this radius (at most the computed r)")
    mf.add_argument("--N", type=int, default=None, help="graded grid intervals")
    mf.add_argument("--T-horizon", type=float, default=None)
    mf.add_argument("--seed", type=int, default=0)
    mf.add_argument("--out", help="CSV file for the sampled graph")
    mf.add_argument("--diagnostics", nargs="?", const="-", default=None, metavar="PATH",
                    help="emit operator diagnostics as JSON (stdout without PATH)")

    so = sub.add_parser("solve", help="integrate the system from x0")
    so.add_argument("--system", required=True, help="system JSON file")
    so.add_argument("--x0", required=True, help="comma-separated initial state")
    so.add_argument("--T", type=float, required=True)
    so.add_argument("--N", type=int, default=2048)
    so.add_argument("--out", help="CSV file for the trajectory (stdout otherwise)")

    ve = sub.add_parser("verify", help="classify points by direct integration")
    ve.add_argument("--system", required=True, help="system JSON file")
    ve.add_argument("--points", required=True, help="CSV of points (e.g. from 'manifold')")
    ve.add_argument("--T", type=float, default=None,
                    help="final time (default: stable modes below 0.05)")
    ve.add_argument("--shrink", type=float, default=0.1)
    ve.add_argument("--N", type=int, default=2048)
    ve.add_argument("--out", help="write JSON here instead of stdout")

    ce = sub.add_parser("counterexample", help="divergence and identity-gap report")
    ce.add_argument("--alpha", type=float, required=True)
    ce.add_argument("--sigma1", type=float, default=0.1)
    ce.add_argument("--report", help="write JSON here instead of stdout")

    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    opts = {
        k: v for k, v in vars(args).items()
        if k not in ("subcommand", "system", "out", "report", "seed", "verbose", "ml_command")
    }
    return RunConfig(
        subcommand=args.subcommand,
        system_path=getattr(args, "system", None),
        output_path=getattr(args, "out", None) or getattr(args, "report", None),
        seed=getattr(args, "seed", 0),
        options=opts,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = _config(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


# }}}


if __name__ == "__main__":
    sys.exit(main())

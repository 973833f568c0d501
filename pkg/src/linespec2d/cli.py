"""Command line entry point: ``linespec2d {generate,solve,sweep,dualpoly}``.

Exit codes: 0 on completion, 2 on a configuration error, 3 when more than
half of the solver runs ended in numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import sdp
from .certificate import CertificateError, build_unweighted, build_weighted, extract_certificate
from .experiments import (DEFAULT_SOLVER_TOL, ConfigError, ExperimentConfig, draw_samples,
                          draw_signal, fig2_config, fig3_config, load_priors, run_dualpoly,
                          run_sweep)
from .recovery import DEFAULT_EPS, DEFAULT_RADIUS, DEFAULT_RESOLUTION, recover, score
from .signal_model import SpectralSignal, synthesize

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _m_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad m list {text!r}") from exc


def _config(args, preset) -> ExperimentConfig:
    over = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = ExperimentConfig.from_json(base)
        over = {k: v for k, v in vars(cfg).items()}
    for key in ("n", "s", "trials", "seed", "m_list", "resolution", "workers", "solver_tol"):
        value = getattr(args, key, None)
        if value is not None:
            over[key] = value
    if getattr(args, "prior_file", None):
        over["priors"] = load_priors(args.prior_file)
    if "s" in over and "split" not in over and not args.config:
        # the preset split only fits the preset component count
        over["split"] = None
    try:
        return preset(**over)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--prior-file", help="JSON prior list, or 'none' for no prior")
    p.add_argument("--resolution", type=int)
    p.add_argument("--solver-tol", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linespec2d",
                                     description="2-D line spectral estimation with subband priors")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw one random signal and print it as JSON")
    _common(g)
    g.add_argument("--trial", type=int, default=0)
    g.add_argument("--fig3", action="store_true", help="use the single-band surface regions")

    s = sub.add_parser("solve", help="recover one signal and print the estimated components")
    s.add_argument("signal", help="signal JSON file ('-' for stdin)")
    s.add_argument("--m", type=int, help="number of observed samples (default: all)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trial", type=int, default=0)
    s.add_argument("--prior-file", help="JSON prior list; omitted or 'none' solves without prior")
    s.add_argument("--covering", action="store_true")
    s.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    s.add_argument("--eps", type=float, default=DEFAULT_EPS)
    s.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    s.add_argument("--solver-tol", type=float, default=DEFAULT_SOLVER_TOL)

    w = sub.add_parser("sweep", help="success rate versus sample count")
    _common(w)
    w.add_argument("--trials", type=int)
    w.add_argument("--m-list", type=_m_list)
    w.add_argument("--workers", type=int)
    w.add_argument("--out", default="sweep-out")

    d = sub.add_parser("dualpoly", help="dual polynomial surfaces for one drawn signal")
    _common(d)
    d.add_argument("--trial", type=int, default=0)
    d.add_argument("--out", default="dualpoly-out")
    return parser


def _cmd_generate(args) -> int:
    cfg = _config(args, fig3_config if args.fig3 else fig2_config)
    print(draw_signal(cfg, args.trial).dumps())
    return EXIT_OK


def _cmd_solve(args) -> int:
    try:
        text = sys.stdin.read() if args.signal == "-" else Path(args.signal).read_text()
        signal = SpectralSignal.from_json(json.loads(text))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read signal: {exc}") from exc
    n = signal.n
    m = n * n if args.m is None else args.m
    priors = load_priors(args.prior_file) if args.prior_file else ()
    cfg = ExperimentConfig(n=n, s=signal.r, seed=args.seed, m_list=(m,), split=None,
                           priors=priors, resolution=args.resolution, radius=args.radius,
                           eps=args.eps, solver_tol=args.solver_tol)
    samples = draw_samples(cfg, args.trial, m)
    x = synthesize(signal)
    program = (build_weighted(x, samples, priors, args.covering) if priors
               else build_unweighted(x, samples))
    sol = sdp.solve(program.problem, args.solver_tol)
    out = {"method": "weighted" if priors else "unweighted", "status": sol.status.value,
           "iterations": sol.iterations, "m": m}
    code = EXIT_OK
    try:
        cert = extract_certificate(program, sol)
        est = recover(cert, x, samples, program.families if priors else None,
                      args.resolution, args.eps)
    except (CertificateError, ValueError) as exc:
        out["error"] = str(exc)
        code = EXIT_SOLVER if sol.status is sdp.Status.NUMERICAL_FAILURE else EXIT_OK
    else:
        out["objective"] = cert.objective
        out["components"] = est.to_json()["components"] if est is not None else []
        out["success"] = score(signal, est, args.radius).success
    print(json.dumps(out, indent=2))
    return code


def _cmd_sweep(args) -> int:
    cfg = _config(args, fig2_config)
    report = run_sweep(cfg, args.out)
    for r in report.rows:
        print(f"m={r.m:3d} {r.method:10s} {r.successes:4d}/{r.trials:<4d} "
              f"rate={r.rate:.3f} [{r.ci_lo:.3f}, {r.ci_hi:.3f}]")
    return EXIT_SOLVER if report.systematic_failure else EXIT_OK


def _cmd_dualpoly(args) -> int:
    cfg = _config(args, fig3_config)
    results = run_dualpoly(cfg, args.trial, args.out)
    for method, res in results.items():
        peaks = ", ".join(f"({p.f1:.4f}, {p.f2:.4f})" for p in res.peaks)
        print(f"{method:10s} status={res.status} success={res.success} peaks: {peaks}")
    bad = sum(r.status == sdp.Status.NUMERICAL_FAILURE.value for r in results.values())
    return EXIT_SOLVER if bad * 2 > len(results) else EXIT_OK


COMMANDS = {"generate": _cmd_generate, "solve": _cmd_solve,
            "sweep": _cmd_sweep, "dualpoly": _cmd_dualpoly}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

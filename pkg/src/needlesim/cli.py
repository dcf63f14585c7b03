"""Command line interface: batch experiment runner and session server."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .feedback import Modality
from .harness import EXPERIMENTS, run_experiment, write_outputs
from .params import SimParams, load_params


def _load(config: str | None) -> SimParams:
    if config:
        return load_params(config)
    return SimParams().validate()


def _cmd_run(args: argparse.Namespace) -> int:
    params = _load(args.config)
    modalities = None
    if args.modality:
        modalities = [Modality(m) for m in args.modality]
    report = run_experiment(
        args.experiment,
        params,
        seed=args.seed,
        repetitions=args.reps,
        feedback_delay_ms=args.delay_ms,
        modalities=modalities,
        workers=args.workers,
    )
    paths = write_outputs(report, args.out)
    agg = report.aggregates()
    for modality, stats in agg["modalities"].items():
        mean = stats["avg_penetration"]["mean"]
        mean_mm = "n/a" if mean is None else f"{mean * 1000:.2f} mm"
        print(
            f"{modality:4s} n={stats['n']} completed={stats['n_completed']}"
            f" avg_penetration={mean_mm} timeouts={stats['timeouts']}"
        )
    print(f"wrote {paths['trials']}, {paths['aggregates']}, {paths['trajectories']}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    params = _load(args.config)
    frontend = Path(args.frontend) if args.frontend else Path(__file__).resolve().parents[2] / "frontend"
    app = create_app(params, out_dir=args.out, frontend_dir=frontend if frontend.exists() else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="needlesim")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a batch experiment with the simulated operator")
    run.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    run.add_argument("--modality", action="append", choices=[m.value for m in Modality],
                     help="restrict to one or more modalities (default: all four)")
    run.add_argument("--reps", type=int, default=None, help="repetitions per modality")
    run.add_argument("--seed", type=int, default=None, help="master seed")
    run.add_argument("--delay-ms", type=float, default=None, help="feedback path delay override")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--config", default=None, help="flat JSON config file")
    run.add_argument("--workers", type=int, default=1, help="parallel trial processes")
    run.set_defaults(func=_cmd_run)

    serve = sub.add_parser("serve", help="serve the interactive teleoperation session")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--config", default=None, help="flat JSON config file")
    serve.add_argument("--out", default="sessions", help="per-trial CSV dump directory")
    serve.add_argument("--frontend", default=None, help="frontend directory to serve")
    serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

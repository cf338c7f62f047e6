"""Command-line entry point.

    quadswarm run <config> [--seed N] [--out-dir D] [--duration S] [--workers N]
    quadswarm validate <config>
    quadswarm plot <csv> [--out-dir D]

Exit codes: 0 success, 1 config parse/validation failure, 2 numeric
divergence during a run, 3 I/O failure. Every failure writes exactly one
diagnostic line to stderr. ``QUADSWARM_OUT_DIR`` overrides the default
output directory (``--out-dir`` still wins).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .config import ScenarioConfig, format_config, load_config, parse_config
from .engine import run_scenario
from .errors import ConfigError, EmptyLogError, NumericDivergence
from .output import CSV_NAME, META_NAME, emit_plots, plot_from_csv, write_csv, write_metadata

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3
OUT_DIR_ENV = "QUADSWARM_OUT_DIR"


def _fail(kind: str, message: str, code: int) -> int:
    print(f"error[{kind}]: {message}", file=sys.stderr)
    return code


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_DIR_ENV) or "out")


def apply_overrides(cfg: ScenarioConfig, seed: int | None = None,
                    duration: float | None = None) -> ScenarioConfig:
    """Command-line overrides, re-validated through the canonical text form."""
    if seed is not None:
        cfg = dataclasses.replace(cfg, robot=dataclasses.replace(cfg.robot, seed=seed))
    if duration is not None:
        cfg = dataclasses.replace(cfg, timing=dataclasses.replace(cfg.timing, duration=duration))
    return parse_config(format_config(cfg))


def _cmd_validate(args) -> int:
    load_config(args.config)
    return EXIT_OK


def _write_outputs(log, cfg: ScenarioConfig, out_dir: Path) -> None:
    out = cfg.output
    out_dir.mkdir(parents=True, exist_ok=True)
    if out.save_data:
        write_csv(log, out_dir / CSV_NAME)
        write_metadata(log, out_dir / META_NAME)
    if (out.save_plot or out.show_plot) and (out.position_plot or out.velocity_plot):
        emit_plots(log, out_dir, position=out.position_plot, velocity=out.velocity_plot)


def _cmd_run(args) -> int:
    cfg = apply_overrides(load_config(args.config), args.seed, args.duration)
    out_dir = _out_dir(args.out_dir)
    try:
        log = run_scenario(cfg, workers=args.workers)
    except NumericDivergence as exc:
        partial = getattr(exc, "log", None)
        if partial is not None and cfg.output.save_data:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_csv(partial, out_dir / CSV_NAME)
            write_metadata(partial, out_dir / META_NAME)
        return _fail("divergence", f"agent={exc.agent + 1} tick={exc.tick}: {exc}", EXIT_DIVERGED)
    _write_outputs(log, cfg, out_dir)
    return EXIT_OK


def _cmd_plot(args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.csv).parent
    plot_from_csv(args.csv, out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadswarm", description="Multi-agent quadrotor scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write CSV/plots")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override robot.seed")
    run.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_DIR_ENV} or ./out)")
    run.add_argument("--duration", type=float, default=None, help="override timing.duration (s)")
    run.add_argument("--workers", type=int, default=1, help="threads for per-agent plant updates")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="parse and validate a config without running it")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)

    plot = sub.add_parser("plot", help="re-render plots from a saved trajectory CSV")
    plot.add_argument("csv")
    plot.add_argument("--out-dir", default=None)
    plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        return _fail("usage", "--workers must be at least 1", EXIT_CONFIG)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc.diagnostic(), file=sys.stderr)
        return EXIT_CONFIG
    except EmptyLogError as exc:
        return _fail("empty", str(exc), EXIT_IO)
    except (OSError, ValueError) as exc:
        # ValueError here comes from reading a malformed CSV in `plot`
        name = getattr(exc, "filename", None)
        where = f"path={name} " if name else ""
        return _fail("io", f"{where}{exc}".replace("\n", " "), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())

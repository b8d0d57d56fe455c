"""Command-line interface.

Subcommands: ``analytic`` (ideal-pulse fidelity table), ``simulate``
(Monte Carlo fidelity table), ``scan`` (1/e time versus pulse count),
``p1-lines`` (P1-center spectrum), ``check`` (pulse-error expansion and
sensitivity self-tests), ``report`` (tables plus a rendered figure).

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from importlib import resources

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .evolve import KNOWN_ERROR_CHANNELS, STANDARD_PROTOCOLS, sensitivity_table, static_expansion_check
from .p1 import p1_spectrum
from .runner import ResultTable, emit, run_experiment


def _preset_names() -> list:
    root = resources.files("spindd").joinpath("presets")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def _load_preset(name: str) -> ExperimentConfig:
    res = resources.files("spindd").joinpath("presets", f"{name}.cfg")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(_preset_names())}")
    return parse_config(res.read_text(encoding="utf-8"))


def _resolve_config(args) -> ExperimentConfig:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("exactly one of --config or --preset is required")
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        cfg = load_config(args.config)
    else:
        cfg = _load_preset(args.preset)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "trajectories", None) is not None:
        if args.trajectories < 1:
            raise ConfigError("--trajectories must be >= 1")
        cfg = replace(cfg, trajectories=args.trajectories)
    return cfg


def _write(data: bytes, out: str | None):
    if out is None:
        sys.stdout.buffer.write(data)
    else:
        with open(out, "wb") as fh:
            fh.write(data)


def _cmd_table(args, mode: str) -> int:
    cfg = _resolve_config(args)
    table = run_experiment(cfg, mode=mode, threads=getattr(args, "threads", 1))
    _write(emit(table, args.format), args.out)
    return 0


def _cmd_p1_lines(args) -> int:
    if not 0.0 <= args.floor < 1.0:
        raise ConfigError("--floor must be in [0, 1)")
    rows = [[ln.kind, ln.frequency, ln.weight, ln.i_z] for ln in p1_spectrum(floor=args.floor)]
    table = ResultTable(
        header=("type", "freq_mhz", "weight", "iz_label"),
        rows=rows,
        meta={"version": __version__, "table": "p1-lines", "floor": args.floor},
    )
    _write(emit(table, args.format), args.out)
    return 0


_FIRST_ORDER_GATE = (0.22, 0.28)
_SECOND_ORDER_GATE = (0.11, 0.14)


def _cmd_check(args) -> int:
    lines = []
    ok = True
    for proto in STANDARD_PROTOCOLS:
        rep = static_expansion_check(proto)
        lo, hi = _FIRST_ORDER_GATE if rep.order == 1 else _SECOND_ORDER_GATE
        good = lo <= rep.ratio <= hi
        desc = f"ratio={rep.ratio:.4f}"
        if rep.coeff_rel_error is not None:
            good = good and rep.coeff_rel_error <= 0.01
            desc += f" coeff_err={rep.coeff_rel_error:.2e}"
        ok &= good
        lines.append(f"expansion   {proto:<10} order={rep.order} {desc}  {'PASS' if good else 'FAIL'}")
    computed = sensitivity_table()
    for proto in STANDARD_PROTOCOLS:
        good = computed[proto] == KNOWN_ERROR_CHANNELS[proto]
        ok &= good
        cells = " ".join(f"{st}={','.join(chs) if chs else '-'}" for st, chs in computed[proto].items())
        lines.append(f"sensitivity {proto:<10} {cells}  {'PASS' if good else 'FAIL'}")
    print("\n".join(lines))
    print("all checks passed" if ok else "CHECK FAILURES", file=sys.stderr)
    return 0 if ok else 3


def _cmd_report(args) -> int:
    from .report import render_report

    cfg = _resolve_config(args)
    name = args.preset if args.preset else os.path.splitext(os.path.basename(args.config))[0]
    out_dir = args.out if args.out else "report"
    for path in render_report(cfg, out_dir, name, threads=args.threads):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spindd",
        description="Decoupling-fidelity analytics and Monte Carlo for a spin in O-U dephasing noise.",
    )
    parser.add_argument("--version", action="version", version=f"spindd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, trajectories=False, threads=False):
        p.add_argument("--config", help="experiment config file (INI)")
        p.add_argument("--preset", help=f"built-in preset: {', '.join(_preset_names())}")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if trajectories:
            p.add_argument("--trajectories", type=int, default=None, help="override trajectory count")
        if threads:
            p.add_argument("--threads", type=int, default=1, help="worker threads (result is thread-count independent)")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    add_common(sub.add_parser("analytic", help="ideal-pulse fidelity over the grid"))
    add_common(sub.add_parser("simulate", help="Monte Carlo fidelity over the grid"), trajectories=True, threads=True)
    add_common(sub.add_parser("scan", help="1/e decay time versus pulse count"))

    p1p = sub.add_parser("p1-lines", help="P1-center ESR lines as CSV")
    p1p.add_argument("--floor", type=float, default=0.02, help="relative spectral-weight floor")
    p1p.add_argument("--out", default=None)
    p1p.add_argument("--format", choices=("csv", "json"), default="csv")

    sub.add_parser("check", help="run the pulse-error expansion and sensitivity suites")

    rep = sub.add_parser("report", help="write tables and a rendered figure")
    rep.add_argument("--config")
    rep.add_argument("--preset")
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--trajectories", type=int, default=None)
    rep.add_argument("--threads", type=int, default=1)
    rep.add_argument("--out", default=None, help="output directory (default: ./report)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "analytic": lambda: _cmd_table(args, "analytic"),
        "simulate": lambda: _cmd_table(args, "simulate"),
        "scan": lambda: _cmd_table(args, "scan"),
        "p1-lines": lambda: _cmd_p1_lines(args),
        "check": lambda: _cmd_check(args),
        "report": lambda: _cmd_report(args),
    }
    import numpy as np

    try:
        return handlers[args.command]()
    except np.linalg.LinAlgError as e:  # subclasses ValueError, so catch first
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

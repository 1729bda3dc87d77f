"""Command-line entry point: ``mbvar analyze | sweep | generate``.

Errors are written to stderr as one JSON object and the process exits
nonzero: 2 for bad arguments, 3 for I/O failures, 4 for unparseable input,
5 for infeasible generator targets and 1 for any other library error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from .errors import InfeasibleTargets, MbvarError, ParseError
from .report import AnalysisInputs, analyze, dumps, dumps_csv, window_value
from .sweep import sweep, write_sweep_csv
from .synthetic import GeneratorSpec, RegimePreset, generate
from .trades import write_portfolio, write_trades
from .variance import RegimeThresholds

log = logging.getLogger("mbvar")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _optional_a(text: str):
    return None if text.lower() in ("none", "free") else float(text)


def _thresholds(text: str) -> RegimeThresholds:
    vals = _float_list(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("--thresholds takes HIGH,LOW,ZERO")
    return RegimeThresholds(*vals)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(json.dumps({"error": "UsageError", "message": f"{self.prog}: {message}"}) + "\n")
        self.exit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mbvar", description="Market-based portfolio variance from trade series.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="analyze a trade file against a portfolio")
    a.add_argument("--trades", required=True)
    a.add_argument("--portfolio", required=True)
    a.add_argument("--window-center", help="epoch seconds or ISO-8601; omit to cover the whole file")
    a.add_argument("--window-width", type=float, help="window width in seconds")
    a.add_argument("--buckets", type=int, required=True)
    a.add_argument("--lenient", action="store_true", help="merge empty buckets instead of failing")
    a.add_argument("--format", choices=("json", "csv"), default="json")
    a.add_argument("--thresholds", type=_thresholds, default=RegimeThresholds(), help="regime cut-offs HIGH,LOW,ZERO")
    a.add_argument("--out", required=True)

    s = sub.add_parser("sweep", help="regime sweep over a grid of volume CVs")
    s.add_argument("--regime", required=True, choices=[r.value for r in RegimePreset])
    s.add_argument("--chi", required=True, type=_float_list)
    s.add_argument("--a", type=_optional_a, default=argparse.SUPPRESS,
                   help="override the preset coefficient a ('none' leaves it free)")
    s.add_argument("--psi0", type=float)
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--securities", type=int, default=1)
    s.add_argument("--out", required=True)

    g = sub.add_parser("generate", help="emit a synthetic trade file")
    g.add_argument("--spec", required=True, help="YAML generator spec")
    g.add_argument("--out", required=True)
    g.add_argument("--portfolio-out", help="also write the matching portfolio file")
    return p


def _run_analyze(args) -> None:
    if (args.window_center is None) != (args.window_width is None):
        raise ValueError("--window-center and --window-width go together")
    inputs = AnalysisInputs(
        trades=args.trades,
        portfolio=args.portfolio,
        buckets=args.buckets,
        window_center=window_value(args.window_center),
        window_width=args.window_width,
        lenient=args.lenient,
        thresholds=args.thresholds,
    )
    report = analyze(inputs)
    text = dumps(report) if args.format == "json" else dumps_csv(report)
    Path(args.out).write_text(text)
    for w in report["warnings"]:
        log.warning(w)


def _run_sweep(args) -> None:
    kwargs = {"psi0": args.psi0, "buckets": args.n, "seed": args.seed, "securities": args.securities}
    if hasattr(args, "a"):
        kwargs["a"] = args.a
    rows = sweep(args.regime, args.chi, **kwargs)
    write_sweep_csv(rows, args.out)


def _run_generate(args) -> None:
    try:
        doc = yaml.safe_load(Path(args.spec).read_text()) or {}
    except yaml.YAMLError as exc:
        raise ParseError(f"{args.spec}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{args.spec}: expected a mapping")
    sample = generate(GeneratorSpec.from_mapping(doc))
    write_trades(sample.ticks(), args.out)
    if args.portfolio_out:
        write_portfolio(sample.portfolio, args.portfolio_out)


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MBVAR_LOG_LEVEL", "WARNING").upper(), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    handlers = {"analyze": _run_analyze, "sweep": _run_sweep, "generate": _run_generate}
    try:
        handlers[args.command](args)
    except ParseError as exc:
        return _fail(4, exc)
    except InfeasibleTargets as exc:
        return _fail(5, exc)
    except MbvarError as exc:
        return _fail(1, exc)
    except OSError as exc:
        return _fail(3, exc)
    except ValueError as exc:
        return _fail(2, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``sim run|sweep|model|compare``.

Exit codes: 0 success, 2 validation error, 3 invariant violation.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from treebft import harness, perfmodel
from treebft.collections import Scheme
from treebft.errors import (AgreementViolation, CausalityViolation, ConfigError,
                            FaultBudgetExceeded, InsufficientBins, OutOfDomain,
                            ShapeInfeasible)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INVARIANT = 3

VALIDATION_ERRORS = (ConfigError, ShapeInfeasible, InsufficientBins, FaultBudgetExceeded,
                     OutOfDomain)
INVARIANT_ERRORS = (AgreementViolation, CausalityViolation)


def _scenario(arg: str) -> harness.ScenarioConfig:
    """A scenario file, or the name of a built-in preset."""
    if not os.path.exists(arg) and arg in harness.PRESETS:
        return harness.preset(arg)
    return harness.load_scenario(arg)


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as e:
        raise ConfigError(f"cannot write {path}: {e.strerror}") from None


def cmd_run(args) -> int:
    cfg = _scenario(args.scenario)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    m = harness.run(cfg, trace=args.trace is not None)
    _write(args.csv, m.to_csv())
    if args.trace is not None:
        _write(args.trace, m.trace)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _scenario(args.scenario)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    _write(args.csv, harness.sweep(cfg, args.axis, values, jobs=args.jobs))
    return EXIT_OK


MODEL_KEYS = {"N": int, "h": int, "m": int, "B": float, "b": float, "rtt": float,
              "phi": float, "scheme": str, "star_phi": float}


def _model_params(tokens) -> dict:
    out = {}
    for tok in tokens:
        key, sep, raw = tok.partition("=")
        if not sep or key not in MODEL_KEYS:
            raise ConfigError(f"model: expected key=value with key in {', '.join(MODEL_KEYS)}, "
                              f"got {tok!r}")
        try:
            out[key] = MODEL_KEYS[key](raw)
        except ValueError:
            raise ConfigError(f"model: cannot parse {key}={raw!r}") from None
    for key in ("N", "h", "m", "B", "b", "rtt"):
        if key not in out:
            raise ConfigError(f"model: missing {key}")
    if "scheme" in out:
        if out["scheme"] == "none":
            out["scheme"] = None
        else:
            try:
                out["scheme"] = Scheme(out["scheme"])
            except ValueError:
                raise ConfigError(f"model: unknown scheme {out['scheme']!r}") from None
    return out


def cmd_model(args) -> int:
    p = _model_params(args.params)
    star_phi = p.pop("star_phi", None)
    try:
        inp = perfmodel.ModelInputs(**p)
    except ValueError as e:
        raise ConfigError(f"model: {e}") from None
    header, row = perfmodel.CSV_HEADER, perfmodel.csv_row(inp)
    if star_phi is not None:
        star = perfmodel.star_inputs(inp.N, inp.B, inp.b, inp.rtt, star_phi)
        header += ",estimated_speedup"
        row += f",{perfmodel.estimated_speedup(inp, star):.6f}"
    sys.stdout.write(header + "\n" + row + "\n")
    return EXIT_OK


def _summary(path: str) -> dict:
    try:
        with open(path) as fh:
            return harness.read_summary(fh.read())
    except OSError as e:
        raise ConfigError(f"compare: cannot read {path}: {e.strerror}") from None


def cmd_compare(args) -> int:
    a, b = _summary(args.csv_a), _summary(args.csv_b)
    try:
        cmp = harness.compare(a, b)
    except (KeyError, ValueError) as e:
        raise ConfigError(f"compare: malformed summary ({e})") from None
    sys.stdout.write(cmp.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("scenario", help="scenario file or preset name")
    r.add_argument("--seed", type=int)
    r.add_argument("--csv", help="write metrics here instead of stdout")
    r.add_argument("--trace", help="write the delivery trace here")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="one run per value of a scenario field")
    s.add_argument("scenario")
    s.add_argument("--axis", required=True)
    s.add_argument("--values", required=True, help="comma separated")
    s.add_argument("--csv")
    s.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    s.set_defaults(fn=cmd_sweep)

    m = sub.add_parser("model", help="evaluate the pipelining model")
    m.add_argument("params", nargs="+", help="key=value: N h m B b rtt [phi scheme star_phi]")
    m.set_defaults(fn=cmd_model)

    c = sub.add_parser("compare", help="throughput ratio of two runs next to the model")
    c.add_argument("csv_a")
    c.add_argument("csv_b")
    c.set_defaults(fn=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    try:
        return args.fn(args)
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except INVARIANT_ERRORS as e:
        print(f"invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())

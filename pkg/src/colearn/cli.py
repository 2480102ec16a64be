"""``colearn`` command line.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.
Errors are printed to stderr as one JSON object per line.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

from .errors import InputError, NumericalError
from .pipeline import COMMANDS, PipelineConfig, _atomic_write, dump_json, run_stages, run_synth

log = logging.getLogger("colearn")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


HELP = {"synth": "write a synthetic input scenario",
        "all": "run every stage from the raw inputs"}


def _years(text):
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected Y1,Y2, got {text!r}") from None
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected Y1,Y2, got {text!r}")
    return tuple(parts)


def _year_list(text):
    """``2001,2003`` or ``2001-2008`` (inclusive)."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-"))
                out += range(lo, hi + 1)
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad year list {text!r}") from None
    return tuple(out)


def build_parser():
    parser = _Parser(prog="colearn", description="Regional industry diversification pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP.get(name, f"run the {name} stage"))
        p.add_argument("--config", help="JSON config or a previous run's manifest")
        p.add_argument("--out-dir", help="output directory (env COLEARN_OUT_DIR)")
        p.add_argument("--seed", type=int)
        p.add_argument("--figures", action="store_true", default=None,
                       help="also render PNG figures with matplotlib")
        if name == "synth":
            p.add_argument("--scenario", help="JSON file of scenario overrides")
            continue
        p.add_argument("--input-dir", help="input directory (env COLEARN_INPUT_DIR)")
        p.add_argument("--year", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--base-years", type=_year_list)
        p.add_argument("--proximity", help="fixed, fixed:<year> or varying")
        p.add_argument("--density", choices=("geo", "hops", "ratio", "count"))
        p.add_argument("--bins", type=int)
        p.add_argument("--did-years", type=_years)
        p.add_argument("--baseline-year", type=int)
        p.add_argument("--treatment-year", type=int)
        p.add_argument("--covariance", choices=("robust", "classical"))
    return parser


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None


def resolve_config(args, environ=None):
    environ = os.environ if environ is None else environ
    data = {}
    if args.config:
        loaded = _load_json(args.config)
        data = dict(loaded.get("config", loaded)) if isinstance(loaded, dict) else {}
    data.setdefault("input_dir", environ.get("COLEARN_INPUT_DIR", "input"))
    data.setdefault("out_dir", environ.get("COLEARN_OUT_DIR", "output"))
    for field in dataclasses.fields(PipelineConfig):
        value = getattr(args, field.name, None)
        if value is not None:
            data[field.name] = value
    return PipelineConfig.from_dict(data)


def _synth(args, environ):
    overrides = {}
    out_dir = None
    if args.config:
        loaded = _load_json(args.config)
        cfg = loaded.get("config", loaded)
        overrides = dict(cfg.get("scenario", {}))
        out_dir = cfg.get("out_dir")
    if args.scenario:
        overrides.update(_load_json(args.scenario))
    out_dir = args.out_dir or out_dir or environ.get("COLEARN_OUT_DIR", "output")
    files, manifest = run_synth(out_dir, args.seed, overrides)
    os.makedirs(out_dir, exist_ok=True)
    for name, text in sorted(files.items()):
        _atomic_write(os.path.join(out_dir, name), text.encode("utf-8"))
    _atomic_write(os.path.join(out_dir, "manifest_synth.json"), dump_json(manifest).encode("utf-8"))
    return sorted(files) + ["manifest_synth.json"]


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "exit": code, "message": str(message)}) + "\n")
    return code


def main(argv=None, environ=None):
    environ = os.environ if environ is None else environ
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        if args.command == "synth":
            written = _synth(args, environ)
        else:
            config = resolve_config(args, environ)
            run = run_stages(config, args.command)
            written = run.commit()
    except InputError as exc:
        return _fail(EXIT_INPUT, "input", exc)
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, "numerical", exc)
    except (TypeError, ValueError) as exc:
        # malformed --config values surface here
        return _fail(EXIT_USAGE, "usage", exc)
    log.info("wrote %d files", len(written))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``kilnsim run|steady|validate|props``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import re
import sys
from pathlib import Path

from .output import summary_rows, write_outputs
from .runner import run_scenario
from .scenario import load_scenario, reference_scenario, with_overrides

_UNITS = {"": 1.0, "s": 1.0, "min": 60.0, "h": 3600.0, "d": 86400.0}


def duration(text: str) -> float:
    """Seconds from '7200', '7200s', '30min', '50h' or '2d'."""
    m = re.fullmatch(r"\s*([0-9.eE+-]+)\s*([a-z]*)\s*", text)
    if not m or m.group(2) not in _UNITS:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}")
    try:
        v = float(m.group(1)) * _UNITS[m.group(2)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("duration must be >= 0")
    return v


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kilnsim", description="Dynamic rotary cement kiln simulator.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-s", "--scenario", type=Path, help="scenario TOML file (default: reference)")
        sp.add_argument("-o", "--out", type=Path, default=Path("kilnsim-out"), help="output directory")
        sp.add_argument("--cadence", type=duration, help="snapshot spacing, e.g. 30min")
        sp.add_argument("--segments", type=int, help="override the number of segments")
        sp.add_argument("--no-figures", action="store_true", help="skip the PNG figures")

    run = sub.add_parser("run", help="simulate a scenario and write outputs")
    common(run)
    run.add_argument("-d", "--duration", type=duration, help="simulated time, e.g. 50h")

    steady = sub.add_parser("steady", help="simulate until steady state and print the summary")
    common(steady)
    steady.add_argument("-d", "--duration", type=duration, help="upper bound on simulated time")

    val = sub.add_parser("validate", help="parse and validate a scenario file")
    val.add_argument("scenario", type=Path, nargs="?")

    props = sub.add_parser("props", help="dump the species and reaction databases as JSON")
    props.add_argument("-s", "--scenario", type=Path)
    props.add_argument("--what", choices=("species", "reactions", "all"), default="all")
    return p


def _scenario(args):
    s = load_scenario(args.scenario) if args.scenario else reference_scenario()
    return with_overrides(s, n_segments=getattr(args, "segments", None),
                          duration=getattr(args, "duration", None),
                          cadence=getattr(args, "cadence", None))


def _simulate(args, stop_at_steady: bool) -> int:
    s = _scenario(args)
    res = run_scenario(s, stop_at_steady=stop_at_steady)
    extra = {"band_settling_time": (res.band_settling_time, "s")}
    for k, v in res.audit.as_dict().items():
        extra[k] = (v, "-")
    files = write_outputs(res.trajectory, res.model, args.out, extra_summary=extra,
                          figures=not args.no_figures)
    if stop_at_steady:
        for k, v, unit in summary_rows(res.model, res.trajectory, extra):
            print(f"{k},{v},{unit}")
    else:
        print(f"{len(res.trajectory.steps)} steps, {len(res.trajectory)} snapshots, "
              f"{res.trajectory.wall_time:.1f} s wall time")
        for f in files:
            print(f)
    return 0


def _props(args) -> int:
    s = load_scenario(args.scenario) if args.scenario else reference_scenario()
    out = {}
    if args.what in ("species", "all"):
        out["species"] = s.species().to_dict()
    if args.what in ("reactions", "all"):
        out["reactions"] = [dataclasses.asdict(r) for r in s.reactions()]
    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _simulate(args, stop_at_steady=False)
        if args.command == "steady":
            return _simulate(args, stop_at_steady=True)
        if args.command == "validate":
            _scenario(args)
            print("ok")
            return 0
        return _props(args)
    except Exception as exc:  # one parseable line for scripts
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

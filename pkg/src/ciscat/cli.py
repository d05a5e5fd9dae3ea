"""Command-line interface.

Subcommands
-----------
propagate      run a packet-scattering scenario (also hosts surface tables)
crosssection   hard-disk-plus-flux angular distributions
wilson         holonomy of a loop in a real-coupling model
dislocations   nodal-line extraction (analytic scenario or a .field dump)
list           print the preset catalog

Every run takes ``--config FILE`` or ``--preset NAME`` plus ``--out DIR``
(default: $CISCAT_OUT, else ./ciscat_out/<name>), ``--threads N``, and
``--plot`` to render PNG figures next to the delimited outputs.

Exit codes: 0 success, 2 configuration problem (all issues listed on
stderr), 3 numerical failure (single-line JSON record on stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .config import ScenarioConfig, list_presets, parse_config, preset_text
from .errors import CiscatError, ConfigError
from .field import read_field
from .runner import _write_dislocations, run_scenario
from .topo import dislocation_lines

__all__ = ["main", "run_scenario", "list_scenarios"]

_SUBCOMMAND_ACTIONS = {
    "propagate": ("propagate", "surfaces"),
    "crosssection": ("crosssection",),
    "wilson": ("wilson",),
    "dislocations": ("analytic",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ciscat",
        description="two-channel conical-intersection scattering toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser):
        p.add_argument("--config", metavar="FILE",
                       help="scenario configuration file")
        p.add_argument("--preset", metavar="NAME",
                       help="named preset (see `ciscat list`)")
        p.add_argument("--out", metavar="DIR",
                       help="output directory (default: $CISCAT_OUT, else "
                            "./ciscat_out/<name>)")
        p.add_argument("--threads", type=int, default=None, metavar="N",
                       help="FFT worker threads")
        p.add_argument("--plot", action="store_true",
                       help="render PNG figures next to the delimited "
                            "outputs")

    add_common(sub.add_parser(
        "propagate", help="run a packet-scattering scenario"))
    add_common(sub.add_parser(
        "crosssection", help="angular distributions for a radial potential "
                             "with a flux line"))
    add_common(sub.add_parser(
        "wilson", help="holonomy of a loop in a real-coupling model"))
    p_dis = sub.add_parser(
        "dislocations", help="extract nodal lines from an analytic scenario "
                             "or a stored field")
    add_common(p_dis)
    p_dis.add_argument("field", nargs="?", metavar="FIELD",
                       help="a .field dump to analyze directly")
    p_dis.add_argument("--component", choices=("ground", "excited"),
                       default="ground",
                       help="spinor component of a .field dump to analyze")

    sub.add_parser("list", help="print the preset catalog")
    return parser


def list_scenarios(stream=None) -> None:
    """Print the preset catalog: name, action, and what it produces."""
    stream = stream if stream is not None else sys.stdout
    rows = list_presets()
    width = max(len(name) for name, _a, _d in rows)
    awidth = max(len(action) for _n, action, _d in rows)
    for name, action, desc in rows:
        print(f"{name:<{width}}  {action:<{awidth}}  {desc}", file=stream)


def _load_config(args) -> ScenarioConfig:
    if args.config and args.preset:
        raise ConfigError(["give either --config or --preset, not both"])
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError([f"cannot read config file: {exc}"])
    elif args.preset:
        text = preset_text(args.preset)
    else:
        raise ConfigError(["one of --config or --preset is required"])
    return parse_config(text)


def _resolve_outdir(args, leaf: str) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("CISCAT_OUT")
    if env:
        return Path(env)
    return Path("ciscat_out") / leaf


def _check_action(command: str, cfg: ScenarioConfig) -> None:
    allowed = _SUBCOMMAND_ACTIONS[command]
    if cfg.action not in allowed:
        raise ConfigError([
            f"[run].action: {cfg.action!r} does not belong to the "
            f"`{command}` subcommand (allowed: {', '.join(allowed)})"])


def _dispatch_run(args) -> int:
    cfg = _load_config(args)
    _check_action(args.command, cfg)
    leaf = cfg.scenario if cfg.scenario != "custom" else cfg.action
    outdir = _resolve_outdir(args, leaf)
    summary = run_scenario(cfg, outdir, plot=args.plot, threads=args.threads)
    if summary["action"] == "wilson":
        print(summary["line"])
    elif summary["action"] == "crosssection":
        if "max_rel_deviation" in summary:
            print(f"max_rel_deviation = {summary['max_rel_deviation']!r}")
    elif summary["action"] in ("analytic",):
        print(f"n_dislocations = {summary['n_dislocations']}")
    elif summary.get("sweep"):
        for beta, frac in zip(summary["betas"], summary["backscatter"]):
            print(f"beta = {beta!r}: backscatter = {frac!r}")
    elif summary["action"] == "propagate":
        print(f"norm = {summary['norm']!r}")
        print(f"excited_fraction = {summary['excited_fraction']!r}")
        print(f"backscatter = {summary['backscatter']!r}")
        if "n_dislocations" in summary:
            print(f"n_dislocations = {summary['n_dislocations']}")
        if "charge" in summary:
            print(f"charge = {summary['charge']!r}")
    print(f"wrote {summary['outdir']}")
    return 0


def _dispatch_dump_dislocations(args) -> int:
    field = read_field(Path(args.field))
    comp = field.g2 if args.component == "ground" else field.g1
    dset = dislocation_lines(comp, field.grid)
    outdir = _resolve_outdir(args, "dislocations")
    outdir.mkdir(parents=True, exist_ok=True)
    _write_dislocations(outdir, dset)
    if args.plot:
        from . import plots
        plots.plot_dislocations(comp, field.grid, dset,
                                outdir / "analysis" / "dislocations.png")
    print(f"n_dislocations = {len(dset)}")
    print(f"wrote {outdir}")
    return 0


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            list_scenarios()
            return 0
        if args.command == "dislocations" and args.field:
            return _dispatch_dump_dislocations(args)
        return _dispatch_run(args)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    except CiscatError as exc:
        print(json.dumps({"error": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command line interface: run simulations and studies, inspect snapshots.

Study subcommands write CSV tables and render the matching figures next to
them in the report directory.
"""

import argparse
import pathlib
import sys

import numpy as np

from cloudsg import plotting, simulation, studies
from cloudsg.config import ConfigError, load_config


def _progress(label):
    def cb(key, wall):
        print(f"  {label} {key}: {wall:.1f}s", flush=True)
    return cb


def cmd_run(args):
    cfg = load_config(args.config)
    sim = simulation.Simulation(cfg)
    out = pathlib.Path(args.out or cfg.output["directory"])
    rows, wall = sim.run(out_dir=out)
    print(f"reached t={sim.t:.6g} in {wall:.1f}s; outputs in {out}")
    plotting.plot_diagnostics(out / "diagnostics.csv", out / "diagnostics.png")
    return 0


def cmd_eoc(args):
    cfg = load_config(args.config)
    levels = [int(n) for n in args.levels.split(",")]
    report = studies.eoc_study(cfg, levels, dt_coarsest=args.dt,
                               progress=_progress("level"))
    out = pathlib.Path(args.out or cfg.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "eoc.csv")
    plotting.plot_eoc(report, out / "eoc.png")
    for row in report.rows:
        print({k: v for k, v in row.items() if isinstance(v, (int, float))})
    return 0


def cmd_spectral(args):
    cfg = load_config(args.config)
    modes = [int(m) for m in args.modes.split(",")]
    report = studies.spectral_study(cfg, modes, args.ref,
                                    progress=_progress("M"))
    out = pathlib.Path(args.out or cfg.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "spectral.csv")
    plotting.plot_spectral(report, out / "spectral.png")
    print(f"fitted slope: {report.slope:.4f} per mode")
    return 0


def cmd_compare(args):
    cfg = load_config(args.config)
    modes = [int(m) for m in args.modes.split(",")]
    report = studies.compare_collocation(cfg, modes,
                                         progress=_progress("M"))
    out = pathlib.Path(args.out or cfg.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "compare.csv")
    plotting.plot_mode_norms(report, out / "compare.png")
    return 0


def cmd_inspect(args):
    data = simulation.read_snapshot(args.snapshot)
    meta = data["meta"]
    print(f"snapshot version {meta['version']}: dim={meta['dim']} "
          f"cells={tuple(meta['cells'])} t={meta['t']:.6g} "
          f"modes={meta['modes']}")
    for name in meta["variables"]:
        arr = data[name]
        print(f"  {name}: shape {arr.shape}, range "
              f"[{np.min(arr):.6g}, {np.max(arr):.6g}]")
    if args.plot:
        path = pathlib.Path(args.snapshot).with_suffix(".png")
        plotting.plot_snapshot(data, path)
        print(f"  wrote {path}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="cloudsg",
        description="Moist-air flow with warm-rain microphysics and a "
                    "Legendre chaos uncertainty layer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="advance a configured simulation")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default from config)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eoc", help="grid/time refinement study")
    p.add_argument("config")
    p.add_argument("--levels", default="10,20,40,80,160",
                   help="comma-separated cell counts, each double the last")
    p.add_argument("--dt", type=float, default=None,
                   help="time step at the coarsest level (default 20/N)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eoc)

    p = sub.add_parser("spectral", help="chaos truncation error study")
    p.add_argument("config")
    p.add_argument("--modes", default="1,2,3,4,5,6")
    p.add_argument("--ref", type=int, default=10,
                   help="reference chaos degree")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("compare-collocation",
                       help="Galerkin vs collocation comparison")
    p.add_argument("config")
    p.add_argument("--modes", default="2,4,6")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("inspect", help="describe a snapshot file")
    p.add_argument("snapshot")
    p.add_argument("--plot", action="store_true",
                   help="render the fields next to the snapshot")
    p.set_defaults(func=cmd_inspect)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, simulation.SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

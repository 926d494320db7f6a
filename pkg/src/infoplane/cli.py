"""Command-line interface: fetch, run, sweep, plot.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 the run
diverged (its truncated trajectory is still written).
"""

import argparse
import json
import os
import sys

from .errors import ConfigError, DataError
from .harness import (
    ExperimentConfig,
    emit_csv,
    emit_svg_infoplane,
    parse_csv,
    run_experiment,
    sweep,
    trajectory_diverged,
)
from .mnist import fetch
from .topology import ARCHITECTURES

_CONFIG_FLAGS = {
    "arch": str,
    "width": int,
    "depth": int,
    "epochs": int,
    "seed": int,
    "lr": float,
    "rho": float,
    "opt_eps": float,
    "bn_eps": float,
    "bn_momentum": float,
    "k": int,
    "mi_subsample": int,
    "jitter_amplitude": float,
    "data_dir": str,
    "out": str,
}


def _add_config_flags(parser, listable=()):
    for name, kind in _CONFIG_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        if name in listable:
            parser.add_argument(flag, default=None,
                                help=f"{name} (comma-separated values sweep a grid)")
        else:
            parser.add_argument(flag, type=kind, default=None)
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="JSON config file; explicit flags override its values")


def _load_config_file(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        text = f.read()
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: config JSON must be an object")
    return values


def _merge_config(args, overrides=None):
    values = _load_config_file(args.config)
    for name in _CONFIG_FLAGS:
        given = getattr(args, name, None)
        if given is not None:
            values[name] = given
    if overrides:
        values.update(overrides)
    return ExperimentConfig.from_dict(values)


def _split_list(raw, kind, name):
    if raw is None:
        return [None]
    out = []
    for part in str(raw).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(kind(part))
        except ValueError as exc:
            raise ConfigError(f"bad value {part!r} for --{name}: {exc}") from exc
    if not out:
        raise ConfigError(f"--{name} got no values")
    return out


def _cmd_fetch(args):
    digests = fetch(args.data_dir, base_url=args.base_url, force=args.force)
    for name, digest in sorted(digests.items()):
        print(f"{digest}  {os.path.join(args.data_dir, name)}")
    return 0


def _cmd_run(args):
    config = _merge_config(args)
    out = config.out or f"{config.arch}_w{config.width}_d{config.depth}_s{config.seed}.csv"
    records = run_experiment(config)
    emit_csv(records, out)
    last = records[-1]
    print(f"{config.label()}: {len(records)} records -> {out}")
    if trajectory_diverged(records):
        print(f"run diverged at epoch {last.epoch}", file=sys.stderr)
        return 4
    print(f"final test error {last.test_error:.4f}, MI {last.mi_nats:.4f} nats")
    return 0


def _cmd_sweep(args):
    grid_arch = _split_list(args.arch, str, "arch")
    grid_width = _split_list(args.width, int, "width")
    grid_depth = _split_list(args.depth, int, "depth")
    grid_seed = _split_list(args.seed, int, "seed")
    configs = []
    for arch in grid_arch:
        for width in grid_width:
            for depth in grid_depth:
                for seed in grid_seed:
                    overrides = {
                        key: value
                        for key, value in
                        (("arch", arch), ("width", width), ("depth", depth), ("seed", seed))
                        if value is not None
                    }
                    scalar_args = argparse.Namespace(**{
                        **vars(args), "arch": None, "width": None, "depth": None, "seed": None,
                    })
                    configs.append(_merge_config(scalar_args, overrides))
    manifest = sweep(configs, args.out_dir, parallelism=args.parallelism)
    statuses = [entry["status"] for entry in manifest.values()]
    print(f"sweep complete: {len(manifest)} runs "
          f"({statuses.count('done')} done, {statuses.count('diverged')} diverged, "
          f"{statuses.count('failed')} failed) -> {args.out_dir}")
    return 0 if all(s in ("done", "diverged") for s in statuses) else 1


def _cmd_plot(args):
    trajectories = {}
    for path in args.csv:
        label = os.path.splitext(os.path.basename(path))[0]
        trajectories[label] = parse_csv(path)
    if args.sweep_dir:
        manifest_path = os.path.join(args.sweep_dir, "manifest.json")
        if not os.path.exists(manifest_path):
            raise DataError(f"no manifest.json in {args.sweep_dir}")
        with open(manifest_path) as f:
            manifest = json.load(f)
        for entry in manifest.values():
            if entry["status"] not in ("done", "diverged"):
                continue
            config = ExperimentConfig.from_dict(entry["config"])
            trajectories[config.label()] = parse_csv(os.path.join(args.sweep_dir, entry["csv"]))
    if not trajectories:
        raise ConfigError("nothing to plot: pass CSV paths or --sweep-dir")
    emit_svg_infoplane(trajectories, args.out, title=args.title)
    print(f"wrote {args.out} ({len(trajectories)} runs)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="infoplane",
        description="Train dense nets on MNIST and track first/last-layer mutual information.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fetch = sub.add_parser("fetch", help="download and checksum-verify the MNIST files")
    p_fetch.add_argument("--data-dir", default="data")
    p_fetch.add_argument("--base-url", default=None, help="mirror to try first")
    p_fetch.add_argument("--force", action="store_true", help="re-download existing files")
    p_fetch.set_defaults(func=_cmd_fetch)

    p_run = sub.add_parser("run", help="run one experiment and write its trajectory CSV")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a grid of experiments with a resumable manifest")
    _add_config_flags(p_sweep, listable=("arch", "width", "depth", "seed"))
    p_sweep.add_argument("--out-dir", default="sweep_out")
    p_sweep.add_argument("--parallelism", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_plot = sub.add_parser("plot", help="render trajectory CSVs as an SVG scatter")
    p_plot.add_argument("csv", nargs="*", help="trajectory CSV files")
    p_plot.add_argument("--sweep-dir", default=None, help="plot every finished run in a sweep")
    p_plot.add_argument("--out", default="infoplane.svg")
    p_plot.add_argument("--title", default=None)
    p_plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

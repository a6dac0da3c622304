"""Command line entry point: ``scatterlab {tm,coherence,bilinear,replay}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from pydantic import ValidationError

from scatterlab.bench import read_mapping
from scatterlab.harness.config import ExperimentConfig
from scatterlab.harness.runner import ProtocolError, run_experiment
from scatterlab.harness.trace import TraceError, replay


def _global_flags(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--config", default=default, help="JSON or YAML experiment config")
    parser.add_argument("--seed", type=int, default=default, help="master seed")
    parser.add_argument("--out-dir", default=default, help="run directory (default $SCATTERLAB_OUT_ROOT/<study>-seed<seed>)")
    parser.add_argument("--noiseless", action="store_true", default=default, help="ideal camera")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scatterlab", description=__doc__)
    _global_flags(parser, None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    # global flags also accepted after the subcommand
    tm = sub.add_parser("tm", help="TM measurement, focusing, mode scaling, geometry screen")
    _global_flags(tm, argparse.SUPPRESS)
    tm.add_argument("--modes", type=int)
    tm.add_argument("--channels", type=int)
    tm.add_argument("--basis", choices=["hadamard", "canonical"])
    tm.add_argument("--target", type=int)
    tm.add_argument("--focus-mode", choices=["phase-only", "complex"])
    tm.add_argument("--geometry", action="append", metavar="SPEC", help="uniform[:p] or annular:inner:outer[:p]; repeatable")
    tm.add_argument("--scaling-modes", type=int, nargs="+")
    tm.add_argument("--scaling-trials", type=int)

    co = sub.add_parser("coherence", help="majorization transport intervals")
    _global_flags(co, argparse.SUPPRESS)
    co.add_argument("--ports", type=int)
    co.add_argument("--channels", type=int)
    co.add_argument("--masks", type=int)
    co.add_argument("--pairs-file")
    co.add_argument("--comparable-pairs", type=int)
    co.add_argument("--samples", type=int)

    bl = sub.add_parser("bilinear", help="Complex-B XOR or semantic benchmark")
    _global_flags(bl, argparse.SUPPRESS)
    bl.add_argument("--task", choices=["xor", "semantic"])
    bl.add_argument("--channels", type=int)
    bl.add_argument("--modes", type=int)
    bl.add_argument("--shots", type=int)
    bl.add_argument("--photons", type=float)

    rp = sub.add_parser("replay", help="validate a run ledger and print its artifact inventory")
    rp.add_argument("run_dir")
    return parser


def _set(data: dict, section: str, key: str, value) -> None:
    if value is not None:
        data.setdefault(section, {})[key] = value


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = read_mapping(args.config) if args.config else {}
    study = args.command
    if data.get("study", study) != study:
        raise ValueError(f"config is for study {data['study']!r}, command is {study!r}")
    data["study"] = study
    if args.seed is not None:
        data["seed"] = args.seed
        data.get("bench", {}).pop("seed", None)
    if args.out_dir is not None:
        data["out_dir"] = args.out_dir
    bench = data.setdefault("bench", {})
    if study == "tm":
        _set(data, "bench", "modes", args.modes)
        _set(data, "bench", "channels", args.channels)
        _set(data, "tm", "basis", args.basis)
        _set(data, "tm", "target", args.target)
        _set(data, "tm", "focus_mode", args.focus_mode)
        _set(data, "tm", "geometries", args.geometry)
        _set(data, "tm", "scaling_modes", args.scaling_modes)
        _set(data, "tm", "scaling_trials", args.scaling_trials)
    elif study == "coherence":
        _set(data, "bench", "modes", args.ports)
        _set(data, "bench", "channels", args.channels)
        _set(data, "coherence", "masks", args.masks)
        _set(data, "coherence", "pairs_file", args.pairs_file)
        _set(data, "coherence", "comparable_pairs", args.comparable_pairs)
        _set(data, "coherence", "samples", args.samples)
    else:
        _set(data, "bench", "modes", args.modes)
        _set(data, "bench", "channels", args.channels)
        _set(data, "bilinear", "task", args.task)
        _set(data, "bilinear", "shots", args.shots)
        if args.photons is not None:
            bench.setdefault("camera", {})["photons"] = args.photons
    if args.noiseless:
        bench["camera"] = {}
    return ExperimentConfig.model_validate(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "replay":
        try:
            inventory = replay(args.run_dir)
        except (TraceError, FileNotFoundError) as exc:
            print(f"invalid ledger: {exc}", file=sys.stderr)
            return 1
        print(json.dumps(inventory, indent=2, sort_keys=True))
        return 0
    try:
        config = config_from_args(args)
    except (ValidationError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        run_dir = run_experiment(config)
    except ProtocolError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(run_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())

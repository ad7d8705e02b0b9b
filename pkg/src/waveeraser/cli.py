"""Command-line entry point.

    waveeraser eraser|delayed-choice|afshar [--config FILE] [--seed N] [--out DIR] [--format csv|json]
    waveeraser fit HISTOGRAM.csv [--out DIR] [--format csv|json]
    waveeraser nodes [--config FILE] [--out DIR] [--format csv|json]

Every run writes ``result.json`` and ``index.json`` (keys config, seed,
version, artifacts); ``--format csv`` adds one CSV per histogram.  Nothing
is written unless the run succeeds, and each file is replaced atomically.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._io import dumps, write_atomic
from .analysis import (FitConvergenceError, find_nodes, fit_fringe, histogram_from_csv,
                       histogram_to_csv)
from .experiments import (DEFAULT_SEED, AfsharConfig, DelayedChoiceConfig, EraserConfig,
                          run_afshar, run_delayed_choice, run_eraser)
from .experiments.config import ConfigError, config_echo, config_from_toml, config_to_toml
from .wavefield import Grid, intensity_profile, propagate, two_slit_fields

OUT_ENV = "WAVEERASER_OUT"
DEFAULT_OUT = "waveeraser-out"
FORMATS = ("csv", "json")

CONFIG_FOR = {"eraser": EraserConfig, "delayed-choice": DelayedChoiceConfig,
              "afshar": AfsharConfig, "nodes": AfsharConfig}
RUNNERS = {"eraser": run_eraser, "delayed-choice": run_delayed_choice, "afshar": run_afshar}
SUBCOMMANDS = ("eraser", "delayed-choice", "afshar", "fit", "nodes")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    config_path: Path | None = None
    seed: int | None = None
    out_dir: Path = Path(DEFAULT_OUT)
    output_format: str = "json"
    input_path: Path | None = None

    def __post_init__(self):
        if self.output_format not in FORMATS:
            raise UsageError(f"output format must be one of {FORMATS}")
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")

    @property
    def effective_seed(self) -> int:
        return DEFAULT_SEED if self.seed is None else self.seed


def parse_config(path: str | os.PathLike | None, kind: str = "eraser"):
    """Validated config of the given kind; defaults only when ``path`` is None."""
    cls = CONFIG_FOR[kind]
    if path is None:
        return cls()
    text = Path(path).read_text(encoding="utf-8")
    try:
        return config_from_toml(cls, text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _load(manifest: RunManifest):
    cfg = parse_config(manifest.config_path, manifest.subcommand)
    if manifest.seed is not None:
        cfg = dataclasses.replace(cfg, seed=manifest.seed)
    return cfg


def _experiment(manifest: RunManifest) -> tuple[dict, int, dict[str, str]]:
    cfg = _load(manifest)
    res = RUNNERS[manifest.subcommand](cfg)
    files = {"result.json": res.to_json()}
    if manifest.output_format == "csv":
        for name, h in res.histograms.items():
            files[f"{name}.csv"] = h.to_csv()
    return config_echo(cfg), cfg.seed, files


def _fit(manifest: RunManifest) -> tuple[dict, int, dict[str, str]]:
    if manifest.input_path is None:
        raise UsageError("fit needs a histogram CSV")
    centers, counts = histogram_from_csv(Path(manifest.input_path).read_text(encoding="utf-8"))
    try:
        fit = fit_fringe(counts, centers)
    except FitConvergenceError as exc:
        fit = exc.best
    record = {"experiment": "fit", "input": Path(manifest.input_path).name, "version": __version__,
              "fit": fit.to_dict()}
    files = {"result.json": dumps(record)}
    if manifest.output_format == "csv":
        files["fit_model.csv"] = histogram_to_csv(centers, fit.model(centers))
    return {"input": Path(manifest.input_path).name}, manifest.effective_seed, files


def _nodes(manifest: RunManifest) -> tuple[dict, int, dict[str, str]]:
    cfg = _load(manifest)
    grid = Grid.centered(cfg.grid_points, cfg.grid_pitch)
    ea, eb = two_slit_fields(grid, cfg.wavelength, cfg.slit_width, cfg.slit_separation, cfg.beam_waist)
    profile = intensity_profile(propagate(ea + eb, cfg.slits_to_grid_m))
    nodes = find_nodes(profile, grid.positions, cfg.node_fraction)
    record = {"experiment": "nodes", "config": config_echo(cfg), "seed": cfg.seed,
              "version": __version__, "nodes_m": nodes,
              "node_spacing_m": float(np.median(np.diff(nodes))) if nodes.size > 1 else None}
    files = {"result.json": dumps(record)}
    if manifest.output_format == "csv":
        files["nodes.csv"] = "node_position_m\n" + "".join(f"{float(n)!r}\n" for n in nodes)
    return config_echo(cfg), cfg.seed, files


def dispatch(manifest: RunManifest) -> list[Path]:
    """Run the manifest and write its artifacts; returns the written paths.

    All computation finishes before the first file is written.
    """
    if manifest.subcommand == "fit":
        echo, seed, files = _fit(manifest)
    elif manifest.subcommand == "nodes":
        echo, seed, files = _nodes(manifest)
    else:
        echo, seed, files = _experiment(manifest)
    index = {"config": echo, "seed": seed, "version": __version__,
             "artifacts": sorted(files) + ["index.json"]}
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    written = [write_atomic(out / name, text) for name, text in sorted(files.items())]
    written.append(write_atomic(out / "index.json", dumps(index)))
    return written


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="waveeraser", description="Classical eraser and wire-grid optics runs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    def common(sp, with_config=True):
        if with_config:
            sp.add_argument("--config", type=Path, help="TOML file with flat unit-suffixed keys")
            sp.add_argument("--print-config", action="store_true",
                            help="print the effective configuration as TOML and exit")
        sp.add_argument("--seed", type=int, help=f"random seed (default {DEFAULT_SEED})")
        sp.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--format", choices=FORMATS, default="json", dest="output_format")

    common(sub.add_parser("eraser", help="polarization-tagged double slit with idler coincidences"))
    common(sub.add_parser("delayed-choice", help="beam-splitter choice of the idler analysis basis"))
    common(sub.add_parser("afshar", help="wire grid at interference nodes and slit imaging"))
    fp = sub.add_parser("fit", help="fit k exp(-a x^2) cos^2(b x + phi) to a histogram CSV")
    fp.add_argument("input", type=Path, help="CSV with columns bin_center_m,counts")
    common(fp, with_config=False)
    common(sub.add_parser("nodes", help="node positions at the grid plane of an afshar config"))
    return p


def manifest_from_args(args: argparse.Namespace) -> RunManifest:
    out = args.out or Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    return RunManifest(args.subcommand, getattr(args, "config", None), args.seed, out,
                       args.output_format, getattr(args, "input", None))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = manifest_from_args(args)
        if getattr(args, "print_config", False):
            sys.stdout.write(config_to_toml(_load(manifest)))
            return 0
        for path in dispatch(manifest):
            print(path)
    except (UsageError, ConfigError) as exc:
        print(f"waveeraser: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"waveeraser: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

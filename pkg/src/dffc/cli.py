"""Command-line entry point.

Subcommands: ``gen-data``, ``train``, ``compare``, ``inspect-dfh``,
``report``. Configuration is a JSON file validated against the schema
below; unknown keys are hard errors (curricula are sensitive to silent
hyperparameter typos). ``--override key=value`` uses dotted paths and
takes precedence over the file. ``resolved_config.json`` written into
each run directory reproduces the run bit-identically.

Set DFFC_LOG=error|info|debug to control verbosity.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from dffc import forgeries, hardness, runner
from dffc.augment import AugmentationSpec
from dffc.errors import ConfigError
from dffc.forgeries import DatasetConfig
from dffc.model import save_checkpoint

log = logging.getLogger("dffc")

DEFAULT_CONFIG = {
    "mode": "dffc",
    "seed": 0,
    "total_epochs": 20,
    "batch_size": 64,
    "hidden_units": 32,
    "augment_all": False,
    "dataset": {
        "n_train": 2000,
        "n_test": 1000,
        "image_size": 16,
        "amplitude_range": [0.12, 0.2],
        "blur_range": [0.0, 0.5],
        "brightness_range": [-0.06, 0.06],
        "seed": 0,
    },
    "lr": {"eta_max": 0.1, "eta_min": 0.001},
    "hardness": {"gamma": 0.9, "alpha_f": 0.5},
    "pacing": {
        "milestones": [2, 5, 8, 12, 15],
        "alpha_k": 0.9,
        "easy_pool_size": 1000,
    },
    "babystep": {"start_fraction": 0.25, "growth_factor": 1.5, "step_length": 3},
    "augment": {
        "blur_sigma_range": [0.0, 1.5],
        "brightness_range": [-0.15, 0.15],
        "rotation_range_degrees": [-10.0, 10.0],
        "translation_range_pixels": [-2.0, 2.0],
    },
    "compare": {
        "modes": ["vanilla", "babystep", "dih", "dffc"],
        "augment_all": [False],
        "seeds": [0],
    },
}


def _check_keys(user: dict, defaults: dict, path: str = "") -> list[str]:
    bad = []
    for key, value in user.items():
        here = f"{path}{key}"
        if key not in defaults:
            bad.append(here)
        elif isinstance(defaults[key], dict):
            if isinstance(value, dict):
                bad += _check_keys(value, defaults[key], here + ".")
            else:
                bad.append(here)
    return bad


def _deep_merge(base: dict, overlay: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_overrides(pairs: list[str]) -> dict:
    tree: dict = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        dotted, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = tree
        *parents, leaf = dotted.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return tree


def _user_paths(user: dict, path: str = "") -> set[str]:
    paths = set()
    for key, value in user.items():
        here = f"{path}{key}"
        paths.add(here)
        if isinstance(value, dict):
            paths |= _user_paths(value, here + ".")
    return paths


def resolve_config(config_path: str | None, overrides: list[str]) -> dict:
    """defaults < file < overrides, with unknown-key and mode checks."""
    file_cfg: dict = {}
    if config_path is not None:
        try:
            file_cfg = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}")
        if not isinstance(file_cfg, dict):
            raise ConfigError("config root must be a JSON object")
    override_cfg = _parse_overrides(overrides)
    user = _deep_merge(file_cfg, override_cfg)
    bad = _check_keys(user, DEFAULT_CONFIG)
    if bad:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(bad))}")
    resolved = _deep_merge(DEFAULT_CONFIG, user)

    if resolved["mode"] == "dih":
        explicit = "hardness.alpha_f" in _user_paths(user)
        if explicit and resolved["hardness"]["alpha_f"] != 0:
            raise ConfigError("mode 'dih' contradicts hardness.alpha_f != 0")
        resolved["hardness"]["alpha_f"] = 0
    return resolved


def build_run_config(resolved: dict) -> runner.RunConfig:
    try:
        return runner.RunConfig(
            mode=resolved["mode"],
            dataset=DatasetConfig(**resolved["dataset"]),
            eta_max=resolved["lr"]["eta_max"],
            eta_min=resolved["lr"]["eta_min"],
            total_epochs=resolved["total_epochs"],
            milestones=tuple(resolved["pacing"]["milestones"]),
            alpha_k=resolved["pacing"]["alpha_k"],
            easy_pool_size=resolved["pacing"]["easy_pool_size"],
            gamma=resolved["hardness"]["gamma"],
            alpha_f=resolved["hardness"]["alpha_f"],
            augment=AugmentationSpec(
                blur_sigma_range=tuple(resolved["augment"]["blur_sigma_range"]),
                brightness_range=tuple(resolved["augment"]["brightness_range"]),
                rotation_range_degrees=tuple(resolved["augment"]["rotation_range_degrees"]),
                translation_range_pixels=tuple(resolved["augment"]["translation_range_pixels"]),
            ),
            augment_all=resolved["augment_all"],
            batch_size=resolved["batch_size"],
            hidden_units=resolved["hidden_units"],
            seed=resolved["seed"],
            babystep_start_fraction=resolved["babystep"]["start_fraction"],
            babystep_growth_factor=resolved["babystep"]["growth_factor"],
            babystep_step_length=resolved["babystep"]["step_length"],
        )
    except ValueError as exc:  # includes dataclass validation errors
        raise ConfigError(str(exc))


def _prepare_out_dir(out_dir: Path, force: bool, marker: str) -> None:
    if (out_dir / marker).exists() and not force:
        raise ConfigError(
            f"{out_dir} already holds run artifacts; pass --force to overwrite"
        )
    out_dir.mkdir(parents=True, exist_ok=True)


def write_pgm(image: np.ndarray, path: Path) -> None:
    """8-bit binary PGM; dependency-free grayscale dump."""
    h, w = image.shape
    data = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


# ---------------------------------------------------------------------------
# Subcommands.

def cmd_gen_data(args: argparse.Namespace) -> int:
    resolved = resolve_config(args.config, args.override)
    config = DatasetConfig(**resolved["dataset"])
    out = Path(args.out)
    _prepare_out_dir(out, args.force, "train_manifest.json")
    train, test = forgeries.generate_dataset(config)
    for tag, split in (("train", train), ("test", test)):
        forgeries.save_dataset(split, out / f"{tag}_manifest.json", out / f"{tag}_pixels.bin")
    amps = [s.artifact_amplitude for s in train if s.is_fake]
    sigmas = [s.blur_sigma for s in train]
    print(f"wrote {len(train)} train / {len(test)} test samples to {out}")
    print(f"class balance: {sum(s.is_fake for s in train)} fake / "
          f"{sum(not s.is_fake for s in train)} real")
    counts, edges = np.histogram(amps, bins=8)
    print("fake amplitude histogram:")
    for c, lo, hi in zip(counts, edges, edges[1:]):
        print(f"  [{lo:.3f}, {hi:.3f}): {c}")
    counts, edges = np.histogram(sigmas, bins=8)
    print("blur sigma histogram:")
    for c, lo, hi in zip(counts, edges, edges[1:]):
        print(f"  [{lo:.3f}, {hi:.3f}): {c}")
    return 0


def write_run_artifacts(out: Path, resolved: dict, result: runner.MetricsLog) -> None:
    (out / "resolved_config.json").write_text(json.dumps(resolved, indent=1))
    (out / "metrics.csv").write_text(runner.metrics_csv_text(result))
    (out / "pool_log.csv").write_text(runner.pool_log_csv_text(result))
    (out / "dfh_trace.json").write_text(runner.dfh_trace_json(result))
    (out / "extremes.json").write_text(json.dumps(result.extremes, indent=1))
    (out / "hardness_state.json").write_text(result.train_hardness.to_json())
    save_checkpoint(
        result.final_params,
        seed=resolved["seed"],
        epoch=resolved["total_epochs"],
        header_path=out / "checkpoint.json",
        blob_path=out / "checkpoint.bin",
    )


def cmd_train(args: argparse.Namespace) -> int:
    resolved = resolve_config(args.config, args.override)
    config = build_run_config(resolved)
    out = Path(args.out)
    _prepare_out_dir(out, args.force, "resolved_config.json")
    result = runner.run_training(config)
    write_run_artifacts(out, resolved, result)
    final = result.rows[-1]
    print(f"run complete: mode={config.mode} seed={config.seed} "
          f"acc={final['test_acc']:.4f} auc={final['test_auc']:.4f}")
    print(f"artifacts in {out}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    resolved = resolve_config(args.config, args.override)
    grid = resolved["compare"]
    out = Path(args.out)
    _prepare_out_dir(out, args.force, "comparison.csv")
    configs = []
    for mode in grid["modes"]:
        for aug in grid["augment_all"]:
            for seed in grid["seeds"]:
                variant = copy.deepcopy(resolved)
                variant["mode"] = mode
                variant["augment_all"] = aug
                variant["seed"] = seed
                if mode == "dih":
                    variant["hardness"]["alpha_f"] = 0
                configs.append(build_run_config(variant))
    rows = runner.compare_modes(configs)
    (out / "comparison.csv").write_text(runner.comparison_csv_text(rows))
    for entry in runner.summarize_comparison(rows):
        print(
            f"{entry['mode']:>9} aug={str(entry['augment_all']):<5} "
            f"acc={entry['final_acc_mean']:.4f}±{entry['final_acc_std']:.4f} "
            f"auc={entry['final_auc_mean']:.4f}±{entry['final_auc_std']:.4f} "
            f"acc_hard={entry['acc_hard_mean']:.4f}±{entry['acc_hard_std']:.4f}"
        )
    print(f"wrote {out / 'comparison.csv'}")
    return 0


def cmd_inspect_dfh(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    try:
        resolved = json.loads((run_dir / "resolved_config.json").read_text())
        state = hardness.HardnessState.from_json(
            (run_dir / "hardness_state.json").read_text()
        )
    except FileNotFoundError as exc:
        raise ConfigError(f"missing run artifact: {exc.filename}")
    train, _ = forgeries.generate_dataset(DatasetConfig(**resolved["dataset"]))
    scores = hardness.dfh_all(state)
    n = len(scores)
    top_k, bottom_k = args.top, args.bottom
    if top_k > n or bottom_k > n:
        print(f"warning: k exceeds sample count {n}; clamping", file=sys.stderr)
        top_k, bottom_k = min(top_k, n), min(bottom_k, n)
    order = np.argsort(scores, kind="stable")
    groups = {"top": [int(i) for i in order[::-1][:top_k]],
              "bottom": [int(i) for i in order[:bottom_k]]}
    out = run_dir / "inspection"
    report = {}
    for group, ids in groups.items():
        (out / group).mkdir(parents=True, exist_ok=True)
        rows = []
        for sid in ids:
            sample = train[sid]
            write_pgm(sample.image, out / group / f"sample_{sid:05d}.pgm")
            rows.append(
                {
                    "id": sid,
                    "label": sample.label,
                    "amplitude": sample.artifact_amplitude,
                    "sigma": sample.blur_sigma,
                    "q": float(state.prior[sid]),
                    "dih": float(state.dih[sid]),
                    "dfh": float(scores[sid]),
                }
            )
        report[group] = rows
    (out / "report.json").write_text(json.dumps(report, indent=1))
    for group, rows in report.items():
        print(f"{group}-DFH samples:")
        for row in rows:
            print(
                f"  id={row['id']:>5} {row['label']:>4} dfh={row['dfh']:.4f} "
                f"dih={row['dih']:.4f} q={row['q']:.3f} "
                f"amp={row['amplitude']:.3f} sigma={row['sigma']:.3f}"
            )
    print(f"images and report in {out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    try:
        metrics = (run_dir / "metrics.csv").read_text().strip().splitlines()
        extremes = json.loads((run_dir / "extremes.json").read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"missing run artifact: {exc.filename}")
    header = metrics[0].split(",")
    final = dict(zip(header, metrics[-1].split(",")))
    print("final epoch metrics:")
    for key, value in final.items():
        print(f"  {key}: {value}")
    for group in ("top", "bottom"):
        stats = extremes[group]
        print(
            f"{group}-DFH fakes: mean TAR={stats['mean_tar']:.4f} "
            f"mean SSIM={stats['mean_ssim']:.4f} (n={len(stats['ids'])})"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dffc",
        description="Curriculum-learning experiments on a synthetic forgery benchmark",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_config_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="dotted-path config override (repeatable)",
        )
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--force", action="store_true", help="overwrite existing artifacts")

    p = sub.add_parser("gen-data", help="generate and save a synthetic dataset")
    add_config_args(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run one training experiment")
    add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="run the mode-comparison grid")
    add_config_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("inspect-dfh", help="dump extreme-hardness samples from a run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--bottom", type=int, default=5)
    p.set_defaults(func=cmd_inspect_dfh)

    p = sub.add_parser("report", help="summarize a finished run")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("DFFC_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

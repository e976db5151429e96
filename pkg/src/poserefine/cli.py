"""Command-line entry point.

Subcommands: ``synth`` | ``fit-noise`` | ``train`` | ``refine`` | ``eval`` |
``inspect-schedule``.  Every numeric option resolves with the precedence
command-line flag > JSON config file (``--config``) > built-in default, and
every run logs its resolved configuration and seed to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import checkpoint as ckpt
from .data import SequenceRecord, SynthConfig, generate_dataset, load_dataset, save_dataset
from .denoiser import DenoiserConfig, TrainConfig, as_predictor, train
from .diffusion import refine
from .errors import ConfigurationError, DataError, PoseRefineError
from .gaussian import fit
from .metrics import evaluate_sequences
from .schedule import build_cosine_schedule

log = logging.getLogger("poserefine")

DEFAULTS = {
    "seed": 0,
    "t_max": 50,
    "offset_s": 0.008,
    "k_steps": 2,
    "latent_dim": 64,
    "depth": 2,
    "heads": 4,
    "t_embed_dim": None,
    "positional_encoding": True,
    "learning_rate": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "lr_decay": 0.96,
    "epochs": 30,
    "batch_size": 4,
    "sequences": 200,
    "frames": 27,
    "joints": 17,
    "noise_sigma": 0.02,
    "depth_coupling": 0.4,
    "jitter_sigma": 0.004,
    "noise_bias": 0.0,
    "motion_amplitude": 0.5,
    "bin_width_mm": 5.0,
    "with_scale": True,
    "data": None,
    "out": None,
    "checkpoint": None,
    "init_checkpoint": None,
    "log_out": None,
    "histogram_out": None,
}

COMMAND_FIELDS = {
    "synth": [
        "seed", "sequences", "frames", "joints", "noise_sigma", "depth_coupling",
        "jitter_sigma", "noise_bias", "motion_amplitude", "out",
    ],
    "fit-noise": ["seed", "t_max", "offset_s", "data", "out"],
    "train": [
        "seed", "t_max", "offset_s", "latent_dim", "depth", "heads", "t_embed_dim",
        "positional_encoding", "learning_rate", "beta1", "beta2", "lr_decay",
        "epochs", "batch_size", "data", "out", "init_checkpoint", "log_out",
    ],
    "refine": ["seed", "k_steps", "data", "checkpoint", "out"],
    "eval": ["seed", "bin_width_mm", "with_scale", "data", "out", "histogram_out"],
    "inspect-schedule": ["seed", "t_max", "offset_s"],
}


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            values = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path}: invalid JSON ({exc.msg})")
    if not isinstance(values, dict):
        raise ConfigurationError(f"config file {path}: expected a JSON object")
    for key in values:
        if key not in DEFAULTS:
            raise ConfigurationError(f"config file {path}: unknown field '{key}'")
    return values


def resolve_config(args: argparse.Namespace, fields) -> dict:
    """Merge flags over config-file values over defaults, field by field."""
    file_values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for field in fields:
        cli_value = getattr(args, field, None)
        if cli_value is not None:
            resolved[field] = cli_value
        elif field in file_values:
            resolved[field] = file_values[field]
        else:
            resolved[field] = DEFAULTS[field]
    return resolved


def _require(cfg: dict, field: str) -> str:
    if cfg.get(field) is None:
        raise ConfigurationError(f"missing required option --{field.replace('_', '-')}")
    return cfg[field]


def _log_run(command: str, cfg: dict) -> None:
    log.info("%s: resolved config %s", command, json.dumps(cfg, sort_keys=True))


def _triplets_with_gt(records):
    for record in records:
        if record.gt3d is None:
            raise DataError(f"record {record.id} has no gt3d field")
    return [record.triplet() for record in records]


def cmd_synth(cfg: dict) -> int:
    _require(cfg, "out")
    synth_config = SynthConfig(
        sequences=cfg["sequences"],
        frames=cfg["frames"],
        joints=cfg["joints"],
        motion_amplitude_rad=cfg["motion_amplitude"],
        noise_sigma_m=cfg["noise_sigma"],
        depth_coupling=cfg["depth_coupling"],
        jitter_sigma=cfg["jitter_sigma"],
        noise_bias_m=cfg["noise_bias"],
    )
    rng = np.random.default_rng(cfg["seed"])
    records = generate_dataset(synth_config, rng)
    save_dataset(records, cfg["out"])
    log.info("wrote %d sequences to %s", len(records), cfg["out"])
    return 0


def cmd_fit_noise(cfg: dict) -> int:
    records = load_dataset(_require(cfg, "data"))
    model = fit(_triplets_with_gt(records))
    schedule = build_cosine_schedule(cfg["t_max"], cfg["offset_s"])
    ckpt.save_checkpoint(_require(cfg, "out"), schedule, gaussian=model)
    log.info(
        "fitted noise model on %d frames x %d joints -> %s",
        model.sample_count, model.num_joints, cfg["out"],
    )
    return 0


def cmd_train(cfg: dict) -> int:
    records = load_dataset(_require(cfg, "data"))
    if not records:
        raise DataError("training dataset is empty")
    triplets = _triplets_with_gt(records)
    schedule = build_cosine_schedule(cfg["t_max"], cfg["offset_s"])

    gaussian = None
    if cfg["init_checkpoint"]:
        loaded = ckpt.load_checkpoint(cfg["init_checkpoint"])
        gaussian = loaded.gaussian
    if gaussian is None:
        log.info("no noise model supplied; fitting one from the training data")
        gaussian = fit(triplets)

    frames, joints = records[0].frames, records[0].joints
    config = DenoiserConfig(
        frames=frames,
        joints=joints,
        latent_dim=cfg["latent_dim"],
        depth=cfg["depth"],
        heads=cfg["heads"],
        t_embed_dim=cfg["t_embed_dim"],
        use_positional_encoding=cfg["positional_encoding"],
    )
    train_config = TrainConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        learning_rate=cfg["learning_rate"],
        beta1=cfg["beta1"],
        beta2=cfg["beta2"],
        lr_decay=cfg["lr_decay"],
    )
    rng = np.random.default_rng(cfg["seed"])
    params, history = train(
        triplets,
        gaussian,
        schedule,
        config,
        train_config,
        rng,
        on_epoch=lambda row: log.info(
            "epoch %3d  mean loss %.6f  lr %.3e",
            row["epoch"], row["mean_loss"], row["learning_rate"],
        ),
    )
    ckpt.save_checkpoint(
        _require(cfg, "out"),
        schedule,
        gaussian=gaussian,
        denoiser_config=config,
        denoiser_params=params,
    )
    if cfg["log_out"]:
        with open(cfg["log_out"], "w", encoding="utf-8") as fh:
            json.dump(history, fh, sort_keys=True, indent=2)
            fh.write("\n")
    log.info("wrote checkpoint to %s", cfg["out"])
    return 0


def cmd_refine(cfg: dict) -> int:
    records = load_dataset(_require(cfg, "data"))
    loaded = ckpt.load_checkpoint(_require(cfg, "checkpoint"))
    if loaded.denoiser_params is None:
        raise ConfigurationError(
            f"checkpoint {cfg['checkpoint']} holds no trained denoiser"
        )
    config = loaded.denoiser_config
    predictor = as_predictor(loaded.denoiser_params, config)
    refined_records = []
    for record in records:
        if (record.frames, record.joints) != (config.frames, config.joints):
            raise ConfigurationError(
                f"record {record.id} is {record.frames}x{record.joints}, "
                f"checkpoint expects {config.frames}x{config.joints}"
            )
        refined = refine(
            record.pose2d, record.noisy3d, predictor, loaded.schedule, cfg["k_steps"]
        )
        refined_records.append(
            SequenceRecord(
                id=record.id, pose2d=record.pose2d, noisy3d=refined, gt3d=record.gt3d
            )
        )
    save_dataset(refined_records, _require(cfg, "out"))
    log.info("refined %d sequences -> %s", len(refined_records), cfg["out"])
    return 0


def cmd_eval(cfg: dict) -> int:
    records = load_dataset(_require(cfg, "data"))
    if not records:
        raise DataError("no sequences to evaluate")
    for record in records:
        if record.gt3d is None:
            raise DataError(f"record {record.id} has no gt3d field")
    report = evaluate_sequences(
        [r.noisy3d for r in records],
        [r.gt3d for r in records],
        ids=[r.id for r in records],
        bin_width_mm=cfg["bin_width_mm"],
        with_scale=cfg["with_scale"],
    )
    print(f"sequences : {len(records)}")
    print(f"MPJPE     : {report.mpjpe_mm:.3f} mm")
    print(f"P-MPJPE   : {report.p_mpjpe_mm:.3f} mm")
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    if cfg["histogram_out"]:
        hist = report.histogram
        with open(cfg["histogram_out"], "w", encoding="utf-8") as fh:
            for lo, hi, count in zip(
                hist.bin_edges_mm[:-1], hist.bin_edges_mm[1:], hist.counts
            ):
                fh.write(f"{lo!r}\t{hi!r}\t{int(count)}\n")
    return 0


def cmd_inspect_schedule(cfg: dict) -> int:
    schedule = build_cosine_schedule(cfg["t_max"], cfg["offset_s"])
    for t in range(schedule.t_max + 1):
        beta = 0.0 if t == 0 else float(schedule.beta[t - 1])
        print(f"{t}\t{beta!r}\t{float(schedule.alpha_bar[t])!r}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "fit-noise": cmd_fit_noise,
    "train": cmd_train,
    "refine": cmd_refine,
    "eval": cmd_eval,
    "inspect-schedule": cmd_inspect_schedule,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poserefine",
        description="Diffusion-based refinement of noisy 3D pose sequences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (flag > file > default)")
        p.add_argument("--seed", type=int)
        p.add_argument("--log-level", default="INFO")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    add_common(p)
    p.add_argument("--sequences", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--joints", type=int)
    p.add_argument("--noise-sigma", type=float, help="base 3D error sigma in meters")
    p.add_argument("--depth-coupling", type=float)
    p.add_argument("--jitter-sigma", type=float, help="2D jitter in normalized units")
    p.add_argument("--noise-bias", type=float, help="constant z bias in meters")
    p.add_argument("--motion-amplitude", type=float, help="joint angle amplitude, rad")
    p.add_argument("--out", help="output JSON Lines dataset")

    p = sub.add_parser("fit-noise", help="fit the conditional error Gaussian")
    add_common(p)
    p.add_argument("--data")
    p.add_argument("--out", help="output checkpoint file")
    p.add_argument("--t-max", type=int)
    p.add_argument("--offset-s", type=float)

    p = sub.add_parser("train", help="train the pose denoiser")
    add_common(p)
    p.add_argument("--data")
    p.add_argument("--out", help="output checkpoint file")
    p.add_argument("--init-checkpoint", help="checkpoint holding a fitted noise model")
    p.add_argument("--t-max", type=int)
    p.add_argument("--offset-s", type=float)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--t-embed-dim", type=int)
    p.add_argument(
        "--positional-encoding", action=argparse.BooleanOptionalAction, default=None
    )
    p.add_argument("--learning-rate", "--lr", type=float, dest="learning_rate")
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--lr-decay", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--log-out", help="write the per-epoch training log as JSON")

    p = sub.add_parser("refine", help="refine noisy sequences with a checkpoint")
    add_common(p)
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.add_argument("--k-steps", type=int)

    p = sub.add_parser("eval", help="report MPJPE / P-MPJPE of a dataset")
    add_common(p)
    p.add_argument("--data")
    p.add_argument("--out", help="write the report as JSON")
    p.add_argument("--histogram-out", help="write the per-sequence histogram as TSV")
    p.add_argument("--bin-width-mm", type=float)
    p.add_argument(
        "--with-scale", action=argparse.BooleanOptionalAction, default=None,
        help="include scale in Procrustes alignment (default: yes)",
    )

    p = sub.add_parser("inspect-schedule", help="print t, beta_t, alpha_bar_t rows")
    add_common(p)
    p.add_argument("--t-max", "--T", type=int, dest="t_max")
    p.add_argument("--offset-s", "--s", type=float, dest="offset_s")
    return parser


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args, COMMAND_FIELDS[args.command])
        _log_run(args.command, cfg)
        return COMMANDS[args.command](cfg)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except PoseRefineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

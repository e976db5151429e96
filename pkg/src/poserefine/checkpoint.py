"""Single-file checkpoint: JSON header + flat little-endian float64 arrays.

Layout: one JSON header line (sorted keys, newline-terminated) describing
schedule parameters, the noise model and the denoiser config, followed by
raw ``<f8`` array data in a fixed documented order:

  * noise model, per joint: mean_a (3), mean_b (5), cov_aa (3x3),
    cov_ab (3x5), cov_bb (5x5); per-joint ``lambda`` and the shared
    ``sample_count`` live in the header
  * denoiser: e_mean (J, 3), e_std (J, 3), then every weight array in the
    canonical ``param_shapes`` order of the stored config
"""

from __future__ import annotations

import json

from dataclasses import dataclass

import numpy as np

from .denoiser.model import DenoiserConfig, DenoiserParams, param_shapes
from .errors import ConfigurationError, DatasetParseError, SchemaError
from .gaussian import A_DIM, B_DIM, CondGaussianModel, JointGaussian
from .schedule import NoiseSchedule, build_cosine_schedule

FORMAT_VERSION = 1
_GAUSSIAN_FIELDS = (
    ("mean_a", (A_DIM,)),
    ("mean_b", (B_DIM,)),
    ("cov_aa", (A_DIM, A_DIM)),
    ("cov_ab", (A_DIM, B_DIM)),
    ("cov_bb", (B_DIM, B_DIM)),
)


@dataclass
class Checkpoint:
    schedule: NoiseSchedule
    gaussian: CondGaussianModel | None = None
    denoiser_config: DenoiserConfig | None = None
    denoiser_params: DenoiserParams | None = None


def _config_to_obj(config: DenoiserConfig) -> dict:
    return {
        "frames": config.frames,
        "joints": config.joints,
        "latent_dim": config.latent_dim,
        "depth": config.depth,
        "heads": config.heads,
        "t_embed_dim": config.t_embed_dim,
        "use_positional_encoding": config.use_positional_encoding,
    }


def save_checkpoint(
    path,
    schedule: NoiseSchedule,
    gaussian: CondGaussianModel | None = None,
    denoiser_config: DenoiserConfig | None = None,
    denoiser_params: DenoiserParams | None = None,
) -> None:
    if (denoiser_config is None) != (denoiser_params is None):
        raise ConfigurationError(
            "denoiser config and params must be saved together"
        )
    header = {
        "format_version": FORMAT_VERSION,
        "schedule": {"t_max": schedule.t_max, "offset_s": schedule.offset_s},
        "gaussian": None,
        "denoiser": None,
    }
    blobs = []
    if gaussian is not None:
        header["gaussian"] = {
            "joints": gaussian.num_joints,
            "sample_count": gaussian.sample_count,
            "lambda": [entry.lam for entry in gaussian.joints],
        }
        for entry in gaussian.joints:
            for name, _ in _GAUSSIAN_FIELDS:
                blobs.append(getattr(entry, name))
    if denoiser_params is not None:
        header["denoiser"] = {"config": _config_to_obj(denoiser_config)}
        blobs.append(denoiser_params.e_mean)
        blobs.append(denoiser_params.e_std)
        for name in param_shapes(denoiser_config):
            blobs.append(denoiser_params.weights[name])

    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for arr in blobs:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _take(buf: np.ndarray, offset: int, shape) -> tuple[np.ndarray, int]:
    size = int(np.prod(shape))
    if offset + size > buf.size:
        raise DatasetParseError("checkpoint is truncated")
    return buf[offset : offset + size].reshape(shape).copy(), offset + size


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetParseError(f"{path}: invalid checkpoint header") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(
            f"{path}: unsupported checkpoint format version {version!r}"
        )
    for field in ("schedule", "gaussian", "denoiser"):
        if field not in header:
            raise SchemaError(f"{path}: checkpoint header missing field '{field}'")

    schedule = build_cosine_schedule(
        header["schedule"]["t_max"], header["schedule"]["offset_s"]
    )
    buf = np.frombuffer(blob, dtype="<f8")
    offset = 0

    gaussian = None
    if header["gaussian"] is not None:
        meta = header["gaussian"]
        entries = []
        for j in range(meta["joints"]):
            fields = {}
            for name, shape in _GAUSSIAN_FIELDS:
                fields[name], offset = _take(buf, offset, shape)
            entries.append(JointGaussian(lam=meta["lambda"][j], **fields))
        gaussian = CondGaussianModel.from_blocks(
            entries, sample_count=meta["sample_count"]
        )

    denoiser_config = None
    denoiser_params = None
    if header["denoiser"] is not None:
        denoiser_config = DenoiserConfig(**header["denoiser"]["config"])
        j = denoiser_config.joints
        e_mean, offset = _take(buf, offset, (j, 3))
        e_std, offset = _take(buf, offset, (j, 3))
        weights = {}
        for name, shape in param_shapes(denoiser_config).items():
            weights[name], offset = _take(buf, offset, shape)
        denoiser_params = DenoiserParams(weights=weights, e_mean=e_mean, e_std=e_std)

    if offset != buf.size:
        raise DatasetParseError(f"{path}: {buf.size - offset} unexpected trailing floats")
    return Checkpoint(
        schedule=schedule,
        gaussian=gaussian,
        denoiser_config=denoiser_config,
        denoiser_params=denoiser_params,
    )

"""Sequence records and the JSON Lines dataset format.

One record per line with fields ``id``, ``frames``, ``joints``, ``pose2d``,
``noisy3d`` and optionally ``gt3d`` (absent for inference-only data).
Floats are serialised with shortest-round-trip repr, so ``load(save(x))``
reproduces every array bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DatasetParseError, SchemaError

ROOT_TOL = 1e-9
POSE2D_RANGE = 1.5


@dataclass
class SequenceRecord:
    id: str
    pose2d: np.ndarray          # (N, J, 2), normalized image coordinates
    noisy3d: np.ndarray         # (N, J, 3), root-relative meters
    gt3d: np.ndarray | None = None  # (N, J, 3), root-relative meters

    def __post_init__(self):
        self.pose2d = np.asarray(self.pose2d, dtype=float)
        self.noisy3d = np.asarray(self.noisy3d, dtype=float)
        if self.gt3d is not None:
            self.gt3d = np.asarray(self.gt3d, dtype=float)
        self._validate()

    @property
    def frames(self) -> int:
        return self.pose2d.shape[0]

    @property
    def joints(self) -> int:
        return self.pose2d.shape[1]

    def _validate(self):
        if self.pose2d.ndim != 3 or self.pose2d.shape[2] != 2:
            raise DataError(f"record {self.id}: pose2d must be (N, J, 2), got {self.pose2d.shape}")
        expected = self.pose2d.shape[:2] + (3,)
        for name, arr in (("noisy3d", self.noisy3d), ("gt3d", self.gt3d)):
            if arr is None:
                continue
            if arr.shape != expected:
                raise DataError(
                    f"record {self.id}: {name} shape {arr.shape} != expected {expected}"
                )
            if not np.all(np.isfinite(arr)):
                raise DataError(f"record {self.id}: non-finite values in {name}")
            if np.abs(arr[:, 0, :]).max() > ROOT_TOL:
                raise DataError(
                    f"record {self.id}: {name} is not root-relative "
                    f"(root magnitude {np.abs(arr[:, 0, :]).max():.2e})"
                )
        if not np.all(np.isfinite(self.pose2d)):
            raise DataError(f"record {self.id}: non-finite values in pose2d")
        if np.abs(self.pose2d).max() > POSE2D_RANGE:
            raise DataError(
                f"record {self.id}: pose2d outside [-{POSE2D_RANGE}, {POSE2D_RANGE}]"
            )

    def triplet(self):
        """(y, x_noisy, x_gt) view used by fitting and training."""
        return self.pose2d, self.noisy3d, self.gt3d


def _record_to_obj(record: SequenceRecord) -> dict:
    obj = {
        "id": record.id,
        "frames": record.frames,
        "joints": record.joints,
        "pose2d": record.pose2d.tolist(),
        "noisy3d": record.noisy3d.tolist(),
    }
    if record.gt3d is not None:
        obj["gt3d"] = record.gt3d.tolist()
    return obj


def save_dataset(records, path) -> None:
    records = list(records)
    joint_counts = {r.joints for r in records}
    if len(joint_counts) > 1:
        raise DataError(f"mixed joint counts in dataset: {sorted(joint_counts)}")
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(_record_to_obj(record)))
            fh.write("\n")


def _parse_record(obj: dict, line_no: int) -> SequenceRecord:
    for name in ("id", "frames", "joints", "pose2d", "noisy3d"):
        if name not in obj:
            raise SchemaError(f"line {line_no}: missing required field '{name}'")
    frames, joints = obj["frames"], obj["joints"]
    arrays = {}
    for name, width in (("pose2d", 2), ("noisy3d", 3), ("gt3d", 3)):
        if name == "gt3d" and name not in obj:
            arrays[name] = None
            continue
        arr = np.asarray(obj[name], dtype=float)
        if arr.shape != (frames, joints, width):
            raise SchemaError(
                f"line {line_no}: field '{name}' has shape {arr.shape}, "
                f"expected ({frames}, {joints}, {width})"
            )
        arrays[name] = arr
    return SequenceRecord(id=str(obj["id"]), **arrays)


def load_dataset(path) -> list[SequenceRecord]:
    records = []
    joints = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(
                    f"{path}: parse error at line {line_no}: {exc.msg}"
                ) from exc
            record = _parse_record(obj, line_no)
            if joints is None:
                joints = record.joints
            elif record.joints != joints:
                raise SchemaError(
                    f"line {line_no}: joint count {record.joints} differs from {joints}"
                )
            records.append(record)
    return records

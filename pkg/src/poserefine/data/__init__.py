"""Synthetic data generation, normalization and dataset persistence."""

from .records import SequenceRecord, load_dataset, save_dataset
from .synth import (
    JOINT_NAMES,
    NUM_JOINTS,
    PARENTS,
    REST_OFFSETS,
    SIGMA_FACTORS,
    SynthConfig,
    generate_dataset,
    generate_gt_sequences,
    normalize_2d,
    root_relative,
    simulate_estimator,
)

__all__ = [
    "JOINT_NAMES",
    "NUM_JOINTS",
    "PARENTS",
    "REST_OFFSETS",
    "SIGMA_FACTORS",
    "SequenceRecord",
    "SynthConfig",
    "generate_dataset",
    "generate_gt_sequences",
    "load_dataset",
    "normalize_2d",
    "root_relative",
    "save_dataset",
    "simulate_estimator",
]

"""Diffusion-based refinement of noisy 3D human pose sequences.

The noisy output of an upstream 3D pose estimator is treated as the terminal
state of a diffusion process whose noise source is a fitted conditional
Gaussian over estimator errors (conditioned on the paired 2D pose and the
noisy 3D pose itself).  A spatio-temporal attention network is trained to
predict the error component inside each diffusion state, and a short
deterministic reverse process turns a noisy sequence into a refined one.
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .diffusion import TrainingExample, forward_corrupt, make_training_example, refine, reverse_step
from .gaussian import CondGaussianModel, condition, fit, sample_noisy_pose
from .metrics import (
    EvalReport,
    error_histogram,
    evaluate_sequences,
    mpjpe,
    p_mpjpe,
    procrustes_align,
    procrustes_transform,
)
from .schedule import NoiseSchedule, build_cosine_schedule, ddim_subsequence

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "CondGaussianModel",
    "EvalReport",
    "NoiseSchedule",
    "TrainingExample",
    "build_cosine_schedule",
    "condition",
    "ddim_subsequence",
    "error_histogram",
    "evaluate_sequences",
    "fit",
    "forward_corrupt",
    "load_checkpoint",
    "make_training_example",
    "mpjpe",
    "p_mpjpe",
    "procrustes_align",
    "procrustes_transform",
    "refine",
    "reverse_step",
    "sample_noisy_pose",
    "save_checkpoint",
]

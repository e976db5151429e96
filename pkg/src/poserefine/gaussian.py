"""Per-joint conditional Gaussian model of 3D estimator errors.

For each joint the error ``a = e = x_noisy - x_gt`` (3 dims) and the
condition ``b = [y_2d, x_noisy]`` (5 dims) are modelled jointly as an
8-dimensional Gaussian fitted over all frames of a training corpus.
Conditioning on an observed ``b`` gives the Gaussian over plausible errors
via the Schur complement:

    mu_cond  = mean_a + cov_ab (cov_bb + lam I)^-1 (b_obs - mean_b)
    cov_cond = cov_aa - cov_ab (cov_bb + lam I)^-1 cov_ba

Sampling a plausible noisy pose then draws ``e`` from that conditional for
every frame/joint and returns ``x_gt + e``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    ConfigurationError,
    DataError,
    FittingError,
    NumericalError,
    ShapeError,
)

A_DIM = 3
B_DIM = 5
MIN_SAMPLES = 10
LAMBDA_COEFF = 1e-6
CHOLESKY_RETRIES = 3


@dataclass
class JointGaussian:
    """Fitted blocks for a single joint, plus derived conditioning caches."""

    mean_a: np.ndarray   # (3,)
    mean_b: np.ndarray   # (5,)
    cov_aa: np.ndarray   # (3, 3)
    cov_ab: np.ndarray   # (3, 5)
    cov_bb: np.ndarray   # (5, 5)
    lam: float
    gain: np.ndarray = field(init=False)       # cov_ab (cov_bb + lam I)^-1
    cov_cond: np.ndarray = field(init=False)   # conditional covariance
    chol_cond: np.ndarray = field(init=False)  # lower Cholesky factor of cov_cond

    def __post_init__(self):
        self.mean_a = np.asarray(self.mean_a, dtype=float).reshape(A_DIM)
        self.mean_b = np.asarray(self.mean_b, dtype=float).reshape(B_DIM)
        self.cov_aa = np.asarray(self.cov_aa, dtype=float).reshape(A_DIM, A_DIM)
        self.cov_ab = np.asarray(self.cov_ab, dtype=float).reshape(A_DIM, B_DIM)
        self.cov_bb = np.asarray(self.cov_bb, dtype=float).reshape(B_DIM, B_DIM)


@dataclass
class CondGaussianModel:
    """Per-joint conditional error Gaussians; immutable once built."""

    joints: list[JointGaussian]
    sample_count: int

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @classmethod
    def from_blocks(cls, joints: list[JointGaussian], sample_count: int):
        model = cls(joints=joints, sample_count=sample_count)
        for j, entry in enumerate(model.joints):
            _precompute_conditional(entry, j)
        return model


def _precompute_conditional(entry: JointGaussian, joint: int) -> None:
    """Solve the Schur complement and factor the conditional covariance."""
    reg = entry.cov_bb + entry.lam * np.eye(B_DIM)
    try:
        chol_bb = cho_factor(reg, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"cov_bb + lambda*I not positive definite for joint {joint}"
        ) from exc
    entry.gain = cho_solve(chol_bb, entry.cov_ab.T).T
    cov_cond = entry.cov_aa - entry.gain @ entry.cov_ab.T
    cov_cond = 0.5 * (cov_cond + cov_cond.T)
    entry.cov_cond = cov_cond

    if not cov_cond.any():
        # exactly degenerate conditional (e.g. constant training data)
        entry.chol_cond = np.zeros((A_DIM, A_DIM))
        return
    jitter = entry.lam
    for attempt in range(CHOLESKY_RETRIES + 1):
        try:
            entry.chol_cond = np.linalg.cholesky(
                cov_cond + (jitter if attempt else 0.0) * np.eye(A_DIM)
            )
            return
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        f"conditional covariance for joint {joint} not positive definite "
        f"after {CHOLESKY_RETRIES} jitter escalations"
    )


def _pool_triplets(triplets):
    """Stack (y, x_noisy, x_gt) sequences into per-joint sample matrices."""
    ys, noisies, gts = [], [], []
    joints = None
    for idx, (y, x_noisy, x_gt) in enumerate(triplets):
        y = np.asarray(y, dtype=float)
        x_noisy = np.asarray(x_noisy, dtype=float)
        x_gt = np.asarray(x_gt, dtype=float)
        if y.ndim != 3 or y.shape[2] != 2:
            raise ShapeError(f"triplet {idx}: 2D pose must be (N, J, 2), got {y.shape}")
        if x_noisy.shape != y.shape[:2] + (3,) or x_gt.shape != x_noisy.shape:
            raise ShapeError(
                f"triplet {idx}: inconsistent shapes {y.shape}, {x_noisy.shape}, {x_gt.shape}"
            )
        if joints is None:
            joints = y.shape[1]
        elif y.shape[1] != joints:
            raise ShapeError(
                f"triplet {idx}: joint count {y.shape[1]} differs from {joints}"
            )
        for name, arr in (("2d", y), ("noisy3d", x_noisy), ("gt3d", x_gt)):
            if not np.all(np.isfinite(arr)):
                frame, joint = np.argwhere(~np.isfinite(arr).all(axis=-1))[0]
                raise DataError(
                    f"triplet {idx}: non-finite {name} value at frame {frame}, joint {joint}"
                )
        ys.append(y)
        noisies.append(x_noisy)
        gts.append(x_gt)
    if joints is None:
        raise FittingError("no triplets supplied")
    y_all = np.concatenate(ys)
    noisy_all = np.concatenate(noisies)
    gt_all = np.concatenate(gts)
    return y_all, noisy_all, gt_all


def fit(triplets) -> CondGaussianModel:
    """Fit the per-joint error Gaussians from (y, x_noisy, x_gt) sequences.

    Pools frames across all sequences; covariances use the unbiased 1/(M-1)
    estimator and the regulariser lambda = 1e-6 * trace(cov_bb) / 5 is fixed
    at fit time.
    """
    y_all, noisy_all, gt_all = _pool_triplets(triplets)
    m, joints = y_all.shape[:2]
    if m < MIN_SAMPLES:
        raise FittingError(f"need at least {MIN_SAMPLES} frames, got {m}")

    entries = []
    for j in range(joints):
        a = noisy_all[:, j, :] - gt_all[:, j, :]
        b = np.concatenate([y_all[:, j, :], noisy_all[:, j, :]], axis=1)
        sample = np.concatenate([a, b], axis=1)
        mean = sample.mean(axis=0)
        centered = sample - mean
        cov = centered.T @ centered / (m - 1)
        cov_bb = cov[A_DIM:, A_DIM:]
        entries.append(
            JointGaussian(
                mean_a=mean[:A_DIM],
                mean_b=mean[A_DIM:],
                cov_aa=cov[:A_DIM, :A_DIM],
                cov_ab=cov[:A_DIM, A_DIM:],
                cov_bb=cov_bb,
                lam=LAMBDA_COEFF * np.trace(cov_bb) / B_DIM,
            )
        )
    return CondGaussianModel.from_blocks(entries, sample_count=m)


def condition(
    model: CondGaussianModel, joint: int, b_obs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional mean and covariance of the error given an observed b.

    The covariance does not depend on ``b_obs``; it is the precomputed Schur
    complement for the joint.
    """
    if not 0 <= joint < model.num_joints:
        raise ConfigurationError(f"joint {joint} out of range [0, {model.num_joints})")
    b_obs = np.asarray(b_obs, dtype=float).reshape(B_DIM)
    entry = model.joints[joint]
    mu = entry.mean_a + entry.gain @ (b_obs - entry.mean_b)
    return mu, entry.cov_cond.copy()


def sample_noisy_pose(
    model: CondGaussianModel,
    x_gt: np.ndarray,
    y: np.ndarray,
    x_noisy: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw a plausible noisy pose ``x_gt + e`` with e from the conditional.

    Per frame and joint, ``e ~ N(mu_cond(b), cov_cond)`` via the cached
    Cholesky factor.  Draws are made joint-by-joint in index order (one
    (N, 3) standard-normal block per joint), so results are reproducible
    for a given generator state.
    """
    x_gt = np.asarray(x_gt, dtype=float)
    y = np.asarray(y, dtype=float)
    x_noisy = np.asarray(x_noisy, dtype=float)
    if x_gt.ndim != 3 or x_gt.shape[2] != 3:
        raise ShapeError(f"x_gt must be (N, J, 3), got {x_gt.shape}")
    if x_noisy.shape != x_gt.shape or y.shape != x_gt.shape[:2] + (2,):
        raise ShapeError(
            f"inconsistent shapes: gt {x_gt.shape}, noisy {x_noisy.shape}, 2d {y.shape}"
        )
    if x_gt.shape[1] != model.num_joints:
        raise ConfigurationError(
            f"pose has {x_gt.shape[1]} joints, model was fitted for {model.num_joints}"
        )

    n = x_gt.shape[0]
    eps = np.empty_like(x_gt)
    for j, entry in enumerate(model.joints):
        b = np.concatenate([y[:, j, :], x_noisy[:, j, :]], axis=1)
        mu = entry.mean_a + (b - entry.mean_b) @ entry.gain.T
        z = rng.standard_normal((n, A_DIM))
        eps[:, j, :] = x_gt[:, j, :] + mu + z @ entry.chol_cond.T
    return eps

"""The pose denoiser network g(y, x_t, t) and its exact backward pass.

Architecture, per forward call on one sequence:

  * concatenate (x_t, y) into 5 channels per joint token and project to the
    latent width C; optionally add learned temporal/spatial position terms
  * ``depth`` blocks, each pre-normalised with residual connections:
      1. self-attention across joints (per frame)
      2. self-attention across frames (per joint)
      3. cross-attention of all tokens onto the sinusoidal timestep embedding
      4. a 2-layer GELU MLP (hidden width 4C)
  * final layer norm, then a linear map to 3 channels

The 3-channel output is a z-scored error prediction; it is de-normalised by
the stored per-joint error statistics before being returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, NumericalError, ShapeError
from . import ops

INPUT_CHANNELS = 5
OUTPUT_CHANNELS = 3
MLP_RATIO = 4
STD_FLOOR = 1e-8
POS_INIT_SCALE = 0.02


@dataclass(frozen=True)
class DenoiserConfig:
    frames: int
    joints: int
    latent_dim: int = 64
    depth: int = 2
    heads: int = 4
    t_embed_dim: int | None = None
    use_positional_encoding: bool = True

    def __post_init__(self):
        if self.t_embed_dim is None:
            object.__setattr__(self, "t_embed_dim", self.latent_dim)
        if self.frames < 1 or self.joints < 1:
            raise ConfigurationError(
                f"frames and joints must be >= 1, got {self.frames}, {self.joints}"
            )
        if self.depth < 1:
            raise ConfigurationError(f"depth must be >= 1, got {self.depth}")
        if self.latent_dim % self.heads != 0:
            raise ConfigurationError(
                f"latent_dim {self.latent_dim} not divisible by heads {self.heads}"
            )
        if self.t_embed_dim % 2 != 0:
            raise ConfigurationError(
                f"t_embed_dim must be even, got {self.t_embed_dim}"
            )


@dataclass
class DenoiserParams:
    """Trainable weights plus the (non-trainable) error statistics."""

    weights: dict
    e_mean: np.ndarray  # (J, 3)
    e_std: np.ndarray   # (J, 3), floored away from zero

    def normalize_error(self, e: np.ndarray) -> np.ndarray:
        return (e - self.e_mean[None]) / self.e_std[None]

    def denormalize_error(self, z: np.ndarray) -> np.ndarray:
        return z * self.e_std[None] + self.e_mean[None]


def timestep_embedding(t: int, dim: int) -> np.ndarray:
    """Sinusoidal embedding: interleaved (sin, cos) pairs over log-spaced
    frequencies from 1 down to 1/10000."""
    if dim < 2 or dim % 2 != 0:
        raise ConfigurationError(f"embedding dim must be even and >= 2, got {dim}")
    if t < 0:
        raise ConfigurationError(f"timestep must be >= 0, got {t}")
    half = dim // 2
    if half == 1:
        freqs = np.ones(1)
    else:
        freqs = np.exp(-math.log(10000.0) * np.arange(half) / (half - 1))
    angles = float(t) * freqs
    out = np.empty(dim)
    out[0::2] = np.sin(angles)
    out[1::2] = np.cos(angles)
    return out


def _attention_shapes(prefix, q_dim, kv_dim, width):
    return [
        (prefix + ".wq", (q_dim, width)),
        (prefix + ".bq", (width,)),
        (prefix + ".wk", (kv_dim, width)),
        (prefix + ".bk", (width,)),
        (prefix + ".wv", (kv_dim, width)),
        (prefix + ".bv", (width,)),
        (prefix + ".wo", (width, width)),
        (prefix + ".bo", (width,)),
    ]


def param_shapes(config: DenoiserConfig) -> dict:
    """Canonical (ordered) name -> shape map for all trainable weights."""
    c = config.latent_dim
    shapes = [("input.w", (INPUT_CHANNELS, c)), ("input.b", (c,))]
    if config.use_positional_encoding:
        shapes += [("pos.temporal", (config.frames, c)), ("pos.spatial", (config.joints, c))]
    for layer in range(config.depth):
        p = f"block{layer}"
        shapes += [(p + ".ln_spatial.g", (c,)), (p + ".ln_spatial.b", (c,))]
        shapes += _attention_shapes(p + ".attn_spatial", c, c, c)
        shapes += [(p + ".ln_temporal.g", (c,)), (p + ".ln_temporal.b", (c,))]
        shapes += _attention_shapes(p + ".attn_temporal", c, c, c)
        shapes += [(p + ".ln_fuse.g", (c,)), (p + ".ln_fuse.b", (c,))]
        shapes += _attention_shapes(p + ".attn_fuse", c, config.t_embed_dim, c)
        shapes += [(p + ".ln_mlp.g", (c,)), (p + ".ln_mlp.b", (c,))]
        shapes += [
            (p + ".mlp.w1", (c, MLP_RATIO * c)),
            (p + ".mlp.b1", (MLP_RATIO * c,)),
            (p + ".mlp.w2", (MLP_RATIO * c, c)),
            (p + ".mlp.b2", (c,)),
        ]
    shapes += [
        ("final_ln.g", (c,)),
        ("final_ln.b", (c,)),
        ("output.w", (c, OUTPUT_CHANNELS)),
        ("output.b", (OUTPUT_CHANNELS,)),
    ]
    return dict(shapes)


def count_params(config: DenoiserConfig) -> int:
    """Closed-form parameter count.

    With C = latent_dim, D = t_embed_dim, L = depth, N = frames, J = joints:

        P = 6C + [ (N + J) C if positional encodings ]
            + L (18 C^2 + 2 D C + 25 C)
            + 2C + 3C + 3

    (input projection 5C + C; four layer norms per block 8C; two C->C
    self-attentions 2(4C^2 + 4C); fusion attention 2C^2 + 2DC + 4C; MLP
    8C^2 + 5C; final norm 2C; output projection 3C + 3.)
    """
    c, d, layers = config.latent_dim, config.t_embed_dim, config.depth
    total = 6 * c
    if config.use_positional_encoding:
        total += (config.frames + config.joints) * c
    total += layers * (18 * c * c + 2 * d * c + 25 * c)
    total += 2 * c + 3 * c + 3
    return total


def init_weights(
    config: DenoiserConfig, rng: np.random.Generator, zero_output: bool = True
) -> dict:
    """Fan-in-scaled uniform init; layer norms at identity.

    ``zero_output`` zeroes the final projection so an untrained denoiser
    predicts the mean error and the refiner starts near the identity.
    """
    weights = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".g"):
            weights[name] = np.ones(shape)
        elif name.startswith("pos."):
            weights[name] = POS_INIT_SCALE * rng.standard_normal(shape)
        elif name.startswith("output.") and zero_output:
            weights[name] = np.zeros(shape)
        elif len(shape) == 2:
            bound = 1.0 / math.sqrt(shape[0])
            weights[name] = rng.uniform(-bound, bound, shape)
        else:
            weights[name] = np.zeros(shape)
    return weights


def _check_inputs(params: DenoiserParams, config: DenoiserConfig, y, x_t):
    if "input.w" not in params.weights:
        raise ConfigurationError("denoiser weights are not initialized")
    if params.weights["input.w"].shape != (INPUT_CHANNELS, config.latent_dim):
        raise ConfigurationError("denoiser weights do not match the given config")
    expected_y = (config.frames, config.joints, 2)
    expected_x = (config.frames, config.joints, 3)
    if y.shape != expected_y:
        raise ShapeError(f"2D pose shape {y.shape} != expected {expected_y}")
    if x_t.shape != expected_x:
        raise ShapeError(f"diffusion state shape {x_t.shape} != expected {expected_x}")


def _forward_with_cache(params: DenoiserParams, config: DenoiserConfig, y, x_t, t):
    w = params.weights
    n, j, c = config.frames, config.joints, config.latent_dim
    tokens = np.concatenate([x_t, y], axis=-1)
    h, c_in = ops.linear_forward(tokens, w["input.w"], w["input.b"])
    if config.use_positional_encoding:
        h = h + w["pos.temporal"][:, None, :] + w["pos.spatial"][None, :, :]
    temb = timestep_embedding(t, config.t_embed_dim).reshape(1, 1, -1)

    blocks = []
    for layer in range(config.depth):
        p = f"block{layer}"
        bc = {}
        hn, bc["ln_s"] = ops.layernorm_forward(
            h, w[p + ".ln_spatial.g"], w[p + ".ln_spatial.b"]
        )
        a, bc["att_s"] = ops.attention_forward(
            hn, hn, w, p + ".attn_spatial", config.heads
        )
        h = h + a

        hn, bc["ln_t"] = ops.layernorm_forward(
            h, w[p + ".ln_temporal.g"], w[p + ".ln_temporal.b"]
        )
        ht = np.ascontiguousarray(hn.transpose(1, 0, 2))
        a, bc["att_t"] = ops.attention_forward(
            ht, ht, w, p + ".attn_temporal", config.heads
        )
        h = h + a.transpose(1, 0, 2)

        hn, bc["ln_f"] = ops.layernorm_forward(
            h, w[p + ".ln_fuse.g"], w[p + ".ln_fuse.b"]
        )
        a, bc["att_f"] = ops.attention_forward(
            hn.reshape(1, n * j, c), temb, w, p + ".attn_fuse", config.heads
        )
        h = h + a.reshape(n, j, c)

        hn, bc["ln_m"] = ops.layernorm_forward(
            h, w[p + ".ln_mlp.g"], w[p + ".ln_mlp.b"]
        )
        m1, bc["fc1"] = ops.linear_forward(hn, w[p + ".mlp.w1"], w[p + ".mlp.b1"])
        g1, bc["act"] = ops.gelu_forward(m1)
        m2, bc["fc2"] = ops.linear_forward(g1, w[p + ".mlp.w2"], w[p + ".mlp.b2"])
        h = h + m2
        blocks.append(bc)

    hn, c_final = ops.layernorm_forward(h, w["final_ln.g"], w["final_ln.b"])
    z, c_out = ops.linear_forward(hn, w["output.w"], w["output.b"])
    e_hat = params.denormalize_error(z)
    return e_hat, {"input": c_in, "blocks": blocks, "final": c_final, "out": c_out}


def forward(
    params: DenoiserParams, config: DenoiserConfig, y, x_t, t: int
) -> np.ndarray:
    """Predict the error in x_t at timestep t, conditioned on the 2D pose."""
    y = np.asarray(y, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    _check_inputs(params, config, y, x_t)
    e_hat, _ = _forward_with_cache(params, config, y, x_t, t)
    return e_hat


def _backward_from_output(params, config, caches, g_e_hat):
    w = params.weights
    n, j, c = config.frames, config.joints, config.latent_dim
    grads = {}

    gz = g_e_hat * params.e_std[None]
    gh, gw, gb = ops.linear_backward(gz, caches["out"])
    grads["output.w"] = gw
    grads["output.b"] = gb
    gx, gg, gb = ops.layernorm_backward(gh, caches["final"])
    grads["final_ln.g"] = gg
    grads["final_ln.b"] = gb
    gh = gx

    for layer in reversed(range(config.depth)):
        p = f"block{layer}"
        bc = caches["blocks"][layer]

        gm2, gw2, gb2 = ops.linear_backward(gh, bc["fc2"])
        grads[p + ".mlp.w2"] = gw2
        grads[p + ".mlp.b2"] = gb2
        gm1 = ops.gelu_backward(gm2, bc["act"])
        ghn, gw1, gb1 = ops.linear_backward(gm1, bc["fc1"])
        grads[p + ".mlp.w1"] = gw1
        grads[p + ".mlp.b1"] = gb1
        gx, gg, gb = ops.layernorm_backward(ghn, bc["ln_m"])
        grads[p + ".ln_mlp.g"] = gg
        grads[p + ".ln_mlp.b"] = gb
        gh = gh + gx

        gq, _gtemb = ops.attention_backward(
            gh.reshape(1, n * j, c), bc["att_f"], grads, p + ".attn_fuse"
        )
        gx, gg, gb = ops.layernorm_backward(gq.reshape(n, j, c), bc["ln_f"])
        grads[p + ".ln_fuse.g"] = gg
        grads[p + ".ln_fuse.b"] = gb
        gh = gh + gx

        ga = np.ascontiguousarray(gh.transpose(1, 0, 2))
        gq, gkv = ops.attention_backward(ga, bc["att_t"], grads, p + ".attn_temporal")
        gx, gg, gb = ops.layernorm_backward(
            (gq + gkv).transpose(1, 0, 2), bc["ln_t"]
        )
        grads[p + ".ln_temporal.g"] = gg
        grads[p + ".ln_temporal.b"] = gb
        gh = gh + gx

        gq, gkv = ops.attention_backward(gh, bc["att_s"], grads, p + ".attn_spatial")
        gx, gg, gb = ops.layernorm_backward(gq + gkv, bc["ln_s"])
        grads[p + ".ln_spatial.g"] = gg
        grads[p + ".ln_spatial.b"] = gb
        gh = gh + gx

    if config.use_positional_encoding:
        grads["pos.temporal"] = gh.sum(axis=1)
        grads["pos.spatial"] = gh.sum(axis=0)
    _gtokens, gw, gb = ops.linear_backward(gh, caches["input"])
    grads["input.w"] = gw
    grads["input.b"] = gb
    return grads


def loss(e_hat: np.ndarray, e: np.ndarray) -> float:
    """Mean over the batch of the Euclidean norm of the flattened residual.

    Accepts a single (N, J, 3) pair or batched (B, N, J, 3) arrays.
    """
    e_hat = np.asarray(e_hat, dtype=float)
    e = np.asarray(e, dtype=float)
    if e_hat.shape != e.shape:
        raise ShapeError(f"prediction shape {e_hat.shape} != target shape {e.shape}")
    if e_hat.ndim == 3:
        return float(np.linalg.norm(e_hat - e))
    diff = (e_hat - e).reshape(e_hat.shape[0], -1)
    return float(np.linalg.norm(diff, axis=1).mean())


def loss_and_gradients(params, config, example):
    """Forward + loss + exact backward for one training example."""
    e_hat, caches = _forward_with_cache(params, config, example.y, example.x_t, example.t)
    residual = e_hat - example.e
    value = float(np.linalg.norm(residual))
    g = residual / value if value > 0 else np.zeros_like(residual)
    grads = _backward_from_output(params, config, caches, g)
    return value, grads


def backward(params, config, example) -> dict:
    """Exact gradients of the loss w.r.t. every trainable weight."""
    _, grads = loss_and_gradients(params, config, example)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter block {name!r}")
    return grads


def make_error_stats(e_samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-joint mean/std of errors pooled over frames; std floored at 1e-8."""
    e_samples = np.asarray(e_samples, dtype=float)
    if e_samples.ndim != 3 or e_samples.shape[2] != 3:
        raise ShapeError(f"expected pooled (M, J, 3) errors, got {e_samples.shape}")
    mean = e_samples.mean(axis=0)
    std = np.maximum(e_samples.std(axis=0), STD_FLOOR)
    return mean, std


def as_predictor(params: DenoiserParams, config: DenoiserConfig):
    """Wrap the network as a ``predict(y, x_k, k)`` callable for refine()."""

    def predict(y, x_k, k):
        return forward(params, config, y, x_k, int(k))

    return predict

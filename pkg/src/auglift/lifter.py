"""Single-frame residual-MLP lifting network with hand-derived backprop.

The network maps flattened per-joint features to root-relative 3D joints in
millimeters: an input projection, ``num_blocks`` residual blocks of two
dense+ReLU+dropout layers each, and an output projection.  Changing the input
mode only changes the input width (2K/3K/4K channels); deeper layers are
untouched.

Internally the output projection is multiplied by a fixed ``output_scale``
(default 1000) so the dense layers operate at O(1) while targets are in mm;
the output bias is applied after the scale, in mm.

Inputs are laid out channel-blocked: ``X[:, c*K + j]`` is channel ``c`` of
joint ``j``, channels ordered (x, y[, c][, d]) or (x, y, od).  Gradients are
exact analytic derivatives (checked against central finite differences in the
test suite), and training is plain mini-batch gradient descent with optional
momentum so every update stays auditable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"ALFT"
CHECKPOINT_VERSION = 1


class InputMode(str, Enum):
    XY = "xy"
    XYC = "xyc"
    XYCD = "xycd"
    XY_OD3 = "xy_od3"

    @property
    def channels(self) -> int:
        return {InputMode.XY: 2, InputMode.XYC: 3, InputMode.XYCD: 4, InputMode.XY_OD3: 3}[self]

    @classmethod
    def parse(cls, name: str) -> "InputMode":
        key = name.strip().lower().replace("+", "_")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown input mode {name!r}")


@dataclass(frozen=True)
class LifterConfig:
    input_mode: InputMode = InputMode.XY
    joint_count: int = 17
    hidden_width: int = 1024
    num_blocks: int = 2
    dropout_rate: float = 0.25
    cue_dropout_rate: float = 0.1
    output_scale: float = 1000.0

    def __post_init__(self):
        if isinstance(self.input_mode, str):
            object.__setattr__(self, "input_mode", InputMode.parse(self.input_mode))
        if self.joint_count < 1 or self.hidden_width < 1 or self.num_blocks < 0:
            raise ValueError("invalid network shape")
        if not (0 <= self.dropout_rate < 1 and 0 <= self.cue_dropout_rate < 1):
            raise ValueError("dropout rates must lie in [0, 1)")

    @property
    def input_width(self) -> int:
        return self.input_mode.channels * self.joint_count

    @property
    def output_width(self) -> int:
        return 3 * self.joint_count

    def to_dict(self) -> dict:
        return {
            "input_mode": self.input_mode.value,
            "joint_count": self.joint_count,
            "hidden_width": self.hidden_width,
            "num_blocks": self.num_blocks,
            "dropout_rate": self.dropout_rate,
            "cue_dropout_rate": self.cue_dropout_rate,
            "output_scale": self.output_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LifterConfig":
        return cls(**d)


@dataclass
class LifterParams:
    """All trainable arrays; shapes are fixed by the config."""

    config: LifterConfig
    w_in: np.ndarray
    b_in: np.ndarray
    block_weights: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]  # (w1, b1, w2, b2)
    w_out: np.ndarray
    b_out: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out = [self.w_in, self.b_in]
        for w1, b1, w2, b2 in self.block_weights:
            out.extend([w1, b1, w2, b2])
        out.extend([self.w_out, self.b_out])
        return out

    def copy(self) -> "LifterParams":
        return LifterParams(
            config=self.config,
            w_in=self.w_in.copy(),
            b_in=self.b_in.copy(),
            block_weights=[tuple(a.copy() for a in blk) for blk in self.block_weights],
            w_out=self.w_out.copy(),
            b_out=self.b_out.copy(),
        )

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, flat: np.ndarray) -> "LifterParams":
        out = self.copy()
        i = 0
        for a in out.arrays():
            a[...] = flat[i : i + a.size].reshape(a.shape)
            i += a.size
        if i != flat.size:
            raise ValueError("flat vector size mismatch")
        return out


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 64
    epochs: int = 40
    seed: int = 0
    loss: str = "mse"  # "mse" | "mpjpe"
    momentum: float = 0.9
    lr_decay: float = 1.0  # multiplicative per-epoch factor

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.loss not in ("mse", "mpjpe"):
            raise ValueError("loss must be 'mse' or 'mpjpe'")


class TrainingDiverged(RuntimeError):
    pass


def init_params(cfg: LifterConfig, rng: np.random.Generator) -> LifterParams:
    """Gaussian weights with variance 1/fan_in, zero biases."""

    def dense(fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
        w = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))
        return w, np.zeros(fan_out)

    w_in, b_in = dense(cfg.input_width, cfg.hidden_width)
    blocks = []
    for _ in range(cfg.num_blocks):
        w1, b1 = dense(cfg.hidden_width, cfg.hidden_width)
        w2, b2 = dense(cfg.hidden_width, cfg.hidden_width)
        blocks.append((w1, b1, w2, b2))
    w_out, b_out = dense(cfg.hidden_width, cfg.output_width)
    return LifterParams(cfg, w_in, b_in, blocks, w_out, b_out)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def _draw_masks(cfg: LifterConfig, batch: int, rng: np.random.Generator):
    """Cue-dropout mask (B, K) and inverted-dropout masks per block layer."""
    cue = None
    if cfg.cue_dropout_rate > 0 and cfg.input_mode is not InputMode.XY:
        cue = rng.random((batch, cfg.joint_count)) >= cfg.cue_dropout_rate
    drop = []
    for _ in range(cfg.num_blocks):
        pair = []
        for _ in range(2):
            if cfg.dropout_rate > 0:
                keep = rng.random((batch, cfg.hidden_width)) >= cfg.dropout_rate
                pair.append(keep.astype(np.float64) / (1.0 - cfg.dropout_rate))
            else:
                pair.append(None)
        drop.append(tuple(pair))
    return cue, drop


def _apply_cue_dropout(x: np.ndarray, cfg: LifterConfig, cue_mask: np.ndarray | None) -> np.ndarray:
    """Zero the non-coordinate channels of masked-out joints."""
    if cue_mask is None:
        return x
    k = cfg.joint_count
    x = x.copy()
    for ch in range(2, cfg.input_mode.channels):
        x[:, ch * k : (ch + 1) * k] *= cue_mask
    return x


def _forward_pass(params: LifterParams, x: np.ndarray, masks=None):
    """Run the network; returns (pred, cache) where cache holds activations."""
    cfg = params.config
    cue, drop = masks if masks is not None else (None, [(None, None)] * cfg.num_blocks)
    xin = _apply_cue_dropout(x, cfg, cue)

    z0 = xin @ params.w_in + params.b_in
    h = np.maximum(z0, 0.0)

    block_cache = []
    for (w1, b1, w2, b2), (m1, m2) in zip(params.block_weights, drop):
        z1 = h @ w1 + b1
        a1 = np.maximum(z1, 0.0)
        d1 = a1 if m1 is None else a1 * m1
        z2 = d1 @ w2 + b2
        a2 = np.maximum(z2, 0.0)
        d2 = a2 if m2 is None else a2 * m2
        block_cache.append((h, z1, d1, z2, m1, m2))
        h = h + d2

    pred = cfg.output_scale * (h @ params.w_out) + params.b_out
    cache = (xin, z0, block_cache, h)
    return pred, cache


def forward(
    params: LifterParams,
    x: np.ndarray,
    phase: str = "eval",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Predict root-relative mm joints, shape (B, 3K) for input (B, input_width).

    ``phase='eval'`` applies no dropout and is deterministic; ``phase='train'``
    draws dropout and cue-dropout masks from ``rng``.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != params.config.input_width:
        raise ValueError(
            f"input width {x.shape[1]} does not match mode "
            f"{params.config.input_mode.value} (expected {params.config.input_width})"
        )
    if phase == "train":
        if rng is None:
            raise ValueError("train-phase forward needs an rng for dropout masks")
        masks = _draw_masks(params.config, x.shape[0], rng)
    elif phase == "eval":
        masks = None
    else:
        raise ValueError("phase must be 'train' or 'eval'")
    pred, _ = _forward_pass(params, x, masks)
    return pred[0] if squeeze else pred


def _loss_and_dpred(pred: np.ndarray, targets: np.ndarray, loss: str, joint_count: int):
    diff = pred - targets
    if loss == "mse":
        with np.errstate(over="ignore"):  # inf loss is caught as divergence
            value = float(np.mean(diff**2))
            dpred = 2.0 * diff / diff.size
        return value, dpred
    # mean per-joint Euclidean distance
    b = pred.shape[0]
    d3 = diff.reshape(b, joint_count, 3)
    norms = np.linalg.norm(d3, axis=2)
    value = float(norms.mean())
    # where the norm is zero the difference is zero, so the quotient is 0 too
    safe = np.where(norms > 0, norms, 1.0)
    dpred = (d3 / safe[:, :, None] / (b * joint_count)).reshape(pred.shape)
    return value, dpred


def loss_and_grad(
    params: LifterParams,
    inputs: np.ndarray,
    targets: np.ndarray,
    loss: str = "mse",
    rng: np.random.Generator | None = None,
) -> tuple[float, LifterParams]:
    """Batch loss and its exact analytic gradient (same shape as params).

    Dropout masks, when active, are drawn once from ``rng`` and held fixed, so
    the returned gradient is the exact derivative of the realized stochastic
    loss.  Non-finite losses abort.
    """
    cfg = params.config
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be non-empty and 2-D")
    if y.shape != (x.shape[0], cfg.output_width):
        raise ValueError(f"targets must have shape (B, {cfg.output_width})")

    needs_masks = cfg.dropout_rate > 0 or (
        cfg.cue_dropout_rate > 0 and cfg.input_mode is not InputMode.XY
    )
    if needs_masks and rng is None:
        raise ValueError("training with dropout needs an rng")
    masks = _draw_masks(cfg, x.shape[0], rng) if needs_masks else None

    pred, cache = _forward_pass(params, x, masks)
    value, dpred = _loss_and_dpred(pred, y, loss, cfg.joint_count)
    if not np.isfinite(value):
        raise TrainingDiverged(f"non-finite loss: {value}")

    xin, z0, block_cache, h_last = cache

    grad = LifterParams(
        config=cfg,
        w_in=np.zeros_like(params.w_in),
        b_in=np.zeros_like(params.b_in),
        block_weights=[tuple(np.zeros_like(a) for a in blk) for blk in params.block_weights],
        w_out=np.zeros_like(params.w_out),
        b_out=np.zeros_like(params.b_out),
    )

    grad.b_out[...] = dpred.sum(axis=0)
    dscaled = dpred * cfg.output_scale
    grad.w_out[...] = h_last.T @ dscaled
    dh = dscaled @ params.w_out.T

    for idx in range(cfg.num_blocks - 1, -1, -1):
        w1, b1, w2, b2 = params.block_weights[idx]
        h_in, z1, d1, z2, m1, m2 = block_cache[idx]
        # h_out = h_in + dropout(relu(z2)); z2 = dropout(relu(z1)) @ w2 + b2
        da2 = dh if m2 is None else dh * m2
        dz2 = da2 * (z2 > 0)
        gw1, gb1, gw2, gb2 = grad.block_weights[idx]
        gw2[...] = d1.T @ dz2
        gb2[...] = dz2.sum(axis=0)
        dd1 = dz2 @ w2.T
        da1 = dd1 if m1 is None else dd1 * m1
        dz1 = da1 * (z1 > 0)
        gw1[...] = h_in.T @ dz1
        gb1[...] = dz1.sum(axis=0)
        dh = dh + dz1 @ w1.T

    dz0 = dh * (z0 > 0)
    grad.w_in[...] = xin.T @ dz0
    grad.b_in[...] = dz0.sum(axis=0)

    return value, grad


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def train(
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: LifterConfig,
    train_cfg: TrainConfig,
) -> tuple[LifterParams, list[float]]:
    """Mini-batch gradient descent; returns final params and per-epoch losses.

    Updates descend the configured loss measured at the network's internal
    scale, i.e. the millimeter gradient divided by output_scale**2 for MSE
    (output_scale for MPJPE).  That is an exact constant rescaling of the
    objective - same minima, same trajectory as training on targets divided
    by output_scale - and keeps usable learning rates around 0.1 instead of
    1e-7.  Reported history values stay in millimeter units.

    Deterministic for fixed seeds and data.  Aborts when the epoch loss stays
    above 10x the initial epoch loss for 3 consecutive epochs.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("empty training split")
    if x.shape[0] != y.shape[0]:
        raise ValueError("inputs and targets disagree on sample count")

    init_rng = np.random.default_rng(np.random.SeedSequence((train_cfg.seed, 0)))
    loop_rng = np.random.default_rng(np.random.SeedSequence((train_cfg.seed, 1)))
    params = init_params(cfg, init_rng)
    velocity = [np.zeros_like(a) for a in params.arrays()]

    n = x.shape[0]
    history: list[float] = []
    bad_epochs = 0
    scale = cfg.output_scale**2 if train_cfg.loss == "mse" else cfg.output_scale
    lr = train_cfg.learning_rate / scale
    for epoch in range(train_cfg.epochs):
        order = loop_rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            value, grad = loss_and_grad(
                params, x[idx], y[idx], loss=train_cfg.loss, rng=loop_rng
            )
            epoch_losses.append(value)
            for vel, p_arr, g_arr in zip(velocity, params.arrays(), grad.arrays()):
                vel *= train_cfg.momentum
                vel -= lr * g_arr
                p_arr += vel
        history.append(float(np.mean(epoch_losses)))
        lr *= train_cfg.lr_decay

        if not np.isfinite(history[-1]):
            raise TrainingDiverged(f"non-finite epoch loss at epoch {epoch}")
        if history[-1] > 10.0 * history[0]:
            bad_epochs += 1
            if bad_epochs >= 3:
                raise TrainingDiverged(
                    f"loss {history[-1]:.4g} stayed above 10x initial "
                    f"({history[0]:.4g}) for 3 consecutive epochs"
                )
        else:
            bad_epochs = 0
    return params, history


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_params(params: LifterParams, path) -> None:
    """Binary checkpoint: magic, JSON header (config + shapes), little-endian f8 data."""
    header = {
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "shapes": [list(a.shape) for a in params.arrays()],
        "dtype": "<f8",
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in params.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_params(path) -> LifterParams:
    """Load a checkpoint; rejects bad magic, shape mismatches, truncation."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 8 or raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a lifter checkpoint")
    (hlen,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + hlen:
        raise ValueError(f"{path}: truncated header")
    try:
        header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: corrupt header: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    cfg = LifterConfig.from_dict(header["config"])

    tmp_rng = np.random.default_rng(0)
    expected = init_params(cfg, tmp_rng)
    shapes = [tuple(s) for s in header["shapes"]]
    if shapes != [a.shape for a in expected.arrays()]:
        raise ValueError(f"{path}: stored shapes do not match the embedded config")

    offset = 8 + hlen
    arrays = []
    for shape in shapes:
        size = int(np.prod(shape)) * 8
        chunk = raw[offset : offset + size]
        if len(chunk) != size:
            raise ValueError(f"{path}: truncated parameter data")
        arrays.append(np.frombuffer(chunk, dtype="<f8").reshape(shape).copy())
        offset += size
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after parameter data")

    blocks = []
    i = 2
    for _ in range(cfg.num_blocks):
        blocks.append(tuple(arrays[i : i + 4]))
        i += 4
    return LifterParams(
        config=cfg,
        w_in=arrays[0],
        b_in=arrays[1],
        block_weights=blocks,
        w_out=arrays[i],
        b_out=arrays[i + 1],
    )


# ---------------------------------------------------------------------------
# Feature building
# ---------------------------------------------------------------------------


def build_inputs(
    features: np.ndarray,
    mode: InputMode,
    resolution: tuple[int, int],
    od: np.ndarray | None = None,
) -> np.ndarray:
    """Flatten (N, K, 4) augmented features into (N, channels*K) network inputs.

    Pixel coordinates are mapped to roughly [-1, 1] using the image size so
    the dense layers see O(1) values; confidence and depth channels pass
    through unchanged.  ``od`` (N, K) replaces the confidence/depth channels
    in XY_OD3 mode.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 3 or feats.shape[2] != 4:
        raise ValueError("features must have shape (N, K, 4)")
    w, h = resolution
    half_w, half_h = (w - 1) / 2.0, (h - 1) / 2.0
    xn = (feats[:, :, 0] - half_w) / half_w
    yn = (feats[:, :, 1] - half_h) / half_h

    if mode is InputMode.XY:
        chans = [xn, yn]
    elif mode is InputMode.XYC:
        chans = [xn, yn, feats[:, :, 2]]
    elif mode is InputMode.XYCD:
        chans = [xn, yn, feats[:, :, 2], feats[:, :, 3]]
    elif mode is InputMode.XY_OD3:
        if od is None:
            raise ValueError("XY_OD3 mode needs an od channel")
        od = np.asarray(od, dtype=np.float64)
        if od.shape != feats.shape[:2]:
            raise ValueError("od channel shape must be (N, K)")
        chans = [xn, yn, od]
    else:  # pragma: no cover
        raise ValueError(f"unhandled mode {mode}")
    return np.concatenate(chans, axis=1)


def build_targets(gt_mm: np.ndarray) -> np.ndarray:
    """Flatten (N, K, 3) root-relative mm joints into (N, 3K) rows."""
    gt = np.asarray(gt_mm, dtype=np.float64)
    if gt.ndim != 3 or gt.shape[2] != 3:
        raise ValueError("ground truth must have shape (N, K, 3)")
    return gt.reshape(gt.shape[0], -1)

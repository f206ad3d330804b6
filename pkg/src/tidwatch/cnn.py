"""Compact convolutional binary classifier, built directly on the kernel
backends (no deep-learning framework).

Architecture: a configurable stack of (conv 3x3 valid -> ReLU -> optional
2x2 max-pool) blocks, flatten, one hidden dense layer with ReLU, and a
2-logit output head. Training is Adam on cross-entropy with
reduce-on-plateau and early stopping, monitoring test loss; arithmetic is
float64 by default for testability (float32 available behind the config).
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import backends, gadf
from .dataset import ANOMALOUS, DatasetSplit, LabeledWindow
from .errors import ChecksumError, ConfigError, DataFormatError, NumericError, VersionError
from .evaluation import MatchReport, prf

CHECKPOINT_MAGIC = b"TIDM"
CHECKPOINT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ConvBlock:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    pool: bool = True


@dataclass(frozen=True)
class CnnConfig:
    input_size: int = 64
    blocks: tuple[ConvBlock, ...] = (ConvBlock(8), ConvBlock(16), ConvBlock(32))
    hidden_units: int = 64
    n_classes: int = 2
    dtype: str = "float64"

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ConfigError("at least one conv block is required")
        if self.n_classes != 2:
            raise ConfigError("this classifier is binary; n_classes must be 2")
        if self.hidden_units < 1:
            raise ConfigError("hidden_units must be >= 1")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"dtype must be float64 or float32, got {self.dtype}")
        for block in self.blocks:
            if block.out_channels < 1 or block.kernel < 1 or block.stride < 1:
                raise ConfigError(f"invalid conv block {block}")
        self.feature_shape()  # raises if any stage collapses below 1 pixel

    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    def feature_shape(self) -> tuple[int, int, int]:
        """(channels, height, width) entering the dense head."""
        channels, size = 1, self.input_size
        for i, block in enumerate(self.blocks):
            if size < block.kernel:
                raise ConfigError(
                    f"block {i}: spatial size {size} smaller than kernel {block.kernel}"
                )
            size = (size - block.kernel) // block.stride + 1
            if block.pool:
                if size < 2:
                    raise ConfigError(f"block {i}: spatial size {size} too small to pool")
                size //= 2
            channels = block.out_channels
        return channels, size, size

    def flat_features(self) -> int:
        c, h, w = self.feature_shape()
        return c * h * w

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "blocks": [
                {
                    "out_channels": b.out_channels,
                    "kernel": b.kernel,
                    "stride": b.stride,
                    "pool": b.pool,
                }
                for b in self.blocks
            ],
            "hidden_units": self.hidden_units,
            "n_classes": self.n_classes,
            "dtype": self.dtype,
        }

    @staticmethod
    def from_dict(data: dict) -> "CnnConfig":
        return CnnConfig(
            input_size=int(data["input_size"]),
            blocks=tuple(
                ConvBlock(
                    out_channels=int(b["out_channels"]),
                    kernel=int(b["kernel"]),
                    stride=int(b["stride"]),
                    pool=bool(b["pool"]),
                )
                for b in data["blocks"]
            ),
            hidden_units=int(data["hidden_units"]),
            n_classes=int(data["n_classes"]),
            dtype=str(data["dtype"]),
        )


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 0.00025
    plateau_patience: int = 3
    plateau_factor: float = 0.5
    early_stop_patience: int = 8
    max_epochs: int = 100
    improvement_threshold: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ConfigError("plateau_factor must be in (0, 1)")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ConfigError("patience values must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.improvement_threshold < 0:
            raise ConfigError("improvement_threshold must be >= 0")


# ---------------------------------------------------------------------------
# model

@dataclass
class CnnModel:
    config: CnnConfig
    conv_w: list[np.ndarray]
    conv_b: list[np.ndarray]
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """Named tensors in the declared checkpoint order."""
        params: list[tuple[str, np.ndarray]] = []
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b)):
            params.append((f"conv{i}.w", w))
            params.append((f"conv{i}.b", b))
        params.append(("fc1.w", self.fc1_w))
        params.append(("fc1.b", self.fc1_b))
        params.append(("fc2.w", self.fc2_w))
        params.append(("fc2.b", self.fc2_b))
        return params

    def copy(self) -> "CnnModel":
        return CnnModel(
            self.config,
            [w.copy() for w in self.conv_w],
            [b.copy() for b in self.conv_b],
            self.fc1_w.copy(),
            self.fc1_b.copy(),
            self.fc2_w.copy(),
            self.fc2_b.copy(),
        )

    def set_parameters(self, values: dict[str, np.ndarray]) -> None:
        for name, current in self.parameters():
            current[...] = values[name]


def init_model(config: CnnConfig, seed: int = 0) -> CnnModel:
    """He-style init: w ~ N(0, 2/fan_in), zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    dtype = config.np_dtype()
    conv_w, conv_b = [], []
    cin = 1
    for block in config.blocks:
        fan_in = cin * block.kernel * block.kernel
        shape = (block.out_channels, cin, block.kernel, block.kernel)
        conv_w.append((rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype))
        conv_b.append(np.zeros(block.out_channels, dtype=dtype))
        cin = block.out_channels
    flat = config.flat_features()
    fc1_w = (rng.standard_normal((flat, config.hidden_units)) * np.sqrt(2.0 / flat)).astype(dtype)
    fc1_b = np.zeros(config.hidden_units, dtype=dtype)
    fc2_w = (
        rng.standard_normal((config.hidden_units, config.n_classes))
        * np.sqrt(2.0 / config.hidden_units)
    ).astype(dtype)
    fc2_b = np.zeros(config.n_classes, dtype=dtype)
    return CnnModel(config, conv_w, conv_b, fc1_w, fc1_b, fc2_w, fc2_b)


class Workspace:
    """Reusable buffer pool for the hot forward/backward path.

    Shapes repeat every step at a fixed batch size, so reusing buffers
    avoids refaulting tens of MB of fresh pages per training step. A
    workspace must not be shared across models or concurrent calls.
    """

    def __init__(self) -> None:
        self._store: dict = {}

    def get(self, key, shape: tuple, dtype) -> np.ndarray:
        buf = self._store.get(key)
        if buf is None or buf.shape != shape or buf.dtype != dtype:
            buf = np.empty(shape, dtype=dtype)
            self._store[key] = buf
        return buf


def _check_batch(model: CnnModel, batch: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(batch, dtype=model.config.np_dtype())
    size = model.config.input_size
    if x.ndim != 4 or x.shape[1] != 1 or x.shape[2] != size or x.shape[3] != size:
        raise ValueError(
            f"batch shape {batch.shape} does not match (B, 1, {size}, {size})"
        )
    return x


def forward_activations(
    model: CnnModel,
    batch: np.ndarray,
    want_cache: bool = False,
    ws: Workspace | None = None,
):
    """Run the net, returning (logits, per-stage activations, caches).

    activations[i] is block i's output (post pool); caches hold what
    backward needs (block inputs, ReLU masks, pool argmaxes). With a
    workspace, activations alias reusable buffers that are only valid
    until the next call using the same workspace.
    """
    x = _check_batch(model, batch)
    dtype = x.dtype
    use_buf = ws is not None and dtype == np.float64
    activations: list[np.ndarray] = []
    caches: list[dict] = []
    current = x
    for i, (block, w, b) in enumerate(zip(model.config.blocks, model.conv_w, model.conv_b)):
        kwargs = {}
        if use_buf:
            batch_n = current.shape[0]
            ho = (current.shape[2] - block.kernel) // block.stride + 1
            wo = (current.shape[3] - block.kernel) // block.stride + 1
            kwargs["out_buf"] = ws.get(("conv", i), (batch_n, block.out_channels, ho, wo), dtype)
        conv_out = backends.conv2d_forward(current, w, b, block.stride, **kwargs)
        np.maximum(conv_out, 0.0, out=conv_out)
        if want_cache:
            if use_buf:
                relu_mask = ws.get(("mask", i), conv_out.shape, np.bool_)
                np.greater(conv_out, 0, out=relu_mask)
            else:
                relu_mask = conv_out > 0
        else:
            relu_mask = None
        if block.pool:
            pool_kwargs = {}
            if use_buf:
                pooled_shape = (conv_out.shape[0], conv_out.shape[1],
                                conv_out.shape[2] // 2, conv_out.shape[3] // 2)
                pool_kwargs["out_buf"] = ws.get(("pool", i), pooled_shape, dtype)
                pool_kwargs["arg_buf"] = ws.get(("arg", i), pooled_shape, np.int64)
            pooled, argmax = backends.maxpool2d_forward(conv_out, **pool_kwargs)
        else:
            pooled, argmax = conv_out, None
        caches.append(
            {
                "input": current,
                "relu_mask": relu_mask,
                "pre_pool_shape": conv_out.shape,
                "argmax": argmax,
            }
        )
        activations.append(pooled)
        current = pooled

    flat = current.reshape(current.shape[0], -1)
    h_pre = flat @ model.fc1_w + model.fc1_b
    hidden = np.maximum(h_pre, 0.0)
    logits = hidden @ model.fc2_w + model.fc2_b
    caches.append({"flat": flat, "h_pre": h_pre, "hidden": hidden})
    return logits, activations, caches


def forward(model: CnnModel, batch: np.ndarray, ws: Workspace | None = None) -> np.ndarray:
    """Logits (B, 2) for a batch shaped (B, 1, H, W)."""
    logits, _, _ = forward_activations(model, batch, ws=ws)
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log softmax probability of the true class."""
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ValueError("logits must be (B, C) with one label per row")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(logits.shape[0]), labels]
    return float(np.mean(log_z - picked))


def backward(
    model: CnnModel,
    batch: np.ndarray,
    labels: np.ndarray,
    ws: Workspace | None = None,
) -> dict[str, np.ndarray]:
    """Exact gradients of cross_entropy(forward(batch), labels) per parameter."""
    logits, _, caches = forward_activations(model, batch, want_cache=True, ws=ws)
    return _backward_from(model, logits, caches, labels, ws)


def _backward_from(
    model: CnnModel,
    logits: np.ndarray,
    caches: list[dict],
    labels: np.ndarray,
    ws: Workspace | None = None,
) -> dict[str, np.ndarray]:
    """Gradients given the cached forward pass that produced `logits`."""
    labels = np.asarray(labels)
    n = logits.shape[0]
    if labels.shape != (n,):
        raise ValueError("one label per batch row required")
    use_buf = ws is not None and logits.dtype == np.float64

    grads: dict[str, np.ndarray] = {}
    dlogits = softmax(logits)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n

    head = caches[-1]
    grads["fc2.w"] = head["hidden"].T @ dlogits
    grads["fc2.b"] = dlogits.sum(axis=0)
    dhidden = dlogits @ model.fc2_w.T
    dhidden *= head["h_pre"] > 0
    grads["fc1.w"] = head["flat"].T @ dhidden
    grads["fc1.b"] = dhidden.sum(axis=0)
    dflat = dhidden @ model.fc1_w.T

    c, h, w = model.config.feature_shape()
    dcurrent = dflat.reshape(n, c, h, w)
    for i in reversed(range(len(model.config.blocks))):
        block = model.config.blocks[i]
        cache = caches[i]
        if block.pool:
            _, _, ph, pw = cache["pre_pool_shape"]
            kwargs = {}
            if use_buf:
                kwargs["gx_buf"] = ws.get(("poolbw", i), cache["pre_pool_shape"], dcurrent.dtype)
            dcurrent = backends.maxpool2d_backward(
                dcurrent, cache["argmax"], ph, pw, **kwargs
            )
        dcurrent *= cache["relu_mask"]
        kwargs = {}
        if use_buf and i > 0:
            kwargs["gx_buf"] = ws.get(("gx", i), cache["input"].shape, dcurrent.dtype)
        dcurrent, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = backends.conv2d_backward(
            cache["input"],
            model.conv_w[i],
            dcurrent,
            block.stride,
            need_grad_input=(i > 0),
            **kwargs,
        )
    return grads


# ---------------------------------------------------------------------------
# optimization

@dataclass
class AdamState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def init_adam_state(model: CnnModel) -> AdamState:
    zeros = {name: np.zeros_like(tensor) for name, tensor in model.parameters()}
    return AdamState(0, zeros, {name: arr.copy() for name, arr in zeros.items()})


def adam_step(
    model: CnnModel, grads: dict[str, np.ndarray], state: AdamState, lr: float
) -> tuple[CnnModel, AdamState]:
    """One in-place Adam update (beta1=0.9, beta2=0.999, eps=1e-8, bias-corrected)."""
    state.step += 1
    bc1 = 1.0 - ADAM_BETA1**state.step
    bc2 = 1.0 - ADAM_BETA2**state.step
    for name, tensor in model.parameters():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        tensor -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return model, state


# ---------------------------------------------------------------------------
# training

@dataclass
class EpochStats:
    epoch: int
    learning_rate: float
    train_loss: float
    test_loss: float
    test_precision: float
    test_recall: float
    test_f1: float


def encode_split(
    windows: Sequence[LabeledWindow], image_size: int, dtype: np.dtype
) -> tuple[np.ndarray, np.ndarray]:
    """GADF-encode labeled windows into a (N, 1, S, S) batch plus labels."""
    n = len(windows)
    x = np.empty((n, 1, image_size, image_size), dtype=dtype)
    y = np.empty(n, dtype=np.int64)
    for i, lw in enumerate(windows):
        x[i, 0] = gadf.encode_window(lw.window.values, image_size)
        y[i] = lw.label
    return x, y


def _evaluate(
    model: CnnModel, x: np.ndarray, y: np.ndarray, batch_size: int,
    ws: Workspace | None = None,
) -> tuple[float, float, float, float]:
    """(loss, precision, recall, f1) at the window level."""
    losses = []
    tp = fp = fn = 0
    for start in range(0, x.shape[0], batch_size):
        xb = x[start : start + batch_size]
        yb = y[start : start + batch_size]
        logits = forward(model, xb, ws=ws)
        losses.append(cross_entropy(logits, yb) * xb.shape[0])
        pred = logits.argmax(axis=1)
        tp += int(np.sum((pred == ANOMALOUS) & (yb == ANOMALOUS)))
        fp += int(np.sum((pred == ANOMALOUS) & (yb != ANOMALOUS)))
        fn += int(np.sum((pred != ANOMALOUS) & (yb == ANOMALOUS)))
    loss = float(np.sum(losses) / x.shape[0])
    metrics = prf(MatchReport(tp=tp, fp=fp, fn=fn))
    return loss, metrics.precision, metrics.recall, metrics.f1


def train(
    model: CnnModel, split: DatasetSplit, tcfg: TrainConfig
) -> tuple[CnnModel, list[EpochStats]]:
    """Mini-batch Adam with reduce-on-plateau and early stopping.

    Monitors test loss with the configured improvement threshold; the
    returned model carries the best-test-loss weights seen.
    """
    if not split.train or not split.test:
        raise DataFormatError("training requires non-empty train and test sets")
    dtype = model.config.np_dtype()
    x_train, y_train = encode_split(split.train, model.config.input_size, dtype)
    x_test, y_test = encode_split(split.test, model.config.input_size, dtype)
    return train_arrays(model, x_train, y_train, x_test, y_test, tcfg)


def train_arrays(
    model: CnnModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_test: np.ndarray,
    y_test: np.ndarray,
    tcfg: TrainConfig,
) -> tuple[CnnModel, list[EpochStats]]:
    """train() on pre-encoded image batches."""
    rng = np.random.default_rng(tcfg.seed)
    state = init_adam_state(model)
    ws = Workspace()
    lr = tcfg.learning_rate
    history: list[EpochStats] = []
    best_loss = np.inf
    best_params = {name: tensor.copy() for name, tensor in model.parameters()}
    epochs_since_best = 0

    for epoch in range(1, tcfg.max_epochs + 1):
        order = rng.permutation(x_train.shape[0])
        loss_sum = 0.0
        for start in range(0, order.size, tcfg.batch_size):
            idx = order[start : start + tcfg.batch_size]
            xb = x_train[idx]
            yb = y_train[idx]
            logits, _, caches = forward_activations(model, xb, want_cache=True, ws=ws)
            loss_sum += cross_entropy(logits, yb) * idx.size
            grads = _backward_from(model, logits, caches, yb, ws)
            model, state = adam_step(model, grads, state, lr)
        train_loss = loss_sum / order.size
        if not np.isfinite(train_loss):
            raise NumericError(f"training loss became non-finite at epoch {epoch}")

        test_loss, precision, recall, f1 = _evaluate(
            model, x_test, y_test, tcfg.batch_size, ws
        )
        history.append(
            EpochStats(epoch, lr, float(train_loss), test_loss, precision, recall, f1)
        )

        if best_loss - test_loss > tcfg.improvement_threshold:
            best_loss = test_loss
            best_params = {name: tensor.copy() for name, tensor in model.parameters()}
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= tcfg.early_stop_patience:
                break
            if epochs_since_best % tcfg.plateau_patience == 0:
                lr *= tcfg.plateau_factor

    model.set_parameters(best_params)
    return model, history


def predict(model: CnnModel, window_image: np.ndarray) -> tuple[int, float]:
    """Class and softmax probability for a single encoded window."""
    image = np.asarray(window_image)
    size = model.config.input_size
    if image.shape != (size, size):
        raise ValueError(f"image shape {image.shape} does not match ({size}, {size})")
    logits = forward(model, image[None, None, :, :])
    probs = softmax(logits)[0]
    cls = int(np.argmax(probs))
    return cls, float(probs[cls])


def predict_batch(model: CnnModel, images: np.ndarray) -> np.ndarray:
    """Argmax classes for a stack of encoded windows (N, S, S)."""
    logits = forward(model, images[:, None, :, :])
    return logits.argmax(axis=1)


HISTORY_HEADER = (
    "epoch", "learning_rate", "train_loss", "test_loss",
    "test_precision", "test_recall", "test_f1",
)


def write_history_csv(history: Iterable[EpochStats], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(HISTORY_HEADER)
        for row in history:
            writer.writerow(
                [
                    row.epoch,
                    f"{row.learning_rate:.9g}",
                    f"{row.train_loss:.9f}",
                    f"{row.test_loss:.9f}",
                    f"{row.test_precision:.6f}",
                    f"{row.test_recall:.6f}",
                    f"{row.test_f1:.6f}",
                ]
            )


# ---------------------------------------------------------------------------
# checkpointing

_CRC64_POLY = 0x42F0E1EBA9EA3693
_CRC64_TABLE: list[int] | None = None


def _crc64_table() -> list[int]:
    global _CRC64_TABLE
    if _CRC64_TABLE is None:
        table = []
        for byte in range(256):
            crc = byte << 56
            for _ in range(8):
                if crc & (1 << 63):
                    crc = ((crc << 1) ^ _CRC64_POLY) & 0xFFFFFFFFFFFFFFFF
                else:
                    crc = (crc << 1) & 0xFFFFFFFFFFFFFFFF
            table.append(crc)
        _CRC64_TABLE = table
    return _CRC64_TABLE


def crc64(data: bytes) -> int:
    """CRC-64/ECMA-182 (MSB-first, init 0)."""
    table = _crc64_table()
    crc = 0
    for byte in data:
        crc = ((crc << 8) & 0xFFFFFFFFFFFFFFFF) ^ table[((crc >> 56) ^ byte) & 0xFF]
    return crc


def save_checkpoint(model: CnnModel, path: str | Path) -> None:
    """Layout: magic, version byte, u32 config length, canonical-JSON config,
    u64 CRC-64 over config+tensors, float64-LE tensors in declared order."""
    config_bytes = json.dumps(
        model.config.to_dict(), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    tensor_bytes = b"".join(
        np.ascontiguousarray(tensor, dtype="<f8").tobytes() for _, tensor in model.parameters()
    )
    checksum = crc64(config_bytes + tensor_bytes)
    with open(path, "wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(struct.pack("<B", CHECKPOINT_VERSION))
        handle.write(struct.pack("<I", len(config_bytes)))
        handle.write(config_bytes)
        handle.write(struct.pack("<Q", checksum))
        handle.write(tensor_bytes)


def load_checkpoint(path: str | Path) -> CnnModel:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 9 or blob[:4] != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path}: not a model checkpoint")
    version = blob[4]
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    (config_len,) = struct.unpack("<I", blob[5:9])
    if len(blob) < 9 + config_len + 8:
        raise ChecksumError(f"{path}: truncated checkpoint header")
    config_bytes = blob[9 : 9 + config_len]
    (stored_crc,) = struct.unpack("<Q", blob[9 + config_len : 17 + config_len])
    tensor_bytes = blob[17 + config_len :]
    if crc64(config_bytes + tensor_bytes) != stored_crc:
        raise ChecksumError(f"{path}: checksum mismatch; file is corrupt or truncated")

    try:
        config = CnnConfig.from_dict(json.loads(config_bytes))
    except (KeyError, ValueError, TypeError) as exc:
        raise DataFormatError(f"{path}: bad checkpoint config: {exc}") from None
    model = init_model(config, seed=0)
    dtype = config.np_dtype()
    offset = 0
    for name, tensor in model.parameters():
        nbytes = tensor.size * 8
        if offset + nbytes > len(tensor_bytes):
            raise ChecksumError(f"{path}: tensor payload shorter than declared shapes")
        data = np.frombuffer(tensor_bytes, dtype="<f8", count=tensor.size, offset=offset)
        tensor[...] = data.reshape(tensor.shape).astype(dtype)
        offset += nbytes
    if offset != len(tensor_bytes):
        raise ChecksumError(f"{path}: {len(tensor_bytes) - offset} trailing bytes in payload")
    return model

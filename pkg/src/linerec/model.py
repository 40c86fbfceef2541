"""Two-branch recognition model: shared conv backbone, per-frame student head
(used at inference), and a bidirectional-recurrent teacher head (training only).

Forward and backward passes are written out explicitly over numpy so the
whole graph is checkable against central finite differences.  A 3x32x280
input yields 70 frames (width / 4 after two 2x2 mean pools); any input with
height and width divisible by 4 is accepted, which keeps tiny reduced models
testable.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import CharDict
from .errors import CheckpointCorruptError, DictMismatchError, ShapeMismatchError

CH1, CH2, CH3 = 16, 32, 64
RNN_HIDDEN = 32
FRAMES_FOR_FULL_WIDTH = 70  # 280 / 4

STUDENT_PARAMS = (
    "conv1_w", "conv1_b", "conv2_w", "conv2_b", "conv3_w", "conv3_b",
    "student_w", "student_b",
)
TEACHER_PARAMS = (
    "rnn_fwd_wx", "rnn_fwd_wh", "rnn_fwd_b",
    "rnn_bwd_wx", "rnn_bwd_wh", "rnn_bwd_b",
    "teacher_w", "teacher_b",
)
PARAM_ORDER = STUDENT_PARAMS + TEACHER_PARAMS


@dataclass
class ModelParams:
    dict_size: int
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(
            dict_size=self.dict_size,
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )

    def param_count(self) -> int:
        return sum(v.size for v in self.tensors.values())


def init_params(dict_size: int, seed: int, dtype=np.float32) -> ModelParams:
    """Fan-in-scaled uniform weights, zero biases; deterministic per seed."""
    if dict_size < 1:
        raise ValueError("dict_size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([0x0DE1, seed]))
    k = dict_size + 1

    def uniform(shape, fan_in):
        bound = float(np.sqrt(1.0 / fan_in))
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    t = {
        "conv1_w": uniform((CH1, 3, 3, 3), 3 * 9),
        "conv1_b": np.zeros(CH1, dtype=dtype),
        "conv2_w": uniform((CH2, CH1, 3, 3), CH1 * 9),
        "conv2_b": np.zeros(CH2, dtype=dtype),
        "conv3_w": uniform((CH3, CH2, 3, 3), CH2 * 9),
        "conv3_b": np.zeros(CH3, dtype=dtype),
        "student_w": uniform((k, CH3), CH3),
        "student_b": np.zeros(k, dtype=dtype),
        "rnn_fwd_wx": uniform((RNN_HIDDEN, CH3), CH3),
        "rnn_fwd_wh": uniform((RNN_HIDDEN, RNN_HIDDEN), RNN_HIDDEN),
        "rnn_fwd_b": np.zeros(RNN_HIDDEN, dtype=dtype),
        "rnn_bwd_wx": uniform((RNN_HIDDEN, CH3), CH3),
        "rnn_bwd_wh": uniform((RNN_HIDDEN, RNN_HIDDEN), RNN_HIDDEN),
        "rnn_bwd_b": np.zeros(RNN_HIDDEN, dtype=dtype),
        "teacher_w": uniform((k, 2 * RNN_HIDDEN), 2 * RNN_HIDDEN),
        "teacher_b": np.zeros(k, dtype=dtype),
    }
    return ModelParams(dict_size=dict_size, tensors=t)


# --- primitive layers ---

def _conv3x3_forward(x, w, b):
    n, c, h, wd = x.shape
    o = w.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    # cols rows are the (c, dy, dx) weight layout flattened to c*9 + dy*3 + dx
    cols = np.empty((n, c * 9, h * wd), dtype=x.dtype)
    view = cols.reshape(n, c, 9, h * wd)
    for dy in range(3):
        for dx in range(3):
            view[:, :, dy * 3 + dx, :] = (
                xp[:, :, dy:dy + h, dx:dx + wd].reshape(n, c, h * wd)
            )
    w2 = w.reshape(o, c * 9)
    out = np.matmul(w2[None], cols) + b[None, :, None]
    return out.reshape(n, o, h, wd), cols


def _conv3x3_backward(dout, cols, w, x_shape, need_dx=True):
    n, c, h, wd = x_shape
    o = w.shape[0]
    d2 = np.ascontiguousarray(dout.reshape(n, o, h * wd))
    dw = np.matmul(d2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = d2.sum(axis=(0, 2))
    if not need_dx:
        return dw, db, None
    w2 = w.reshape(o, c * 9)
    dcols = np.matmul(w2.T[None], d2).reshape(n, c, 9, h, wd)
    dxp = np.zeros((n, c, h + 2, wd + 2), dtype=dout.dtype)
    for dy in range(3):
        for dx in range(3):
            dxp[:, :, dy:dy + h, dx:dx + wd] += dcols[:, :, dy * 3 + dx]
    return dw, db, dxp[:, :, 1:-1, 1:-1]


def _pool2_forward(x):
    n, c, h, w = x.shape
    r = x.reshape(n, c, h // 2, 2, w // 2, 2)
    return (r[:, :, :, 0, :, 0] + r[:, :, :, 0, :, 1]
            + r[:, :, :, 1, :, 0] + r[:, :, :, 1, :, 1]) * 0.25


def _pool2_backward(dout):
    n, c, h, w = dout.shape
    up = np.broadcast_to(
        dout[:, :, :, None, :, None] * 0.25, (n, c, h, 2, w, 2)
    )
    return up.reshape(n, c, 2 * h, 2 * w)


@dataclass
class ForwardTrace:
    """Activations cached by forward() for the exact backward pass."""
    x: np.ndarray
    cols1: np.ndarray
    a1: np.ndarray
    cols2: np.ndarray
    a2: np.ndarray
    cols3: np.ndarray
    a3: np.ndarray
    frames: np.ndarray            # (N, T, CH3)
    student_logits: np.ndarray    # (N, T, V+1)
    hf: np.ndarray | None = None  # (N, T, RNN_HIDDEN)
    hb: np.ndarray | None = None
    concat: np.ndarray | None = None
    teacher_logits: np.ndarray | None = None


def forward(params: ModelParams, batch: np.ndarray, train_mode: bool) -> ForwardTrace:
    """Run the backbone plus the student head; teacher head only in train_mode.

    `batch` must be (N, 3, H, W) with H and W divisible by 4 and values
    normalized to [-1, 1]; the standard pipeline input is (N, 3, 32, 280).
    """
    x = np.asarray(batch)
    if x.ndim != 4 or x.shape[1] != 3:
        raise ShapeMismatchError(f"expected (N, 3, H, W) batch, got {x.shape}")
    n, _, h, w = x.shape
    if h % 4 != 0 or w % 4 != 0:
        raise ShapeMismatchError(f"height and width must be divisible by 4, got {h}x{w}")
    t = params.tensors

    z1, cols1 = _conv3x3_forward(x, t["conv1_w"], t["conv1_b"])
    a1 = np.maximum(z1, 0.0)
    p1 = _pool2_forward(a1)

    z2, cols2 = _conv3x3_forward(p1, t["conv2_w"], t["conv2_b"])
    a2 = np.maximum(z2, 0.0)
    p2 = _pool2_forward(a2)

    z3, cols3 = _conv3x3_forward(p2, t["conv3_w"], t["conv3_b"])
    a3 = np.maximum(z3, 0.0)
    frames = a3.mean(axis=2).transpose(0, 2, 1)  # (N, T=w/4, CH3)

    student_logits = frames @ t["student_w"].T + t["student_b"]

    trace = ForwardTrace(
        x=x, cols1=cols1, a1=a1, cols2=cols2, a2=a2, cols3=cols3, a3=a3,
        frames=frames, student_logits=student_logits,
    )
    if not train_mode:
        return trace

    frames_t = frames.shape[1]
    hf = np.zeros((n, frames_t, RNN_HIDDEN), dtype=frames.dtype)
    hb = np.zeros((n, frames_t, RNN_HIDDEN), dtype=frames.dtype)
    xf = frames @ t["rnn_fwd_wx"].T + t["rnn_fwd_b"]
    xb = frames @ t["rnn_bwd_wx"].T + t["rnn_bwd_b"]
    hprev = np.zeros((n, RNN_HIDDEN), dtype=frames.dtype)
    for step in range(frames_t):
        hprev = np.tanh(xf[:, step] + hprev @ t["rnn_fwd_wh"].T)
        hf[:, step] = hprev
    hprev = np.zeros((n, RNN_HIDDEN), dtype=frames.dtype)
    for step in range(frames_t - 1, -1, -1):
        hprev = np.tanh(xb[:, step] + hprev @ t["rnn_bwd_wh"].T)
        hb[:, step] = hprev
    concat = np.concatenate([hf, hb], axis=2)
    trace.hf, trace.hb, trace.concat = hf, hb, concat
    trace.teacher_logits = concat @ t["teacher_w"].T + t["teacher_b"]
    return trace


def backward(
    trace: ForwardTrace,
    d_student_logits: np.ndarray | None,
    d_teacher_logits: np.ndarray | None,
    params: ModelParams,
) -> dict[str, np.ndarray]:
    """Exact gradients for every parameter given upstream logit gradients.

    Either upstream gradient may be None (treated as zero); teacher-only
    losses leave student-head gradients at exactly zero and vice versa,
    while the backbone accumulates both paths.
    """
    t = params.tensors
    frames = trace.frames
    n, frames_t, _ = frames.shape
    dtype = frames.dtype
    grads = {k: np.zeros_like(v) for k, v in t.items()}
    dframes = np.zeros_like(frames)

    if d_student_logits is not None:
        ds = np.asarray(d_student_logits)
        if ds.shape != trace.student_logits.shape:
            raise ShapeMismatchError(
                f"student gradient {ds.shape} != logits {trace.student_logits.shape}"
            )
        k = ds.shape[2]
        grads["student_w"] = (
            ds.reshape(-1, k).T @ frames.reshape(-1, frames.shape[2])
        )
        grads["student_b"] = ds.sum(axis=(0, 1))
        dframes += ds @ t["student_w"]

    if d_teacher_logits is not None:
        if trace.teacher_logits is None:
            raise ShapeMismatchError("trace has no teacher logits (inference forward)")
        dt = np.asarray(d_teacher_logits)
        if dt.shape != trace.teacher_logits.shape:
            raise ShapeMismatchError(
                f"teacher gradient {dt.shape} != logits {trace.teacher_logits.shape}"
            )
        k = dt.shape[2]
        grads["teacher_w"] = (
            dt.reshape(-1, k).T @ trace.concat.reshape(-1, 2 * RNN_HIDDEN)
        )
        grads["teacher_b"] = dt.sum(axis=(0, 1))
        dconcat = dt @ t["teacher_w"]
        dhf = dconcat[:, :, :RNN_HIDDEN]
        dhb = dconcat[:, :, RNN_HIDDEN:]

        hf, hb = trace.hf, trace.hb
        dcarry = np.zeros((n, RNN_HIDDEN), dtype=dtype)
        for step in range(frames_t - 1, -1, -1):
            dh = dhf[:, step] + dcarry
            dz = dh * (1.0 - hf[:, step] ** 2)
            grads["rnn_fwd_wx"] += dz.T @ frames[:, step]
            grads["rnn_fwd_b"] += dz.sum(axis=0)
            if step > 0:
                grads["rnn_fwd_wh"] += dz.T @ hf[:, step - 1]
            dframes[:, step] += dz @ t["rnn_fwd_wx"]
            dcarry = dz @ t["rnn_fwd_wh"]
        dcarry = np.zeros((n, RNN_HIDDEN), dtype=dtype)
        for step in range(frames_t):
            dh = dhb[:, step] + dcarry
            dz = dh * (1.0 - hb[:, step] ** 2)
            grads["rnn_bwd_wx"] += dz.T @ frames[:, step]
            grads["rnn_bwd_b"] += dz.sum(axis=0)
            if step < frames_t - 1:
                grads["rnn_bwd_wh"] += dz.T @ hb[:, step + 1]
            dframes[:, step] += dz @ t["rnn_bwd_wx"]
            dcarry = dz @ t["rnn_bwd_wh"]

    # backbone: undo the height collapse, then conv/pool/relu in reverse
    a3 = trace.a3
    h3 = a3.shape[2]
    da3 = np.broadcast_to(
        dframes.transpose(0, 2, 1)[:, :, None, :] / h3, a3.shape
    ) * (a3 > 0)
    dw3, db3, dp2 = _conv3x3_backward(
        da3, trace.cols3, t["conv3_w"],
        (n, CH2, a3.shape[2], a3.shape[3]),
    )
    grads["conv3_w"], grads["conv3_b"] = dw3, db3

    da2 = _pool2_backward(dp2) * (trace.a2 > 0)
    dw2, db2, dp1 = _conv3x3_backward(
        da2, trace.cols2, t["conv2_w"],
        (n, CH1, trace.a2.shape[2], trace.a2.shape[3]),
    )
    grads["conv2_w"], grads["conv2_b"] = dw2, db2

    da1 = _pool2_backward(dp1) * (trace.a1 > 0)
    dw1, db1, _ = _conv3x3_backward(
        da1, trace.cols1, t["conv1_w"], trace.x.shape, need_dx=False,
    )
    grads["conv1_w"], grads["conv1_b"] = dw1, db1
    return grads


# --- checkpoint serialization ---

_CKPT_MAGIC = b"OCRM"
_CKPT_VERSION = 1


def save_checkpoint(path, params: ModelParams, char_dict: CharDict) -> None:
    """Write parameters plus the dictionary digest, CRC-sealed.

    Layout: magic `OCRM`, u32 version, 32-byte dict SHA-256, u32 param count,
    per-parameter manifest (name, shape, data offset), raw little-endian f32
    data, u32 CRC32 of everything before it.
    """
    if char_dict.size != params.dict_size:
        raise DictMismatchError(
            f"dictionary size {char_dict.size} != model dict_size {params.dict_size}"
        )
    header = bytearray()
    header += _CKPT_MAGIC
    header += struct.pack("<I", _CKPT_VERSION)
    header += char_dict.digest()
    header += struct.pack("<I", len(PARAM_ORDER))
    blobs = []
    offset = 0
    for name in PARAM_ORDER:
        arr = np.ascontiguousarray(params.tensors[name], dtype="<f4")
        nb = name.encode("utf-8")
        header += struct.pack("<I", len(nb)) + nb
        header += struct.pack("<I", arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape)
        header += struct.pack("<Q", offset)
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    blob = bytes(header) + b"".join(blobs)
    blob += struct.pack("<I", zlib.crc32(blob))
    Path(path).write_bytes(blob)


def load_checkpoint(path) -> tuple[ModelParams, bytes]:
    """Read a checkpoint; returns (params, dict_digest).  CRC-verified."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointCorruptError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < 48 or blob[:4] != _CKPT_MAGIC:
        raise CheckpointCorruptError(f"{path} is not a checkpoint file")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != crc:
        raise CheckpointCorruptError(f"{path} failed CRC validation")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _CKPT_VERSION:
        raise CheckpointCorruptError(f"{path} has unsupported version {version}")
    digest = blob[8:40]
    (n_params,) = struct.unpack_from("<I", blob, 40)
    pos = 44
    manifest = []
    try:
        for _ in range(n_params):
            (nlen,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (ndim,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            (off,) = struct.unpack_from("<Q", blob, pos)
            pos += 8
            manifest.append((name, shape, off))
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointCorruptError(f"{path} manifest is garbled: {exc}") from exc
    data_start = pos
    tensors = {}
    for name, shape, off in manifest:
        size = int(np.prod(shape)) if shape else 1
        start = data_start + off
        raw = blob[start:start + 4 * size]
        if len(raw) != 4 * size:
            raise CheckpointCorruptError(f"{path} data for {name} is truncated")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    if set(tensors) != set(PARAM_ORDER):
        raise CheckpointCorruptError(f"{path} parameter set does not match the model")
    dict_size = tensors["student_b"].shape[0] - 1
    return ModelParams(dict_size=dict_size, tensors=tensors), digest


def checkpoint_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()

"""Combined CTC + distillation training with AdamW.

The optimized objective per batch is
    lambda1 * ctc(student) + lambda2 * kd(student, teacher)
        + teacher_ctc_weight * ctc(teacher)
where kd is the temperature-scaled KL divergence from the teacher's frame
distributions to the student's.  The teacher receives gradient only through
its own CTC term; when that term is disabled (weight 0 or frozen teacher)
its parameters are left out of the optimizer entirely.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import ctc, model
from .dataset import CharDict, RecordStore, SplitSpec
from .errors import (
    DictMismatchError,
    EmptyTrainSetError,
    NonFiniteGradientError,
    ShapeMismatchError,
)


@dataclass(frozen=True)
class TrainConfig:
    lambda1: float = 1.0
    lambda2: float = 0.5
    kd_temperature: float = 2.0
    teacher_ctc_weight: float = 1.0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    epochs: int = 10
    batch_size: int = 8
    seed: int = 0
    freeze_teacher: bool = False

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda weights must be >= 0")
        if self.lambda1 + self.lambda2 <= 0:
            raise ValueError("lambda1 + lambda2 must be > 0")
        if self.kd_temperature <= 0:
            raise ValueError("kd_temperature must be > 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        """Parse a UTF-8 key=value file using the exact field names."""
        values = {}
        casts = {f.name: f.type for f in fields(cls)}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line (want key=value): {raw!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in casts:
                raise ValueError(f"unknown config key {key!r}")
            if casts[key] in ("int", int):
                values[key] = int(val)
            elif casts[key] in ("bool", bool):
                values[key] = val.lower() in ("1", "true", "yes")
            else:
                values[key] = float(val)
        return cls(**values)

    def with_overrides(self, **kwargs) -> "TrainConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


@dataclass
class LossRecord:
    step: int
    total: float    # lambda1 * ctc + lambda2 * kd  (the combined objective)
    ctc: float
    kd: float
    teacher: float  # teacher-branch CTC, logged separately
    skipped: int


def trace_to_csv(trace: list[LossRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "total", "ctc", "kd", "teacher", "skipped"])
    for r in trace:
        writer.writerow([r.step, repr(r.total), repr(r.ctc), repr(r.kd),
                         repr(r.teacher), r.skipped])
    return buf.getvalue()


def distill_loss(
    student_logits: np.ndarray,
    teacher_logits: np.ndarray,
    temperature: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Temperature-scaled KL(teacher || student), averaged over frames.

    Returns (value, d/d student_logits, d/d teacher_logits); the teacher
    distribution is the distillation target, so its gradient is zero.
    """
    s = np.asarray(student_logits, dtype=np.float64)
    t = np.asarray(teacher_logits, dtype=np.float64)
    if s.shape != t.shape:
        raise ShapeMismatchError(f"student {s.shape} vs teacher {t.shape}")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    tau = float(temperature)
    n_frames = s.shape[0]
    p = ctc.softmax(t / tau)
    log_p = ctc.log_softmax(t / tau)
    log_q = ctc.log_softmax(s / tau)
    kl = (p * (log_p - log_q)).sum(axis=-1).mean()
    value = float(tau * tau * kl)
    q = ctc.softmax(s / tau)
    grad_student = tau * (q - p) / n_frames
    return value, grad_student, np.zeros_like(t)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, params: dict[str, np.ndarray]) -> None:
        for name, arr in params.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(arr, dtype=np.float64)
                self.v[name] = np.zeros_like(arr, dtype=np.float64)


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
    step_index: int,
) -> None:
    """One decoupled-weight-decay Adam update, in place.

    param <- param - lr * mhat / (sqrt(vhat) + eps) - lr * weight_decay * param
    """
    if step_index < 1:
        raise ValueError("step_index must be >= 1")
    state.ensure(params)
    b1, b2 = config.beta1, config.beta2
    lr, eps, wd = config.learning_rate, config.eps, config.weight_decay
    bc1 = 1.0 - b1**step_index
    bc2 = 1.0 - b2**step_index
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mhat = m / bc1
        vhat = v / bc2
        update = lr * mhat / (np.sqrt(vhat) + eps) + lr * wd * p
        p -= update.astype(p.dtype) if p.dtype != update.dtype else update


@dataclass
class TrainResult:
    params: model.ModelParams
    trace: list[LossRecord]
    val_exact_accuracy: list[float]  # one entry per epoch
    skipped_total: int


def _normalize_batch(images: np.ndarray) -> np.ndarray:
    """uint8 (N, H, W, 3) -> float32 (N, 3, H, W) in [-1, 1]."""
    x = images.astype(np.float32) / 255.0
    x = (x - 0.5) / 0.5
    return x.transpose(0, 3, 1, 2)


def _teacher_active(config: TrainConfig) -> bool:
    return config.teacher_ctc_weight > 0 and not config.freeze_teacher


def _teacher_needed(config: TrainConfig) -> bool:
    return config.lambda2 > 0 or _teacher_active(config)


def run_training(
    train_images: np.ndarray,
    train_labels: list[str],
    char_dict: CharDict,
    config: TrainConfig,
    init: model.ModelParams,
    val_images: np.ndarray | None = None,
    val_labels: list[str] | None = None,
    log=None,
) -> TrainResult:
    """Train on in-memory uint8 images; the core loop behind `train`.

    Deterministic per config.seed: a fixed per-epoch shuffle, no
    nondeterministic reductions.  Samples whose label cannot be aligned in
    the frame budget are skipped and counted, never silently dropped.
    """
    n = len(train_labels)
    if n == 0:
        raise EmptyTrainSetError("no training samples")
    if train_images.shape[0] != n:
        raise ShapeMismatchError("images and labels disagree in length")
    encoded = []
    for label in train_labels:
        try:
            encoded.append(char_dict.encode(label))
        except Exception as exc:
            raise DictMismatchError(str(exc)) from exc
    if init.dict_size != char_dict.size:
        raise DictMismatchError(
            f"model dict_size {init.dict_size} != dictionary size {char_dict.size}"
        )

    params = init.copy()
    teacher_active = _teacher_active(config)
    teacher_needed = _teacher_needed(config)
    active_names = list(model.STUDENT_PARAMS)
    if teacher_active:
        active_names += list(model.TEACHER_PARAMS)

    state = AdamState()
    trace: list[LossRecord] = []
    val_acc: list[float] = []
    skipped_total = 0
    step = 0
    rng = np.random.default_rng(np.random.SeedSequence([0x7124, config.seed]))

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = _normalize_batch(train_images[idx])
            labels = [encoded[i] for i in idx]
            step += 1

            tr = model.forward(params, batch, train_mode=teacher_needed)
            frames_t = tr.student_logits.shape[1]

            usable = [
                j for j, lab in enumerate(labels)
                if ctc.min_frames(lab) <= frames_t
            ]
            skipped = len(labels) - len(usable)
            skipped_total += skipped

            d_student = np.zeros_like(tr.student_logits)
            d_teacher = (
                np.zeros_like(tr.teacher_logits) if teacher_active else None
            )
            ctc_val = kd_val = teacher_val = 0.0
            if usable:
                inv = 1.0 / len(usable)
                for j in usable:
                    res = ctc.ctc_loss_grad(tr.student_logits[j], labels[j])
                    ctc_val += res.loss * inv
                    d_student[j] += config.lambda1 * inv * res.grad
                    if config.lambda2 > 0:
                        kd, g_s, _ = distill_loss(
                            tr.student_logits[j], tr.teacher_logits[j],
                            config.kd_temperature,
                        )
                        kd_val += kd * inv
                        d_student[j] += config.lambda2 * inv * g_s
                    if teacher_active:
                        tres = ctc.ctc_loss_grad(tr.teacher_logits[j], labels[j])
                        teacher_val += tres.loss * inv
                        d_teacher[j] += config.teacher_ctc_weight * inv * tres.grad

                grads = model.backward(tr, d_student, d_teacher, params)
                adamw_step(
                    {k: params.tensors[k] for k in active_names},
                    {k: grads[k] for k in active_names},
                    state, config, step,
                )

            total = config.lambda1 * ctc_val + config.lambda2 * kd_val
            trace.append(LossRecord(step, total, ctc_val, kd_val, teacher_val, skipped))
            if log is not None and step % 50 == 0:
                log(f"step {step}: total={total:.4f} ctc={ctc_val:.4f} kd={kd_val:.4f}")

        if val_images is not None and val_labels is not None and len(val_labels):
            val_acc.append(
                _exact_accuracy(params, val_images, val_labels, char_dict)
            )
            if log is not None:
                log(f"epoch {epoch + 1}: val exact accuracy {val_acc[-1]:.3f}")

    return TrainResult(
        params=params, trace=trace, val_exact_accuracy=val_acc,
        skipped_total=skipped_total,
    )


def decode_batch(
    params: model.ModelParams,
    images: np.ndarray,
    char_dict: CharDict,
    batch_size: int = 32,
) -> list[ctc.Prediction]:
    """Student-branch greedy decoding over uint8 (N, H, W, 3) images."""
    preds = []
    for start in range(0, images.shape[0], batch_size):
        batch = _normalize_batch(images[start:start + batch_size])
        tr = model.forward(params, batch, train_mode=False)
        for j in range(batch.shape[0]):
            preds.append(ctc.greedy_decode(tr.student_logits[j], char_dict))
    return preds


def _exact_accuracy(params, images, labels, char_dict) -> float:
    preds = decode_batch(params, images, char_dict)
    hits = sum(1 for p, gt in zip(preds, labels) if p.text == gt)
    return hits / len(labels)


def load_split_arrays(
    store: RecordStore, ids: list[str]
) -> tuple[np.ndarray, list[str]]:
    """Decode store records for `ids` into stacked uint8 images + labels."""
    images = np.stack([store.load_image(k) for k in ids]) if ids else \
        np.zeros((0, 32, 280, 3), dtype=np.uint8)
    labels = [store.label(k) for k in ids]
    return images, labels


def train(
    store: RecordStore,
    split: SplitSpec,
    char_dict: CharDict,
    config: TrainConfig,
    init: model.ModelParams | None = None,
    log=None,
) -> TrainResult:
    """Record-store front end of the training loop.

    `init` is a fresh seeded model when None; pass loaded checkpoint
    parameters to fine-tune from an existing model.
    """
    if not split.train_ids:
        raise EmptyTrainSetError("training split is empty")
    train_images, train_labels = load_split_arrays(store, split.train_ids)
    val_images, val_labels = load_split_arrays(store, split.val_ids)
    if init is None:
        init = model.init_params(char_dict.size, seed=config.seed)
    return run_training(
        train_images, train_labels, char_dict, config, init,
        val_images=val_images if split.val_ids else None,
        val_labels=val_labels if split.val_ids else None,
        log=log,
    )

"""CTC loss, analytic gradient, brute-force oracle, and greedy decoding.

All probability bookkeeping runs in natural-log space; 70-frame sequences
underflow linear space long before they trouble log space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleLabelError, TooLargeError

NEG_INF = -np.inf


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


@dataclass
class CtcResult:
    loss: float
    grad: np.ndarray  # (T, V+1), d loss / d logits


@dataclass
class Prediction:
    """Decoded text with per-character probabilities and a line confidence."""
    text: str
    confidence: float
    per_char: list[tuple[str, float]]
    frames: int
    elapsed: float = 0.0
    aspect_broken: bool = False


def min_frames(label) -> int:
    """Fewest frames that can emit `label`: length plus adjacent repeats."""
    repeats = sum(1 for a, b in zip(label, label[1:]) if a == b)
    return len(label) + repeats


def _extended(label) -> np.ndarray:
    """Blank-interleaved label: [0, l1, 0, l2, ..., lL, 0]."""
    ext = np.zeros(2 * len(label) + 1, dtype=np.int64)
    ext[1::2] = label
    return ext


def _validate(logits: np.ndarray, label) -> None:
    T, K = logits.shape
    if len(label) < 1:
        raise InfeasibleLabelError("label must contain at least one symbol")
    if not all(1 <= int(k) <= K - 1 for k in label):
        raise ValueError(f"label indices must lie in [1, {K - 1}]")
    need = min_frames(label)
    if T < need:
        raise InfeasibleLabelError(
            f"label needs at least {need} frames, logits provide {T}"
        )


def ctc_loss_grad(logits: np.ndarray, label) -> CtcResult:
    """Negative log-probability of `label` under CTC, with its exact gradient.

    Forward/backward recursions run over the blank-extended label; the
    gradient is softmax(logits) minus the per-frame posterior class mass.
    Raises InfeasibleLabelError when the label cannot fit in T frames.
    """
    logits = np.asarray(logits, dtype=np.float64)
    _validate(logits, label)
    T, K = logits.shape
    ext = _extended(label)
    S = ext.size

    logp = log_softmax(logits)
    em = logp[:, ext]  # (T, S) emission log-probs at each extended position

    # skip transition s-2 -> s is legal when position s is a non-blank that
    # differs from the non-blank two steps back
    allow_skip = np.zeros(S, dtype=bool)
    allow_skip[2:] = (ext[2:] != 0) & (ext[2:] != ext[:-2])

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = em[0, 0]
    if S > 1:
        alpha[0, 1] = em[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        stay = prev
        step = np.concatenate(([NEG_INF], prev[:-1]))
        skip = np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))
        skip = np.where(allow_skip, skip, NEG_INF)
        alpha[t] = np.logaddexp(np.logaddexp(stay, step), skip) + em[t]

    tail = alpha[T - 1, S - 2] if S > 1 else NEG_INF
    log_p = np.logaddexp(alpha[T - 1, S - 1], tail)
    if not np.isfinite(log_p):
        raise InfeasibleLabelError("label has zero probability mass")

    # beta[t, s]: log-prob of completing the path after emitting at (t, s)
    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + em[t + 1]
        stay = nxt
        step = np.concatenate((nxt[1:], [NEG_INF]))
        skip = np.concatenate((nxt[2:], [NEG_INF, NEG_INF]))
        skip = np.where(
            np.concatenate((allow_skip[2:], [False, False])), skip, NEG_INF
        )
        beta[t] = np.logaddexp(np.logaddexp(stay, step), skip)

    posterior = np.exp(alpha + beta - log_p)  # (T, S)
    gamma = np.zeros((T, K))
    for s in range(S):
        gamma[:, ext[s]] += posterior[:, s]
    grad = softmax(logits) - gamma
    return CtcResult(loss=float(-log_p), grad=grad)


def collapse(path, blank: int = 0) -> list[int]:
    """CTC collapse: merge adjacent repeats, then drop blanks."""
    out = []
    prev = None
    for k in path:
        if k != prev and k != blank:
            out.append(k)
        prev = k
    return out


def ctc_brute_force(logits: np.ndarray, label) -> float:
    """Oracle: enumerate every alignment path and sum matching probabilities.

    Returns -ln(sum); +inf when no path collapses to the label.  Refuses
    instances with more than 10^6 paths.
    """
    logits = np.asarray(logits, dtype=np.float64)
    T, K = logits.shape
    if K**T > 10**6:
        raise TooLargeError(f"{K}^{T} paths exceed the enumeration cap")
    probs = softmax(logits)
    target = list(int(k) for k in label)
    total = 0.0
    for path in itertools.product(range(K), repeat=T):
        if collapse(path) == target:
            p = 1.0
            for t, k in enumerate(path):
                p *= probs[t, k]
            total += p
    if total == 0.0:
        return math.inf
    return -math.log(total)


def greedy_decode(logits: np.ndarray, char_dict) -> Prediction:
    """Best-path decode: per-frame argmax, collapse repeats, strip blanks.

    Each emitted character carries the max softmax probability of the first
    frame of its run; line confidence is the mean of per-frame max
    probabilities over frames whose argmax is non-blank (0 for an empty
    decode).
    """
    logits = np.asarray(logits, dtype=np.float64)
    T, K = logits.shape
    if char_dict.size != K - 1:
        from .errors import DictMismatchError

        raise DictMismatchError(
            f"dictionary size {char_dict.size} != logit classes minus blank {K - 1}"
        )
    probs = softmax(logits)
    arg = probs.argmax(axis=1)
    mx = probs[np.arange(T), arg]

    chars: list[tuple[str, float]] = []
    prev = -1
    for t in range(T):
        k = int(arg[t])
        if k != prev and k != 0:
            chars.append((char_dict.chars[k - 1], float(mx[t])))
        prev = k

    emitting = arg != 0
    confidence = float(mx[emitting].mean()) if emitting.any() else 0.0
    return Prediction(
        text="".join(ch for ch, _ in chars),
        confidence=confidence,
        per_char=chars,
        frames=T,
    )

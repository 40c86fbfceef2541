"""Recognition metrics: exact/partial accuracy, confidence, stratified analysis.

Partial accuracy counts predictions within `partial_threshold` edits
(default 1) of the ground truth, which also covers every exact match, so
exact <= partial by construction.  Edit units are Unicode scalar values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EmptyInputError,
    LengthMismatchError,
    MissingMetadataError,
    SampleCountMismatchError,
)

METRIC_ROWS = (
    ("exact_accuracy", "Exact Accuracy"),
    ("partial_accuracy", "Partial Accuracy"),
    ("avg_confidence", "Average Confidence"),
    ("total_recognized_chars", "Total Recognized Characters"),
)


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (ca != cb),
            ))
        prev = cur
    return prev[-1]


@dataclass
class EvalPrediction:
    """Minimal prediction view the evaluator needs (text + confidence)."""
    text: str
    confidence: float


@dataclass
class Stratum:
    name: str
    n: int
    exact_accuracy: float


@dataclass
class EvalReport:
    n_samples: int
    exact_accuracy: float
    partial_accuracy: float
    avg_confidence: float
    total_recognized_chars: int
    strata: list[Stratum]

    def as_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "exact_accuracy": self.exact_accuracy,
            "partial_accuracy": self.partial_accuracy,
            "avg_confidence": self.avg_confidence,
            "total_recognized_chars": self.total_recognized_chars,
            "strata": [
                {"name": s.name, "n": s.n, "exact_accuracy": s.exact_accuracy}
                for s in self.strata
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1)


def evaluate(predictions, ground_truths, partial_threshold: int = 1) -> EvalReport:
    """Compute the headline metrics over aligned prediction/truth lists."""
    if len(predictions) != len(ground_truths):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(ground_truths)} ground truths"
        )
    n = len(predictions)
    if n == 0:
        raise EmptyInputError("cannot evaluate zero samples")
    exact = sum(1 for p, gt in zip(predictions, ground_truths) if p.text == gt)
    partial = sum(
        1 for p, gt in zip(predictions, ground_truths)
        if edit_distance(p.text, gt) <= partial_threshold
    )
    return EvalReport(
        n_samples=n,
        exact_accuracy=exact / n,
        partial_accuracy=partial / n,
        avg_confidence=sum(p.confidence for p in predictions) / n,
        total_recognized_chars=sum(len(p.text) for p in predictions),
        strata=[],
    )


def char_frequencies(labels) -> dict[str, int]:
    """Character occurrence counts over a label corpus (rarity reference)."""
    freq: dict[str, int] = {}
    for label in labels:
        for ch in label:
            freq[ch] = freq.get(ch, 0) + 1
    return freq


def _sigma_bucket(value: float, prefix: str) -> str:
    if value == 0.0:
        return f"{prefix}=0"
    if value <= 1.0:
        return f"0<{prefix}<=1"
    return f"{prefix}>1"


def stratify(
    samples,
    predictions,
    scheme: str,
    train_char_freq: dict[str, int] | None = None,
) -> list[Stratum]:
    """Bucket samples under `scheme` and report per-bucket exact accuracy.

    `samples` need `.label`, plus `.meta` for the blur/noise schemes; the
    char_rarity scheme buckets by each sample's rarest character using
    training-corpus frequencies.  Buckets always partition the sample set.
    """
    if len(samples) != len(predictions):
        raise LengthMismatchError(
            f"{len(samples)} samples vs {len(predictions)} predictions"
        )
    if len(samples) == 0:
        raise EmptyInputError("cannot stratify zero samples")

    if scheme in ("blur", "noise"):
        attr = "blur_sigma" if scheme == "blur" else "noise_std"
        names = [f"{scheme}=0", f"0<{scheme}<=1", f"{scheme}>1"]
        keys = []
        for s in samples:
            meta = getattr(s, "meta", None)
            if meta is None:
                raise MissingMetadataError(f"{scheme} scheme needs degradation metadata")
            keys.append(_sigma_bucket(float(getattr(meta, attr)), scheme))
    elif scheme == "char_rarity":
        if train_char_freq is None:
            raise MissingMetadataError(
                "char_rarity scheme needs a training character frequency table"
            )
        rarity = [
            min(train_char_freq.get(ch, 0) for ch in s.label) for s in samples
        ]
        q1, q2, q3 = np.quantile(rarity, [0.25, 0.5, 0.75])
        names = ["rarity_q1", "rarity_q2", "rarity_q3", "rarity_q4"]

        def rarity_bucket(v):
            if v <= q1:
                return "rarity_q1"
            if v <= q2:
                return "rarity_q2"
            if v <= q3:
                return "rarity_q3"
            return "rarity_q4"

        keys = [rarity_bucket(v) for v in rarity]
    elif scheme == "label_length":
        names = ["len_1_3", "len_4_6", "len_7_10", "len_over_10"]

        def length_bucket(n):
            if n <= 3:
                return "len_1_3"
            if n <= 6:
                return "len_4_6"
            if n <= 10:
                return "len_7_10"
            return "len_over_10"

        keys = [length_bucket(len(s.label)) for s in samples]
    else:
        raise ValueError(f"unknown stratification scheme {scheme!r}")

    hits = {name: 0 for name in names}
    counts = {name: 0 for name in names}
    for s, p, key in zip(samples, predictions, keys):
        counts[key] += 1
        hits[key] += int(p.text == s.label)
    return [
        Stratum(name, counts[name],
                hits[name] / counts[name] if counts[name] else 0.0)
        for name in names
    ]


@dataclass
class ComparisonReport:
    before: EvalReport
    after: EvalReport
    deltas: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "before": self.before.as_dict(),
            "after": self.after.as_dict(),
            "deltas": self.deltas,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1)


def compare(before: EvalReport, after: EvalReport) -> ComparisonReport:
    """Per-metric after-minus-before deltas over equal-sized evaluations."""
    if before.n_samples != after.n_samples:
        raise SampleCountMismatchError(
            f"before covers {before.n_samples} samples, after {after.n_samples}"
        )
    deltas = {
        key: getattr(after, key) - getattr(before, key)
        for key, _ in METRIC_ROWS
    }
    return ComparisonReport(before=before, after=after, deltas=deltas)


def render_comparison(report: ComparisonReport) -> str:
    """Aligned plain-text table in the canonical metric row order."""
    rows = [("Metric", "Before", "After", "Delta")]
    for key, title in METRIC_ROWS:
        b = getattr(report.before, key)
        a = getattr(report.after, key)
        d = report.deltas[key]
        if key == "total_recognized_chars":
            rows.append((title, f"{b:,}", f"{a:,}", f"{d:+,.0f}"))
        else:
            rows.append((title, f"{100 * b:.1f}%", f"{100 * a:.1f}%", f"{100 * d:+.1f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = []
    for r in rows:
        lines.append(
            r[0].ljust(widths[0]) + "  "
            + "  ".join(r[i].rjust(widths[i]) for i in range(1, 4))
        )
    return "\n".join(lines) + "\n"


def render_report(report: EvalReport) -> str:
    """Human-readable single-report table, strata included."""
    lines = [
        f"samples                      {report.n_samples}",
        f"exact accuracy               {100 * report.exact_accuracy:.1f}%",
        f"partial accuracy             {100 * report.partial_accuracy:.1f}%",
        f"average confidence           {100 * report.avg_confidence:.1f}%",
        f"total recognized characters  {report.total_recognized_chars:,}",
    ]
    for s in report.strata:
        lines.append(
            f"  [{s.name}]  n={s.n}  exact={100 * s.exact_accuracy:.1f}%"
        )
    return "\n".join(lines) + "\n"


def write_predictions_tsv(ids, predictions, path) -> None:
    """One `id<TAB>text<TAB>confidence` line per sample."""
    with open(path, "w", encoding="utf-8") as fh:
        for sid, p in zip(ids, predictions):
            fh.write(f"{sid}\t{p.text}\t{p.confidence!r}\n")


def read_predictions_tsv(path) -> tuple[list[str], list[EvalPrediction]]:
    ids = []
    preds = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        sid, text, conf = line.split("\t")
        ids.append(sid)
        preds.append(EvalPrediction(text=text, confidence=float(conf)))
    return ids, preds

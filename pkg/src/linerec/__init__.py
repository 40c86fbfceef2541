"""Desk-scale text-line recognition pipeline.

Synthetic degraded line generation, dataset packaging, two-branch
CTC + distillation training, decoding with confidence, evaluation metrics,
and a baseline-vs-fine-tuned comparison service.
"""

from .ctc import Prediction, ctc_brute_force, ctc_loss_grad, greedy_decode
from .dataset import CharDict, RecordStore, SplitSpec, split
from .estimator import LineRecognizer
from .inference import compare_checkpoints, load_model, preprocess, recognize
from .metrics import compare, edit_distance, evaluate, stratify
from .synth import DegradationMeta, LineSample, generate_corpus, make_glyph, render_line
from .training import TrainConfig, distill_loss, train

__version__ = "0.1.0"

__all__ = [
    "CharDict",
    "DegradationMeta",
    "LineRecognizer",
    "LineSample",
    "Prediction",
    "RecordStore",
    "SplitSpec",
    "TrainConfig",
    "__version__",
    "compare",
    "compare_checkpoints",
    "ctc_brute_force",
    "ctc_loss_grad",
    "distill_loss",
    "edit_distance",
    "evaluate",
    "generate_corpus",
    "greedy_decode",
    "load_model",
    "make_glyph",
    "preprocess",
    "recognize",
    "render_line",
    "split",
    "stratify",
    "train",
]

"""Scikit-learn style front end over the recognizer and training loop.

`LineRecognizer` exposes the usual fit/predict/score surface (plus
get_params/set_params via BaseEstimator) so the model slots into standard
tooling, while the pipeline modules stay usable on their own.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import model
from .dataset import CharDict
from .training import TrainConfig, decode_batch, run_training
from .validation import as_uint8_batch, check_labels


class LineRecognizer(BaseEstimator):
    """Text-line recognizer trained with CTC plus teacher distillation.

    Parameters mirror TrainConfig; `fit` builds the character dictionary
    from the training labels.  X is a batch of line images, either uint8
    (N, 32, 280, 3) or normalized float (N, 3, 32, 280); y is a sequence of
    label strings.
    """

    def __init__(
        self,
        epochs: int = 10,
        batch_size: int = 8,
        learning_rate: float = 0.001,
        lambda1: float = 1.0,
        lambda2: float = 0.5,
        kd_temperature: float = 2.0,
        teacher_ctc_weight: float = 1.0,
        weight_decay: float = 0.01,
        freeze_teacher: bool = False,
        seed: int = 0,
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.kd_temperature = kd_temperature
        self.teacher_ctc_weight = teacher_ctc_weight
        self.weight_decay = weight_decay
        self.freeze_teacher = freeze_teacher
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            kd_temperature=self.kd_temperature,
            teacher_ctc_weight=self.teacher_ctc_weight,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            freeze_teacher=self.freeze_teacher,
        )

    def fit(self, X, y, init_params: model.ModelParams | None = None):
        """Train on images X and label strings y; returns self."""
        images = as_uint8_batch(X)
        labels = check_labels(y)
        self.char_dict_ = CharDict.from_labels(labels)
        config = self._config()
        if init_params is None:
            init_params = model.init_params(self.char_dict_.size, seed=self.seed)
        result = run_training(images, labels, self.char_dict_, config, init_params)
        self.params_ = result.params
        self.loss_trace_ = result.trace
        self.n_iter_ = len(result.trace)
        return self

    def predict(self, X) -> np.ndarray:
        """Decoded text for each image, as an object ndarray."""
        check_is_fitted(self, "params_")
        images = as_uint8_batch(X)
        preds = decode_batch(self.params_, images, self.char_dict_)
        return np.array([p.text for p in preds], dtype=object)

    def predict_with_confidence(self, X) -> list:
        """Full Prediction objects (text, confidence, per-char probabilities)."""
        check_is_fitted(self, "params_")
        images = as_uint8_batch(X)
        return decode_batch(self.params_, images, self.char_dict_)

    def score(self, X, y) -> float:
        """Exact-match accuracy."""
        labels = check_labels(y)
        texts = self.predict(X)
        return float(sum(t == gt for t, gt in zip(texts, labels)) / len(labels))

    def save_checkpoint(self, path) -> None:
        check_is_fitted(self, "params_")
        model.save_checkpoint(path, self.params_, self.char_dict_)

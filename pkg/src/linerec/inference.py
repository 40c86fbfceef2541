"""End-to-end single-line recognition: preprocess, student forward, decode.

Only the student branch runs here; teacher parameters are never touched at
inference time.
"""

from __future__ import annotations

import hashlib
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import ctc, model
from .dataset import CharDict
from .errors import DictMismatchError, UndecodableImageError

HEIGHT = 32
WIDTH = 280
PAD_VALUE = 1.0  # background after [-1, 1] normalization (white)


@dataclass
class LoadedModel:
    """Checkpoint parameters bound to their verified character dictionary."""
    params: model.ModelParams
    char_dict: CharDict
    checkpoint_path: str
    file_digest: str


def load_model(checkpoint_path, dict_path) -> LoadedModel:
    """Load a checkpoint and the dictionary it was trained with.

    The dictionary digest embedded in the checkpoint must match the supplied
    dictionary file.
    """
    params, digest = model.load_checkpoint(checkpoint_path)
    char_dict = CharDict.from_file(dict_path)
    if char_dict.digest() != digest:
        raise DictMismatchError(
            f"dictionary {dict_path} does not match checkpoint {checkpoint_path}"
        )
    if char_dict.size != params.dict_size:
        raise DictMismatchError(
            f"dictionary size {char_dict.size} != checkpoint dict_size {params.dict_size}"
        )
    return LoadedModel(
        params=params,
        char_dict=char_dict,
        checkpoint_path=str(checkpoint_path),
        file_digest=model.checkpoint_digest(checkpoint_path),
    )


def _open_image(source) -> Image.Image:
    try:
        if isinstance(source, Image.Image):
            return source.convert("RGB")
        if isinstance(source, (bytes, bytearray)):
            img = Image.open(io.BytesIO(source))
        else:
            img = Image.open(source)
        img.load()
        return img.convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UndecodableImageError(f"cannot decode input image: {exc}") from exc


def preprocess(source) -> tuple[np.ndarray, bool]:
    """Decode and normalize any RGB image to a (3, 32, 280) tensor in [-1, 1].

    Aspect-preserving scale to height 32; narrower results are right-padded
    with background, wider ones are squeezed to width 280 and flagged
    aspect_broken.  Returns (tensor, aspect_broken).
    """
    img = _open_image(source)
    w, h = img.size
    if w < 1 or h < 1:
        raise UndecodableImageError("image has no pixels")
    scaled_w = max(1, round(w * HEIGHT / h))
    if (w, h) != (scaled_w, HEIGHT):
        img = img.resize((scaled_w, HEIGHT), Image.BILINEAR)
    aspect_broken = False
    if scaled_w > WIDTH:
        img = img.resize((WIDTH, HEIGHT), Image.BILINEAR)
        aspect_broken = True
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - 0.5) / 0.5
    tensor = np.full((3, HEIGHT, WIDTH), PAD_VALUE, dtype=np.float32)
    tensor[:, :, :arr.shape[1]] = arr.transpose(2, 0, 1)
    return tensor, aspect_broken


def recognize_tensor(
    tensor: np.ndarray, aspect_broken: bool, loaded: LoadedModel
) -> ctc.Prediction:
    """Student forward + greedy decode of one preprocessed tensor."""
    start = time.perf_counter()
    trace = model.forward(loaded.params, tensor[None], train_mode=False)
    pred = ctc.greedy_decode(trace.student_logits[0], loaded.char_dict)
    pred.elapsed = time.perf_counter() - start
    pred.aspect_broken = aspect_broken
    return pred


def recognize(source, loaded: LoadedModel) -> ctc.Prediction:
    """Recognize one image (path, bytes, or PIL image) with a loaded model."""
    start = time.perf_counter()
    tensor, aspect_broken = preprocess(source)
    pred = recognize_tensor(tensor, aspect_broken, loaded)
    pred.elapsed = time.perf_counter() - start
    return pred


@dataclass
class ComparisonResult:
    baseline: ctc.Prediction
    finetuned: ctc.Prediction
    input_digest: str

    def as_dict(self) -> dict:
        return {
            "input_digest": self.input_digest,
            "baseline": prediction_as_dict(self.baseline),
            "finetuned": prediction_as_dict(self.finetuned),
        }


def input_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read_source_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    return Path(source).read_bytes()


def compare_checkpoints(
    source, baseline: LoadedModel, finetuned: LoadedModel
) -> ComparisonResult:
    """Run both models over one shared preprocessed tensor."""
    if baseline.char_dict.chars != finetuned.char_dict.chars:
        raise DictMismatchError("checkpoints use different dictionaries")
    data = _read_source_bytes(source)
    tensor, aspect_broken = preprocess(data)
    return ComparisonResult(
        baseline=recognize_tensor(tensor, aspect_broken, baseline),
        finetuned=recognize_tensor(tensor, aspect_broken, finetuned),
        input_digest=input_digest(data),
    )


def prediction_as_dict(pred: ctc.Prediction) -> dict:
    return {
        "text": pred.text,
        "confidence": pred.confidence,
        "per_char": [{"ch": ch, "p": p} for ch, p in pred.per_char],
        "aspect_broken": pred.aspect_broken,
        "elapsed_ms": pred.elapsed * 1000.0,
    }


def prediction_to_json(pred: ctc.Prediction) -> str:
    return json.dumps(prediction_as_dict(pred), indent=1)

import numpy as np
import pytest
from sklearn.base import clone

from linerec import synth
from linerec.errors import ShapeMismatchError
from linerec.estimator import LineRecognizer
from linerec.validation import as_image_batch, as_uint8_batch


@pytest.fixture(scope="module")
def data():
    samples, _ = synth.generate_corpus(6, 120, seed=41, profile="clean")
    X = np.stack([s.pixels for s in samples])
    y = [s.label for s in samples]
    return X, y


def test_get_params_set_params_clone():
    est = LineRecognizer(epochs=2, lambda2=0.25, seed=9)
    params = est.get_params()
    assert params["epochs"] == 2
    assert params["lambda2"] == 0.25
    est2 = clone(est)
    assert est2.get_params() == params
    est2.set_params(epochs=5)
    assert est2.epochs == 5


def test_fit_predict_score(data):
    X, y = data
    est = LineRecognizer(epochs=4, batch_size=8, seed=0)
    est.fit(X[:100], y[:100])
    assert est.params_ is not None
    assert est.char_dict_.size == 6
    assert est.n_iter_ == 4 * 13  # ceil(100 / 8) batches per epoch

    texts = est.predict(X[100:])
    assert texts.shape == (20,)
    assert all(isinstance(t, str) for t in texts)
    score = est.score(X[100:], y[100:])
    assert 0.0 <= score <= 1.0

    preds = est.predict_with_confidence(X[100:105])
    assert len(preds) == 5
    assert all(0.0 <= p.confidence <= 1.0 for p in preds)


def test_fit_deterministic(data):
    X, y = data
    a = LineRecognizer(epochs=1, seed=3).fit(X[:40], y[:40])
    b = LineRecognizer(epochs=1, seed=3).fit(X[:40], y[:40])
    assert np.array_equal(a.params_.tensors["conv1_w"], b.params_.tensors["conv1_w"])
    assert np.array_equal(a.predict(X[40:48]), b.predict(X[40:48]))


def test_predict_before_fit_raises(data):
    X, _ = data
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        LineRecognizer().predict(X[:1])


def test_checkpoint_export(tmp_path, data):
    X, y = data
    est = LineRecognizer(epochs=1, seed=0).fit(X[:40], y[:40])
    est.save_checkpoint(tmp_path / "est.ocrm")
    from linerec.inference import load_model, recognize

    est.char_dict_.to_file(tmp_path / "dict.txt")
    loaded = load_model(tmp_path / "est.ocrm", tmp_path / "dict.txt")
    import io

    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(X[50]).save(buf, format="PNG")
    pred = recognize(buf.getvalue(), loaded)
    assert pred.text == est.predict(X[50:51])[0]


# --- validation helpers ---


def test_as_image_batch_accepts_uint8_hwc(data):
    X, _ = data
    out = as_image_batch(X[:3])
    assert out.shape == (3, 3, 32, 280)
    assert out.dtype == np.float32
    assert out.min() >= -1.0 and out.max() <= 1.0


def test_as_image_batch_accepts_normalized_chw(data):
    X, _ = data
    chw = as_image_batch(X[:2])
    again = as_image_batch(chw)
    assert np.array_equal(chw, again)


def test_as_image_batch_rejects_garbage():
    with pytest.raises(ShapeMismatchError):
        as_image_batch(np.zeros((2, 10, 10)))
    with pytest.raises(ShapeMismatchError):
        as_image_batch(np.zeros((2, 3, 32, 100)))
    with pytest.raises(ShapeMismatchError):
        as_image_batch(np.full((1, 3, 32, 280), 7.0))  # out of [-1, 1]


def test_uint8_roundtrip(data):
    X, _ = data
    chw = as_image_batch(X[:2])
    back = as_uint8_batch(chw)
    assert back.dtype == np.uint8
    assert np.array_equal(back, X[:2])

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linerec import ctc
from linerec.dataset import CharDict
from linerec.errors import DictMismatchError, InfeasibleLabelError, TooLargeError


def random_instance(rng, t_max=5, v_max=3):
    T = int(rng.integers(1, t_max + 1))
    V = int(rng.integers(1, v_max + 1))
    while True:
        L = int(rng.integers(1, 4))
        label = [int(k) for k in rng.integers(1, V + 1, size=L)]
        if ctc.min_frames(label) <= T:
            return rng.normal(0.0, 2.0, size=(T, V + 1)), label


# --- hand-checkable values ---


def test_loss_single_frame_uniform():
    res = ctc.ctc_loss_grad(np.zeros((1, 2)), [1])
    assert res.loss == pytest.approx(math.log(2), abs=1e-12)


def test_loss_two_frames_uniform():
    # paths {aa, a-, -a} of 4 -> p = 3/4
    res = ctc.ctc_loss_grad(np.zeros((2, 2)), [1])
    assert res.loss == pytest.approx(math.log(4 / 3), abs=1e-12)


def test_loss_three_frames_two_chars():
    # 5 valid paths of 27 under uniform 3-class logits
    res = ctc.ctc_loss_grad(np.zeros((3, 3)), [1, 2])
    assert res.loss == pytest.approx(math.log(27 / 5), abs=1e-12)


def test_brute_force_single_path():
    logits = np.array([[0.0, 3.0]])
    expected = -math.log(ctc.softmax(logits)[0, 1])
    assert ctc.ctc_brute_force(logits, [1]) == pytest.approx(expected, abs=1e-12)


def test_brute_force_infeasible_returns_inf():
    assert math.isinf(ctc.ctc_brute_force(np.zeros((1, 3)), [1, 2]))


def test_brute_force_too_large():
    with pytest.raises(TooLargeError):
        ctc.ctc_brute_force(np.zeros((20, 10)), [1])


# --- oracle equivalence ---


def test_loss_matches_brute_force_200_instances():
    rng = np.random.default_rng(7)
    for _ in range(200):
        logits, label = random_instance(rng)
        a = ctc.ctc_loss_grad(logits, label).loss
        b = ctc.ctc_brute_force(logits, label)
        assert abs(a - b) <= 1e-9, (logits.shape, label)


# --- gradient properties ---


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    h = 1e-5
    for _ in range(50):
        logits, label = random_instance(rng, t_max=6, v_max=4)
        res = ctc.ctc_loss_grad(logits, label)
        T, K = logits.shape
        for t in range(T):
            for k in range(K):
                lp = logits.copy()
                lp[t, k] += h
                lm = logits.copy()
                lm[t, k] -= h
                fd = (
                    ctc.ctc_loss_grad(lp, label).loss
                    - ctc.ctc_loss_grad(lm, label).loss
                ) / (2 * h)
                an = res.grad[t, k]
                assert abs(an - fd) <= 1e-4 * max(1e-3, abs(an), abs(fd))


def test_gradient_rows_sum_to_zero():
    rng = np.random.default_rng(13)
    for _ in range(30):
        logits, label = random_instance(rng, t_max=6, v_max=4)
        res = ctc.ctc_loss_grad(logits, label)
        assert np.abs(res.grad.sum(axis=1)).max() <= 1e-10


def test_loss_nonnegative_and_finite():
    rng = np.random.default_rng(17)
    for _ in range(50):
        logits, label = random_instance(rng)
        res = ctc.ctc_loss_grad(logits, label)
        assert np.isfinite(res.loss) and res.loss >= 0


def test_infeasible_label_raises():
    with pytest.raises(InfeasibleLabelError):
        ctc.ctc_loss_grad(np.zeros((2, 3)), [1, 1])  # repeat needs 3 frames
    with pytest.raises(InfeasibleLabelError):
        ctc.ctc_loss_grad(np.zeros((1, 3)), [1, 2])


def test_label_index_out_of_range():
    with pytest.raises(ValueError):
        ctc.ctc_loss_grad(np.zeros((3, 3)), [3])


# --- greedy decoding ---


def _logits_for(arg_seq, k=4, hot=5.0):
    logits = np.zeros((len(arg_seq), k))
    for t, a in enumerate(arg_seq):
        logits[t, a] = hot
    return logits


@pytest.fixture(scope="module")
def abc_dict():
    return CharDict.from_chars(["a", "b", "c"])


def test_decode_collapse_rule(abc_dict):
    pred = ctc.greedy_decode(_logits_for([1, 1, 0, 2]), abc_dict)
    assert pred.text == "ab"
    assert len(pred.per_char) == 2
    assert pred.frames == 4


def test_decode_all_blank(abc_dict):
    pred = ctc.greedy_decode(_logits_for([0, 0, 0]), abc_dict)
    assert pred.text == ""
    assert pred.confidence == 0.0
    assert pred.per_char == []


def test_decode_blank_separates_repeats(abc_dict):
    pred = ctc.greedy_decode(_logits_for([1, 0, 1]), abc_dict)
    assert pred.text == "aa"


def test_decode_dict_size_mismatch(abc_dict):
    with pytest.raises(DictMismatchError):
        ctc.greedy_decode(np.zeros((3, 9)), abc_dict)


def test_confidence_one_when_certain(abc_dict):
    pred = ctc.greedy_decode(_logits_for([1, 0, 2], hot=1000.0), abc_dict)
    assert pred.text == "ab"
    assert pred.confidence == pytest.approx(1.0)
    assert all(p == pytest.approx(1.0) for _, p in pred.per_char)


def test_per_char_probability_is_first_run_frame(abc_dict):
    logits = np.zeros((3, 4))
    logits[0, 1] = 2.0   # 'a' starts here
    logits[1, 1] = 10.0  # same run, stronger later frame must not be used
    logits[2, 0] = 5.0
    pred = ctc.greedy_decode(logits, abc_dict)
    assert pred.text == "a"
    expected_p = ctc.softmax(logits)[0, 1]
    assert pred.per_char[0][1] == pytest.approx(expected_p)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=40)
def test_decode_properties(seed):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, 12))
    V = int(rng.integers(1, 5))
    logits = rng.normal(0, 3, size=(T, V + 1))
    cdict = CharDict.from_chars([chr(ord("a") + i) for i in range(V)])
    pred = ctc.greedy_decode(logits, cdict)
    assert len(pred.text) <= T
    assert 0.0 <= pred.confidence <= 1.0
    assert len(pred.per_char) == len(pred.text)
    # softmax shift invariance: adding a constant per frame changes nothing
    shifted = logits + rng.normal(0, 5, size=(T, 1))
    pred2 = ctc.greedy_decode(shifted, cdict)
    assert pred2.text == pred.text
    assert pred2.confidence == pytest.approx(pred.confidence, abs=1e-9)

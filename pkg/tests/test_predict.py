import numpy as np
import pytest
from conftest import random_irreducible_counts, stub_model
from hypothesis import given, settings
from hypothesis import strategies as st

from medent.cooccur import CodeIndex, generated_codes
from medent.maxent import fit
from medent.predict import (
    DECAYING,
    UNIFORM,
    UnknownHistoryError,
    WeightingScheme,
    predict,
    score,
    top_k,
)

IDX2 = CodeIndex(("d0", "d1"))
P2 = np.array([[0.5, 0.5], [0.25, 0.75]])


M2 = stub_model(P2, IDX2.codes)


def test_uniform_two_term_average():
    np.testing.assert_allclose(score(M2, ["d0", "d1"], UNIFORM).scores, [0.375, 0.625], atol=1e-15)


def test_decaying_weights_latest_most():
    np.testing.assert_allclose(score(M2, ["d0", "d1"], DECAYING).scores, [0.3, 0.7], atol=1e-15)


@pytest.mark.parametrize("code,row", [("d0", 0), ("d1", 1)])
def test_single_code_history_is_the_row(code, row):
    for scheme in (UNIFORM, DECAYING):
        np.testing.assert_array_equal(score(M2, [code], scheme).scores, P2[row])


def test_unknown_codes_dropped_and_counted():
    s = score(M2, ["zz", "d1"], UNIFORM)
    assert s.dropped == 1 and s.history_len == 1
    np.testing.assert_array_equal(s.scores, P2[1])
    with pytest.raises(UnknownHistoryError):
        score(M2, ["zz"])


def test_decay_sequence():
    a = DECAYING.decay(5)
    assert (a > 0).all() and (np.diff(a) < 0).all()
    np.testing.assert_allclose(a, [1, 1 / 4, 1 / 9, 1 / 16, 1 / 25])
    with pytest.raises(ValueError):
        WeightingScheme("linear")


def test_top_k_examples():
    assert top_k(np.array([0.3, 0.7]), 1, IDX2) == ["d1"]
    assert top_k(np.array([0.5, 0.5]), 1, IDX2) == ["d0"]
    assert top_k(np.array([0.3, 0.7]), 2, IDX2, exclude={"d1"}) == ["d0"]
    assert top_k(np.array([0.3, 0.7]), 5, IDX2) == ["d1", "d0"]
    with pytest.raises(ValueError):
        top_k(np.array([0.3, 0.7]), 0, IDX2)


def test_predict_excludes_history_by_default():
    assert predict(M2, ["d1"], k=1, scheme=DECAYING) == [("d0", 0.25)]
    assert predict(M2, ["d1"], k=1, exclude_history=False) == [("d1", 0.75)]
    ((code, value),) = predict(M2, ["d0", "d1"], k=1, scheme=DECAYING, exclude_history=False)
    assert code == "d1" and value == pytest.approx(0.7, abs=1e-15)


# --- properties on fitted models --------------------------------------------------

@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(31)
    return fit(random_irreducible_counts(rng, 12, density=0.5), CodeIndex(generated_codes(12)))


history_st = st.lists(st.integers(0, 11), min_size=1, max_size=8, unique=True)


@settings(max_examples=100, deadline=None)
@given(history=history_st, decaying=st.booleans())
def test_scores_are_a_distribution(fitted, history, decaying):
    codes = [fitted.index.code(i) for i in history]
    r = score(fitted, codes, DECAYING if decaying else UNIFORM).scores
    assert abs(r.sum() - 1) < 1e-10
    assert (r >= 0).all() and (r <= 1).all()


@settings(max_examples=100, deadline=None)
@given(a=st.integers(0, 11), b=st.integers(0, 11))
def test_decaying_order_swap(fitted, a, b):
    ca, cb = fitted.index.code(a), fitted.index.code(b)
    if a == b:
        return
    d = score(fitted, [ca, cb], DECAYING).scores - score(fitted, [cb, ca], DECAYING).scores
    a1, a2 = DECAYING.decay(2)
    expected = (a1 - a2) / (a1 + a2) * (fitted.transition[b] - fitted.transition[a])
    np.testing.assert_allclose(d, expected, atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(history=history_st, c=st.sampled_from([1e-3, 0.5, 3.0, 1e4]), k=st.integers(1, 12))
def test_ranking_scale_invariance(fitted, history, c, k):
    r = score(fitted, [fitted.index.code(i) for i in history]).scores
    assert top_k(c * r, k, fitted.index) == top_k(r, k, fitted.index)

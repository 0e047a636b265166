import json

import numpy as np
import pytest
from conftest import random_irreducible_counts

from medent.cooccur import CodeIndex, generated_codes
from medent.maxent import fit
from medent.modelfile import ModelFormatError, dumps, load_model, loads, save_model


@pytest.fixture
def model():
    rng = np.random.default_rng(7)
    a = random_irreducible_counts(rng, 9)
    return fit(a, CodeIndex(generated_codes(9)))


def test_round_trip_is_exact(model, tmp_path):
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert back.lam == model.lam
    assert back.index == model.index
    np.testing.assert_array_equal(back.left, model.left)
    np.testing.assert_array_equal(back.right, model.right)
    np.testing.assert_array_equal(back.stationary, model.stationary)
    np.testing.assert_array_equal(back.counts, model.counts)
    assert back.entropy == model.entropy
    np.testing.assert_allclose(back.transition, model.transition, atol=1e-15, rtol=0)


def test_resave_is_byte_identical(model):
    text = dumps(model)
    assert dumps(loads(text)) == text


def test_key_order(model):
    keys = list(json.loads(dumps(model)))
    assert keys == ["format", "version", "n", "codes", "lambda", "left", "right",
                    "stationary", "entropy", "counts"]


def test_not_json():
    with pytest.raises(ModelFormatError, match="JSON"):
        loads("lambda = 3")


def test_wrong_format_and_version(model):
    data = json.loads(dumps(model))
    with pytest.raises(ModelFormatError, match="version"):
        loads(json.dumps({**data, "version": 99}))
    with pytest.raises(ModelFormatError, match="not a medent"):
        loads(json.dumps({**data, "format": "other"}))


def test_missing_key(model):
    data = json.loads(dumps(model))
    del data["right"]
    with pytest.raises(ModelFormatError, match="malformed"):
        loads(json.dumps(data))


def test_length_mismatch(model):
    data = json.loads(dumps(model))
    data["left"] = data["left"][:-1]
    with pytest.raises(ModelFormatError):
        loads(json.dumps(data))


def test_tampered_eigenvector_is_rejected(model):
    data = json.loads(dumps(model))
    data["right"][0] *= 1.5
    with pytest.raises(ModelFormatError, match="invariant"):
        loads(json.dumps(data))

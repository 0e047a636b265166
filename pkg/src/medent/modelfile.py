"""Versioned text serialization of fitted models.

The file is JSON with keys in a fixed order. Floats are written with
Python's shortest round-trip repr, so a load reproduces every stored value
bit for bit. ``V`` and ``P`` are not stored; they are rebuilt from the counts
and the Perron triple on load, and the invariants are checked before the
model is handed back.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cooccur import CodeIndex, CooccurrenceMatrix
from .maxent import MaxEntModel, assemble, invariant_residuals

FORMAT_NAME = "medent-maxent-model"
FORMAT_VERSION = 1

# loose bounds; anything past these means the file was edited or corrupted
_LOAD_TOLERANCE = {
    "eigen_normalization": 1e-8,
    "weight_total": 1e-8,
    "weight_balance": 1e-8,
    "row_stochastic": 1e-8,
    "stationary_fixed_point": 1e-8,
    "stationary_total": 1e-8,
    "support_mismatch": 0.0,
}


class ModelFormatError(ValueError):
    pass


def model_to_dict(model: MaxEntModel) -> dict:
    triplets = CooccurrenceMatrix.from_dense(model.counts).triplets()
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n": model.n,
        "codes": list(model.index.codes),
        "lambda": float(model.lam),
        "left": [float(x) for x in model.left],
        "right": [float(x) for x in model.right],
        "stationary": [float(x) for x in model.stationary],
        "entropy": float(model.entropy),
        "counts": [list(t) for t in triplets],
    }


def dumps(model: MaxEntModel) -> str:
    return json.dumps(model_to_dict(model), indent=1) + "\n"


def model_from_dict(data: dict) -> MaxEntModel:
    if data.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a medent model file")
    if data.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {data.get('version')!r}")
    try:
        n = int(data["n"])
        index = CodeIndex(tuple(data["codes"]))
        lam = float(data["lambda"])
        left = np.array(data["left"], dtype=float)
        right = np.array(data["right"], dtype=float)
        stationary = np.array(data["stationary"], dtype=float)
        stored_entropy = float(data["entropy"])
        counts = np.zeros((n, n), dtype=np.int64)
        for i, j, c in data["counts"]:
            counts[i, j] = c
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
    if len(index) != n or left.shape != (n,) or right.shape != (n,) or stationary.shape != (n,):
        raise ModelFormatError("vector lengths do not match n")

    model = assemble(index, counts, lam, left, right)
    # keep the stored values so a save/load/save cycle is byte-identical
    object.__setattr__(model, "stationary", stationary)
    object.__setattr__(model, "entropy", stored_entropy)
    residuals = invariant_residuals(model)
    for name, bound in _LOAD_TOLERANCE.items():
        if residuals[name] > bound:
            raise ModelFormatError(f"model invariant {name} violated ({residuals[name]:.3e})")
    return model


def loads(text: str) -> MaxEntModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(data)


def save_model(model: MaxEntModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def load_model(path: str | Path) -> MaxEntModel:
    return loads(Path(path).read_text(encoding="utf-8"))

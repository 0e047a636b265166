"""Future-disease risk scores and top-k selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .cooccur import CodeIndex
from .maxent import MaxEntModel

logger = logging.getLogger(__name__)


class UnknownHistoryError(ValueError):
    """No code of the history is known to the model."""


@dataclass(frozen=True)
class WeightingScheme:
    """How past diseases are weighted when averaging transition rows.

    ``uniform`` gives every disease weight 1/T. ``decaying`` gives the
    disease m steps from the end (m = 1 for the latest) weight ``1/m**2``.
    """

    kind: Literal["uniform", "decaying"] = "uniform"

    def __post_init__(self):
        if self.kind not in ("uniform", "decaying"):
            raise ValueError(f"unknown weighting scheme {self.kind!r}")

    def decay(self, length: int) -> np.ndarray:
        """``a_1 .. a_length``."""
        m = np.arange(1, length + 1, dtype=float)
        if self.kind == "uniform":
            return np.ones(length)
        return 1.0 / m**2

    def position_weights(self, length: int) -> np.ndarray:
        """Normalized weight of history position l = 1..T (oldest first)."""
        a = self.decay(length)
        return a[::-1] / a.sum()


UNIFORM = WeightingScheme("uniform")
DECAYING = WeightingScheme("decaying")


@dataclass(frozen=True, eq=False)
class PredictionScores:
    scores: np.ndarray
    history_len: int
    scheme: WeightingScheme
    dropped: int = 0


def score(
    model: MaxEntModel, history: Sequence[str], scheme: WeightingScheme = UNIFORM
) -> PredictionScores:
    """Weighted average of the transition rows of the history's diseases.

    Codes the model does not know are dropped and counted in ``dropped``.
    ``history_len`` is the length after dropping.
    """
    known = [c for c in history if c in model.index]
    dropped = len(history) - len(known)
    if not known:
        raise UnknownHistoryError("none of the history codes are in the model")
    if dropped:
        logger.debug("dropped %d unknown codes", dropped)
    rows = model.transition[[model.index[c] for c in known]]
    r = scheme.position_weights(len(known)) @ rows
    return PredictionScores(r, len(known), scheme, dropped)


def top_k(
    scores: PredictionScores | np.ndarray,
    k: int,
    index: CodeIndex,
    exclude: Iterable[str] = (),
) -> list[str]:
    """Codes by descending score, ties in code order, excluded codes skipped.

    Returns at most ``k`` codes; fewer when not enough remain.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    r = scores.scores if isinstance(scores, PredictionScores) else np.asarray(scores)
    excluded = set(exclude)
    # index order is code order, so a stable sort on -r breaks ties by code
    order = np.argsort(-r, kind="stable")
    out: list[str] = []
    for i in order:
        code = index.code(int(i))
        if code in excluded:
            continue
        out.append(code)
        if len(out) == k:
            break
    return out


def predict(
    model: MaxEntModel,
    history: Sequence[str],
    k: int = 5,
    scheme: WeightingScheme = UNIFORM,
    exclude_history: bool = True,
) -> list[tuple[str, float]]:
    """Top-k ``(code, score)`` for one patient."""
    s = score(model, history, scheme)
    codes = top_k(s, k, model.index, history if exclude_history else ())
    return [(c, float(s.scores[model.index[c]])) for c in codes]

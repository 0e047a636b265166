"""Maximum-entropy Markov chain fitted from a co-occurrence count matrix.

Given an irreducible nonnegative count matrix ``A`` with Perron root ``lam``
and left/right Perron vectors ``L``, ``R`` scaled so that ``L . R = 1``::

    V[i, j] = A[i, j] * L[i] * R[j] / lam      weight matrix
    P[i, j] = V[i, j] / sum_l V[i, l]          transition matrix
    p[i]    = L[i] * R[i]                      stationary distribution

When ``A`` is a 0/1 skeleton, ``P`` is the transition matrix with that
support whose entropy rate ``-sum_k p_k sum_m P_km log P_km`` is largest,
and that maximum equals ``log(lam)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

from .cooccur import (
    CodeIndex,
    CooccurrenceMatrix,
    HistoryLike,
    generated_codes,
    history_codes,
    is_irreducible,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000


class FitError(ArithmeticError):
    """Base class for numerical failures while fitting."""


class ConvergenceError(FitError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"power method did not converge after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class ReducibleMatrixError(FitError):
    pass


def power_method(
    a,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    shift: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Dominant eigenvalue and left/right eigenvectors of a nonnegative matrix.

    Iterates ``x <- (A + shift I) x`` and ``y <- y (A + shift I)`` from the
    all-ones vector, renormalizing to unit l1 norm each step. Stops once the
    Rayleigh quotients of both iterates change by less than ``tol`` relative
    to their magnitude and the Collatz-Wielandt gap ``max(Mx/x) - min(Mx/x)``
    of both iterates is below ``tol`` as well (plus a rounding allowance).
    The quotient alone can settle while the vectors are only ``sqrt(tol)``
    accurate; the gap brackets the eigenvalue and forces the vectors in too. A positive ``shift`` breaks the oscillation that
    periodic matrices cause and does not change the eigenvectors.

    Returns ``(lam, L0, R0)`` with ``L0``, ``R0`` l1-normalized. ``lam`` is
    the two-sided quotient ``L0 (A + shift I) R0 / (L0 . R0)`` minus the shift.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if shift < 0:
        raise ValueError("shift must be nonnegative")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n or n == 0:
        raise ValueError("expected a nonempty square matrix")
    m = a + shift * np.eye(n)

    rounding = 16 * n * np.finfo(float).eps
    right = np.full(n, 1.0 / n)
    left = np.full(n, 1.0 / n)
    q_right = q_left = np.nan
    residual = np.inf
    for it in range(1, max_iter + 1):
        mr = m @ right
        ml = left @ m
        new_q_right = (right @ mr) / (right @ right)
        new_q_left = (ml @ left) / (left @ left)
        sr, sl = mr.sum(), ml.sum()
        if sr <= 0 or sl <= 0:
            raise FitError("iterate collapsed to zero; matrix is degenerate")
        change = max(abs(new_q_right - q_right), abs(new_q_left - q_left))
        gap = max(_collatz_gap(mr, right), _collatz_gap(ml, left))
        right, left = mr / sr, ml / sl
        q_right, q_left = new_q_right, new_q_left
        residual = max(change, gap)
        scale = max(1.0, abs(q_right))
        if change < tol * scale and gap < (tol + rounding) * scale:
            break
    else:
        raise ConvergenceError(max_iter, float(residual))

    logger.debug("power method converged in %d iterations", it)
    lam = float(left @ m @ right / (left @ right)) - shift
    if not lam > 0:
        raise FitError(f"dominant eigenvalue {lam} is not positive; matrix is degenerate")
    return lam, left, right


def _collatz_gap(mx: np.ndarray, x: np.ndarray) -> float:
    pos = x > 0
    if not pos.all():
        return np.inf
    ratio = mx / x
    return float(ratio.max() - ratio.min())


def normalize_eigenpair(left0, right0) -> tuple[np.ndarray, np.ndarray]:
    """Scale both vectors by ``1/sqrt(L0 . R0)`` so that ``L . R = 1``."""
    left0 = np.asarray(left0, dtype=float)
    right0 = np.asarray(right0, dtype=float)
    if (left0 <= 0).any() or (right0 <= 0).any():
        raise ReducibleMatrixError(
            "eigenvector has a non-positive component; the matrix is not irreducible"
        )
    dot = float(left0 @ right0)
    if not dot > 0:
        raise FitError("eigenvector inner product is not positive")
    s = np.sqrt(dot)
    return left0 / s, right0 / s


def weight_matrix(a, lam: float, left, right) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a * np.outer(left, right) / lam


def transition_matrix(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    rows = v.sum(axis=1)
    if (rows <= 0).any():
        bad = int(np.flatnonzero(rows <= 0)[0])
        raise ReducibleMatrixError(f"weight matrix row {bad} is zero")
    return v / rows[:, None]


def stationary_distribution(left, right) -> np.ndarray:
    return np.asarray(left, dtype=float) * np.asarray(right, dtype=float)


def entropy(p_matrix, p) -> float:
    """Entropy rate in nats, ``-sum_k p_k sum_m P_km log P_km`` (0 log 0 = 0)."""
    p_matrix = np.asarray(p_matrix, dtype=float)
    p = np.asarray(p, dtype=float)
    return float(-(p[:, None] * xlogy(p_matrix, p_matrix)).sum())


@dataclass(frozen=True, eq=False)
class MaxEntModel:
    index: CodeIndex
    counts: np.ndarray
    lam: float
    left: np.ndarray
    right: np.ndarray
    weights: np.ndarray
    transition: np.ndarray
    stationary: np.ndarray
    entropy: float

    @property
    def n(self) -> int:
        return len(self.index)

    def row(self, code: str) -> np.ndarray:
        return self.transition[self.index[code]]


def assemble(index: CodeIndex, a, lam: float, left, right) -> MaxEntModel:
    """Build a model from an already normalized Perron triple."""
    a = np.asarray(a)
    v = weight_matrix(a, lam, left, right)
    p_matrix = transition_matrix(v)
    p = stationary_distribution(left, right)
    return MaxEntModel(
        index=index,
        counts=a,
        lam=float(lam),
        left=np.asarray(left, dtype=float),
        right=np.asarray(right, dtype=float),
        weights=v,
        transition=p_matrix,
        stationary=p,
        entropy=entropy(p_matrix, p),
    )


def fit(
    matrix: CooccurrenceMatrix | np.ndarray,
    index: CodeIndex | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MaxEntModel:
    """Fit the maximum-entropy chain to an irreducible count matrix.

    A shift of 1 is applied inside the power method whenever some diagonal
    entry is zero. Reducible input raises ``ReducibleMatrixError``; run
    ``cooccur.restrict_irreducible`` first.
    """
    a = matrix.to_dense() if isinstance(matrix, CooccurrenceMatrix) else np.asarray(matrix)
    n = a.shape[0]
    if index is None:
        index = CodeIndex(generated_codes(n))
    if len(index) != n:
        raise ValueError("index size does not match the matrix")
    if not is_irreducible(a):
        raise ReducibleMatrixError(
            "count matrix is reducible; call restrict_irreducible before fitting"
        )
    shift = 1.0 if (np.diag(a) == 0).any() else 0.0
    lam, left0, right0 = power_method(a, tol=tol, max_iter=max_iter, shift=shift)
    left, right = normalize_eigenpair(left0, right0)
    return assemble(index, a, lam, left, right)


def invariant_residuals(model: MaxEntModel) -> dict[str, float]:
    """Worst-case violation of each structural invariant of a fitted model."""
    v, p_matrix, p = model.weights, model.transition, model.stationary
    return {
        "eigen_normalization": abs(float(model.left @ model.right) - 1.0),
        "weight_total": abs(float(v.sum()) - 1.0),
        "weight_balance": float(np.abs(v.sum(axis=1) - v.sum(axis=0)).max()),
        "row_stochastic": float(np.abs(p_matrix.sum(axis=1) - 1.0).max()),
        "stationary_fixed_point": float(np.abs(p @ p_matrix - p).max()),
        "stationary_total": abs(float(p.sum()) - 1.0),
        "support_mismatch": float(np.count_nonzero((v > 0) != (model.counts > 0))),
    }


# --- record-pair view ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RecordPairSystem:
    """Records ``k -> (f[k], g[k])`` with their incidence matrices.

    ``X[i, k] = [f(k) = i]``, ``Y[k, j] = [g(k) = j]``, ``A = X Y`` is the
    disease-level count matrix and ``B = Y X`` the record-level 0/1 matrix with
    ``B[k, m] = [g(k) = f(m)]``. Indices are 0-based.
    """

    f: np.ndarray
    g: np.ndarray
    n: int
    X: np.ndarray
    Y: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def N(self) -> int:
        return len(self.f)


def make_record_pair_system(f: Sequence[int], g: Sequence[int], n: int | None = None) -> RecordPairSystem:
    f = np.asarray(f, dtype=np.int64)
    g = np.asarray(g, dtype=np.int64)
    if f.shape != g.shape or f.ndim != 1 or len(f) == 0:
        raise ValueError("f and g must be nonempty sequences of equal length")
    if n is None:
        n = int(max(f.max(), g.max())) + 1
    if f.min() < 0 or g.min() < 0 or f.max() >= n or g.max() >= n:
        raise ValueError(f"map values must lie in 0..{n - 1}")
    for name, m in (("f", f), ("g", g)):
        missing = sorted(set(range(n)) - set(m.tolist()))
        if missing:
            raise ValueError(f"{name} is not surjective; missing {missing}")
    big_n = len(f)
    x = np.zeros((n, big_n), dtype=np.int64)
    y = np.zeros((big_n, n), dtype=np.int64)
    x[f, np.arange(big_n)] = 1
    y[np.arange(big_n), g] = 1
    return RecordPairSystem(f, g, n, x, y, x @ y, y @ x)


def record_pairs(histories: Iterable[HistoryLike], index: CodeIndex) -> tuple[np.ndarray, np.ndarray]:
    """First/second disease of every record drawn from the histories.

    Each position pair ``p <= q`` in a history is one record, so
    ``make_record_pair_system(*record_pairs(h, idx)).A`` equals the
    co-occurrence matrix of ``h``.
    """
    first: list[int] = []
    second: list[int] = []
    for h in histories:
        idx = [index[c] for c in history_codes(h)]
        for p, i in enumerate(idx):
            for j in idx[p:]:
                first.append(i)
                second.append(j)
    return np.asarray(first, dtype=np.int64), np.asarray(second, dtype=np.int64)

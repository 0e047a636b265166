from pathlib import Path

import numpy as np
import pytest

from medent.cooccur import is_irreducible
from medent.maxent import make_record_pair_system

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


def random_irreducible_counts(rng, n, max_count=6, density=0.4):
    """Random nonnegative integer matrix made irreducible by a planted cycle."""
    a = rng.integers(1, max_count + 1, size=(n, n)) * (rng.random((n, n)) < density)
    perm = rng.permutation(n)
    for x in range(n):
        i, j = perm[x], perm[(x + 1) % n]
        if a[i, j] == 0:
            a[i, j] = rng.integers(1, max_count + 1)
    assert is_irreducible(a)
    return a


def random_skeleton(rng, n, density=0.4):
    return (random_irreducible_counts(rng, n, density=density) > 0).astype(np.int64)


def random_record_pair_system(rng, max_n=6, max_records=20):
    """Surjective f, g with an irreducible disease-level matrix A = XY."""
    while True:
        n = int(rng.integers(1, max_n + 1))
        big_n = int(rng.integers(n, max_records + 1))
        f = np.concatenate([rng.permutation(n), rng.integers(0, n, size=big_n - n)])
        g = np.concatenate([rng.permutation(n), rng.integers(0, n, size=big_n - n)])
        f = f[rng.permutation(big_n)]
        g = g[rng.permutation(big_n)]
        system = make_record_pair_system(f, g, n)
        if is_irreducible(system.A):
            return system


def dense_perron(m):
    """Perron root and positive left/right vectors from a full eigendecomposition.

    Vectors are scaled so that ``l . r = 1``.
    """
    m = np.asarray(m, dtype=float)
    w, vr = np.linalg.eig(m)
    k = int(np.argmax(w.real))
    lam = w[k].real
    r = vr[:, k].real
    wl, vl = np.linalg.eig(m.T)
    kl = int(np.argmin(np.abs(wl - lam)))
    l = vl[:, kl].real
    r = r * np.sign(r.sum())
    l = l * np.sign(l.sum())
    s = l @ r
    return lam, l / np.sqrt(s), r / np.sqrt(s)


def dense_stationary(p_matrix):
    """Stationary distribution from the null space of ``P^T - I``."""
    n = p_matrix.shape[0]
    w, v = np.linalg.eig(p_matrix.T)
    k = int(np.argmin(np.abs(w - 1.0)))
    pi = np.abs(v[:, k].real)
    return pi / pi.sum()


def stub_model(transition, codes, stationary=None):
    """A model carrying a hand-picked transition matrix and stationary vector.

    Only the fields read by scoring and comorbidity are meaningful.
    """
    from medent.cooccur import CodeIndex
    from medent.maxent import MaxEntModel

    n = len(codes)
    p = np.full(n, 1 / n) if stationary is None else np.asarray(stationary, dtype=float)
    t = np.asarray(transition, dtype=float)
    return MaxEntModel(CodeIndex(tuple(codes)), np.ones((n, n)), 1.0, np.ones(n), np.ones(n),
                       t, t, p, 0.0)


def exact_rank(m) -> int:
    """Rank of an integer matrix by fraction-exact Gaussian elimination."""
    from fractions import Fraction

    rows = [[Fraction(int(x)) for x in row] for row in np.asarray(m)]
    rank, ncols = 0, len(rows[0]) if rows else 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for r in range(rank + 1, len(rows)):
            f = rows[r][col] / rows[rank][col]
            if f:
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def nonzero_eigenvalues(m) -> np.ndarray:
    """Eigenvalues of an integer matrix with its zero eigenvalues removed.

    The algebraic multiplicity of 0 is ``dim - rank(M^dim)``, computed
    exactly; rounding can push defective zeros far above machine epsilon,
    so a magnitude cutoff would miscount them.
    """
    m = np.asarray(m)
    dim = m.shape[0]
    power = np.linalg.matrix_power(m.astype(object), dim)
    zeros = dim - exact_rank(power)
    w = np.linalg.eigvals(m.astype(float))
    return w[np.argsort(-np.abs(w), kind="stable")][: dim - zeros]


def spectrum_distance(a, b) -> float:
    """Largest gap under the best one-to-one matching of two eigenvalue lists."""
    from scipy.optimize import linear_sum_assignment

    if len(a) != len(b):
        return np.inf
    if not len(a):
        return 0.0
    cost = np.abs(np.subtract.outer(a, b))
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())

"""Code indexing, co-occurrence counts and prevalence tables."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .ingest import PatientHistory

HistoryLike = Union[PatientHistory, Sequence[str]]

# sparse storage is always kept; dense copies are only materialized up to here
DENSE_LIMIT = 2048


def history_codes(history: HistoryLike) -> tuple[str, ...]:
    if isinstance(history, PatientHistory):
        return history.codes
    return tuple(history)


@dataclass(frozen=True)
class CodeIndex:
    """Bijection between F-codes and ``0..n-1`` in lexicographic code order."""

    codes: tuple[str, ...]
    forward: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if list(self.codes) != sorted(set(self.codes)):
            raise ValueError("codes must be unique and sorted")
        object.__setattr__(self, "forward", {c: i for i, c in enumerate(self.codes)})

    @property
    def backward(self) -> tuple[str, ...]:
        return self.codes

    def __len__(self) -> int:
        return len(self.codes)

    def __contains__(self, code: str) -> bool:
        return code in self.forward

    def __getitem__(self, code: str) -> int:
        return self.forward[code]

    def code(self, i: int) -> str:
        return self.codes[i]


def generated_codes(n: int) -> tuple[str, ...]:
    """``n`` F-codes in order: F_A00..F_A99, F_B00, ... (at most 2600)."""
    if not 0 <= n <= 2600:
        raise ValueError("can generate between 0 and 2600 codes")
    return tuple(f"F_{chr(ord('A') + i // 100)}{i % 100:02d}" for i in range(n))


def build_index(histories: Iterable[HistoryLike]) -> CodeIndex:
    codes = set()
    empty = True
    for h in histories:
        empty = False
        codes.update(history_codes(h))
    if empty or not codes:
        raise ValueError("cannot index an empty set of histories")
    return CodeIndex(tuple(sorted(codes)))


@dataclass(frozen=True)
class CooccurrenceMatrix:
    """Sparse ``n x n`` count matrix: ``counts[(i, j)]`` is how often code i
    was seen no later than code j within one history."""

    n: int
    counts: dict[tuple[int, int], int]

    @property
    def total_records(self) -> int:
        return sum(self.counts.values())

    def to_dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise ValueError(f"n={self.n} exceeds dense limit {DENSE_LIMIT}")
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for (i, j), c in self.counts.items():
            a[i, j] = c
        return a

    @classmethod
    def from_dense(cls, a) -> "CooccurrenceMatrix":
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("count matrix must be square")
        if (a < 0).any():
            raise ValueError("counts must be nonnegative")
        if not np.array_equal(a, np.round(a)):
            raise ValueError("counts must be integers")
        rows, cols = np.nonzero(a)
        return cls(a.shape[0], {(int(i), int(j)): int(a[i, j]) for i, j in zip(rows, cols)})

    def triplets(self) -> list[tuple[int, int, int]]:
        return [(i, j, c) for (i, j), c in sorted(self.counts.items())]

    def dump(self, stream: TextIO) -> None:
        for i, j, c in self.triplets():
            stream.write(f"{i} {j} {c}\n")


def build_cooccurrence(histories: Iterable[HistoryLike], index: CodeIndex) -> CooccurrenceMatrix:
    """Count every ordered pair of positions ``p <= q`` in each history.

    A history of length T adds T(T+1)/2 to the total, the diagonal included.
    """
    counts: Counter = Counter()
    for h in histories:
        codes = history_codes(h)
        try:
            idx = [index[c] for c in codes]
        except KeyError as exc:
            raise KeyError(f"code {exc.args[0]} is not in the index") from None
        for p, i in enumerate(idx):
            for j in idx[p:]:
                counts[(i, j)] += 1
    return CooccurrenceMatrix(len(index), dict(counts))


@dataclass(frozen=True)
class PrevalenceTable:
    """Patient-level counts.

    ``per_code[c]`` is the number of patients diagnosed with c.
    ``pair_counts[(a, b)]`` counts patients whose history has a at a position
    no later than b (so ``pair_counts[(a, a)] == per_code[a]``).
    """

    patient_count: int
    per_code: dict[str, int]
    pair_counts: dict[tuple[str, str], int]

    def ordered(self, a: str, b: str) -> int:
        return self.pair_counts.get((a, b), 0)

    def both(self, a: str, b: str) -> int:
        """Patients having both codes, in either order."""
        if a == b:
            return self.per_code.get(a, 0)
        return self.ordered(a, b) + self.ordered(b, a)


def build_prevalence(histories: Iterable[HistoryLike]) -> PrevalenceTable:
    per_code: Counter = Counter()
    pairs: Counter = Counter()
    n_patients = 0
    for h in histories:
        codes = history_codes(h)
        n_patients += 1
        # histories are deduplicated, but guard against raw sequences
        seen = list(dict.fromkeys(codes))
        per_code.update(seen)
        for p, a in enumerate(seen):
            for b in seen[p:]:
                pairs[(a, b)] += 1
    if n_patients == 0:
        raise ValueError("cannot build prevalence from zero histories")
    return PrevalenceTable(n_patients, dict(per_code), dict(pairs))


def strongly_connected_components(a: np.ndarray) -> list[list[int]]:
    """Components of the graph with an edge i -> j wherever ``a[i, j] > 0``."""
    graph = csr_matrix((np.asarray(a) > 0).astype(np.int8))
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    comps: list[list[int]] = [[] for _ in range(ncomp)]
    for node, lab in enumerate(labels):
        comps[lab].append(node)
    return comps


def restrict_irreducible(
    matrix: CooccurrenceMatrix, index: CodeIndex
) -> tuple[CooccurrenceMatrix, CodeIndex, list[str]]:
    """Keep only the largest strongly connected block of the count graph.

    Ties on component size go to the larger count mass (sum of the rows of
    the component's nodes), then to the component holding the smallest code.
    Returns the restricted matrix, its reindexed ``CodeIndex`` and the codes
    that were dropped.
    """
    if matrix.n != len(index):
        raise ValueError("matrix and index sizes differ")
    a = matrix.to_dense()
    comps = strongly_connected_components(a)
    row_mass = a.sum(axis=1)

    def rank(comp):
        return (-len(comp), -int(row_mass[comp].sum()), min(index.code(i) for i in comp))

    keep = sorted(min(comps, key=rank))
    kept = set(keep)
    removed = sorted(index.code(i) for i in range(matrix.n) if i not in kept)
    if not removed:
        return matrix, index, []
    sub = a[np.ix_(keep, keep)]
    new_index = CodeIndex(tuple(index.code(i) for i in keep))
    return CooccurrenceMatrix.from_dense(sub), new_index, removed


def is_irreducible(a) -> bool:
    a = np.asarray(a)
    if a.shape[0] == 0:
        return False
    if a.shape[0] == 1:
        return bool(a[0, 0] > 0)
    return len(strongly_connected_components(a)) == 1

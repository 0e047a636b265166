"""Synthetic visit data drawn from a planted Markov chain.

Each patient walks a ground-truth chain over ``codes`` F-codes. Background
transition mass follows a skewed popularity profile, so a few codes are
much more prevalent than the rest. Each planted pair ``(i, j)`` links a
common antecedent i (top third by popularity) to a less common consequent
j and adds ``boost`` times the average off-diagonal entry to row i, which
makes j a likely successor of i regardless of j's own prevalence.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from typing import TextIO

import numpy as np

from .cooccur import generated_codes
from .ingest import Visit, write_visits


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    patients: int = 1000
    codes: int = 30
    pairs: int = 5
    boost: float = 10.0
    # mean visits per patient in the claims cohort the method was built for
    mean_length: float = 8.19
    start_year: int = 2007
    end_year: int = 2017
    popularity_exponent: float = 1.0
    # chance of revisiting the current code, so cleaning has duplicates to drop
    repeat_prob: float = 0.1

    def __post_init__(self):
        if self.patients < 0:
            raise ValueError("patients must be >= 0")
        if not 2 <= self.codes <= 2600:
            raise ValueError("codes must be between 2 and 2600")
        if not 0 <= self.pairs <= self.codes * (self.codes - 1):
            raise ValueError("pairs must fit among the off-diagonal code pairs")
        if self.boost < 1:
            raise ValueError("boost must be >= 1")
        if self.mean_length < 1:
            raise ValueError("mean_length must be >= 1")
        if self.end_year < self.start_year:
            raise ValueError("end_year must not precede start_year")
        if not 0 <= self.repeat_prob < 1:
            raise ValueError("repeat_prob must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class PlantedChain:
    codes: tuple[str, ...]
    initial: np.ndarray
    transition: np.ndarray
    planted: list[tuple[str, str]]


def planted_chain(config: SynthConfig, rng: np.random.Generator) -> PlantedChain:
    n = config.codes
    codes = generated_codes(n)
    popularity = 1.0 / np.arange(1, n + 1) ** config.popularity_exponent
    base = popularity[None, :] * rng.uniform(0.5, 1.5, size=(n, n))
    np.fill_diagonal(base, 0.0)
    base /= base.sum(axis=1, keepdims=True)

    planted = sorted(_pick_pairs(n, config.pairs, rng))
    for i, j in planted:
        base[i, j] += config.boost / (n - 1)

    trans = (1 - config.repeat_prob) * base / base.sum(axis=1, keepdims=True)
    trans[np.diag_indices(n)] += config.repeat_prob
    return PlantedChain(codes, popularity / popularity.sum(), trans,
                        [(codes[i], codes[j]) for i, j in planted])


def _pick_pairs(n: int, pairs: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    if pairs == 0:
        return []
    n_common = max(n // 3, pairs)
    if n - n_common >= pairs:
        sources = rng.choice(n_common, size=pairs, replace=False)
        targets = n_common + rng.choice(n - n_common, size=pairs, replace=False)
        return [(int(i), int(j)) for i, j in zip(sources, targets)]
    # too many pairs for disjoint common/rare groups
    off_diag = [(i, j) for i in range(n) for j in range(n) if i != j]
    return [off_diag[int(c)] for c in rng.choice(len(off_diag), size=pairs, replace=False)]


def date_range(config: SynthConfig) -> tuple[date, date]:
    return date(config.start_year, 1, 1), date(config.end_year, 12, 31)


def midpoint_date(config: SynthConfig) -> date:
    start, end = date_range(config)
    return start + timedelta(days=(end - start).days // 2)


def generate_visits(config: SynthConfig) -> tuple[list[Visit], PlantedChain]:
    """Sample visits for ``config.patients`` patients; deterministic in the seed."""
    rng = np.random.default_rng(config.seed)
    chain = planted_chain(config, rng)
    n = config.codes
    start, end = date_range(config)
    span = (end - start).days
    cum = np.cumsum(chain.transition, axis=1)
    visits: list[Visit] = []
    for pid in range(1, config.patients + 1):
        length = int(rng.geometric(1.0 / config.mean_length))
        gender = "F" if rng.random() < 0.5 else "M"
        state = int(rng.choice(n, p=chain.initial))
        path = [state]
        for _ in range(length - 1):
            state = min(int(np.searchsorted(cum[state], rng.random(), side="right")), n - 1)
            path.append(state)
        days = np.sort(rng.integers(0, span + 1, size=length))
        subcodes = rng.integers(0, 10, size=length)
        for state, day, sub in zip(path, days, subcodes):
            family = chain.codes[state][2:]
            visits.append(Visit(str(pid), gender, start + timedelta(days=int(day)),
                                f"{family}.{sub}"))
    return visits, chain


def write_synthetic(config: SynthConfig, stream: TextIO) -> PlantedChain:
    visits, chain = generate_visits(config)
    write_visits(visits, stream)
    return chain

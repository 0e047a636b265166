"""Temporal train/test split and hit-rate comparison against the prevalence baseline.

Deduplication runs on the full history before splitting, so a patient's
target set only holds diseases first seen on or after the cutoff. A disease
already diagnosed before the cutoff can never be a hit.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Sequence, TextIO

from .cooccur import PrevalenceTable
from .ingest import (
    CodeMapping,
    IngestError,
    PatientHistory,
    Visit,
    earliest_occurrences,
    normalize_visits,
    order_events,
    patient_sort_key,
)
from .maxent import MaxEntModel
from .predict import UNIFORM, UnknownHistoryError, WeightingScheme, score, top_k


@dataclass(frozen=True)
class TemporalSplit:
    """Histories before ``cutoff`` and first-occurrence targets after it.

    ``train_histories`` holds every patient with at least one event before
    the cutoff, so it can be used to fit a model. Only patients that also
    have a non-empty target set are evaluated.
    """

    cutoff: date
    train_histories: list[PatientHistory]
    targets: dict[str, frozenset[str]]
    excluded: dict[str, int] = field(default_factory=dict)

    def evaluable(self) -> list[tuple[PatientHistory, frozenset[str]]]:
        return [(h, self.targets[h.patient_id]) for h in self.train_histories
                if h.patient_id in self.targets]


def temporal_split(
    visits: Iterable[Visit],
    mapping: CodeMapping | None,
    cutoff: date,
    *,
    strict: bool = True,
    errors: list[IngestError] | None = None,
) -> TemporalSplit:
    first = earliest_occurrences(normalize_visits(visits, mapping, strict=strict, errors=errors))
    train: list[PatientHistory] = []
    targets: dict[str, frozenset[str]] = {}
    excluded: Counter = Counter()
    for pid in sorted(first, key=patient_sort_key):
        before = {c: d for c, d in first[pid].items() if d < cutoff}
        after = frozenset(c for c, d in first[pid].items() if d >= cutoff)
        if before:
            train.append(PatientHistory(pid, order_events(before)))
        if not before:
            excluded["empty_train_history"] += 1
        elif not after:
            excluded["empty_target_set"] += 1
        else:
            targets[pid] = after
    return TemporalSplit(cutoff, train, targets, dict(excluded))


def hit_rate(predicted: Iterable[str], actual: Iterable[str]) -> float:
    """``|predicted & actual| / |actual|``."""
    actual = set(actual)
    if not actual:
        raise ValueError("actual disease set is empty")
    return len(set(predicted) & actual) / len(actual)


def baseline_top_prevalent(prev: PrevalenceTable, k: int) -> list[str]:
    """The ``k`` most prevalent codes, ties in code order."""
    if k < 1:
        raise ValueError("k must be at least 1")
    ranked = sorted(prev.per_code.items(), key=lambda item: (-item[1], item[0]))
    return [code for code, _ in ranked[:k]]


@dataclass(frozen=True)
class EvalReport:
    """Macro-averaged (mean of per-patient) hit rates for k = 1..K."""

    per_k: dict[int, tuple[float, float]]
    patients_evaluated: int
    patients_skipped: dict[str, int]
    aggregation: str = "macro"

    def write(self, stream: TextIO) -> None:
        stream.write(f"# hit rates are {self.aggregation} averages over patients\n")
        stream.write("k,maxent_hit_rate,baseline_hit_rate,patients\n")
        for k, (m, b) in sorted(self.per_k.items()):
            stream.write(f"{k},{m:.4f},{b:.4f},{self.patients_evaluated}\n")
        for reason, count in sorted(self.patients_skipped.items()):
            stream.write(f"# skipped {reason}: {count}\n")


def evaluate(
    model: MaxEntModel,
    split: TemporalSplit,
    prev: PrevalenceTable,
    K: int = 5,
    scheme: WeightingScheme = UNIFORM,
    exclude_history: bool = True,
) -> EvalReport:
    """Hit rate of the model's top-k against the top-k most prevalent codes.

    The model and ``prev`` should both come from pre-cutoff data only.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    skipped: Counter = Counter(split.excluded)
    baseline = baseline_top_prevalent(prev, K)
    sums_model = [0.0] * K
    sums_base = [0.0] * K
    evaluated = 0
    for history, actual in split.evaluable():
        try:
            s = score(model, history.codes, scheme)
        except UnknownHistoryError:
            skipped["history_outside_model"] += 1
            continue
        exclude = history.codes if exclude_history else ()
        ranked = top_k(s, K, model.index, exclude)
        for k in range(1, K + 1):
            sums_model[k - 1] += hit_rate(ranked[:k], actual)
            sums_base[k - 1] += hit_rate(baseline[:k], actual)
        evaluated += 1
    if evaluated == 0:
        raise ValueError("no patients could be evaluated")
    per_k = {k: (sums_model[k - 1] / evaluated, sums_base[k - 1] / evaluated)
             for k in range(1, K + 1)}
    return EvalReport(per_k, evaluated, dict(skipped))

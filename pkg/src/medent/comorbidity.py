"""Pairwise comorbidity strength: relative risk, |log RR| and phi-correlation.

Two families of measures are provided and never mixed:

* model-based, from a fitted chain: ``RR_ij = P[i, j] / (p_i p_j)`` with the
  transition probability ``P[i, j]`` and stationary probabilities ``p``;
* empirical, from patient counts: ``ERR_ij = C_ij N / (P_i P_j)`` where
  ``C_ij`` counts patients with both diseases in either order.

Logs are natural. A pair that never co-occurs has no finite |log RR|; such
pairs get the ``NO_COOCCURRENCE`` sentinel instead of infinity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, TextIO

from .cooccur import PrevalenceTable
from .maxent import MaxEntModel


class _NoCooccurrence:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NO_COOCCURRENCE"

    def __bool__(self) -> bool:
        return False


NO_COOCCURRENCE = _NoCooccurrence()


class DegenerateMarginalError(ValueError):
    pass


def _model_indices(model: MaxEntModel, i: str, j: str) -> tuple[int, int]:
    try:
        return model.index[i], model.index[j]
    except KeyError as exc:
        raise KeyError(f"code {exc.args[0]} is not in the model") from None


def model_relative_risk(model: MaxEntModel, i: str, j: str) -> float:
    a, b = _model_indices(model, i, j)
    p = model.stationary
    return float(model.transition[a, b] / (p[a] * p[b]))


def alrr_from_rr(rr: float):
    if rr <= 0:
        return NO_COOCCURRENCE
    return abs(math.log(rr))


def model_alrr(model: MaxEntModel, i: str, j: str):
    """``|log RR_ij|``, or ``NO_COOCCURRENCE`` when ``P[i, j] == 0``."""
    return alrr_from_rr(model_relative_risk(model, i, j))


def phi_coefficient(p_ij: float, p_i: float, p_j: float) -> float:
    if not (0 < p_i < 1 and 0 < p_j < 1):
        raise DegenerateMarginalError(f"marginals must lie strictly in (0, 1): {p_i}, {p_j}")
    return (p_ij - p_i * p_j) / math.sqrt(p_i * p_j * (1 - p_i) * (1 - p_j))


def model_phi(model: MaxEntModel, i: str, j: str) -> float:
    a, b = _model_indices(model, i, j)
    p = model.stationary
    return phi_coefficient(float(model.transition[a, b]), float(p[a]), float(p[b]))


class EmpiricalMeasures(NamedTuple):
    err: float
    alrr: object  # float or NO_COOCCURRENCE
    phi: float


def empirical_measures(prev: PrevalenceTable, i: str, j: str) -> EmpiricalMeasures:
    """Count-based relative risk, its |log| and phi for codes ``i``, ``j``."""
    n = prev.patient_count
    p_i = prev.per_code.get(i, 0)
    p_j = prev.per_code.get(j, 0)
    if p_i <= 0 or p_j <= 0:
        raise ValueError(f"prevalence of {i if p_i <= 0 else j} is zero")
    c = prev.both(i, j)
    err = c * n / (p_i * p_j)
    return EmpiricalMeasures(err, alrr_from_rr(err), phi_coefficient(c / n, p_i / n, p_j / n))


@dataclass(frozen=True)
class ComorbidityRow:
    i: str
    j: str
    rr: float
    alrr: object
    phi: float | None

    def value(self, measure: str):
        return getattr(self, measure)


@dataclass(frozen=True)
class ComorbidityTable:
    pairs: list[ComorbidityRow]
    source: Literal["model", "empirical"]
    measure: str = "alrr"
    asymmetric: list[tuple[str, str, float, float]] | None = None


def _safe_phi(fn, *args):
    try:
        return fn(*args)
    except DegenerateMarginalError:
        return None


def model_rows(model: MaxEntModel) -> list[ComorbidityRow]:
    """All ordered pairs of distinct codes with model-based measures."""
    codes = model.index.codes
    rows = []
    for i in codes:
        for j in codes:
            if i == j:
                continue
            rr = model_relative_risk(model, i, j)
            rows.append(ComorbidityRow(i, j, rr, alrr_from_rr(rr), _safe_phi(model_phi, model, i, j)))
    return rows


def empirical_rows(prev: PrevalenceTable) -> list[ComorbidityRow]:
    """Unordered pairs (``i < j``) with count-based measures."""
    codes = sorted(prev.per_code)
    rows = []
    for x, i in enumerate(codes):
        for j in codes[x + 1:]:
            try:
                err, alrr, phi = empirical_measures(prev, i, j)
            except DegenerateMarginalError:
                n = prev.patient_count
                err = prev.both(i, j) * n / (prev.per_code[i] * prev.per_code[j])
                alrr, phi = alrr_from_rr(err), None
            rows.append(ComorbidityRow(i, j, err, alrr, phi))
    return rows


def asymmetric_pairs(model: MaxEntModel, gap: float) -> list[tuple[str, str, float, float]]:
    """Pairs ``(i, j, M_ij, M_ji)`` with ``i < j`` and ``|M_ij - M_ji| >= gap``.

    Pairs where either direction has no co-occurrence are left out.
    """
    codes = model.index.codes
    out = []
    for x, i in enumerate(codes):
        for j in codes[x + 1:]:
            m_ij, m_ji = model_alrr(model, i, j), model_alrr(model, j, i)
            if m_ij is NO_COOCCURRENCE or m_ji is NO_COOCCURRENCE:
                continue
            if abs(m_ij - m_ji) >= gap:
                out.append((i, j, m_ij, m_ji))
    out.sort(key=lambda t: (-abs(t[2] - t[3]), t[0], t[1]))
    return out


def comorbidity_report(
    model: MaxEntModel | None = None,
    prev: PrevalenceTable | None = None,
    threshold: float = 0.0,
    top_m: int = 20,
    *,
    source: Literal["model", "empirical"] = "model",
    measure: Literal["rr", "alrr", "phi"] = "alrr",
    asymmetric_gap: float | None = None,
) -> ComorbidityTable:
    """Pairs whose ``measure`` is at least ``threshold``, strongest first.

    Ties are broken by the code pair. Rows whose measure is undefined (the
    no-co-occurrence sentinel, or phi on a degenerate marginal) never pass
    the threshold. With ``asymmetric_gap`` set, the table also lists model
    pairs whose ALRR differs by at least that much between directions.
    """
    if measure not in ("rr", "alrr", "phi"):
        raise ValueError(f"unknown measure {measure!r}")
    if source == "model":
        if model is None:
            raise ValueError("a fitted model is required for model-based measures")
        rows = model_rows(model)
    elif source == "empirical":
        if prev is None:
            raise ValueError("a prevalence table is required for empirical measures")
        rows = empirical_rows(prev)
    else:
        raise ValueError(f"unknown source {source!r}")

    kept = []
    for row in rows:
        v = row.value(measure)
        if v is None or v is NO_COOCCURRENCE or v < threshold:
            continue
        kept.append(row)
    kept.sort(key=lambda r: (-r.value(measure), r.i, r.j))

    asym = None
    if asymmetric_gap is not None:
        if model is None:
            raise ValueError("asymmetric pairs need a fitted model")
        asym = asymmetric_pairs(model, asymmetric_gap)[:top_m]
    return ComorbidityTable(kept[:top_m], source, measure, asym)


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def write_report(table: ComorbidityTable, stream: TextIO) -> None:
    """Long-format CSV ``disease_i,disease_j,measure,value``.

    Asymmetric pairs are appended as ``alrr_ij``/``alrr_ji`` rows.
    """
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["disease_i", "disease_j", "measure", "value"])
    name = table.measure if table.source == "model" or table.measure != "rr" else "err"
    for row in table.pairs:
        writer.writerow([row.i, row.j, name, _fmt(row.value(table.measure))])
    for i, j, m_ij, m_ji in table.asymmetric or ():
        writer.writerow([i, j, "alrr_ij", _fmt(m_ij)])
        writer.writerow([i, j, "alrr_ji", _fmt(m_ji)])

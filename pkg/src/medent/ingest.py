"""Visit-record parsing, ICD-10 normalization and history cleaning.

A visit CSV has one row per hospital visit::

    patient_id,gender,treatment_date,code
    14532,F,2011-10-15,F_M47

Codes are either raw ICD-10 codes (``A01.001``) which get collapsed to their
three-character family and mapped to an F-code, or codes that are already
F-codes (``F_M47``) which pass through untouched.
"""

from __future__ import annotations

import csv
import io
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Iterable, Literal, TextIO

logger = logging.getLogger(__name__)

ICD10_PATTERN = re.compile(r"^[A-Z][0-9]{2}(?:\.[0-9]{1,3})?$")
FCODE_PATTERN = re.compile(r"^F_[A-Z][0-9]{2}$")

VISIT_HEADER = ("patient_id", "gender", "treatment_date", "code")
HISTORY_HEADER = ("patient_id", "history")

Fallback = Literal["collapse", "reject"]


class IngestError(ValueError):
    """Raised for malformed input data."""


class RowError(IngestError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class UnmappedCodeError(IngestError):
    def __init__(self, family: str):
        super().__init__(f"unmapped family {family}")
        self.family = family


def is_fcode(value: str) -> bool:
    return FCODE_PATTERN.match(value) is not None


def is_icd10(value: str) -> bool:
    return ICD10_PATTERN.match(value) is not None


@dataclass(frozen=True)
class Visit:
    patient_id: str
    gender: str
    treatment_date: date
    raw_code: str
    fcode: str | None = None


@dataclass(frozen=True)
class CodeMapping:
    """Map from a 3-character ICD-10 family to an F-code.

    ``fallback`` decides what happens to families without an entry:
    ``"collapse"`` turns ``A01`` into ``F_A01``, ``"reject"`` raises.
    """

    entries: dict[str, str] = field(default_factory=dict)
    fallback: Fallback = "collapse"

    def __post_init__(self):
        if self.fallback not in ("collapse", "reject"):
            raise ValueError(f"unknown fallback {self.fallback!r}")
        for family, target in self.entries.items():
            if not re.match(r"^[A-Z][0-9]{2}$", family):
                raise ValueError(f"invalid family key {family!r}")
            if not is_fcode(target):
                raise ValueError(f"mapping target {target!r} for {family} is not an F-code")


def load_mapping(path: str | Path, fallback: Fallback = "collapse") -> CodeMapping:
    """Read a ``FAMILY<TAB>FCODE`` mapping file (``#`` starts a comment)."""
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise IngestError(f"{path}:{lineno}: expected FAMILY<TAB>FCODE")
            family, target = parts[0].strip(), parts[1].strip()
            if family in entries:
                raise IngestError(f"{path}:{lineno}: duplicate family {family}")
            entries[family] = target
    try:
        return CodeMapping(entries, fallback)
    except ValueError as exc:
        raise IngestError(f"{path}: {exc}") from exc


def normalize_code(raw: str, mapping: CodeMapping | None = None) -> str:
    """Collapse an ICD-10 code to its family and map it to an F-code.

    >>> normalize_code("A01.001")
    'F_A01'
    """
    if mapping is None:
        mapping = CodeMapping()
    if is_fcode(raw):
        return raw
    if not is_icd10(raw):
        raise IngestError(f"invalid ICD-10 code {raw!r}")
    family = raw[:3]
    target = mapping.entries.get(family)
    if target is not None:
        return target
    if mapping.fallback == "reject":
        raise UnmappedCodeError(family)
    return "F_" + family


def _parse_gender(value: str) -> str:
    value = value.strip().upper()
    return value if value in ("F", "M") else "unknown"


def parse_visits(
    stream: TextIO | str,
    *,
    strict: bool = True,
    errors: list[RowError] | None = None,
) -> list[Visit]:
    """Parse a visit CSV into ``Visit`` rows, preserving row order.

    In strict mode the first bad row raises ``RowError``. In lenient mode bad
    rows are skipped, logged, and appended to ``errors`` when given. Line
    numbers count the header as line 1.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return []
    if tuple(h.strip() for h in header) != VISIT_HEADER:
        raise IngestError(f"line 1: expected header {','.join(VISIT_HEADER)}")

    visits: list[Visit] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            visits.append(_parse_row(row, line))
        except RowError as exc:
            if strict:
                raise
            logger.warning("skipping %s", exc)
            if errors is not None:
                errors.append(exc)
    return visits


def _parse_row(row: list[str], line: int) -> Visit:
    if len(row) != 4:
        raise RowError(line, f"expected 4 fields, got {len(row)}")
    patient_id, gender, raw_date, code = (cell.strip() for cell in row)
    if not patient_id:
        raise RowError(line, "empty patient_id")
    try:
        when = date.fromisoformat(raw_date)
    except ValueError:
        raise RowError(line, "invalid date") from None
    if not (is_icd10(code) or is_fcode(code)):
        raise RowError(line, "invalid code")
    return Visit(patient_id, _parse_gender(gender), when, code)


def write_visits(visits: Iterable[Visit], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(VISIT_HEADER)
    for v in visits:
        writer.writerow([v.patient_id, v.gender if v.gender != "unknown" else "U",
                         v.treatment_date.isoformat(), v.raw_code])


@dataclass(frozen=True)
class PatientHistory:
    """Time-ordered first occurrences of each F-code for one patient."""

    patient_id: str
    events: tuple[tuple[str, date], ...]

    def __post_init__(self):
        if not self.events:
            raise ValueError(f"patient {self.patient_id}: empty history")

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(code for code, _ in self.events)

    def __len__(self) -> int:
        return len(self.events)


def patient_sort_key(patient_id: str):
    # numeric ids sort numerically, everything else after them as text
    if patient_id.isdigit():
        return (0, int(patient_id), patient_id)
    return (1, 0, patient_id)


def normalize_visits(
    visits: Iterable[Visit],
    mapping: CodeMapping | None = None,
    *,
    strict: bool = True,
    errors: list[IngestError] | None = None,
) -> list[Visit]:
    """Fill in ``fcode`` on every visit; lenient mode drops failures."""
    out = []
    for v in visits:
        try:
            out.append(replace(v, fcode=normalize_code(v.raw_code, mapping)))
        except IngestError as exc:
            if strict:
                raise
            logger.warning("patient %s: %s", v.patient_id, exc)
            if errors is not None:
                errors.append(exc)
    return out


def earliest_occurrences(visits: Iterable[Visit]) -> dict[str, dict[str, date]]:
    """patient_id -> {fcode: first date}. Visits must already be normalized."""
    first: dict[str, dict[str, date]] = defaultdict(dict)
    for v in visits:
        if v.fcode is None:
            raise ValueError("visit has not been normalized")
        seen = first[v.patient_id]
        prev = seen.get(v.fcode)
        if prev is None or v.treatment_date < prev:
            seen[v.fcode] = v.treatment_date
    return first


def order_events(first: dict[str, date]) -> tuple[tuple[str, date], ...]:
    # same-day ties fall back to code order
    return tuple(sorted(first.items(), key=lambda item: (item[1], item[0])))


def clean_histories(
    visits: Iterable[Visit],
    mapping: CodeMapping | None = None,
    *,
    strict: bool = True,
    errors: list[IngestError] | None = None,
) -> list[PatientHistory]:
    """Group visits per patient, keep each F-code's earliest visit, sort by date.

    Patients are returned sorted by id so the output does not depend on the
    input row order.
    """
    normalized = normalize_visits(visits, mapping, strict=strict, errors=errors)
    first = earliest_occurrences(normalized)
    return [
        PatientHistory(pid, order_events(first[pid]))
        for pid in sorted(first, key=patient_sort_key)
        if first[pid]
    ]


def write_histories(histories: Iterable[PatientHistory], stream: TextIO) -> None:
    """Write the cleaned-history CSV, history always in a quoted field."""
    stream.write(",".join(HISTORY_HEADER) + "\n")
    for h in histories:
        pid = h.patient_id
        if any(ch in pid for ch in ',"\n'):
            pid = '"' + pid.replace('"', '""') + '"'
        stream.write(f'{pid},"{",".join(h.codes)}"\n')


def read_histories(stream: TextIO | str) -> list[tuple[str, tuple[str, ...]]]:
    """Read a cleaned-history CSV as ``(patient_id, codes)`` pairs.

    Dates are not part of the file, so plain code sequences come back rather
    than ``PatientHistory`` objects.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return []
    if tuple(h.strip() for h in header) != HISTORY_HEADER:
        raise IngestError(f"line 1: expected header {','.join(HISTORY_HEADER)}")
    out = []
    for row in reader:
        if not row:
            continue
        if len(row) != 2:
            raise RowError(reader.line_num, f"expected 2 fields, got {len(row)}")
        codes = tuple(c.strip() for c in row[1].split(",") if c.strip())
        for c in codes:
            if not is_fcode(c):
                raise RowError(reader.line_num, f"invalid F-code {c!r}")
        if len(set(codes)) != len(codes):
            raise RowError(reader.line_num, "duplicate code in history")
        if codes:
            out.append((row[0].strip(), codes))
    return out

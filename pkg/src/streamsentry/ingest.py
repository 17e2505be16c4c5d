"""Intel Berkeley Research Lab sensor log ingestion.

The raw log is whitespace-separated text, one reading per line:

    date time epoch mote_id temperature humidity light voltage

Epochs are the dataset's own synchronized counter, so they are the
alignment key. Parsing is streaming and tolerant: malformed or truncated
lines are counted and skipped, never fatal. Alignment produces one row
per epoch in the requested range with missing cells forward-filled from
the mote's last value (leading gaps back-filled from its first), keeping
every present raw value untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

FIELDS = ("temperature", "humidity", "light", "voltage")


class NoDataError(Exception):
    """A requested mote has no records in the epoch range."""


@dataclass(frozen=True)
class LabRecord:
    date: str
    time: str
    epoch: int
    mote_id: int
    temperature: float
    humidity: float
    light: float
    voltage: float

    def value(self, field: str) -> float:
        return getattr(self, field)


@dataclass
class ParseResult:
    records: list
    skipped: int


def parse_lab_log(lines) -> ParseResult:
    """Parse an iterable of raw log lines into records.

    Lines with fewer than 8 columns or non-numeric payload columns are
    skipped and counted; only I/O failures propagate.
    """
    records = []
    skipped = 0
    for raw in lines:
        parts = raw.split()
        if len(parts) < 8:
            if raw.strip():
                skipped += 1
            continue
        try:
            rec = LabRecord(
                date=parts[0],
                time=parts[1],
                epoch=int(parts[2]),
                mote_id=int(parts[3]),
                temperature=float(parts[4]),
                humidity=float(parts[5]),
                light=float(parts[6]),
                voltage=float(parts[7]),
            )
        except ValueError:
            skipped += 1
            continue
        if rec.epoch < 0:
            skipped += 1
            continue
        records.append(rec)
    return ParseResult(records=records, skipped=skipped)


@dataclass
class AlignedSeries:
    """Rectangular reading matrix, one row per epoch, one column per mote."""

    mote_ids: list
    field: str
    epochs: np.ndarray
    matrix: np.ndarray
    gap_report: dict


def align(records, mote_ids, field: str, epoch_range=None) -> AlignedSeries:
    """Align per-mote readings onto a shared epoch axis.

    Missing (mote, epoch) cells are forward-filled from that mote's last
    value; leading gaps are back-filled from its first available value.
    The gap report counts filled cells per mote.
    """
    if len(mote_ids) < 2:
        raise ValueError("need at least 2 motes")
    if field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}, got {field!r}")

    per_mote: dict = {m: {} for m in mote_ids}
    for rec in records:
        if rec.mote_id in per_mote:
            # last record wins when a (mote, epoch) repeats
            per_mote[rec.mote_id][rec.epoch] = rec.value(field)

    for m in mote_ids:
        if not per_mote[m]:
            raise NoDataError(f"mote {m} has no records")

    if epoch_range is None:
        lo = min(min(d) for d in per_mote.values())
        hi = max(max(d) for d in per_mote.values())
    else:
        lo, hi = epoch_range
        for m in mote_ids:
            if not any(lo <= e <= hi for e in per_mote[m]):
                raise NoDataError(f"mote {m} has no records in epochs [{lo}, {hi}]")

    epochs = np.arange(lo, hi + 1)
    matrix = np.empty((epochs.size, len(mote_ids)), dtype=np.float64)
    gap_report = {}
    for col, m in enumerate(mote_ids):
        series = per_mote[m]
        present = sorted(e for e in series if lo <= e <= hi)
        first_value = series[present[0]] if present else None
        gaps = 0
        last = None
        for row, epoch in enumerate(epochs):
            if epoch in series:
                last = series[epoch]
                matrix[row, col] = last
            else:
                matrix[row, col] = last if last is not None else first_value
                gaps += 1
        gap_report[m] = gaps
    return AlignedSeries(
        mote_ids=list(mote_ids),
        field=field,
        epochs=epochs,
        matrix=matrix,
        gap_report=gap_report,
    )


def select_correlated_motes(
    records, field: str = "temperature", k: int = 4,
    epoch_range=None, candidate_pool: int = 10, min_coverage: float = 0.5,
) -> list:
    """Pick the k motes whose aligned series are most mutually correlated.

    Motes must cover at least `min_coverage` of the epoch range to be
    considered. The top `candidate_pool` motes by average pairwise
    correlation are searched exhaustively for the k-subset with the
    highest mean pairwise correlation. Deterministic given the records.
    """
    mote_ids = sorted({r.mote_id for r in records})
    if len(mote_ids) < k:
        raise ValueError(f"only {len(mote_ids)} motes present, need {k}")

    per_mote: dict = {m: {} for m in mote_ids}
    for rec in records:
        per_mote[rec.mote_id][rec.epoch] = rec.value(field)
    if epoch_range is None:
        lo = min(min(d) for d in per_mote.values() if d)
        hi = max(max(d) for d in per_mote.values() if d)
    else:
        lo, hi = epoch_range
    span = hi - lo + 1

    eligible = [
        m for m in mote_ids
        if sum(lo <= e <= hi for e in per_mote[m]) >= min_coverage * span
    ]
    if len(eligible) < k:
        raise NoDataError(
            f"only {len(eligible)} motes cover >= {min_coverage:.0%} of the range"
        )

    aligned = align(records, eligible, field, (lo, hi))
    corr = np.corrcoef(aligned.matrix.T)
    np.fill_diagonal(corr, 0.0)
    avg = corr.sum(axis=1) / (len(eligible) - 1)
    order = np.argsort(-avg, kind="stable")
    pool = [eligible[i] for i in order[:candidate_pool]]

    best_subset = None
    best_score = -np.inf
    index = {m: eligible.index(m) for m in pool}
    for subset in combinations(sorted(pool), k):
        idx = [index[m] for m in subset]
        sub = corr[np.ix_(idx, idx)]
        score = sub.sum() / (k * (k - 1))
        if score > best_score + 1e-15:
            best_score = score
            best_subset = subset
    return list(best_subset)

"""Score tables: the delimited format exchanged between scoring, the session
service, and the statistics engine.

One row per subject x condition with both the percent-correct score (used
for descriptives) and its rationalized-arcsine transform (used for the
inferential tests).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from earbench.scoring import rau as rau_transform

COLUMNS = ("subject", "location", "room", "channels", "percent_correct", "rau")


class TableError(ValueError):
    """Malformed or unbalanced score table."""


@dataclass(frozen=True)
class ScoreRow:
    subject: str
    location: str
    room: str
    channels: int
    percent: float
    rau: float


@dataclass(frozen=True)
class CellSummary:
    location: str
    room: str
    channels: int
    n: int
    mean_percent: float
    sd_percent: float

    @property
    def single_observation(self) -> bool:
        return self.n == 1


class ScoreTable:
    """Immutable collection of per-condition scores."""

    def __init__(self, rows: Iterable[ScoreRow]):
        self.rows = tuple(rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    # -- construction --------------------------------------------------------

    @classmethod
    def from_csv(cls, text: str) -> "ScoreTable":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            raise TableError("empty score table")
        missing = set(COLUMNS) - set(reader.fieldnames)
        if missing:
            raise TableError(f"score table missing columns: {sorted(missing)}")
        rows = []
        for rec in reader:
            rows.append(
                ScoreRow(
                    subject=rec["subject"],
                    location=rec["location"],
                    room=rec["room"],
                    channels=int(rec["channels"]),
                    percent=float(rec["percent_correct"]),
                    rau=float(rec["rau"]),
                )
            )
        return cls(rows)

    @classmethod
    def load(cls, path) -> "ScoreTable":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return cls.from_csv(fh.read())

    @classmethod
    def from_trial_rows(cls, records: Iterable[dict]) -> "ScoreTable":
        """Aggregate per-trial records (the session export) into one row per
        subject x condition, pooling phoneme counts before the transform.

        Only testing-phase trials enter the table.
        """
        pooled: dict[tuple, list[int]] = {}
        for rec in records:
            if rec.get("phase", "testing").lower() != "testing":
                continue
            key = (
                str(rec["subject"]),
                str(rec.get("location", "remote")),
                str(rec["room"]),
                int(rec["channels"]),
            )
            counts = pooled.setdefault(key, [0, 0])
            counts[0] += int(rec["correct_phonemes"])
            counts[1] += int(rec["total_phonemes"])
        rows = []
        for (subject, location, room, channels), (correct, total) in sorted(pooled.items()):
            if total == 0:
                raise TableError(f"condition {room}/{channels} for {subject} has no phonemes")
            rows.append(
                ScoreRow(
                    subject=subject,
                    location=location,
                    room=room,
                    channels=channels,
                    percent=100.0 * correct / total,
                    rau=rau_transform(correct, total),
                )
            )
        return cls(rows)

    # -- output ---------------------------------------------------------------

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(COLUMNS)
        for r in self.rows:
            writer.writerow(
                [r.subject, r.location, r.room, r.channels, f"{r.percent:.6f}", f"{r.rau:.6f}"]
            )
        return out.getvalue()

    # -- shaping for the ANOVA engine ----------------------------------------

    def levels(self, factor: str) -> list:
        vals = {getattr(r, factor) for r in self.rows}
        return sorted(vals)

    def pivot(self, factor_a: str = "room", factor_b: str = "channels"):
        """Return (Y, subjects, a_levels, b_levels, groups) with Y shaped
        (subjects, len(a_levels), len(b_levels)) holding RAU scores.

        Raises TableError unless every subject has every cell exactly once
        and belongs to exactly one location.
        """
        a_levels = self.levels(factor_a)
        b_levels = self.levels(factor_b)
        subjects = self.levels("subject")
        a_idx = {v: i for i, v in enumerate(a_levels)}
        b_idx = {v: i for i, v in enumerate(b_levels)}
        s_idx = {v: i for i, v in enumerate(subjects)}
        Y = np.full((len(subjects), len(a_levels), len(b_levels)), np.nan)
        location: dict[str, str] = {}
        for r in self.rows:
            si, ai, bi = s_idx[r.subject], a_idx[getattr(r, factor_a)], b_idx[getattr(r, factor_b)]
            if not np.isnan(Y[si, ai, bi]):
                raise TableError(
                    f"duplicate cell for subject {r.subject}: "
                    f"{factor_a}={getattr(r, factor_a)}, {factor_b}={getattr(r, factor_b)}"
                )
            Y[si, ai, bi] = r.rau
            if location.setdefault(r.subject, r.location) != r.location:
                raise TableError(f"subject {r.subject} appears in two locations")
        if np.isnan(Y).any():
            missing = int(np.isnan(Y).sum())
            raise TableError(f"unbalanced design: {missing} empty subject-condition cells")
        groups = np.array([location[s] for s in subjects])
        return Y, subjects, a_levels, b_levels, groups


def summarize_conditions(table: ScoreTable) -> list[CellSummary]:
    """Per (location, room, channels) cell: n, mean, and sd of percent correct."""
    if len(table) == 0:
        raise TableError("cannot summarize an empty table")
    cells: dict[tuple, list[float]] = {}
    for r in table:
        cells.setdefault((r.location, r.room, r.channels), []).append(r.percent)
    out = []
    for (location, room, channels), values in sorted(cells.items()):
        arr = np.asarray(values)
        sd = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
        out.append(
            CellSummary(
                location=location,
                room=room,
                channels=channels,
                n=len(arr),
                mean_percent=float(arr.mean()),
                sd_percent=sd,
            )
        )
    return out

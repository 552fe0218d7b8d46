"""Panels of aligned entity time series and their CSV form."""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .errors import PanelError

MIN_PERIODS = 3


@dataclass(frozen=True, eq=False)
class Panel:
    """N entities observed over the same T periods.

    ``values`` has shape (N, T), one row per entity, and is stored read-only.
    """

    entities: tuple[str, ...]
    periods: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        entities = tuple(str(e) for e in self.entities)
        periods = tuple(str(p) for p in self.periods)
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise PanelError(f"panel values must be 2-D, got shape {values.shape}")
        if values.shape != (len(entities), len(periods)):
            raise PanelError(
                f"panel values have shape {values.shape} but there are "
                f"{len(entities)} entities and {len(periods)} periods"
            )
        if len(entities) < 1:
            raise PanelError("panel has no entities")
        if len(periods) < MIN_PERIODS:
            raise PanelError(f"panel needs at least {MIN_PERIODS} periods, got {len(periods)}")
        _check_unique(entities, "entity")
        _check_unique(periods, "period")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            i, t = bad[0]
            raise PanelError(
                f"non-finite value for entity {entities[i]!r} at period {periods[t]!r}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "entities", entities)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.entities)

    @property
    def t(self) -> int:
        return len(self.periods)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Panel):
            return NotImplemented
        return (
            self.entities == other.entities
            and self.periods == other.periods
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]

    def index(self, entity: str) -> int:
        return self.entities.index(entity)

    def subset(self, entities: Sequence[str]) -> "Panel":
        rows = [self.index(e) for e in entities]
        return Panel(tuple(entities), self.periods, self.values[rows])

    def with_values(self, values: np.ndarray) -> "Panel":
        return Panel(self.entities, self.periods, values)

    def series(self, entity: str) -> np.ndarray:
        return self.values[self.index(entity)]


def _check_unique(labels: Sequence[str], what: str) -> None:
    seen: set[str] = set()
    for label in labels:
        if label in seen:
            raise PanelError(f"duplicate {what} label {label!r}")
        seen.add(label)


def _parse_cell(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise PanelError(f"non-numeric cell {text!r}") from None
    if not math.isfinite(value):
        raise PanelError(f"non-finite cell {text!r}")
    return value


def read_panel(stream: IO[str], *, min_entities: int = 2) -> Panel:
    """Parse a panel from an open text stream (see :func:`load_panel`)."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise PanelError("empty input: a header row is required") from None
    header = [h.strip() for h in header]
    if len(header) < 2:
        raise PanelError("header must name a period column and at least one entity")
    entities = header[1:]
    if any(not e for e in entities):
        raise PanelError("empty entity label in header")
    _check_unique(entities, "entity")
    if len(entities) < min_entities:
        raise PanelError(f"need at least {min_entities} entities, got {len(entities)}")

    periods: list[str] = []
    rows: list[list[float]] = []
    started = False
    for data_row, record in enumerate(reader, start=1):
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) != len(header):
            raise PanelError(
                f"data row {data_row} has {len(record)} fields, expected {len(header)}"
            )
        period = record[0].strip()
        cells = []
        for entity, text in zip(entities, record[1:]):
            try:
                cells.append(_parse_cell(text))
            except PanelError as exc:
                raise PanelError(f"data row {data_row} (period {period!r}, entity {entity!r}): {exc}") from None
        missing = [entities[j] for j, c in enumerate(cells) if c is None]
        if missing:
            if not started:
                # leading rows before the first complete one are trimmed
                continue
            raise PanelError(
                f"missing value for entity {missing[0]!r} at period {period!r} "
                f"(data row {data_row})"
            )
        started = True
        periods.append(period)
        rows.append(cells)  # type: ignore[arg-type]

    if len(rows) < MIN_PERIODS:
        raise PanelError(f"need at least {MIN_PERIODS} complete rows, got {len(rows)}")
    return Panel(tuple(entities), tuple(periods), np.array(rows, dtype=float).T)


def load_panel(path: str | Path, *, min_entities: int = 2) -> Panel:
    """Load a panel from a CSV file.

    The first column holds period labels, the remaining header cells are
    entity labels. Rows with empty cells at the head of the file are dropped
    up to the first fully populated row; any gap after that is an error.
    ``"-"`` reads standard input.
    """
    if str(path) == "-":
        return read_panel(sys.stdin, min_entities=min_entities)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        return read_panel(fh, min_entities=min_entities)


def write_panel(panel: Panel, dest: str | Path | IO[str], *, period_header: str = "period") -> None:
    """Write ``panel`` as CSV, entities as columns. ``repr`` floats round-trip exactly."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_panel(panel, fh, period_header=period_header)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow([period_header, *panel.entities])
    for t, period in enumerate(panel.periods):
        writer.writerow([period, *(repr(float(v)) for v in panel.values[:, t])])


def panel_to_csv(panel: Panel) -> str:
    buf = io.StringIO()
    write_panel(panel, buf)
    return buf.getvalue()


def require_positive(panel: Panel) -> Panel:
    """Return ``panel`` unchanged if every value is strictly positive."""
    bad = np.argwhere(panel.values <= 0)
    if bad.size:
        i, t = bad[0]
        raise PanelError(
            f"non-positive value {panel.values[i, t]!r} for entity "
            f"{panel.entities[i]!r} at period {panel.periods[t]!r}"
        )
    return panel

"""Cross-station false-positive mitigation.

For one satellite, per-minute detections across its ground stations are
pooled into a vote fraction F in [0, 1]; minutes where F exceeds a constant
threshold (strictly) and enough stations have data keep their detections,
all others are reclassified to normal. Isolated single-station detections
are thereby suppressed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataFormatError

STATE_NO_DATA = -1
STATE_NORMAL = 0
STATE_DETECTED = 1
_STATE_NAMES = {STATE_NO_DATA: "nodata", STATE_NORMAL: "normal", STATE_DETECTED: "detected"}
_STATE_VALUES = {name: value for value, name in _STATE_NAMES.items()}

GRID_HEADER = ("satellite", "station", "epoch_utc_s", "state")
VOTES_HEADER = ("satellite", "epoch", "F", "valid", "alert")


@dataclass
class DetectionGrid:
    """Per-satellite station x minute matrix of raw classifier outcomes."""

    satellite_id: str
    station_ids: list[str]
    start_epoch: int
    cadence_s: int
    states: np.ndarray = field(repr=False)  # int8 (stations, minutes)

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=np.int8)
        if self.states.ndim != 2 or self.states.shape[0] != len(self.station_ids):
            raise ValueError("states must be (n_stations, n_minutes)")
        if not np.isin(self.states, (STATE_NO_DATA, STATE_NORMAL, STATE_DETECTED)).all():
            raise ValueError("grid cells must be no-data, normal or detected")

    @property
    def n_minutes(self) -> int:
        return int(self.states.shape[1])

    def epoch_at(self, t: int) -> int:
        return self.start_epoch + t * self.cadence_s


@dataclass
class VoteSeries:
    """Per-minute detection fraction and valid-station count for a satellite."""

    satellite_id: str
    start_epoch: int
    cadence_s: int
    fraction: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class FpmConfig:
    """threshold: strict alert cut on the vote fraction (paper constant 0.75).

    min_valid_stations: quorum a minute must meet before it may alert.
    count_missing_stations: divide by all stations instead of only those
    with data at the minute (the literal published denominator).
    """

    threshold: float = 0.75
    min_valid_stations: int = 3
    count_missing_stations: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.min_valid_stations < 0:
            raise ConfigError("min_valid_stations must be >= 0")


def vote_fraction(
    grid: DetectionGrid, t: int, count_missing_stations: bool = False
) -> tuple[float, int]:
    """Detection fraction and valid-station count at minute index t.

    F = detected / stations-with-data (0 when no station has data);
    with count_missing_stations the denominator is the full station count.
    """
    if not 0 <= t < grid.n_minutes:
        raise ValueError(f"minute index {t} outside grid of {grid.n_minutes}")
    column = grid.states[:, t]
    detected = int(np.count_nonzero(column == STATE_DETECTED))
    valid = int(np.count_nonzero(column != STATE_NO_DATA))
    denom = len(grid.station_ids) if count_missing_stations else valid
    fraction = detected / denom if denom > 0 else 0.0
    return fraction, valid


def vote_series(grid: DetectionGrid, cfg: FpmConfig = FpmConfig()) -> VoteSeries:
    """vote_fraction over the whole minute axis."""
    detected = (grid.states == STATE_DETECTED).sum(axis=0)
    valid = (grid.states != STATE_NO_DATA).sum(axis=0)
    if cfg.count_missing_stations:
        denom = np.full(grid.n_minutes, len(grid.station_ids), dtype=np.int64)
    else:
        denom = valid
    fraction = np.divide(
        detected, denom, out=np.zeros(grid.n_minutes, dtype=np.float64), where=denom > 0
    )
    return VoteSeries(
        grid.satellite_id,
        grid.start_epoch,
        grid.cadence_s,
        fraction,
        valid.astype(np.int64),
    )


def threshold_mask(votes: VoteSeries, cfg: FpmConfig = FpmConfig()) -> np.ndarray:
    """Alert mask: F strictly above threshold and quorum met."""
    return (votes.fraction > cfg.threshold) & (votes.valid >= cfg.min_valid_stations)


def reclassify(grid: DetectionGrid, mask: np.ndarray) -> DetectionGrid:
    """Erase detections at non-alerting minutes; never promotes normal cells."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (grid.n_minutes,):
        raise ValueError("mask length must match the grid minute axis")
    states = grid.states.copy()
    erase = (states == STATE_DETECTED) & ~mask[None, :]
    states[erase] = STATE_NORMAL
    return DetectionGrid(
        grid.satellite_id, list(grid.station_ids), grid.start_epoch, grid.cadence_s, states
    )


def write_grid_csv(grids: Iterable[DetectionGrid], path: str | Path) -> None:
    """All cells, no-data included, so the minute axis round-trips exactly."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(GRID_HEADER)
        for grid in grids:
            for s, station in enumerate(grid.station_ids):
                for t in range(grid.n_minutes):
                    writer.writerow(
                        [
                            grid.satellite_id,
                            station,
                            grid.epoch_at(t),
                            _STATE_NAMES[int(grid.states[s, t])],
                        ]
                    )


def read_grid_csv(path: str | Path) -> list[DetectionGrid]:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"grid CSV not found: {path}")
    cells: dict[str, dict[tuple[str, int], int]] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != GRID_HEADER:
            raise DataFormatError(f"{path}: expected header {','.join(GRID_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4 or row[3] not in _STATE_VALUES:
                raise DataFormatError(f"{path}:{lineno}: malformed grid row {row}")
            try:
                epoch = int(row[2])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad epoch {row[2]!r}") from None
            per_sat = cells.setdefault(row[0], {})
            key = (row[1], epoch)
            if key in per_sat:
                raise DataFormatError(f"{path}:{lineno}: duplicate cell {row[:3]}")
            per_sat[key] = _STATE_VALUES[row[3]]

    grids: list[DetectionGrid] = []
    for satellite in sorted(cells):
        per_sat = cells[satellite]
        stations = sorted({station for station, _ in per_sat})
        epochs = sorted({epoch for _, epoch in per_sat})
        start = epochs[0]
        steps = np.diff(np.asarray(epochs))
        cadence = int(steps.min()) if steps.size else 60
        if steps.size and np.any(steps % cadence != 0):
            raise DataFormatError(f"{path}: satellite {satellite} has an uneven minute axis")
        n_minutes = (epochs[-1] - start) // cadence + 1
        states = np.full((len(stations), n_minutes), STATE_NO_DATA, dtype=np.int8)
        for (station, epoch), state in per_sat.items():
            states[stations.index(station), (epoch - start) // cadence] = state
        grids.append(DetectionGrid(satellite, stations, start, cadence, states))
    return grids


def write_votes_csv(
    entries: Sequence[tuple[VoteSeries, np.ndarray]], cfg: FpmConfig, path: str | Path
) -> None:
    """Vote traces with the applied configuration echoed in the first line."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(
            f"# threshold={cfg.threshold} quorum={cfg.min_valid_stations} "
            f"count_missing_stations={str(cfg.count_missing_stations).lower()}\n"
        )
        writer = csv.writer(handle)
        writer.writerow(VOTES_HEADER)
        for votes, mask in entries:
            for t in range(votes.fraction.size):
                writer.writerow(
                    [
                        votes.satellite_id,
                        votes.start_epoch + t * votes.cadence_s,
                        f"{votes.fraction[t]:.9f}",
                        int(votes.valid[t]),
                        int(bool(mask[t])),
                    ]
                )

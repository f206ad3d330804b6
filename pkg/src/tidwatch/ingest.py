"""sTEC-rate stream ingestion: CSV parsing, minute resampling, arc segmentation.

Input schema (UTF-8, header required):

    station,satellite,epoch_utc_s,dstec_tecu_per_s

Epochs are integer UTC seconds treated as an opaque monotone axis; values are
the sTEC rate in TECU/s. Gaps are represented by absent epochs, never by
filler values.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from .errors import DataFormatError

STEC_HEADER = ("station", "satellite", "epoch_utc_s", "dstec_tecu_per_s")


@dataclass(frozen=True)
class StecSample:
    """One sTEC-rate measurement."""

    epoch: int
    value: float


@dataclass
class StecSeries:
    """All samples of one (station, satellite) stream at a declared cadence.

    Epochs are strictly increasing and lie on the cadence grid anchored at
    the first sample; missing grid points are gaps.
    """

    station_id: str
    satellite_id: str
    cadence_s: int
    epochs: np.ndarray = field(repr=False)  # int64
    values: np.ndarray = field(repr=False)  # float64

    def __post_init__(self) -> None:
        self.epochs = np.asarray(self.epochs, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if not self.station_id or not self.satellite_id:
            raise ValueError("station and satellite ids must be non-empty")
        if self.epochs.shape != self.values.shape or self.epochs.ndim != 1:
            raise ValueError("epochs and values must be equal-length 1-d arrays")
        if self.epochs.size:
            deltas = np.diff(self.epochs)
            if np.any(deltas <= 0):
                raise ValueError("epochs must be strictly increasing")
            if self.cadence_s > 0 and np.any(deltas % self.cadence_s != 0):
                raise ValueError("epochs do not lie on the declared cadence grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series values must be finite")

    def __len__(self) -> int:
        return int(self.epochs.size)

    @property
    def key(self) -> tuple[str, str]:
        return (self.station_id, self.satellite_id)

    def iter_samples(self) -> Iterator[StecSample]:
        for e, v in zip(self.epochs, self.values):
            yield StecSample(int(e), float(v))


@dataclass
class Arc:
    """A gap-free run of samples within one stream.

    `interpolated` flags samples synthesized while bridging small gaps;
    `start_index` points at the arc's first real sample in the parent series.
    """

    station_id: str
    satellite_id: str
    cadence_s: int
    start_epoch: int
    start_index: int
    values: np.ndarray
    interpolated: np.ndarray

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def epochs(self) -> np.ndarray:
        return self.start_epoch + self.cadence_s * np.arange(len(self), dtype=np.int64)


def _open_source(source: str | Path | IO[str] | IO[bytes]) -> tuple[IO[str], bool]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise DataFormatError(f"sTEC CSV not found: {path}")
        return open(path, "r", encoding="utf-8", newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def parse_stec_csv(
    source: str | Path | IO[str] | IO[bytes], cadence_s: int | None = None
) -> list[StecSeries]:
    """Parse an sTEC CSV into one StecSeries per (station, satellite) pair.

    The cadence is inferred per stream as the smallest epoch step unless
    given explicitly. Malformed rows, non-finite values and duplicate
    (station, satellite, epoch) triples are rejected with line numbers.
    """
    handle, owned = _open_source(source)
    name = getattr(handle, "name", "<stream>")
    try:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != STEC_HEADER:
            raise DataFormatError(
                f"{name}: expected header {','.join(STEC_HEADER)}, got {header}"
            )
        groups: dict[tuple[str, str], tuple[list[int], list[float]]] = {}
        seen: set[tuple[str, str, int]] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataFormatError(f"{name}:{lineno}: expected 4 fields, got {len(row)}")
            station, satellite = row[0].strip(), row[1].strip()
            if not station or not satellite:
                raise DataFormatError(f"{name}:{lineno}: empty station or satellite id")
            try:
                epoch = int(row[2])
            except ValueError:
                raise DataFormatError(f"{name}:{lineno}: bad epoch {row[2]!r}") from None
            try:
                value = float(row[3])
            except ValueError:
                raise DataFormatError(f"{name}:{lineno}: bad value {row[3]!r}") from None
            if not math.isfinite(value):
                raise DataFormatError(f"{name}:{lineno}: non-finite value {row[3]!r}")
            triple = (station, satellite, epoch)
            if triple in seen:
                raise DataFormatError(
                    f"{name}:{lineno}: duplicate epoch {epoch} for ({station}, {satellite})"
                )
            seen.add(triple)
            epochs, values = groups.setdefault((station, satellite), ([], []))
            epochs.append(epoch)
            values.append(value)
    finally:
        if owned:
            handle.close()

    series: list[StecSeries] = []
    for (station, satellite) in sorted(groups):
        epochs_list, values_list = groups[(station, satellite)]
        order = np.argsort(np.asarray(epochs_list, dtype=np.int64), kind="stable")
        epochs = np.asarray(epochs_list, dtype=np.int64)[order]
        values = np.asarray(values_list, dtype=np.float64)[order]
        cadence = cadence_s
        if cadence is None:
            if epochs.size < 2:
                raise DataFormatError(
                    f"{name}: cannot infer cadence for ({station}, {satellite}) "
                    "with fewer than 2 samples; pass cadence_s explicitly"
                )
            cadence = int(np.diff(epochs).min())
        try:
            series.append(
                StecSeries(station, satellite, cadence, epochs, values)
            )
        except ValueError as exc:
            raise DataFormatError(f"{name}: ({station}, {satellite}): {exc}") from None
    return series


def write_stec_csv(streams: Iterable[StecSeries], path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(STEC_HEADER)
        for stream in streams:
            for epoch, value in zip(stream.epochs, stream.values):
                writer.writerow(
                    [stream.station_id, stream.satellite_id, int(epoch), repr(float(value))]
                )


def resample_to_minute(series: StecSeries) -> StecSeries:
    """Average samples into 1-minute bins aligned to minute boundaries.

    Each output sample is the arithmetic mean of inputs with epoch in
    [minute, minute + 60); minutes without samples stay gaps. Idempotent on
    minute-cadence input.
    """
    if series.cadence_s <= 0 or 60 % series.cadence_s != 0:
        raise DataFormatError(
            f"cadence {series.cadence_s}s does not divide 60s; cannot resample "
            f"({series.station_id}, {series.satellite_id})"
        )
    minutes = (series.epochs // 60) * 60
    bins, inverse = np.unique(minutes, return_inverse=True)
    sums = np.bincount(inverse, weights=series.values, minlength=bins.size)
    counts = np.bincount(inverse, minlength=bins.size)
    return StecSeries(
        series.station_id, series.satellite_id, 60, bins, sums / counts
    )


def segment_arcs(series: StecSeries, max_gap: int = 0) -> list[Arc]:
    """Split a stream into maximal gap-free arcs.

    Gaps of at most `max_gap` missing cadence steps are bridged by linear
    interpolation (flagged per sample); larger gaps close the arc.
    """
    if max_gap < 0:
        raise ValueError("max_gap must be >= 0")
    arcs: list[Arc] = []
    n = len(series)
    if n == 0:
        return arcs

    cadence = series.cadence_s
    values: list[float] = [float(series.values[0])]
    flags: list[bool] = [False]
    start_epoch = int(series.epochs[0])
    start_index = 0

    def close() -> None:
        arcs.append(
            Arc(
                series.station_id,
                series.satellite_id,
                cadence,
                start_epoch,
                start_index,
                np.asarray(values, dtype=np.float64),
                np.asarray(flags, dtype=bool),
            )
        )

    for i in range(1, n):
        missing = int(series.epochs[i] - series.epochs[i - 1]) // cadence - 1
        if missing == 0:
            pass
        elif missing <= max_gap:
            left = float(series.values[i - 1])
            right = float(series.values[i])
            for step in range(1, missing + 1):
                frac = step / (missing + 1)
                values.append(left + frac * (right - left))
                flags.append(True)
        else:
            close()
            values, flags = [], []
            start_epoch = int(series.epochs[i])
            start_index = i
        values.append(float(series.values[i]))
        flags.append(False)
    close()
    return arcs

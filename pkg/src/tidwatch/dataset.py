"""Window extraction, labeling, class balancing and splitting.

Labels come from SME interval files (schema
`satellite,station,start_epoch_utc_s,end_epoch_utc_s`; station `*` applies
to every station of that satellite). Windows and label intervals are both
half-open in time, so touching endpoints do not overlap.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataFormatError
from .ingest import Arc

NORMAL = 0
ANOMALOUS = 1
CLASS_NAMES = {NORMAL: "normal", ANOMALOUS: "anomalous"}

LABEL_HEADER = ("satellite", "station", "start_epoch_utc_s", "end_epoch_utc_s")
MANIFEST_HEADER = ("station", "satellite", "window_start_epoch", "class")


@dataclass(frozen=True)
class LabelInterval:
    """SME ground-truth interval [start, end) for one stream (or `*` stations)."""

    satellite_id: str
    station_id: str
    start_epoch: int
    end_epoch: int

    def __post_init__(self) -> None:
        if self.start_epoch >= self.end_epoch:
            raise ValueError(
                f"label interval start {self.start_epoch} must precede end {self.end_epoch}"
            )


@dataclass
class Window:
    """A fixed-length slice of one arc."""

    station_id: str
    satellite_id: str
    start_epoch: int
    cadence_s: int
    values: np.ndarray = field(repr=False)
    has_interpolated: bool = False

    @property
    def end_epoch(self) -> int:
        """Exclusive end of the covered span."""
        return self.start_epoch + self.cadence_s * len(self.values)


@dataclass
class LabeledWindow:
    window: Window
    label: int  # NORMAL or ANOMALOUS


@dataclass
class DatasetSplit:
    train: list[LabeledWindow]
    test: list[LabeledWindow]
    seed: int


def parse_label_csv(source: str | Path | IO[str]) -> list[LabelInterval]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise DataFormatError(f"label CSV not found: {path}")
        handle = open(path, "r", encoding="utf-8", newline="")
        owned = True
        name = str(path)
    else:
        handle, owned, name = source, False, getattr(source, "name", "<stream>")
    try:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LABEL_HEADER:
            raise DataFormatError(
                f"{name}: expected header {','.join(LABEL_HEADER)}, got {header}"
            )
        labels: list[LabelInterval] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataFormatError(f"{name}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                labels.append(
                    LabelInterval(row[0].strip(), row[1].strip(), int(row[2]), int(row[3]))
                )
            except ValueError as exc:
                raise DataFormatError(f"{name}:{lineno}: {exc}") from None
        return labels
    finally:
        if owned:
            handle.close()


def write_label_csv(labels: Iterable[LabelInterval], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(LABEL_HEADER)
        for label in labels:
            writer.writerow(
                [label.satellite_id, label.station_id, label.start_epoch, label.end_epoch]
            )


def labels_for_stream(
    labels: Iterable[LabelInterval], satellite_id: str, station_id: str
) -> list[LabelInterval]:
    """Labels applying to one (satellite, station) stream, wildcards included."""
    return [
        lab
        for lab in labels
        if lab.satellite_id == satellite_id and lab.station_id in (station_id, "*")
    ]


def slide_windows(
    arc: Arc, w: int = 60, stride: int = 1, skip_interpolated: bool = False
) -> list[Window]:
    """Windows of w consecutive samples starting every `stride` samples.

    An arc shorter than w yields no windows. With skip_interpolated, windows
    touching gap-bridged samples are dropped.
    """
    if w < 1 or stride < 1:
        raise ConfigError("window size and stride must be >= 1")
    windows: list[Window] = []
    for start in range(0, len(arc) - w + 1, stride):
        flagged = bool(arc.interpolated[start : start + w].any())
        if skip_interpolated and flagged:
            continue
        windows.append(
            Window(
                arc.station_id,
                arc.satellite_id,
                int(arc.start_epoch + start * arc.cadence_s),
                arc.cadence_s,
                arc.values[start : start + w],
                flagged,
            )
        )
    return windows


def label_window(window: Window, labels: Sequence[LabelInterval]) -> int:
    """ANOMALOUS iff the window's half-open span intersects any interval.

    `labels` must already be filtered to the window's stream
    (see labels_for_stream).
    """
    for lab in labels:
        if window.start_epoch < lab.end_epoch and lab.start_epoch < window.end_epoch:
            return ANOMALOUS
    return NORMAL


def balance_undersample(
    windows: Sequence[LabeledWindow], minority_share: float = 0.10, seed: int = 0
) -> list[LabeledWindow]:
    """Keep every anomalous window; undersample normals to anomalous/minority_share.

    The retained normals are a uniform sample without replacement,
    deterministic for a given seed; input order is preserved.
    """
    if not 0.0 < minority_share <= 1.0:
        raise ConfigError(f"minority_share must be in (0, 1], got {minority_share}")
    anomalous_idx = [i for i, lw in enumerate(windows) if lw.label == ANOMALOUS]
    normal_idx = [i for i, lw in enumerate(windows) if lw.label != ANOMALOUS]
    if not anomalous_idx:
        raise DataFormatError("no anomalous windows; cannot balance an empty minority class")

    target = int(round(len(anomalous_idx) / minority_share))
    if target >= len(normal_idx):
        return list(windows)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(normal_idx), size=target, replace=False)
    keep = set(anomalous_idx)
    keep.update(normal_idx[i] for i in chosen)
    return [lw for i, lw in enumerate(windows) if i in keep]


def split_train_test(
    windows: Sequence[LabeledWindow], test_fraction: float, seed: int
) -> DatasetSplit:
    """Random split, stratified by class to within one window of the fraction."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test_indices: set[int] = set()
    for cls in (NORMAL, ANOMALOUS):
        members = [i for i, lw in enumerate(windows) if lw.label == cls]
        if len(members) < 2:
            raise DataFormatError(
                f"class {CLASS_NAMES[cls]} has {len(members)} windows; need at least 2 to split"
            )
        n_test = int(round(test_fraction * len(members)))
        n_test = min(max(n_test, 1), len(members) - 1)
        order = rng.permutation(len(members))
        test_indices.update(members[i] for i in order[:n_test])
    train = [lw for i, lw in enumerate(windows) if i not in test_indices]
    test = [lw for i, lw in enumerate(windows) if i in test_indices]
    return DatasetSplit(train=train, test=test, seed=seed)


def write_manifest(windows: Iterable[LabeledWindow], path: str | Path) -> None:
    """Balanced-dataset manifest so a training set can be rebuilt exactly."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(MANIFEST_HEADER)
        for lw in windows:
            writer.writerow(
                [
                    lw.window.station_id,
                    lw.window.satellite_id,
                    lw.window.start_epoch,
                    CLASS_NAMES[lw.label],
                ]
            )

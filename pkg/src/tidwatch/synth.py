"""Synthetic multi-station sTEC-rate scenarios with exact ground truth.

Background streams are a slow sinusoidal trend plus white Gaussian noise;
disturbances are Gaussian-envelope wave packets in the 10-30 minute band,
swept across a station network by per-station onset delays. Stream and
label files use the same CSV schemas as the ingest stage, so synthetic and
real data are interchangeable downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import LabelInterval, write_label_csv
from .errors import ConfigError
from .ingest import StecSeries, write_stec_csv

TID_PERIOD_MIN_LOW = 10.0
TID_PERIOD_MIN_HIGH = 30.0

# seed-derivation tags so stream noise and event draws stay independent
_STREAM_TAG = 1
_EVENT_TAG = 2


@dataclass(frozen=True)
class TidEvent:
    """One injected disturbance on one satellite."""

    satellite_id: str
    onset_epoch: int
    duration_min: int
    period_min: float
    amplitude: float
    delay_spread_min: int = 4
    station_fraction: float = 1.0

    def __post_init__(self) -> None:
        if not TID_PERIOD_MIN_LOW <= self.period_min <= TID_PERIOD_MIN_HIGH:
            raise ConfigError(
                f"wave period {self.period_min} min outside "
                f"[{TID_PERIOD_MIN_LOW:g}, {TID_PERIOD_MIN_HIGH:g}]"
            )
        if not 0.0 < self.station_fraction <= 1.0:
            raise ConfigError(f"station fraction must be in (0, 1], got {self.station_fraction}")
        if self.duration_min < 1 or self.delay_spread_min < 0:
            raise ConfigError("event duration must be >= 1 min, delay spread >= 0")
        if self.amplitude < 0:
            raise ConfigError("amplitude must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    n_stations: int = 8
    n_satellites: int = 2
    duration_min: int = 1440
    cadence_s: int = 60
    noise_std: float = 0.02
    trend_amplitude: float = 0.01
    trend_period_min: float = 480.0
    events: tuple[TidEvent, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_stations < 1 or self.n_satellites < 1:
            raise ConfigError("need at least one station and one satellite")
        if self.duration_min < 60:
            raise ConfigError("scenario must cover at least one 60-minute window")
        if self.cadence_s < 1 or 60 % self.cadence_s != 0:
            raise ConfigError("cadence must divide 60 s")
        if self.noise_std < 0:
            raise ConfigError("noise std must be >= 0")
        if self.trend_period_min < 240.0:
            raise ConfigError("trend period must be >= 4 h to stay out of the TID band")
        satellites = set(self.satellite_ids())
        for event in self.events:
            if event.satellite_id not in satellites:
                raise ConfigError(f"event satellite {event.satellite_id} not in scenario")
            end = event.onset_epoch + 60 * event.duration_min
            if event.onset_epoch < 0 or end > 60 * self.duration_min:
                raise ConfigError(
                    f"event on {event.satellite_id} at {event.onset_epoch}s leaves the scenario span"
                )

    def station_ids(self) -> list[str]:
        return [f"st{i:02d}" for i in range(self.n_stations)]

    def satellite_ids(self) -> list[str]:
        return [f"G{i + 1:02d}" for i in range(self.n_satellites)]


@dataclass
class Scenario:
    streams: list[StecSeries]
    truth: list[LabelInterval]
    config: ScenarioConfig | None = field(repr=False, default=None)


def default_scenario_config(
    seed: int = 0,
    n_stations: int = 8,
    n_satellites: int = 2,
    duration_min: int = 1440,
    noise_std: float = 0.02,
    snr: float = 5.0,
    n_events: int | None = None,
    period_min: float = 15.0,
    event_duration_min: int = 45,
    delay_spread_min: int = 4,
    station_fraction: float = 1.0,
) -> ScenarioConfig:
    """Desk-scale default: 8 stations x 2 satellites x 24 h, one event per
    satellite at SNR 5, onsets staggered through the day."""
    probe = ScenarioConfig(
        n_stations=n_stations,
        n_satellites=n_satellites,
        duration_min=duration_min,
        noise_std=noise_std,
        seed=seed,
    )
    satellites = probe.satellite_ids()
    if n_events is None:
        n_events = n_satellites
    events = []
    for k in range(n_events):
        frac = 0.25 if n_events == 1 else 0.25 + 0.40 * k / (n_events - 1)
        onset_min = int(round(duration_min * frac))
        events.append(
            TidEvent(
                satellite_id=satellites[k % n_satellites],
                onset_epoch=60 * onset_min,
                duration_min=event_duration_min,
                period_min=period_min,
                amplitude=snr * noise_std,
                delay_spread_min=delay_spread_min,
                station_fraction=station_fraction,
            )
        )
    return ScenarioConfig(
        n_stations=n_stations,
        n_satellites=n_satellites,
        duration_min=duration_min,
        noise_std=noise_std,
        events=tuple(events),
        seed=seed,
    )


def gen_background(cfg: ScenarioConfig, station_id: str, satellite_id: str) -> StecSeries:
    """Trend + noise stream, seeded per (station, satellite)."""
    station_idx = cfg.station_ids().index(station_id)
    satellite_idx = cfg.satellite_ids().index(satellite_id)
    rng = np.random.default_rng([cfg.seed, _STREAM_TAG, satellite_idx, station_idx])
    n = cfg.duration_min * 60 // cfg.cadence_s
    epochs = cfg.cadence_s * np.arange(n, dtype=np.int64)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    trend = cfg.trend_amplitude * np.sin(
        2.0 * math.pi * epochs / (60.0 * cfg.trend_period_min) + phase
    )
    noise = rng.normal(0.0, cfg.noise_std, size=n) if cfg.noise_std > 0 else 0.0
    return StecSeries(station_id, satellite_id, cfg.cadence_s, epochs, trend + noise)


def tid_packet(
    epochs: np.ndarray, onset_epoch: int, duration_min: int, period_min: float,
    amplitude: float, phase: float,
) -> np.ndarray:
    """Gaussian-envelope sinusoid supported exactly on [onset, onset + duration)."""
    t = epochs.astype(np.float64)
    onset = float(onset_epoch)
    duration = 60.0 * duration_min
    center = onset + duration / 2.0
    # sigma = duration/4 keeps the wave visible over most of the labeled
    # span while the hard zeroing below still bounds the support exactly
    sigma = duration / 4.0
    envelope = amplitude * np.exp(-(((t - center) / sigma) ** 2))
    wave = np.sin(2.0 * math.pi * (t - onset) / (60.0 * period_min) + phase)
    packet = envelope * wave
    packet[(t < onset) | (t >= onset + duration)] = 0.0
    return packet


def inject_tid(
    series: StecSeries, event: TidEvent, delay_min: int = 0, phase: float = 0.0
) -> tuple[StecSeries, LabelInterval]:
    """Add one delayed wave packet; the label exactly bounds its support."""
    onset = event.onset_epoch + 60 * delay_min
    end = onset + 60 * event.duration_min
    if onset < series.epochs[0] or end > int(series.epochs[-1]) + series.cadence_s:
        raise ConfigError(
            f"event [{onset}, {end}) outside stream span for "
            f"({series.station_id}, {series.satellite_id})"
        )
    packet = tid_packet(
        series.epochs, onset, event.duration_min, event.period_min, event.amplitude, phase
    )
    bumped = StecSeries(
        series.station_id,
        series.satellite_id,
        series.cadence_s,
        series.epochs.copy(),
        series.values + packet,
    )
    label = LabelInterval(series.satellite_id, series.station_id, onset, end)
    return bumped, label


def gen_scenario(cfg: ScenarioConfig) -> Scenario:
    """All background streams with each event injected into its share of stations."""
    stations = cfg.station_ids()
    streams: dict[tuple[str, str], StecSeries] = {}
    for satellite in cfg.satellite_ids():
        for station in stations:
            streams[(station, satellite)] = gen_background(cfg, station, satellite)

    truth: list[LabelInterval] = []
    for e_idx, event in enumerate(cfg.events):
        rng = np.random.default_rng([cfg.seed, _EVENT_TAG, e_idx])
        n_affected = int(round(event.station_fraction * cfg.n_stations))
        n_affected = max(1, min(n_affected, cfg.n_stations))
        affected = sorted(rng.choice(cfg.n_stations, size=n_affected, replace=False))
        for station_idx in affected:
            station = stations[station_idx]
            delay = int(rng.integers(0, event.delay_spread_min + 1))
            phase = float(rng.uniform(0.0, 2.0 * math.pi))
            key = (station, event.satellite_id)
            streams[key], label = inject_tid(streams[key], event, delay, phase)
            truth.append(label)

    ordered = [streams[key] for key in sorted(streams)]
    return Scenario(streams=ordered, truth=truth, config=cfg)


def write_scenario(scenario: Scenario, out_dir: str | Path) -> list[Path]:
    """One sTEC CSV per stream plus labels.csv; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for stream in scenario.streams:
        path = out / f"stec_{stream.station_id}_{stream.satellite_id}.csv"
        write_stec_csv([stream], path)
        paths.append(path)
    label_path = out / "labels.csv"
    write_label_csv(scenario.truth, label_path)
    paths.append(label_path)
    return paths

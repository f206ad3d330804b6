"""Subcommand front end: synth, train, detect, fpm, eval, run-e2e.

Stage boundaries are files (CSVs plus the checkpoint binary) so stages can
be re-run and inspected independently; `run-e2e` simply chains the same
stage functions. Configuration is a flat key=value file overridden by CLI
flags; the effective configuration is printed at startup.

Exit codes: 0 success, 1 usage/config, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import cnn, dataset, evaluation, fpm, gadf, ingest, synth
from .errors import ConfigError, DataFormatError, NumericError


@dataclass(frozen=True)
class RunConfig:
    # paths
    data: str = ""
    labels: str = ""
    checkpoint: str = ""
    grid: str = ""
    out_dir: str = "out"
    # windowing / encoding
    window: int = 60
    stride: int = 1
    image_size: int = 64
    max_gap: int = 0
    skip_interpolated: bool = False
    # model
    conv_channels: str = "8,16,32"
    hidden_units: int = 64
    # training (desk-scale; tighter stop criteria than the library defaults,
    # sized so the default scenario trains in minutes on two cores)
    batch_size: int = 64
    learning_rate: float = 0.00025
    plateau_patience: int = 2
    plateau_factor: float = 0.5
    early_stop_patience: int = 3
    max_epochs: int = 4
    improvement_threshold: float = 1e-4
    minority_share: float = 0.10
    test_fraction: float = 0.2
    # false-positive mitigation
    threshold: float = 0.75
    quorum: int = 3
    fixed_station_count: bool = False
    # synthetic scenario
    stations: int = 8
    satellites: int = 2
    duration_min: int = 1440
    noise_std: float = 0.02
    snr: float = 5.0
    tid_period_min: float = 15.0
    tid_duration_min: int = 45
    delay_spread_min: int = 4
    station_fraction: float = 1.0
    tid_events: int = 0  # 0 = one per satellite
    seed: int = 0


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "bool":
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key}: expected a boolean, got {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key}: expected {kind}, got {raw!r}") from None
    return raw


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **load_config_file(args.config))
    overrides: dict = {}
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            overrides[key] = flag
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"--set: unknown config key {key!r}")
        overrides[key] = _parse_value(key, raw)
    return replace(cfg, **overrides)


def print_config(cfg: RunConfig) -> None:
    for f in fields(RunConfig):
        print(f"[config] {f.name} = {getattr(cfg, f.name)}")


# ---------------------------------------------------------------------------
# shared plumbing

def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataFormatError(f"cannot create output directory {out}: {exc}") from None
    return out


def load_streams(data_path: str | Path) -> list[ingest.StecSeries]:
    """Read one sTEC CSV or every *.csv (labels.csv aside) in a directory."""
    path = Path(data_path)
    if not str(data_path):
        raise DataFormatError("no input data path given")
    if not path.exists():
        raise DataFormatError(f"data path not found: {path}")
    if path.is_dir():
        files = sorted(p for p in path.glob("*.csv") if p.name != "labels.csv")
        if not files:
            raise DataFormatError(f"no sTEC CSV files in {path}")
    else:
        files = [path]
    collected: dict[tuple[str, str], list[ingest.StecSeries]] = {}
    for file in files:
        for series in ingest.parse_stec_csv(file):
            collected.setdefault(series.key, []).append(series)
    merged: list[ingest.StecSeries] = []
    for key in sorted(collected):
        parts = collected[key]
        if len(parts) == 1:
            merged.append(parts[0])
            continue
        epochs = np.concatenate([p.epochs for p in parts])
        values = np.concatenate([p.values for p in parts])
        order = np.argsort(epochs, kind="stable")
        epochs, values = epochs[order], values[order]
        if np.any(np.diff(epochs) == 0):
            raise DataFormatError(f"duplicate epochs for stream {key} across input files")
        cadence = int(np.diff(epochs).min()) if epochs.size > 1 else parts[0].cadence_s
        try:
            merged.append(ingest.StecSeries(key[0], key[1], cadence, epochs, values))
        except ValueError as exc:
            raise DataFormatError(f"stream {key}: {exc}") from None
    return merged


def _stream_windows(
    stream: ingest.StecSeries, cfg: RunConfig, stride: int
) -> list[dataset.Window]:
    minute = ingest.resample_to_minute(stream)
    windows: list[dataset.Window] = []
    for arc in ingest.segment_arcs(minute, cfg.max_gap):
        windows.extend(
            dataset.slide_windows(arc, cfg.window, stride, cfg.skip_interpolated)
        )
    return windows


def _model_config(cfg: RunConfig) -> cnn.CnnConfig:
    try:
        channels = [int(part) for part in cfg.conv_channels.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"conv_channels must be comma-separated ints: {cfg.conv_channels!r}")
    if not channels:
        raise ConfigError("conv_channels must name at least one block")
    blocks = tuple(cnn.ConvBlock(out_channels=c) for c in channels)
    return cnn.CnnConfig(input_size=cfg.image_size, blocks=blocks, hidden_units=cfg.hidden_units)


def _train_config(cfg: RunConfig) -> cnn.TrainConfig:
    return cnn.TrainConfig(
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        plateau_patience=cfg.plateau_patience,
        plateau_factor=cfg.plateau_factor,
        early_stop_patience=cfg.early_stop_patience,
        max_epochs=cfg.max_epochs,
        improvement_threshold=cfg.improvement_threshold,
        seed=cfg.seed,
    )


def _fpm_config(cfg: RunConfig) -> fpm.FpmConfig:
    return fpm.FpmConfig(
        threshold=cfg.threshold,
        min_valid_stations=cfg.quorum,
        count_missing_stations=cfg.fixed_station_count,
    )


def _scenario_config(cfg: RunConfig) -> synth.ScenarioConfig:
    return synth.default_scenario_config(
        seed=cfg.seed,
        n_stations=cfg.stations,
        n_satellites=cfg.satellites,
        duration_min=cfg.duration_min,
        noise_std=cfg.noise_std,
        snr=cfg.snr,
        n_events=cfg.tid_events or None,
        period_min=cfg.tid_period_min,
        event_duration_min=cfg.tid_duration_min,
        delay_spread_min=cfg.delay_spread_min,
        station_fraction=cfg.station_fraction,
    )


# ---------------------------------------------------------------------------
# stages

def run_synth(cfg: RunConfig) -> Path:
    out = _out_dir(cfg) / "data"
    scenario = synth.gen_scenario(_scenario_config(cfg))
    paths = synth.write_scenario(scenario, out)
    print(
        f"[synth] wrote {len(paths) - 1} stream files + 1 label file "
        f"({len(scenario.truth)} truth intervals) to {out}"
    )
    return out


def run_train(cfg: RunConfig) -> Path:
    out = _out_dir(cfg)
    if not cfg.labels:
        raise DataFormatError("no label CSV given (labels)")
    labels = dataset.parse_label_csv(cfg.labels)
    streams = load_streams(cfg.data)

    labeled: list[dataset.LabeledWindow] = []
    for stream in streams:
        stream_labels = dataset.labels_for_stream(
            labels, stream.satellite_id, stream.station_id
        )
        for window in _stream_windows(stream, cfg, cfg.stride):
            labeled.append(
                dataset.LabeledWindow(window, dataset.label_window(window, stream_labels))
            )
    if not labeled:
        raise DataFormatError("no windows could be formed from the input streams")

    balanced = dataset.balance_undersample(labeled, cfg.minority_share, cfg.seed)
    dataset.write_manifest(balanced, out / "manifest.csv")
    split = dataset.split_train_test(balanced, cfg.test_fraction, cfg.seed)

    model = cnn.init_model(_model_config(cfg), cfg.seed)
    model, history = cnn.train(model, split, _train_config(cfg))
    cnn.write_history_csv(history, out / "history.csv")
    checkpoint = out / "checkpoint.tidm"
    cnn.save_checkpoint(model, checkpoint)
    last = history[-1]
    print(
        f"[train] {len(split.train)} train / {len(split.test)} test windows, "
        f"{len(history)} epochs, test loss {last.test_loss:.6f}, "
        f"window F1 {last.test_f1:.3f} -> {checkpoint}"
    )
    return checkpoint


def run_detect(cfg: RunConfig) -> Path:
    out = _out_dir(cfg)
    checkpoint = cfg.checkpoint or str(out / "checkpoint.tidm")
    model = cnn.load_checkpoint(checkpoint)
    if cfg.image_size != model.config.input_size:
        raise DataFormatError(
            f"image size {cfg.image_size} does not match checkpoint "
            f"input size {model.config.input_size}"
        )
    streams = load_streams(cfg.data)

    per_satellite: dict[str, list[tuple[str, list[dataset.Window], np.ndarray]]] = {}
    for stream in streams:
        windows = _stream_windows(stream, cfg, stride=1)
        if windows:
            images = np.empty(
                (len(windows), model.config.input_size, model.config.input_size),
                dtype=model.config.np_dtype(),
            )
            for i, window in enumerate(windows):
                images[i] = gadf.encode_window(window.values, model.config.input_size)
            pred = np.concatenate(
                [
                    cnn.predict_batch(model, images[i : i + cfg.batch_size])
                    for i in range(0, len(windows), cfg.batch_size)
                ]
            )
        else:
            pred = np.empty(0, dtype=np.int64)
        per_satellite.setdefault(stream.satellite_id, []).append(
            (stream.station_id, windows, pred)
        )

    grids: list[fpm.DetectionGrid] = []
    for satellite in sorted(per_satellite):
        rows = per_satellite[satellite]
        final_epochs = [
            w.start_epoch + (cfg.window - 1) * 60 for _, wins, _ in rows for w in wins
        ]
        if not final_epochs:
            print(f"[detect] satellite {satellite}: no classifiable minutes, skipped")
            continue
        start = min(final_epochs)
        n_minutes = (max(final_epochs) - start) // 60 + 1
        stations = sorted({station for station, _, _ in rows})
        states = np.full((len(stations), n_minutes), fpm.STATE_NO_DATA, dtype=np.int8)
        for station, windows, pred in rows:
            row = stations.index(station)
            for window, cls in zip(windows, pred):
                t = (window.start_epoch + (cfg.window - 1) * 60 - start) // 60
                states[row, t] = (
                    fpm.STATE_DETECTED if cls == dataset.ANOMALOUS else fpm.STATE_NORMAL
                )
        grids.append(fpm.DetectionGrid(satellite, stations, start, 60, states))

    grid_path = out / "grid.csv"
    fpm.write_grid_csv(grids, grid_path)
    total = sum(int(np.sum(g.states == fpm.STATE_DETECTED)) for g in grids)
    cells = sum(g.states.size for g in grids)
    print(f"[detect] {len(grids)} satellite grids, {total}/{cells} cells detected -> {grid_path}")
    return grid_path


def run_fpm(cfg: RunConfig) -> tuple[Path, Path]:
    out = _out_dir(cfg)
    grid_path = cfg.grid or str(out / "grid.csv")
    grids = fpm.read_grid_csv(grid_path)
    fcfg = _fpm_config(cfg)
    entries = []
    filtered = []
    for grid in grids:
        votes = fpm.vote_series(grid, fcfg)
        mask = fpm.threshold_mask(votes, fcfg)
        entries.append((votes, mask))
        filtered.append(fpm.reclassify(grid, mask))
    votes_path = out / "votes.csv"
    fpm.write_votes_csv(entries, fcfg, votes_path)
    filtered_path = out / "grid_fpm.csv"
    fpm.write_grid_csv(filtered, filtered_path)
    kept = sum(int(np.sum(g.states == fpm.STATE_DETECTED)) for g in filtered)
    before = sum(int(np.sum(g.states == fpm.STATE_DETECTED)) for g in grids)
    print(
        f"[fpm] threshold {fcfg.threshold}, quorum {fcfg.min_valid_stations}: "
        f"{before} -> {kept} detected cells; wrote {votes_path} and {filtered_path}"
    )
    return votes_path, filtered_path


def evaluate_grids(
    grids: list[fpm.DetectionGrid],
    labels: list[dataset.LabelInterval],
    fcfg: fpm.FpmConfig,
) -> list[tuple[str, evaluation.MatchReport]]:
    """Table rows (raw, fpm): micro-averaged sequence match reports.

    Raw detections are scored per (satellite, station) stream; the
    vote-filtered stage is scored per satellite against the union of that
    satellite's truth intervals.
    """
    pre_reports = []
    post_reports = []
    for grid in grids:
        for row, station in enumerate(grid.station_ids):
            truth = evaluation.merge_intervals(
                (lab.start_epoch, lab.end_epoch)
                for lab in dataset.labels_for_stream(labels, grid.satellite_id, station)
            )
            pred = evaluation.scale_runs(
                evaluation.runs_from_mask(grid.states[row] == fpm.STATE_DETECTED),
                grid.start_epoch,
                grid.cadence_s,
            )
            pre_reports.append(evaluation.match_sequences(truth, pred))

        votes = fpm.vote_series(grid, fcfg)
        mask = fpm.threshold_mask(votes, fcfg)
        sat_truth = evaluation.merge_intervals(
            (lab.start_epoch, lab.end_epoch)
            for lab in labels
            if lab.satellite_id == grid.satellite_id
        )
        sat_pred = evaluation.scale_runs(
            evaluation.runs_from_mask(mask), grid.start_epoch, grid.cadence_s
        )
        post_reports.append(evaluation.match_sequences(sat_truth, sat_pred))
    return [
        ("raw", evaluation.sum_reports(pre_reports)),
        ("fpm", evaluation.sum_reports(post_reports)),
    ]


def run_eval(cfg: RunConfig) -> Path:
    out = _out_dir(cfg)
    grid_path = cfg.grid or str(out / "grid.csv")
    labels_path = cfg.labels or str(out / "data" / "labels.csv")
    grids = fpm.read_grid_csv(grid_path)
    labels = dataset.parse_label_csv(labels_path)
    _check_label_grid_satellites(grids, labels)
    rows = evaluate_grids(grids, labels, _fpm_config(cfg))
    metrics_path = out / "metrics.csv"
    evaluation.write_metrics_csv(rows, metrics_path)
    print(evaluation.format_metrics_table(rows))
    print(f"[eval] wrote {metrics_path}")
    return metrics_path


def _check_label_grid_satellites(
    grids: list[fpm.DetectionGrid], labels: list[dataset.LabelInterval]
) -> None:
    grid_sats = {g.satellite_id for g in grids}
    label_sats = {lab.satellite_id for lab in labels}
    missing = label_sats - grid_sats
    if missing:
        raise DataFormatError(
            f"labels reference satellites absent from the grid: {sorted(missing)}"
        )


def run_e2e(cfg: RunConfig) -> Path:
    data_dir = run_synth(cfg)
    cfg = replace(cfg, data=str(data_dir), labels=str(data_dir / "labels.csv"))
    run_train(cfg)
    run_detect(cfg)
    run_fpm(cfg)
    return run_eval(cfg)


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--window", type=int)
    parser.add_argument("--stride", type=int)
    parser.add_argument("--image-size", dest="image_size", type=int)
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--quorum", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tidwatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_synth = sub.add_parser("synth", help="generate a synthetic labeled scenario")
    p_train = sub.add_parser("train", help="train the window classifier")
    p_train.add_argument("--data", help="sTEC CSV file or directory")
    p_train.add_argument("--labels", help="ground-truth label CSV")
    p_detect = sub.add_parser("detect", help="chronological per-minute inference")
    p_detect.add_argument("--data")
    p_detect.add_argument("--checkpoint")
    p_fpm = sub.add_parser("fpm", help="cross-station vote filtering of a grid")
    p_fpm.add_argument("--grid")
    p_eval = sub.add_parser("eval", help="sequence metrics for raw and filtered stages")
    p_eval.add_argument("--grid")
    p_eval.add_argument("--labels")
    p_e2e = sub.add_parser("run-e2e", help="synth + train + detect + fpm + eval")
    for p in (p_synth, p_train, p_detect, p_fpm, p_eval, p_e2e):
        _add_common(p)
    return parser


_COMMANDS = {
    "synth": run_synth,
    "train": run_train,
    "detect": run_detect,
    "fpm": run_fpm,
    "eval": run_eval,
    "run-e2e": run_e2e,
}


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        print_config(cfg)
        _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"tidwatch: config error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"tidwatch: data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"tidwatch: numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Sequence-level scoring of detections against ground-truth intervals.

Per-minute classifications are concatenated into maximal runs; runs are then
matched by overlap: a true sequence touched by any predicted sequence counts
once as a true positive, a predicted sequence touching no true sequence is
one false positive, and a prediction spanning several true sequences marks
each of them detected without itself becoming a false positive.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

Interval = tuple[int, int]  # half-open [start, end)


@dataclass
class MatchReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    matched: list[tuple[Interval, Interval]] = field(default_factory=list)

    def __add__(self, other: "MatchReport") -> "MatchReport":
        return MatchReport(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.matched + other.matched,
        )


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    vacuous: bool = False  # no truth and no predictions: scores defined as 1


def validate_sequences(intervals: Sequence[Interval]) -> None:
    """Require sorted, disjoint, non-empty half-open intervals."""
    prev_end = None
    for start, end in intervals:
        if start >= end:
            raise ValueError(f"empty interval [{start}, {end})")
        if prev_end is not None and start < prev_end:
            raise ValueError("intervals must be sorted and non-overlapping")
        prev_end = end


def runs_from_mask(mask: Sequence[bool] | np.ndarray) -> list[Interval]:
    """Maximal runs of consecutive true entries, as half-open index intervals."""
    arr = np.asarray(mask, dtype=bool)
    if arr.size == 0:
        return []
    padded = np.concatenate([[False], arr, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return [(int(edges[i]), int(edges[i + 1])) for i in range(0, edges.size, 2)]


def mask_from_runs(runs: Sequence[Interval], length: int) -> np.ndarray:
    mask = np.zeros(length, dtype=bool)
    for start, end in runs:
        if start < 0 or end > length:
            raise ValueError(f"interval [{start}, {end}) outside [0, {length})")
        mask[start:end] = True
    return mask


def scale_runs(runs: Sequence[Interval], start: int, step: int) -> list[Interval]:
    """Map index-space runs onto an epoch axis: i -> start + i*step."""
    return [(start + step * s, start + step * e) for s, e in runs]


def merge_intervals(intervals: Iterable[Interval]) -> list[Interval]:
    """Union of possibly-overlapping intervals as a sorted disjoint set."""
    merged: list[list[int]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(s, e) for s, e in merged]


def match_sequences(truth: Sequence[Interval], pred: Sequence[Interval]) -> MatchReport:
    """Overlap-match two sequence sets (both sorted and disjoint)."""
    validate_sequences(truth)
    validate_sequences(pred)
    truth_hit = [False] * len(truth)
    pred_hit = [False] * len(pred)
    matched: list[tuple[Interval, Interval]] = []

    i = j = 0
    while i < len(truth) and j < len(pred):
        t_start, t_end = truth[i]
        p_start, p_end = pred[j]
        if t_start < p_end and p_start < t_end:
            truth_hit[i] = True
            pred_hit[j] = True
            matched.append((truth[i], pred[j]))
        # advance whichever interval ends first; ties can advance either
        if t_end <= p_end:
            i += 1
        else:
            j += 1

    tp = sum(truth_hit)
    fn = len(truth) - tp
    fp = sum(1 for hit in pred_hit if not hit)
    return MatchReport(tp=tp, fp=fp, fn=fn, matched=matched)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean, 0 when both inputs are 0."""
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf(report: MatchReport) -> Metrics:
    """Precision/recall/F1 with vacuous counts scored as perfect.

    A zero denominator scores 1 (nothing predicted wrongly / nothing
    missed); the all-zero report is additionally flagged vacuous.
    """
    precision = 1.0 if report.tp + report.fp == 0 else report.tp / (report.tp + report.fp)
    recall = 1.0 if report.tp + report.fn == 0 else report.tp / (report.tp + report.fn)
    vacuous = report.tp == 0 and report.fp == 0 and report.fn == 0
    return Metrics(
        precision=precision, recall=recall, f1=f1_score(precision, recall), vacuous=vacuous
    )


def sum_reports(reports: Iterable[MatchReport]) -> MatchReport:
    """Micro-average pool: sum TP/FP/FN across streams."""
    total = MatchReport()
    for report in reports:
        total = total + report
    return total


METRICS_HEADER = ("stage", "precision", "recall", "f1", "tp", "fp", "fn", "vacuous")


def write_metrics_csv(rows: Sequence[tuple[str, MatchReport]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(METRICS_HEADER)
        for stage, report in rows:
            metrics = prf(report)
            writer.writerow(
                [
                    stage,
                    f"{metrics.precision:.6f}",
                    f"{metrics.recall:.6f}",
                    f"{metrics.f1:.6f}",
                    report.tp,
                    report.fp,
                    report.fn,
                    str(metrics.vacuous).lower(),
                ]
            )


def format_metrics_table(rows: Sequence[tuple[str, MatchReport]]) -> str:
    lines = [f"{'stage':<12} {'precision':>9} {'recall':>9} {'f1':>9} {'tp':>5} {'fp':>5} {'fn':>5}"]
    for stage, report in rows:
        metrics = prf(report)
        flag = " (vacuous)" if metrics.vacuous else ""
        lines.append(
            f"{stage:<12} {100 * metrics.precision:>8.1f}% {100 * metrics.recall:>8.1f}% "
            f"{100 * metrics.f1:>8.1f}% {report.tp:>5} {report.fp:>5} {report.fn:>5}{flag}"
        )
    return "\n".join(lines)

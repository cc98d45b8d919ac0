"""Cross-seed aggregation of run records into summary tables.

A run produces one record list per seed. The aggregator reduces those to
per-quantity rows: mean and sample standard deviation of the final
relative L2 error, and the same statistics for the wall-clock time to
reach 5% error. Times average only over the seeds that actually got
there; a row where no seed reached the threshold renders as "---".
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .problems import QUANTITIES
from .training import time_to_accuracy

QUANTITY_LABELS = {
    "ux": "u_x",
    "uy": "u_y",
    "uz": "u_z",
    "um": "|u|",
    "svm": "sigma_vM",
}

SIGMA_PROVENANCE = {
    "spinn-dem": "stress derived from displacement gradients via Hooke's law"
    " (no stress network in energy mode)",
    "spinn-pde": "stress taken from the dedicated stress network",
    "pinn-pde": "stress taken from the dedicated stress network",
}


@dataclass(frozen=True)
class QuantitySummary:
    """Aggregated statistics for one reported quantity."""

    quantity: str
    l2_mean: float = None
    l2_std: float = None
    l2_count: int = 0
    t_mean: float = None
    t_std: float = None
    reached: int = 0
    total: int = 0


def _mean_std(values):
    """(mean, sample std) of a list; std needs at least two samples."""
    if not values:
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else None
    return mean, std


def final_error(records, quantity):
    """Error of the last record that carries this quantity, else None."""
    for rec in reversed(records):
        err = rec.errors.get(quantity)
        if err is not None:
            return float(err)
    return None


def aggregate_across_seeds(runs, quantities=QUANTITIES, threshold=0.05):
    """Reduce per-seed record lists to one QuantitySummary per quantity.

    Args:
        runs: list of record lists, one per seed.
        quantities: quantity keys to aggregate.
        threshold: relative L2 defining "reached" for the time statistic.
    """
    summaries = []
    for q in quantities:
        finals = [e for e in (final_error(r, q) for r in runs) if e is not None]
        times = [
            t
            for t in (time_to_accuracy(r, q, threshold) for r in runs)
            if t is not None
        ]
        l2_mean, l2_std = _mean_std(finals)
        t_mean, t_std = _mean_std(times)
        summaries.append(
            QuantitySummary(
                quantity=q,
                l2_mean=l2_mean,
                l2_std=l2_std,
                l2_count=len(finals),
                t_mean=t_mean,
                t_std=t_std,
                reached=len(times),
                total=len(runs),
            )
        )
    return summaries


def format_l2(mean, std):
    """Four-decimal 'mean +/- std'; '---' when there is nothing to show."""
    if mean is None:
        return "---"
    if std is None:
        return f"{mean:.4f}"
    return f"{mean:.4f} ± {std:.4f}"


def format_time(summary: QuantitySummary):
    """Seconds to 5% accuracy; annotated when only some seeds reached it."""
    if summary.reached == 0:
        return "---"
    text = f"{summary.t_mean:.2f}"
    if summary.t_std is not None:
        text += f" ± {summary.t_std:.2f}"
    text += " s"
    if summary.reached < summary.total:
        text += f" ({summary.reached}/{summary.total} reached)"
    return text


def report_lines(summaries, problem=None, mode=None):
    """Human-readable table, one row per quantity."""
    lines = []
    header = "summary"
    if problem:
        header += f" for {problem}"
    if mode:
        header += f" [{mode}]"
    lines.append(header)
    seeds = max((s.total for s in summaries), default=0)
    lines.append(f"seeds: {seeds}")
    if mode in SIGMA_PROVENANCE:
        lines.append(f"note: {SIGMA_PROVENANCE[mode]}")
    lines.append("")
    lines.append(f"{'quantity':<10} {'final rel. L2':<22} {'time to 5%':<30}")
    lines.append("-" * 62)
    for s in summaries:
        label = QUANTITY_LABELS.get(s.quantity, s.quantity)
        lines.append(
            f"{label:<10} {format_l2(s.l2_mean, s.l2_std):<22} "
            f"{format_time(s):<30}"
        )
    return lines


def report_csv_lines(summaries, problem=None, mode=None):
    """Delimiter-separated twin of `report_lines` with raw numeric cells."""

    def cell(x, fmt="{:.10g}"):
        return "" if x is None else fmt.format(x)

    lines = [
        "problem,mode,quantity,l2_mean,l2_std,l2_seeds,"
        "t5_mean_s,t5_std_s,t5_reached,t5_total"
    ]
    for s in summaries:
        lines.append(
            ",".join(
                [
                    problem or "",
                    mode or "",
                    s.quantity,
                    cell(s.l2_mean),
                    cell(s.l2_std),
                    str(s.l2_count),
                    cell(s.t_mean),
                    cell(s.t_std),
                    str(s.reached),
                    str(s.total),
                ]
            )
        )
    return lines


def write_report(out_dir, summaries, problem=None, mode=None):
    """Write report.txt and report.csv under out_dir; returns their paths."""
    txt = os.path.join(out_dir, "report.txt")
    csv = os.path.join(out_dir, "report.csv")
    with open(txt, "w") as fh:
        fh.write("\n".join(report_lines(summaries, problem, mode)) + "\n")
    with open(csv, "w") as fh:
        fh.write("\n".join(report_csv_lines(summaries, problem, mode)) + "\n")
    return txt, csv

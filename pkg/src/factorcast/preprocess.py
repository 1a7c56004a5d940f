"""Gap filling and outlier removal for monthly panels.

Missing cells are filled by a local Lagrange interpolating polynomial
through the nearest observed neighbors (at most four points, so degree
at most three, balanced two-per-side where possible).  Outliers are
flagged by a robust z-score against 1.4826 * MAD, re-marked as missing,
and then filled the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_ingest import MonthlyPanel
from .errors import InputDataError

MAD_TO_SIGMA = 1.4826  # consistency constant: 1 / Phi^-1(3/4)
DEFAULT_OUTLIER_THRESHOLD = 5.0
MAX_NEIGHBORS = 4


@dataclass
class CleanReport:
    """What clean_panel changed: cells filled and outliers removed."""

    filled: list[tuple[str, int]] = field(default_factory=list)
    outliers_removed: list[tuple[str, int, float]] = field(default_factory=list)


def lagrange_fill_point(values: np.ndarray, missing: np.ndarray, index: int) -> float:
    """Interpolate the missing cell at `index` from its nearest neighbors.

    Uses the Lagrange polynomial through k = min(4, available) observed
    points, taken two per side of `index` when both sides have them and
    one-sided at series boundaries.  Exact for any polynomial series of
    degree < k.
    """
    values = np.asarray(values, dtype=float)
    missing = np.asarray(missing, dtype=bool)
    if not missing[index]:
        raise ValueError(f"cell {index} is not missing")
    observed = np.flatnonzero(~missing)
    if observed.size == 0:
        raise InputDataError("cannot fill: series has no observed points")

    k = min(MAX_NEIGHBORS, observed.size)
    left = observed[observed < index][::-1]  # nearest first
    right = observed[observed > index]
    n_left = min(len(left), 2)
    n_right = min(len(right), 2)
    rem = k - n_left - n_right
    extra = min(rem, len(left) - n_left)
    n_left += extra
    n_right += min(rem - extra, len(right) - n_right)
    nodes = np.sort(np.concatenate([left[:n_left], right[:n_right]]))

    x = float(index)
    total = 0.0
    for i in nodes:
        w = 1.0
        for j in nodes:
            if j != i:
                w *= (x - j) / float(i - j)
        total += values[i] * w
    return total


def _robust_stats(values: np.ndarray) -> tuple[float, float]:
    """(median, robust sigma): 1.4826 * MAD, or the plain standard
    deviation when MAD degenerates to zero."""
    med = float(np.median(values))
    mad = float(np.median(np.abs(values - med)))
    scale = MAD_TO_SIGMA * mad if mad > 0 else float(np.std(values))
    return med, scale


def flag_outliers(values: np.ndarray, threshold: float = DEFAULT_OUTLIER_THRESHOLD) -> np.ndarray:
    """Indices where |x - median| exceeds threshold * (1.4826 * MAD).

    When MAD is zero (at least half the points identical) the scale falls
    back to the standard deviation, so a constant series flags nothing.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InputDataError("cannot flag outliers in an empty series")
    if np.isnan(values).any():
        raise ValueError("series has missing cells; flag outliers on observed values only")
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    med, scale = _robust_stats(values)
    return np.flatnonzero(np.abs(values - med) > threshold * scale)


def clean_panel(
    panel: MonthlyPanel, threshold: float = DEFAULT_OUTLIER_THRESHOLD
) -> tuple[MonthlyPanel, CleanReport]:
    """Remove outliers and fill every missing cell, column by column.

    Per column: flag outliers among the observed values (single pass),
    mark them missing, then fill all missing cells by local Lagrange
    interpolation.  Fills use only originally observed, non-outlier
    points.  Each fill is clamped into the column's outlier acceptance
    band (median +- threshold * robust sigma of the surviving values):
    one-sided boundary extrapolation can otherwise overshoot far enough
    to be re-flagged, which would make cleaning non-idempotent.
    """
    if panel.n_months == 0 or not panel.columns:
        raise InputDataError("cannot clean an empty panel")

    report = CleanReport()
    out_columns: dict[str, np.ndarray] = {}
    out_missing: dict[str, np.ndarray] = {}
    for name, column in panel.columns.items():
        mask = panel.missing[name].copy()
        observed_idx = np.flatnonzero(~mask)
        if observed_idx.size == 0:
            raise InputDataError(f"column {name!r} is entirely missing")

        flagged_local = flag_outliers(column[observed_idx], threshold)
        for i in observed_idx[flagged_local]:
            report.outliers_removed.append((name, int(panel.dates[i]), float(column[i])))
            mask[i] = True
        if mask.all():
            raise InputDataError(f"column {name!r} has no usable values after outlier removal")

        med, scale = _robust_stats(column[~mask])
        lo, hi = med - threshold * scale, med + threshold * scale
        filled = column.copy()
        for i in np.flatnonzero(mask):
            filled[i] = min(max(lagrange_fill_point(column, mask, int(i)), lo), hi)
            report.filled.append((name, int(panel.dates[i])))
        out_columns[name] = filled
        out_missing[name] = np.zeros_like(mask)

    cleaned = MonthlyPanel(dates=panel.dates.copy(), columns=out_columns, missing=out_missing)
    return cleaned, report

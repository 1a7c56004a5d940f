"""Parsing and alignment of Ken-French-style monthly CSV panels.

A panel file is UTF-8 CSV whose first tabular column is an integer
YYYYMM month; any banner lines before the header are skipped.  Values
are decimal percent per month and stay in percent end to end.  Cells at
or below -99.0 (the -99.99 missing-value convention of the French data
library) are treated as missing, not as observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, MissingColumnError, ParseError

# Any cell <= MISSING_SENTINEL is a missing observation.
MISSING_SENTINEL = -99.0

# Canonical factor spellings used throughout; files sometimes carry
# case variants ("Mom") or underscore variants.  SMB_3F / SMB_5F are the
# three- and six-portfolio size factors when both source files are used.
CANONICAL_FACTOR_NAMES = (
    "Mkt-RF", "SMB", "SMB_3F", "SMB_5F", "HML", "MOM", "RMW", "CMA", "RF",
)


def is_valid_ym(ym: int) -> bool:
    """True when ym is a YYYYMM integer with a month part in 1..12."""
    return 190001 <= ym <= 299912 and 1 <= ym % 100 <= 12


def next_ym(ym: int) -> int:
    """The calendar month following ym."""
    year, month = divmod(ym, 100)
    return year * 100 + month + 1 if month < 12 else (year + 1) * 100 + 1


def months_between(a: int, b: int) -> int:
    """Signed number of months from a to b."""
    return (b // 100 - a // 100) * 12 + (b % 100 - a % 100)


@dataclass
class MonthlyPanel:
    """Date-indexed table of monthly series with a per-cell missing mask.

    Missing cells hold NaN in `columns` and True in `missing`.  Dates are
    strictly increasing; every column has exactly len(dates) entries.
    """

    dates: np.ndarray
    columns: dict[str, np.ndarray]
    missing: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype=np.int64)
        if not self.missing:
            self.missing = {name: np.isnan(values) for name, values in self.columns.items()}
        for name in self.columns:
            self.columns[name] = np.asarray(self.columns[name], dtype=float)
            self.missing[name] = np.asarray(self.missing[name], dtype=bool)

    @property
    def n_months(self) -> int:
        return len(self.dates)

    def has_missing(self) -> bool:
        return any(mask.any() for mask in self.missing.values())


@dataclass
class AlignedDataset:
    """Fully observed factor and sector series on a common date range."""

    dates: np.ndarray
    columns: dict[str, np.ndarray]

    def column(self, name: str) -> np.ndarray:
        """Look up a series by exact name, falling back to a unique
        case-insensitive match (covers Hitec vs HiTec spellings)."""
        if name in self.columns:
            return self.columns[name]
        matches = [k for k in self.columns if k.lower() == name.lower()]
        if len(matches) == 1:
            return self.columns[matches[0]]
        raise MissingColumnError(f"column {name!r} not found; available: {sorted(self.columns)}")

    def has_column(self, name: str) -> bool:
        try:
            self.column(name)
            return True
        except MissingColumnError:
            return False


def _parse_ym_field(text: str) -> int | None:
    text = text.strip()
    if len(text) == 6 and text.isdigit():
        ym = int(text)
        if is_valid_ym(ym):
            return ym
    return None


def parse_panel_csv(text: str, expected_columns: list[str] | None = None) -> MonthlyPanel:
    """Parse CSV text into a MonthlyPanel.

    Banner lines before the header are skipped: the first data row is the
    first line whose leading field is a YYYYMM integer, and the header is
    the nearest non-empty line above it.  Parsing stops at the end of the
    contiguous monthly block, so trailing annual tables in French-library
    files are ignored.
    """
    lines = text.splitlines()

    first_data = None
    for i, line in enumerate(lines):
        if _parse_ym_field(line.split(",")[0]) is not None:
            first_data = i
            break
    if first_data is None:
        raise ParseError("no data rows: no line starts with a YYYYMM month")

    header_idx = None
    for j in range(first_data - 1, -1, -1):
        if lines[j].strip():
            header_idx = j
            break
    if header_idx is None:
        raise ParseError("no header row found above the first data row")

    header_fields = [f.strip() for f in lines[header_idx].split(",")]
    n_fields = len(lines[first_data].split(","))
    if len(header_fields) == n_fields - 1:
        names = header_fields
    elif len(header_fields) == n_fields:
        names = header_fields[1:]  # first header cell labels the date column
    else:
        raise ParseError(
            f"header has {len(header_fields)} fields but data rows have {n_fields}"
        )
    if any(not n for n in names):
        raise ParseError("empty column name in header")
    if len(set(names)) != len(names):
        raise ParseError(f"duplicate column names in header: {names}")

    dates: list[int] = []
    values: list[list[float]] = []
    masks: list[list[bool]] = []
    seen: set[int] = set()
    for row_no, line in enumerate(lines[first_data:], start=first_data + 1):
        fields = line.split(",")
        ym = _parse_ym_field(fields[0])
        if ym is None:
            break  # end of the monthly block
        if len(fields) != n_fields:
            raise ParseError(f"row {row_no}: expected {n_fields} fields, got {len(fields)}")
        if ym in seen:
            raise ParseError(f"row {row_no}: duplicate date {ym}")
        seen.add(ym)
        row_vals: list[float] = []
        row_mask: list[bool] = []
        for col_no, cell in enumerate(fields[1:], start=2):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"row {row_no}, column {col_no} ({names[col_no - 2]!r}): "
                    f"malformed numeric cell {cell.strip()!r}"
                ) from None
            if v <= MISSING_SENTINEL:
                row_vals.append(np.nan)
                row_mask.append(True)
            else:
                row_vals.append(v)
                row_mask.append(False)
        dates.append(ym)
        values.append(row_vals)
        masks.append(row_mask)

    if not dates:
        raise ParseError("no data rows found")

    order = np.argsort(np.asarray(dates, dtype=np.int64), kind="stable")
    date_arr = np.asarray(dates, dtype=np.int64)[order]
    value_arr = np.asarray(values, dtype=float)[order]
    mask_arr = np.asarray(masks, dtype=bool)[order]

    panel = MonthlyPanel(
        dates=date_arr,
        columns={name: value_arr[:, k].copy() for k, name in enumerate(names)},
        missing={name: mask_arr[:, k].copy() for k, name in enumerate(names)},
    )
    if expected_columns is not None:
        absent = [c for c in expected_columns if c not in panel.columns]
        if absent:
            raise MissingColumnError(f"expected columns missing from panel: {absent}")
    return panel


def serialize_panel(panel: MonthlyPanel) -> str:
    """Render a panel back to CSV text; parse(serialize(p)) reproduces p.

    Missing cells are written as -99.99; observed values use repr so the
    round trip is exact.
    """
    names = list(panel.columns)
    lines = ["," + ",".join(names)]
    for i, ym in enumerate(panel.dates):
        cells = []
        for name in names:
            if panel.missing[name][i]:
                cells.append("-99.99")
            else:
                cells.append(repr(float(panel.columns[name][i])))
        lines.append(f"{ym}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def panels_equal(a: MonthlyPanel, b: MonthlyPanel) -> bool:
    """Exact equality of dates, masks, and observed values."""
    if not np.array_equal(a.dates, b.dates):
        return False
    if list(a.columns) != list(b.columns):
        return False
    for name in a.columns:
        if not np.array_equal(a.missing[name], b.missing[name]):
            return False
        ok = ~a.missing[name]
        if not np.array_equal(a.columns[name][ok], b.columns[name][ok]):
            return False
    return True


def normalize_factor_names(panel: MonthlyPanel) -> MonthlyPanel:
    """Rename case/underscore variants of known factor names to their
    canonical spellings (e.g. 'Mom' -> 'MOM'); other columns pass through."""
    def key(name: str) -> str:
        return name.strip().lower().replace("_", "-")

    canon = {key(c): c for c in CANONICAL_FACTOR_NAMES}
    renamed: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    for name, vals in panel.columns.items():
        new = canon.get(key(name), name.strip())
        if new in renamed:
            raise ParseError(f"column rename collision: {new!r} appears twice")
        renamed[new] = vals
        masks[new] = panel.missing[name]
    return MonthlyPanel(dates=panel.dates.copy(), columns=renamed, missing=masks)


def merge_panels(*panels: MonthlyPanel) -> MonthlyPanel:
    """Join panels column-wise on the intersection of their dates."""
    if not panels:
        raise ValueError("merge_panels needs at least one panel")
    common = panels[0].dates
    for p in panels[1:]:
        common = np.intersect1d(common, p.dates)
    if common.size == 0:
        raise AlignmentError("panels share no dates")
    columns: dict[str, np.ndarray] = {}
    missing: dict[str, np.ndarray] = {}
    for p in panels:
        idx = np.searchsorted(p.dates, common)
        for name in p.columns:
            if name in columns:
                raise AlignmentError(f"duplicate column {name!r} across merged panels")
            columns[name] = p.columns[name][idx].copy()
            missing[name] = p.missing[name][idx].copy()
    return MonthlyPanel(dates=common.astype(np.int64), columns=columns, missing=missing)


def align_panels(
    factors: MonthlyPanel,
    portfolios: MonthlyPanel,
    from_ym: int,
    to_ym: int,
    required_columns: list[str] | None = None,
) -> AlignedDataset:
    """Intersect two cleaned panels onto [from_ym, to_ym].

    Both panels must be free of missing cells (run preprocess.clean_panel
    first).  Errors on an empty result rather than silently shrinking the
    requested range to nothing.
    """
    for label, ym in (("from", from_ym), ("to", to_ym)):
        if not is_valid_ym(ym):
            raise AlignmentError(f"{label}={ym} is not a valid YYYYMM month")
    if from_ym > to_ym:
        raise AlignmentError(f"empty range: from={from_ym} is after to={to_ym}")
    for label, panel in (("factors", factors), ("portfolios", portfolios)):
        if panel.has_missing():
            raise AlignmentError(f"{label} panel has missing cells; clean it before aligning")

    common = np.intersect1d(factors.dates, portfolios.dates)
    common = common[(common >= from_ym) & (common <= to_ym)]
    if common.size == 0:
        raise AlignmentError(
            f"no overlapping dates in [{from_ym}, {to_ym}] "
            f"(factors {factors.dates[0]}..{factors.dates[-1]}, "
            f"portfolios {portfolios.dates[0]}..{portfolios.dates[-1]})"
        )
    if common.size < 2:
        raise AlignmentError(f"aligned range has only {common.size} month(s); need at least 2")

    columns: dict[str, np.ndarray] = {}
    for panel in (factors, portfolios):
        idx = np.searchsorted(panel.dates, common)
        for name in panel.columns:
            if name in columns:
                raise AlignmentError(f"column {name!r} present in both panels")
            columns[name] = panel.columns[name][idx].copy()

    dataset = AlignedDataset(dates=common.astype(np.int64), columns=columns)
    if required_columns:
        absent = [c for c in required_columns if not dataset.has_column(c)]
        if absent:
            raise MissingColumnError(f"aligned dataset is missing required columns: {absent}")
    return dataset

"""FF3 / Carhart4 / FF5 model definitions, fitting, and comparison.

Each model regresses a sector's excess return (sector minus RF) on its
canonical factor set.  The size factor is family-specific: when a panel
carries both SMB_3F (three-portfolio construction) and SMB_5F
(six-portfolio construction), FF3 and Carhart4 resolve SMB to SMB_3F and
FF5 to SMB_5F; with a single SMB column everyone uses it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_ingest import AlignedDataset
from .errors import MissingColumnError
from .regression import (
    DesignMatrix,
    Metrics,
    RegressionFit,
    make_design,
    ols_fit,
    prediction_metrics,
    significance_stars,
)

FF3 = ("Mkt-RF", "SMB", "HML")
CARHART4 = FF3 + ("MOM",)
FF5 = FF3 + ("RMW", "CMA")

_SMB_CANDIDATES = {
    "FF3": ("SMB_3F", "SMB"),
    "Carhart4": ("SMB_3F", "SMB"),
    "FF5": ("SMB_5F", "SMB"),
}


@dataclass(frozen=True)
class ModelSpec:
    """A named factor model and its ordered factor list."""

    name: str
    factors: tuple[str, ...]


MODEL_SPECS = {
    "ff3": ModelSpec("FF3", FF3),
    "carhart4": ModelSpec("Carhart4", CARHART4),
    "ff5": ModelSpec("FF5", FF5),
}


def model_spec(name: str) -> ModelSpec:
    """Look up a canonical ModelSpec by case-insensitive name."""
    try:
        return MODEL_SPECS[name.strip().lower()]
    except KeyError:
        raise MissingColumnError(
            f"unknown model {name!r}; known models: {sorted(MODEL_SPECS)}"
        ) from None


@dataclass
class FactorRegression:
    """One fitted sector-on-factors regression with presentation extras."""

    sector: str
    spec: ModelSpec
    fit: RegressionFit
    stars: list[str]
    equation: str


@dataclass
class ComparisonRow:
    model: str
    r_squared: float
    f_p_value: float
    rmse: float
    mae: float


@dataclass
class ComparisonTable:
    sector: str
    rows: list[ComparisonRow]


def resolve_factor_series(data: AlignedDataset, factor: str, spec: ModelSpec) -> np.ndarray:
    """Fetch a factor series, applying the family-specific SMB fallback."""
    candidates = _SMB_CANDIDATES.get(spec.name, ()) if factor == "SMB" else (factor,)
    for cand in candidates or (factor,):
        if data.has_column(cand):
            return data.column(cand)
    raise MissingColumnError(f"factor {factor!r} not found for model {spec.name}")


def build_design(data: AlignedDataset, spec: ModelSpec, sector: str) -> DesignMatrix:
    """Design with response sector - RF and the spec's factors in order."""
    rf = data.column("RF")
    response = data.column(sector) - rf
    columns = np.column_stack([resolve_factor_series(data, f, spec) for f in spec.factors])
    return make_design(
        list(spec.factors), columns, response, response_name=f"{sector} - RF"
    )


def fit_factor_model(data: AlignedDataset, spec: ModelSpec, sector: str) -> FactorRegression:
    """Fit one sector/model pair and attach stars and a printed equation."""
    fit = ols_fit(build_design(data, spec, sector))
    reg = FactorRegression(
        sector=sector,
        spec=spec,
        fit=fit,
        stars=significance_stars(fit.p_values),
        equation="",
    )
    reg.equation = format_equation(reg)
    return reg


def in_sample_predictions(data: AlignedDataset, reg: FactorRegression) -> tuple[np.ndarray, np.ndarray]:
    """(actual, fitted) excess returns for the sample the model was fit on."""
    y = data.column(reg.sector) - data.column("RF")
    return y, y - reg.fit.residuals


def compare_models(
    data: AlignedDataset, specs: list[ModelSpec], sector: str
) -> ComparisonTable:
    """One row per model: in-sample R-squared, overall-F p-value, RMSE, MAE."""
    if not specs:
        raise MissingColumnError("compare_models needs at least one model spec")
    rows = []
    for spec in specs:
        reg = fit_factor_model(data, spec, sector)
        y, yhat = in_sample_predictions(data, reg)
        metrics: Metrics = prediction_metrics(y, yhat)
        rows.append(
            ComparisonRow(
                model=spec.name,
                r_squared=reg.fit.r_squared,
                f_p_value=reg.fit.f_p_value,
                rmse=metrics.rmse,
                mae=metrics.mae,
            )
        )
    return ComparisonTable(sector=sector, rows=rows)


def _term_symbol(factor: str) -> str:
    return "(Rmkt - Rf)" if factor == "Mkt-RF" else factor


def format_equation(reg: FactorRegression, decimals: int = 4) -> str:
    """Render the fitted model as `Ri - Rf = alpha + b1(Rmkt - Rf) + ...`.

    The intercept leads; every factor term is printed with an explicit
    sign, including exact zeros.
    """
    beta = reg.fit.beta
    parts = [f"Ri - Rf = {beta[0]:.{decimals}f}"]
    for coef, factor in zip(beta[1:], reg.spec.factors):
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {abs(coef):.{decimals}f}{_term_symbol(factor)}")
    return " ".join(parts)

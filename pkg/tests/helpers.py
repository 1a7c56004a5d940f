"""Shared oracles and fixture generators for the test suite.

Oracles here are deliberately independent of the library's own code
paths: least squares via Moore-Penrose pseudo-inverse, tail
probabilities via adaptive quadrature of hand-written densities, and
LSTM derivatives via central finite differences.
"""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np
from scipy import integrate

from factorcast.data_ingest import AlignedDataset, MonthlyPanel, next_ym

REPO_ROOT = Path(__file__).resolve().parent.parent
REAL_DATA_DIR = Path(os.environ.get("FACTORCAST_DATA", REPO_ROOT / "data"))
REAL_FACTORS_CSV = REAL_DATA_DIR / "factors_combined.csv"
REAL_PORTFOLIOS_CSV = REAL_DATA_DIR / "5_Industry_Portfolios.CSV"

REAL_DATA_SKIP_REASON = (
    "real monthly factor/industry files not present (no network in this "
    "environment); run scripts/fetch_real_data.py where downloads are "
    f"possible and place the files under {REAL_DATA_DIR}"
)


def real_data_available() -> bool:
    return REAL_FACTORS_CSV.exists() and REAL_PORTFOLIOS_CSV.exists()


# ---------------------------------------------------------------------------
# OLS oracle: brute-force pseudo-inverse
# ---------------------------------------------------------------------------


def pinv_ols_oracle(x: np.ndarray, y: np.ndarray) -> dict:
    """Least squares by Moore-Penrose pseudo-inverse, inference by the
    textbook s^2 (X'X)^-1 formula.  x includes the intercept column."""
    beta = np.linalg.pinv(x) @ y
    residuals = y - x @ beta
    n, p = x.shape
    dof = n - p
    sse = float(residuals @ residuals)
    sst = float(np.sum((y - y.mean()) ** 2))
    s2 = sse / dof
    se = np.sqrt(s2 * np.diag(np.linalg.pinv(x.T @ x)))
    return {
        "beta": beta,
        "stderr": se,
        "t_stats": beta / se,
        "r_squared": 1.0 - sse / sst,
        "residuals": residuals,
        "dof": dof,
    }


# ---------------------------------------------------------------------------
# Distribution oracles: adaptive quadrature of hand-written densities
# ---------------------------------------------------------------------------


def t_pdf(x: float, dof: float) -> float:
    log_norm = (
        math.lgamma((dof + 1.0) / 2.0)
        - math.lgamma(dof / 2.0)
        - 0.5 * math.log(dof * math.pi)
    )
    return math.exp(log_norm - 0.5 * (dof + 1.0) * math.log1p(x * x / dof))


def t_cdf_quad(x: float, dof: float) -> float:
    if x <= 0.0:
        val, _ = integrate.quad(t_pdf, -math.inf, x, args=(dof,), limit=400)
        return val
    # integrate the tail for accuracy, then complement
    val, _ = integrate.quad(t_pdf, x, math.inf, args=(dof,), limit=400)
    return 1.0 - val


def f_pdf(x: float, d1: float, d2: float) -> float:
    if x <= 0.0:
        return 0.0
    log_num = 0.5 * d1 * math.log(d1) + 0.5 * d2 * math.log(d2) + (0.5 * d1 - 1.0) * math.log(x)
    log_den = 0.5 * (d1 + d2) * math.log(d2 + d1 * x)
    log_beta = math.lgamma(0.5 * d1) + math.lgamma(0.5 * d2) - math.lgamma(0.5 * (d1 + d2))
    return math.exp(log_num - log_den - log_beta)


def f_sf_quad(x: float, d1: float, d2: float) -> float:
    if x == 0.0:
        return 1.0
    # split at a finite point to keep quad honest on the long tail
    mid = max(2.0 * x, 50.0)
    a, _ = integrate.quad(f_pdf, x, mid, args=(d1, d2), limit=400)
    b, _ = integrate.quad(f_pdf, mid, math.inf, args=(d1, d2), limit=400)
    return a + b


# ---------------------------------------------------------------------------
# Synthetic market data with known generating coefficients
# ---------------------------------------------------------------------------

SYNTH_TRUTH = {
    # sector: (alpha, {factor: beta}, noise sigma)
    "Manuf": (0.05, {"Mkt-RF": 0.92, "SMB": 0.05, "HML": 0.03}, 1.4),
    "Hitec": (0.10, {"Mkt-RF": 1.05, "SMB": -0.12, "HML": -0.30, "RMW": -0.10}, 1.8),
    "Other": (0.00, {"Mkt-RF": 0.95, "SMB": 0.10, "HML": 0.30, "RMW": -0.10, "CMA": -0.07}, 1.1),
}

FACTOR_SIGMAS = {
    "Mkt-RF": (0.6, 4.5),
    "SMB": (0.1, 2.3),
    "HML": (0.2, 2.5),
    "MOM": (0.3, 3.5),
    "RMW": (0.2, 1.5),
    "CMA": (0.1, 1.4),
}


def month_range(start_ym: int, n: int) -> np.ndarray:
    dates = [start_ym]
    for _ in range(n - 1):
        dates.append(next_ym(dates[-1]))
    return np.asarray(dates, dtype=np.int64)


def synthetic_market(n_months: int = 241, seed: int = 7, start_ym: int = 200401):
    """Factor and sector series drawn from a known linear model.

    Returns (AlignedDataset, truth) where truth maps each sector to its
    generating (alpha, betas, noise sigma).
    """
    rng = np.random.default_rng(seed)
    columns: dict[str, np.ndarray] = {}
    for name, (mu, sigma) in FACTOR_SIGMAS.items():
        columns[name] = rng.normal(mu, sigma, n_months)
    columns["RF"] = np.round(rng.uniform(0.0, 0.45, n_months), 2)

    for sector, (alpha, betas, noise) in SYNTH_TRUTH.items():
        excess = alpha + rng.normal(0.0, noise, n_months)
        for factor, beta in betas.items():
            excess = excess + beta * columns[factor]
        columns[sector] = excess + columns["RF"]

    dataset = AlignedDataset(dates=month_range(start_ym, n_months), columns=columns)
    return dataset, SYNTH_TRUTH


def synthetic_panels(n_months: int = 241, seed: int = 7, start_ym: int = 200401):
    """The same synthetic market split into factor and portfolio panels."""
    data, truth = synthetic_market(n_months, seed, start_ym)
    factor_cols = {k: data.columns[k] for k in (*FACTOR_SIGMAS, "RF")}
    sector_cols = {k: data.columns[k] for k in SYNTH_TRUTH}
    factors = MonthlyPanel(dates=data.dates.copy(), columns=factor_cols)
    portfolios = MonthlyPanel(dates=data.dates.copy(), columns=sector_cols)
    return factors, portfolios, truth


def panel_to_csv(panel: MonthlyPanel, banner: str | None = None) -> str:
    """Render a panel as French-library-style CSV with an optional banner."""
    from factorcast.data_ingest import serialize_panel

    body = serialize_panel(panel)
    if banner:
        return banner.rstrip("\n") + "\n\n" + body
    return body


# ---------------------------------------------------------------------------
# Nonlinear fixture where history beats a single-lag linear model
# ---------------------------------------------------------------------------


def nonlinear_factor_dataset(n_months: int = 241, seed: int = 0, start_ym: int = 200401):
    """Target: 0.9 * contemporaneous market + 0.5 * tanh(3 * mean of the
    six preceding SMB values) + small noise.

    SMB is iid, so the tanh term is a nonlinear function of history that
    a same-month linear factor regression cannot see at all, while a
    12-month input window contains all six of its ingredients.
    """
    rng = np.random.default_rng(seed)
    mkt = rng.normal(0.0, 0.1, n_months)
    smb = rng.normal(0.0, 0.8, n_months)
    hml = rng.normal(0.0, 0.2, n_months)
    rmw = rng.normal(0.0, 0.2, n_months)
    cma = rng.normal(0.0, 0.2, n_months)
    noise = rng.normal(0.0, 0.1, n_months)

    smb6 = np.zeros(n_months)
    for t in range(1, n_months):
        window = smb[max(0, t - 6):t]
        smb6[t] = window.mean()
    excess = 0.9 * mkt + 0.5 * np.tanh(3.0 * smb6) + noise

    columns = {
        "Mkt-RF": mkt,
        "SMB": smb,
        "HML": hml,
        "RMW": rmw,
        "CMA": cma,
        "RF": np.zeros(n_months),
        "Synth": excess,  # RF is zero so the sector column is the excess return
    }
    return AlignedDataset(dates=month_range(start_ym, n_months), columns=columns)


def contemporaneous_ols_r2(data, train_ds, test_ds) -> float:
    """The linear side of the comparison: a five-factor regression on
    same-month factor values, fitted on the training targets' months and
    scored on the test targets' months."""
    factors = ("Mkt-RF", "SMB", "HML", "RMW", "CMA")
    matrix = np.column_stack([data.columns[f] for f in factors])

    def rows(ds):
        idx = np.searchsorted(data.dates, ds.target_dates)
        return np.column_stack([np.ones(len(idx)), matrix[idx]])

    beta = np.linalg.pinv(rows(train_ds)) @ train_ds.targets
    err = test_ds.targets - rows(test_ds) @ beta
    sst = float(np.sum((test_ds.targets - test_ds.targets.mean()) ** 2))
    return 1.0 - float(err @ err) / sst


# ---------------------------------------------------------------------------
# LSTM finite-difference oracle
# ---------------------------------------------------------------------------


def finite_difference_grads(dataset, params, epsilon: float = 1e-5):
    """Central-difference gradients of the batch MSE for every tensor."""
    from factorcast.lstm import LstmParams, _forward_batch

    def loss_at(p: LstmParams) -> float:
        preds, _ = _forward_batch(dataset.windows, p)
        return float(np.mean((preds - dataset.targets) ** 2))

    arrays = [a.copy() for a in params.arrays()]
    grads = []
    for base in arrays:
        g = np.zeros_like(base)
        flat = base.reshape(-1)  # view; nudging it nudges `arrays`
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            hi = loss_at(LstmParams(*arrays))
            flat[idx] = orig - epsilon
            lo = loss_at(LstmParams(*arrays))
            flat[idx] = orig
            gflat[idx] = (hi - lo) / (2.0 * epsilon)
        grads.append(g)
    return LstmParams(*grads)


def max_relative_error(analytic, numeric) -> float:
    """Max over all tensors and elements of |a - b| / (|a| + |b| + 1e-10)."""
    worst = 0.0
    for a, b in zip(analytic.arrays(), numeric.arrays()):
        denom = np.abs(a) + np.abs(b) + 1e-10
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


def load_real_dataset(from_ym: int = 200401, to_ym: int = 202401):
    """Aligned real dataset from the fetched French-library files, or None."""
    if not real_data_available():
        return None
    from factorcast.data_ingest import align_panels, normalize_factor_names, parse_panel_csv
    from factorcast.preprocess import clean_panel

    factors = normalize_factor_names(parse_panel_csv(REAL_FACTORS_CSV.read_text()))
    portfolios = normalize_factor_names(parse_panel_csv(REAL_PORTFOLIOS_CSV.read_text()))
    factors, _ = clean_panel(factors)
    portfolios, _ = clean_panel(portfolios)
    return align_panels(factors, portfolios, from_ym, to_ym, required_columns=["RF"])

"""Ordinary least squares with classical inference, from scratch.

The solver uses Householder orthogonalization rather than normal
equations: factor columns are correlated, and at a couple hundred
observations the squared condition number of X'X costs real digits.
Student-t and F tail probabilities come from the regularized incomplete
beta function evaluated by a modified Lentz continued fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputDataError, NumericError, RankDeficientError

# Reported p-values are floored here so astronomically small tails
# (Table-style magnitudes such as 1e-94) print instead of underflowing.
P_FLOOR = 1e-300

# Residual sums of squares below this relative scale are treated as an
# exact fit; classical inference degenerates there (s^2 = 0).
_EXACT_FIT_RTOL = 1e3


@dataclass
class DesignMatrix:
    """Response y against an intercept plus m named regressor columns."""

    x: np.ndarray            # (n, m+1), first column all ones
    names: list[str]         # length m+1, names[0] == "Intercept"
    y: np.ndarray            # (n,)
    response_name: str = "y"

    @property
    def n_obs(self) -> int:
        return self.x.shape[0]

    @property
    def n_regressors(self) -> int:
        return self.x.shape[1] - 1


@dataclass
class RegressionFit:
    """OLS output: coefficients with inference, fit statistics, residuals."""

    names: list[str]
    beta: np.ndarray
    stderr: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_stat: float
    f_p_value: float
    residuals: np.ndarray
    dof: int


class Metrics(NamedTuple):
    rmse: float
    mae: float
    r_squared: float  # NaN when the target has zero variance


def make_design(
    names: list[str],
    columns: np.ndarray,
    y: np.ndarray,
    response_name: str = "y",
) -> DesignMatrix:
    """Assemble a DesignMatrix, prepending the intercept column.

    `columns` is (n, m): one column per regressor, in the order of `names`.
    """
    columns = np.asarray(columns, dtype=float)
    if columns.ndim == 1:
        columns = columns.reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    n, m = columns.shape
    if m != len(names):
        raise InputDataError(f"{len(names)} names for {m} regressor columns")
    if m < 1:
        raise InputDataError("need at least one regressor")
    if len(set(names)) != len(names):
        raise InputDataError(f"duplicate regressor names: {names}")
    if n != y.shape[0]:
        raise InputDataError(f"{n} rows of regressors vs {y.shape[0]} responses")
    if n <= m + 1:
        raise InputDataError(f"n={n} observations cannot fit m+1={m + 1} coefficients")
    if not (np.isfinite(columns).all() and np.isfinite(y).all()):
        raise InputDataError("design contains non-finite entries")
    x = np.column_stack([np.ones(n), columns])
    return DesignMatrix(x=x, names=["Intercept"] + list(names), y=y, response_name=response_name)


def _householder_qr(a: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce [a | y] with Householder reflections; returns (R, Q'y)."""
    r = a.astype(float).copy()
    qty = y.astype(float).copy()
    n, m = r.shape
    for j in range(m):
        col = r[j:, j]
        norm = np.linalg.norm(col)
        if norm == 0.0:
            continue  # flagged as rank deficient later
        v = col.copy()
        v[0] += math.copysign(norm, col[0])
        v /= np.linalg.norm(v)
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        qty[j:] -= 2.0 * v * (v @ qty[j:])
    return r[:m, :], qty


def _back_substitute(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = r.shape[0]
    out = np.zeros(m)
    for i in range(m - 1, -1, -1):
        out[i] = (b[i] - r[i, i + 1:] @ out[i + 1:]) / r[i, i]
    return out


def ols_fit(design: DesignMatrix) -> RegressionFit:
    """Fit y = X beta by least squares with full classical inference."""
    x, y = design.x, design.y
    n, p = x.shape
    m = p - 1
    if n <= p:
        raise InputDataError(f"n={n} observations cannot fit {p} coefficients")

    r, qty = _householder_qr(x, y)
    diag = np.abs(np.diag(r))
    tol = max(n, p) * np.finfo(float).eps * (diag.max() if diag.max() > 0 else 1.0)
    deficient = np.flatnonzero(diag <= tol)
    if deficient.size:
        raise RankDeficientError([design.names[j] for j in deficient])

    beta = _back_substitute(r, qty[:p])
    residuals = y - x @ beta
    sse = float(residuals @ residuals)
    y_mean = float(np.mean(y))
    sst = float(np.sum((y - y_mean) ** 2))
    dof = n - p

    # (X'X)^-1 = R^-1 R^-T; row sums of squares of R^-1 give the diagonal.
    r_inv = np.column_stack(
        [_back_substitute(r, e) for e in np.eye(p)]
    )
    xtx_inv_diag = np.sum(r_inv**2, axis=1)

    y_norm = float(np.linalg.norm(y))
    exact_floor = (_EXACT_FIT_RTOL * np.finfo(float).eps * max(y_norm, 1e-300)) ** 2 * n
    exact_fit = sse <= exact_floor

    if exact_fit:
        # s^2 is numerically zero: coefficients whose contribution to the
        # fit is below roundoff carry no signal (t = 0); the rest are
        # pinned by an exact linear relation (t -> infinity).
        col_norms = np.linalg.norm(x, axis=0)
        zero = np.abs(beta) * col_norms <= math.sqrt(exact_floor)
        stderr = np.zeros(p)
        t_stats = np.zeros(p)
        t_stats[~zero] = np.sign(beta[~zero]) * np.inf
        p_values = np.where(zero, 1.0, P_FLOOR)
        s2 = 0.0
    else:
        s2 = sse / dof
        stderr = np.sqrt(s2 * xtx_inv_diag)
        t_stats = beta / stderr
        p_values = np.array(
            [max(2.0 * _student_t_sf(abs(t), dof), P_FLOOR) for t in t_stats]
        )

    if sst > 0.0:
        r_squared = 1.0 - sse / sst
        r_squared = min(max(r_squared, 0.0), 1.0)
        adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) / dof
        if exact_fit or sse == 0.0:
            f_stat = math.inf
            f_p_value = P_FLOOR
        else:
            f_stat = ((sst - sse) / m) / (sse / dof)
            f_stat = max(f_stat, 0.0)
            f_p_value = max(f_sf(f_stat, m, dof), P_FLOOR)
    else:
        # zero-variance response: nothing to explain, no overall test
        r_squared = 0.0
        adj_r_squared = 0.0
        f_stat = 0.0
        f_p_value = 1.0

    return RegressionFit(
        names=list(design.names),
        beta=beta,
        stderr=stderr,
        t_stats=t_stats,
        p_values=p_values,
        r_squared=r_squared,
        adj_r_squared=adj_r_squared,
        f_stat=f_stat,
        f_p_value=f_p_value,
        residuals=residuals,
        dof=dof,
    )


def predict(fit: RegressionFit, design: DesignMatrix) -> np.ndarray:
    """Apply fitted coefficients to a design with matching columns."""
    if design.names != fit.names:
        raise InputDataError(
            f"design columns {design.names} do not match fit columns {fit.names}"
        )
    return design.x @ fit.beta


def prediction_metrics(y: np.ndarray, yhat: np.ndarray) -> Metrics:
    """RMSE, MAE, and R-squared (about the mean of y) of predictions."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1:
        raise InputDataError(f"shape mismatch: y {y.shape} vs yhat {yhat.shape}")
    if y.size == 0:
        raise InputDataError("cannot score empty prediction vectors")
    err = y - yhat
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(err @ err) / sst if sst > 0.0 else math.nan
    return Metrics(rmse=rmse, mae=mae, r_squared=r2)


def significance_stars(p_values: np.ndarray) -> list[str]:
    """Star markers: *** p < 0.001, ** p < 0.01, * p < 0.05, else none."""
    out = []
    for p in np.asarray(p_values, dtype=float):
        if p < 0.001:
            out.append("***")
        elif p < 0.01:
            out.append("**")
        elif p < 0.05:
            out.append("*")
        else:
            out.append("")
    return out


# ---------------------------------------------------------------------------
# Distribution kernels
# ---------------------------------------------------------------------------

_IBETA_MAX_ITER = 400
_IBETA_EPS = 1e-15
_IBETA_FPMIN = 1e-300


def _beta_cont_frac(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, by modified Lentz."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _IBETA_FPMIN:
        d = _IBETA_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _IBETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _IBETA_FPMIN:
            d = _IBETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _IBETA_FPMIN:
            c = _IBETA_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _IBETA_FPMIN:
            d = _IBETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _IBETA_FPMIN:
            c = _IBETA_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _IBETA_EPS:
            return h
    raise NumericError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), switching to the symmetric tail when x passes the
    continued fraction's convergent regime at (a+1)/(a+b+2)."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _beta_cont_frac(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _beta_cont_frac(b, a, 1.0 - x) / b


def _student_t_sf(x: float, dof: float) -> float:
    """P(T > x) for x >= 0; small tails computed without cancellation."""
    if x == 0.0:
        return 0.5
    if math.isinf(x):
        return 0.0
    z = dof / (dof + x * x)
    return 0.5 * regularized_incomplete_beta(0.5 * dof, 0.5, z)


def student_t_cdf(x: float, dof: float) -> float:
    """Student-t cumulative probability P(T <= x)."""
    if dof <= 0.0:
        raise ValueError(f"dof must be positive, got {dof}")
    if math.isnan(x):
        raise ValueError("x is NaN")
    if x == 0.0:
        return 0.5
    if x > 0.0:
        return 1.0 - _student_t_sf(x, dof)
    return _student_t_sf(-x, dof)


def f_sf(x: float, d1: float, d2: float) -> float:
    """F-distribution survival function P(F > x)."""
    if d1 <= 0.0 or d2 <= 0.0:
        raise ValueError(f"degrees of freedom must be positive, got d1={d1}, d2={d2}")
    if math.isnan(x) or x < 0.0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return regularized_incomplete_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * x))

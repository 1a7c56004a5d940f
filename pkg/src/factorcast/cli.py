"""Command-line pipeline: ingest -> clean -> fit -> compare -> LSTM -> report.

Subcommands mirror the report sections: `fit` emits coefficient tables,
`compare` the per-model goodness-of-fit tables, `lstm` the sequence-model
metrics, and `report` all of them.  Identical inputs, config, and seed
produce byte-identical JSON output.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import factor_models, lstm
from .data_ingest import (
    AlignedDataset,
    align_panels,
    merge_panels,
    normalize_factor_names,
    parse_panel_csv,
)
from .errors import InputDataError, NumericError
from .preprocess import DEFAULT_OUTLIER_THRESHOLD, clean_panel
from .regression import P_FLOOR, prediction_metrics

DEFAULT_SECTORS = ("Manuf", "Hitec", "Other")
DEFAULT_MODELS = ("ff3", "carhart4", "ff5")
STAR_LEGEND = "*** p < 0.001, ** p < 0.01, * p < 0.05"

COEF_DECIMALS = 4
METRIC_DECIMALS = 3

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NUMERIC_ERROR = 2


@dataclass
class RunConfig:
    """Everything one pipeline run depends on."""

    factors_path: str
    portfolios_path: str
    from_ym: int
    to_ym: int
    momentum_path: str | None = None
    sectors: tuple[str, ...] = DEFAULT_SECTORS
    models: tuple[str, ...] = DEFAULT_MODELS
    outlier_threshold: float = DEFAULT_OUTLIER_THRESHOLD
    lstm: lstm.TrainConfig = field(default_factory=lstm.TrainConfig)
    parts: tuple[str, ...] = ("fit", "compare", "lstm")
    out_format: str = "json"


@dataclass
class Report:
    """Full pipeline output plus provenance; see emit_report for formats."""

    provenance: dict
    sectors: list[dict]
    star_legend: str = STAR_LEGEND


class _StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except (InputDataError, NumericError, OSError) as exc:
        raise _StageError(name, exc) from exc


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _p_value_json(p: float):
    """Raw p-value for JSON; values at the clamp floor become a string."""
    return "<1e-300" if p <= P_FLOOR else p


def _p_display(p: float) -> str:
    return "<1e-300" if p <= P_FLOOR else f"{p:.3g}"


def _finite(x: float):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else repr(x)
    return x


def _load_panel(path: str):
    text = Path(path).read_text(encoding="utf-8")
    return normalize_factor_names(parse_panel_csv(text))


def _model_report(data: AlignedDataset, spec, sector: str) -> dict:
    reg = factor_models.fit_factor_model(data, spec, sector)
    y, yhat = factor_models.in_sample_predictions(data, reg)
    metrics = prediction_metrics(y, yhat)
    coefficients = [
        {
            "name": name,
            "beta": float(beta),
            "stderr": _finite(float(se)),
            "t_stat": _finite(float(t)),
            "p_value": _p_value_json(float(p)),
            "p_display": _p_display(float(p)),
            "stars": stars,
        }
        for name, beta, se, t, p, stars in zip(
            reg.fit.names, reg.fit.beta, reg.fit.stderr, reg.fit.t_stats,
            reg.fit.p_values, reg.stars,
        )
    ]
    return {
        "model": spec.name,
        "coefficients": coefficients,
        "r_squared": reg.fit.r_squared,
        "adj_r_squared": reg.fit.adj_r_squared,
        "f_stat": _finite(reg.fit.f_stat),
        "f_p_value": _p_value_json(reg.fit.f_p_value),
        "f_p_display": _p_display(reg.fit.f_p_value),
        "rmse": metrics.rmse,
        "mae": metrics.mae,
        "equation": reg.equation,
        "dof": reg.fit.dof,
    }


def _comparison_report(data: AlignedDataset, specs, sector: str) -> list[dict]:
    table = factor_models.compare_models(data, specs, sector)
    return [
        {
            "model": row.model,
            "r_squared": row.r_squared,
            "f_p_value": _p_value_json(row.f_p_value),
            "f_p_display": _p_display(row.f_p_value),
            "rmse": row.rmse,
            "mae": row.mae,
        }
        for row in table.rows
    ]


def _lstm_report(data: AlignedDataset, sector: str, config: lstm.TrainConfig) -> dict:
    windows = lstm.make_windows(data, sector, config.window)
    train_ds, test_ds = lstm.split_7_3(windows)
    _, history = lstm.train(windows, config)
    m = history.test_metrics
    return {
        "r_squared": _finite(m.r_squared),
        "rmse": m.rmse,
        "mae": m.mae,
        "split": "test",
        "n_train": train_ds.n_samples,
        "n_test": test_ds.n_samples,
        "final_train_loss": history.losses[-1] if history.losses else None,
    }


def run_pipeline(config: RunConfig) -> Report:
    """Execute the full chain deterministically and assemble the report."""
    with _stage("ingest"):
        factors = _load_panel(config.factors_path)
        if config.momentum_path:
            factors = merge_panels(factors, _load_panel(config.momentum_path))
        portfolios = _load_panel(config.portfolios_path)

    with _stage("clean"):
        factors_clean, factors_report = clean_panel(factors, config.outlier_threshold)
        portfolios_clean, portfolios_report = clean_panel(portfolios, config.outlier_threshold)

    with _stage("align"):
        data = align_panels(
            factors_clean,
            portfolios_clean,
            config.from_ym,
            config.to_ym,
            required_columns=["RF"],
        )

    specs = [factor_models.model_spec(m) for m in config.models]
    sectors = []
    for sector in config.sectors:
        entry: dict = {"sector": sector}
        if "fit" in config.parts:
            with _stage(f"fit:{sector}"):
                entry["models"] = [_model_report(data, spec, sector) for spec in specs]
        if "compare" in config.parts:
            with _stage(f"compare:{sector}"):
                entry["comparison"] = _comparison_report(data, specs, sector)
        if "lstm" in config.parts:
            with _stage(f"lstm:{sector}"):
                entry["lstm"] = _lstm_report(data, sector, config.lstm)
        sectors.append(entry)

    cleaning = {
        "factors": {
            "filled": len(factors_report.filled),
            "outliers_removed": len(factors_report.outliers_removed),
        },
        "portfolios": {
            "filled": len(portfolios_report.filled),
            "outliers_removed": len(portfolios_report.outliers_removed),
        },
    }
    provenance = {
        "factors_csv": {"path": config.factors_path, "sha256": _sha256(config.factors_path)},
        "portfolios_csv": {
            "path": config.portfolios_path,
            "sha256": _sha256(config.portfolios_path),
        },
        "momentum_csv": (
            {"path": config.momentum_path, "sha256": _sha256(config.momentum_path)}
            if config.momentum_path
            else None
        ),
        "date_range": {"from": config.from_ym, "to": config.to_ym},
        "months": int(len(data.dates)),
        "cleaning": cleaning,
        "config": {
            "sectors": list(config.sectors),
            "models": list(config.models),
            "outlier_threshold": config.outlier_threshold,
            "parts": list(config.parts),
            "lstm": asdict(config.lstm),
        },
        "seed": config.lstm.seed,
    }
    return Report(provenance=provenance, sectors=sectors)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def emit_report(report: Report, out_format: str) -> str:
    """Render a report as schema-stable JSON or paper-style markdown."""
    if out_format == "json":
        payload = {
            "schema_version": 1,
            "provenance": report.provenance,
            "sectors": report.sectors,
            "star_legend": report.star_legend,
        }
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"
    if out_format == "markdown":
        return _emit_markdown(report)
    raise InputDataError(f"unknown output format {out_format!r}; use json or markdown")


def _md_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return lines


def _emit_markdown(report: Report) -> str:
    c, m = COEF_DECIMALS, METRIC_DECIMALS
    lines = ["# Sector factor-model report", ""]
    rng = report.provenance["date_range"]
    lines.append(
        f"Sample: {rng['from']}..{rng['to']} "
        f"({report.provenance['months']} months). Seed: {report.provenance['seed']}."
    )
    lines.append("")
    for entry in report.sectors:
        lines.append(f"## {entry['sector']}")
        lines.append("")
        for model in entry.get("models", []):
            lines.append(f"### {model['model']}")
            lines.append("")
            lines.append(f"`{model['equation']}`")
            lines.append("")
            rows = [
                [
                    coef["name"],
                    f"{coef['beta']:.{c}f}",
                    "" if coef["stderr"] is None else f"{coef['stderr']:.{c}f}",
                    "" if coef["t_stat"] is None else f"{coef['t_stat']:.{m}f}",
                    coef["p_display"],
                    coef["stars"],
                ]
                for coef in model["coefficients"]
            ]
            lines += _md_table(
                ["term", "coefficient", "std error", "t", "p-value", ""], rows
            )
            lines.append("")
            lines.append(
                f"R-squared {model['r_squared']:.{m}f}, "
                f"adj. {model['adj_r_squared']:.{m}f}, "
                f"F p-value {model['f_p_display']}, "
                f"RMSE {model['rmse']:.{m}f}, MAE {model['mae']:.{m}f}"
            )
            lines.append("")
        if "comparison" in entry:
            lines.append(f"### Model comparison in {entry['sector']}")
            lines.append("")
            rows = [
                [
                    row["model"],
                    f"{row['r_squared']:.{m}f}",
                    row["f_p_display"],
                    f"{row['rmse']:.{m}f}",
                    f"{row['mae']:.{m}f}",
                ]
                for row in entry["comparison"]
            ]
            lines += _md_table([entry["sector"], "R-squared", "P-value", "RMSE", "MAE"], rows)
            lines.append("")
        if "lstm" in entry:
            row = entry["lstm"]
            lines.append(f"### LSTM in {entry['sector']} (test split)")
            lines.append("")
            r2 = "undefined" if row["r_squared"] is None else f"{row['r_squared']:.{m}f}"
            lines += _md_table(
                ["", "R-squared", "RMSE", "MAE", "train/test samples"],
                [[
                    entry["sector"], r2, f"{row['rmse']:.{m}f}", f"{row['mae']:.{m}f}",
                    f"{row['n_train']}/{row['n_test']}",
                ]],
            )
            lines.append("")
    lines.append(report.star_legend)
    lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--factors", required=True, help="factor panel CSV path")
    p.add_argument("--portfolios", required=True, help="sector portfolio panel CSV path")
    p.add_argument("--momentum", default=None, help="optional momentum factor CSV to merge")
    p.add_argument("--from", dest="from_ym", type=int, required=True, metavar="YYYYMM")
    p.add_argument("--to", dest="to_ym", type=int, required=True, metavar="YYYYMM")
    p.add_argument("--sectors", default=",".join(DEFAULT_SECTORS),
                   help="comma-separated sector column names")
    p.add_argument("--models", default=",".join(DEFAULT_MODELS),
                   help="comma-separated subset of ff3,carhart4,ff5")
    p.add_argument("--threshold", type=float, default=DEFAULT_OUTLIER_THRESHOLD,
                   help="outlier threshold in robust standard deviations")
    p.add_argument("--format", dest="out_format", choices=("json", "markdown"),
                   default="json")
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def _add_lstm_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=12, help="input window length in months")
    p.add_argument("--hidden", type=int, default=16, help="hidden state size")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--lr", type=float, default=1e-2, help="learning rate")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factorcast",
        description="Fit and compare factor models on monthly sector returns, "
                    "and train an LSTM forecaster on the same data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fit", "coefficient tables with significance stars"),
        ("compare", "per-model R-squared / F p-value / RMSE / MAE tables"),
        ("lstm", "train the LSTM and report test-split metrics"),
        ("report", "everything: fits, comparisons, and LSTM metrics"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common_args(p)
        if name in ("lstm", "report"):
            _add_lstm_args(p)
    return parser


def _split_csv_list(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def config_from_args(args: argparse.Namespace) -> RunConfig:
    parts = {
        "fit": ("fit",),
        "compare": ("compare",),
        "lstm": ("lstm",),
        "report": ("fit", "compare", "lstm"),
    }[args.command]
    train_config = lstm.TrainConfig()
    if args.command in ("lstm", "report"):
        train_config = lstm.TrainConfig(
            window=args.window,
            hidden=args.hidden,
            epochs=args.epochs,
            seed=args.seed,
            learning_rate=args.lr,
            optimizer=args.optimizer,
        )
    return RunConfig(
        factors_path=args.factors,
        portfolios_path=args.portfolios,
        momentum_path=args.momentum,
        from_ym=args.from_ym,
        to_ym=args.to_ym,
        sectors=_split_csv_list(args.sectors),
        models=_split_csv_list(args.models),
        outlier_threshold=args.threshold,
        lstm=train_config,
        parts=parts,
        out_format=args.out_format,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        report = run_pipeline(config)
        rendered = emit_report(report, config.out_format)
    except _StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC_ERROR if isinstance(err.cause, NumericError) else EXIT_INPUT_ERROR
    except (InputDataError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except NumericError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC_ERROR

    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

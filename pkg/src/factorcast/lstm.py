"""From-scratch LSTM sequence regressor for monthly excess returns.

One standard gated cell (forget / input / output gates plus a tanh
candidate, no peepholes) unrolled over a fixed-length window of factor
history, with a linear projection of the final hidden state onto a
scalar next-month prediction.  Gradients are exact reverse-mode BPTT;
training is full-batch with either plain gradient descent or adaptive
moment estimation, fully determined by the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path

import numpy as np

from .data_ingest import AlignedDataset, months_between
from .errors import DivergenceError, InputDataError, NumericError
from .factor_models import MODEL_SPECS, resolve_factor_series
from .regression import Metrics, prediction_metrics

# Factor history fed to the network, plus the sector's own lagged excess
# return as the final feature column (d = 6 for the default set).
DEFAULT_FEATURE_FACTORS = ("Mkt-RF", "SMB", "HML", "RMW", "CMA")

PARAMS_FORMAT_VERSION = 1

_GATES = ("f", "i", "o", "g")  # forget, input, output, candidate


@dataclass
class LstmParams:
    """Gate weights of one cell plus the scalar output projection.

    Per gate: input weights (hidden x input), recurrent weights
    (hidden x hidden), bias (hidden).  b_out is a 0-d array so every
    field supports uniform array arithmetic.
    """

    w_f: np.ndarray
    u_f: np.ndarray
    b_f: np.ndarray
    w_i: np.ndarray
    u_i: np.ndarray
    b_i: np.ndarray
    w_o: np.ndarray
    u_o: np.ndarray
    b_o: np.ndarray
    w_g: np.ndarray
    u_g: np.ndarray
    b_g: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_f.shape[1]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in dataclass_fields(self)]

    def field_names(self) -> list[str]:
        return [f.name for f in dataclass_fields(self)]


@dataclass
class LstmState:
    """Hidden and memory-cell vectors of one cell."""

    h: np.ndarray
    c: np.ndarray


def zero_state(hidden: int) -> LstmState:
    return LstmState(h=np.zeros(hidden), c=np.zeros(hidden))


def zero_like_params(params: LstmParams) -> LstmParams:
    return LstmParams(*[np.zeros_like(a) for a in params.arrays()])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # numerically symmetric form; avoids overflow for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _step(x, h_prev, c_prev, p: LstmParams):
    """One batched cell step; returns gate activations and the new state."""
    f = _sigmoid(x @ p.w_f.T + h_prev @ p.u_f.T + p.b_f)
    i = _sigmoid(x @ p.w_i.T + h_prev @ p.u_i.T + p.b_i)
    o = _sigmoid(x @ p.w_o.T + h_prev @ p.u_o.T + p.b_o)
    g = np.tanh(x @ p.w_g.T + h_prev @ p.u_g.T + p.b_g)
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return f, i, o, g, tc, c, h


def cell_forward(x_t: np.ndarray, state: LstmState, params: LstmParams) -> LstmState:
    """Advance one cell step for a single input vector."""
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape != (params.input_size,):
        raise ValueError(f"input has shape {x_t.shape}, expected ({params.input_size},)")
    if state.h.shape != (params.hidden_size,) or state.c.shape != (params.hidden_size,):
        raise ValueError("state dimensions do not match params")
    *_, c, h = _step(x_t[None, :], state.h[None, :], state.c[None, :], params)
    return LstmState(h=h[0], c=c[0])


def _forward_batch(windows: np.ndarray, params: LstmParams):
    """Run the cell over (B, L, d) windows from zero state.

    Returns predictions (B,) and the per-step cache needed by BPTT.
    """
    b, length, d = windows.shape
    if d != params.input_size:
        raise ValueError(f"windows have {d} features, params expect {params.input_size}")
    h = np.zeros((b, params.hidden_size))
    c = np.zeros((b, params.hidden_size))
    cache = []
    for t in range(length):
        x = windows[:, t, :]
        f, i, o, g, tc, c_new, h_new = _step(x, h, c, params)
        cache.append((x, h, c, f, i, o, g, tc))
        h, c = h_new, c_new
    preds = h @ params.w_out + float(params.b_out)
    return preds, (cache, h)


def forward_sequence(window: np.ndarray, params: LstmParams) -> tuple[float, object]:
    """Predict from one (L, d) window; also returns cached activations."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2 or window.shape[0] == 0:
        raise InputDataError(f"window must be a nonempty LxD matrix, got shape {window.shape}")
    preds, cache = _forward_batch(window[None, :, :], params)
    return float(preds[0]), cache


@dataclass
class WindowedDataset:
    """Contiguous factor-history windows paired with next-month targets."""

    windows: np.ndarray       # (N, L, d), rows oldest -> newest
    targets: np.ndarray       # (N,) next-month excess return, percent
    target_dates: np.ndarray  # (N,) YYYYMM of each target
    feature_names: list[str]

    @property
    def n_samples(self) -> int:
        return self.windows.shape[0]

    def slice(self, start: int, stop: int) -> "WindowedDataset":
        return WindowedDataset(
            windows=self.windows[start:stop],
            targets=self.targets[start:stop],
            target_dates=self.target_dates[start:stop],
            feature_names=self.feature_names,
        )


def make_windows(
    data: AlignedDataset,
    sector: str,
    window: int,
    feature_factors: tuple[str, ...] = DEFAULT_FEATURE_FACTORS,
) -> WindowedDataset:
    """Build all length-`window` samples whose months are consecutive.

    Each window row holds the factor values of one month plus the
    sector's excess return that same month; the target is the excess
    return of the month immediately after the window, so every feature
    strictly predates its target.
    """
    if window < 1:
        raise InputDataError(f"window length must be >= 1, got {window}")
    ff5 = MODEL_SPECS["ff5"]
    rf = data.column("RF")
    excess = data.column(sector) - rf
    factor_cols = [resolve_factor_series(data, f, ff5) for f in feature_factors]
    features = np.column_stack(factor_cols + [excess])
    names = list(feature_factors) + [f"{sector} excess (lagged)"]

    n = len(data.dates)
    if n <= window:
        raise InputDataError(f"{n} months cannot form windows of length {window}")
    consecutive = np.array(
        [months_between(int(data.dates[i]), int(data.dates[i + 1])) == 1 for i in range(n - 1)]
    )
    windows, targets, target_dates = [], [], []
    for start in range(0, n - window):
        tau = start + window  # target month index
        if consecutive[start:tau].all():
            windows.append(features[start:tau])
            targets.append(excess[tau])
            target_dates.append(data.dates[tau])
    if not windows:
        raise InputDataError("no contiguous windows could be formed (gaps in dates)")
    return WindowedDataset(
        windows=np.asarray(windows, dtype=float),
        targets=np.asarray(targets, dtype=float),
        target_dates=np.asarray(target_dates, dtype=np.int64),
        feature_names=names,
    )


def split_7_3(dataset: WindowedDataset) -> tuple[WindowedDataset, WindowedDataset]:
    """Chronological 70/30 split: first floor(0.7 N) samples train."""
    n = dataset.n_samples
    if n < 10:
        raise InputDataError(f"need at least 10 samples to split, got {n}")
    n_train = int(math.floor(0.7 * n))
    return dataset.slice(0, n_train), dataset.slice(n_train, n)


def bptt_gradients(
    dataset: WindowedDataset,
    params: LstmParams,
    clip_norm: float | None = 5.0,
) -> tuple[LstmParams, float]:
    """Exact gradients of the batch-mean squared error, plus the loss.

    Gradients are accumulated over all samples and steps, then rescaled
    once if their global norm exceeds `clip_norm` (pass None to skip).
    """
    if dataset.n_samples == 0:
        raise InputDataError("cannot compute gradients on an empty batch")
    preds, (cache, h_last) = _forward_batch(dataset.windows, params)
    err = preds - dataset.targets
    loss = float(np.mean(err**2))
    if not math.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}; training diverged")

    b = dataset.n_samples
    dpred = 2.0 * err / b
    grads = zero_like_params(params)
    grads.w_out += h_last.T @ dpred
    grads.b_out += dpred.sum()
    dh = np.outer(dpred, params.w_out)
    dc = np.zeros_like(dh)

    for x, h_prev, c_prev, f, i, o, g, tc in reversed(cache):
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc**2)
        dzf = (dc * c_prev) * f * (1.0 - f)
        dzi = (dc * g) * i * (1.0 - i)
        dzo = do * o * (1.0 - o)
        dzg = (dc * i) * (1.0 - g**2)
        for dz, gw, gu, gb in (
            (dzf, grads.w_f, grads.u_f, grads.b_f),
            (dzi, grads.w_i, grads.u_i, grads.b_i),
            (dzo, grads.w_o, grads.u_o, grads.b_o),
            (dzg, grads.w_g, grads.u_g, grads.b_g),
        ):
            gw += dz.T @ x
            gu += dz.T @ h_prev
            gb += dz.sum(axis=0)
        dh = dzf @ params.u_f + dzi @ params.u_i + dzo @ params.u_o + dzg @ params.u_g
        dc = dc * f

    if clip_norm is not None:
        clip_gradients(grads, clip_norm)
    return grads, loss


def global_norm(grads: LstmParams) -> float:
    return math.sqrt(sum(float(np.sum(a**2)) for a in grads.arrays()))


def clip_gradients(grads: LstmParams, max_norm: float) -> float:
    """Rescale all gradient arrays in place if their global norm exceeds
    max_norm; returns the pre-clip norm."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for a in grads.arrays():
            a *= scale
    return norm


@dataclass
class TrainConfig:
    """Hyperparameters; the seed fixes every random draw."""

    window: int = 12
    hidden: int = 16
    learning_rate: float = 1e-2
    epochs: int = 300
    seed: int = 42
    optimizer: str = "adam"  # "adam" or "sgd"
    clip_norm: float = 5.0
    forget_bias: float = 1.0

    def __post_init__(self):
        if self.window < 1 or self.hidden < 1 or self.epochs < 0:
            raise InputDataError("window, hidden must be >= 1 and epochs >= 0")
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise InputDataError("learning_rate and clip_norm must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise InputDataError(f"unknown optimizer {self.optimizer!r}; use 'adam' or 'sgd'")

    def to_file(self, path: str | Path) -> None:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in dataclass_fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        kwargs = {}
        casts = {f.name: f.type for f in dataclass_fields(cls)}
        for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputDataError(f"config line {line_no}: expected 'key = value'")
            key, _, value = (s.strip() for s in line.partition("="))
            if key not in casts:
                raise InputDataError(f"config line {line_no}: unknown key {key!r}")
            if key == "optimizer":
                kwargs[key] = value
            elif key in ("window", "hidden", "epochs", "seed"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


@dataclass
class TrainHistory:
    """Per-epoch training losses and the final held-out metrics."""

    losses: list[float]
    test_metrics: Metrics


def init_params(input_size: int, hidden: int, seed: int, forget_bias: float = 1.0) -> LstmParams:
    """Seeded uniform(-1/sqrt(h), 1/sqrt(h)) init, forget bias offset up
    so early memory is retained."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(hidden)

    def u(*shape):
        return rng.uniform(-bound, bound, size=shape)

    params = LstmParams(
        w_f=u(hidden, input_size), u_f=u(hidden, hidden), b_f=u(hidden),
        w_i=u(hidden, input_size), u_i=u(hidden, hidden), b_i=u(hidden),
        w_o=u(hidden, input_size), u_o=u(hidden, hidden), b_o=u(hidden),
        w_g=u(hidden, input_size), u_g=u(hidden, hidden), b_g=u(hidden),
        w_out=u(hidden), b_out=np.asarray(u()),
    )
    params.b_f += forget_bias
    return params


@dataclass
class FeatureScaler:
    """Per-feature standardization fitted on training windows only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, windows: np.ndarray) -> "FeatureScaler":
        mean = windows.mean(axis=(0, 1))
        std = windows.std(axis=(0, 1))
        std = np.where(std > 0, std, 1.0)
        return cls(mean=mean, std=std)

    def transform(self, dataset: WindowedDataset) -> WindowedDataset:
        return WindowedDataset(
            windows=(dataset.windows - self.mean) / self.std,
            targets=dataset.targets,
            target_dates=dataset.target_dates,
            feature_names=dataset.feature_names,
        )


def evaluate(params: LstmParams, test: WindowedDataset) -> Metrics:
    """Prediction metrics of `params` on a windowed dataset as given."""
    if test.n_samples == 0:
        raise InputDataError("cannot evaluate on an empty dataset")
    preds, _ = _forward_batch(test.windows, params)
    return prediction_metrics(test.targets, preds)


def train(data: WindowedDataset, config: TrainConfig) -> tuple[LstmParams, TrainHistory]:
    """Full-batch training on the chronological 70% split.

    Inputs are standardized with training-split statistics (targets stay
    in percent); the reported final metrics are on the 30% test split.
    """
    train_raw, test_raw = split_7_3(data)
    scaler = FeatureScaler.fit(train_raw.windows)
    train_ds = scaler.transform(train_raw)
    test_ds = scaler.transform(test_raw)

    d = data.windows.shape[2]
    params = init_params(d, config.hidden, config.seed, config.forget_bias)

    losses: list[float] = []
    adam_m = zero_like_params(params)
    adam_v = zero_like_params(params)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    for epoch in range(config.epochs):
        try:
            grads, loss = bptt_gradients(train_ds, params, clip_norm=config.clip_norm)
        except NumericError:
            raise DivergenceError(epoch) from None
        losses.append(loss)
        if config.optimizer == "sgd":
            for p, g in zip(params.arrays(), grads.arrays()):
                p -= config.learning_rate * g
        else:
            t = epoch + 1
            correct1 = 1.0 - beta1**t
            correct2 = 1.0 - beta2**t
            for p, g, m, v in zip(
                params.arrays(), grads.arrays(), adam_m.arrays(), adam_v.arrays()
            ):
                m *= beta1
                m += (1.0 - beta1) * g
                v *= beta2
                v += (1.0 - beta2) * g**2
                p -= config.learning_rate * (m / correct1) / (np.sqrt(v / correct2) + eps)

    history = TrainHistory(losses=losses, test_metrics=evaluate(params, test_ds))
    return params, history


def save_params(params: LstmParams, path: str | Path) -> None:
    """Persist params as a flat npz archive with a format version tag."""
    np.savez(
        path,
        format_version=np.asarray(PARAMS_FORMAT_VERSION),
        **{name: arr for name, arr in zip(params.field_names(), params.arrays())},
    )


def load_params(path: str | Path) -> LstmParams:
    with np.load(path) as archive:
        version = int(archive["format_version"])
        if version != PARAMS_FORMAT_VERSION:
            raise InputDataError(
                f"params file has format version {version}, expected {PARAMS_FORMAT_VERSION}"
            )
        names = [f.name for f in dataclass_fields(LstmParams)]
        return LstmParams(**{name: archive[name] for name in names})

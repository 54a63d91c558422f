"""Single-layer LSTM with a linear scalar head, trained on MAPE by BPTT and Adam."""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from volcast.errors import ConfigError, DataError, NumericalError
from volcast.preprocess import Scheme, SchemeDataset

FORMAT_NAME = "volcast-lstm"
FORMAT_VERSION = 1
# gate blocks inside the stacked weight matrix, in column order
GATES = ("f", "i", "s", "o")


class LstmParams:
    """All trainable parameters in one flat buffer.

    ``W`` stacks the four gate matrices column-wise as ``[W_f | W_i | W_s | W_o]``,
    each of shape ``(input_dim + hidden_dim, hidden_dim)``; rows multiply the
    concatenation ``(x_t, h_{t-1})``. ``W_s``/``b_s`` belong to the candidate
    cell value. The scalar head is ``w_out @ h + b_out``.
    """

    def __init__(self, input_dim: int, hidden_dim: int, vector: Optional[np.ndarray] = None):
        if input_dim < 1 or hidden_dim < 1:
            raise ConfigError("input_dim and hidden_dim must be positive")
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        rows, h4 = self.input_dim + self.hidden_dim, 4 * self.hidden_dim
        n = rows * h4 + h4 + self.hidden_dim + 1
        if vector is None:
            self.vector = np.zeros(n)
        else:
            self.vector = np.array(vector, dtype=np.float64)
            if self.vector.shape != (n,):
                raise ConfigError(f"parameter vector has shape {self.vector.shape}, expected ({n},)")
        v = self.vector
        self.W = v[: rows * h4].reshape(rows, h4)
        self.b = v[rows * h4: rows * h4 + h4]
        self.w_out = v[rows * h4 + h4: n - 1]
        self._b_out = v[n - 1:]

    @property
    def b_out(self) -> float:
        return float(self._b_out[0])

    @b_out.setter
    def b_out(self, value: float):
        self._b_out[0] = value

    def _gate(self, name: str) -> slice:
        j = GATES.index(name)
        return slice(j * self.hidden_dim, (j + 1) * self.hidden_dim)

    W_f = property(lambda self: self.W[:, self._gate("f")])
    W_i = property(lambda self: self.W[:, self._gate("i")])
    W_s = property(lambda self: self.W[:, self._gate("s")])
    W_o = property(lambda self: self.W[:, self._gate("o")])
    b_f = property(lambda self: self.b[self._gate("f")])
    b_i = property(lambda self: self.b[self._gate("i")])
    b_s = property(lambda self: self.b[self._gate("s")])
    b_o = property(lambda self: self.b[self._gate("o")])

    def named(self) -> dict:
        """Views of every parameter block, keyed by name."""
        out = {f"W_{g}": getattr(self, f"W_{g}") for g in GATES}
        out.update({f"b_{g}": getattr(self, f"b_{g}") for g in GATES})
        out["W_out"] = self.w_out
        out["b_out"] = self._b_out
        return out

    def copy(self) -> "LstmParams":
        return LstmParams(self.input_dim, self.hidden_dim, self.vector)

    def __eq__(self, other):
        if not isinstance(other, LstmParams):
            return NotImplemented
        return (self.input_dim, self.hidden_dim) == (other.input_dim, other.hidden_dim) and \
            np.array_equal(self.vector, other.vector)

    def __repr__(self):
        return f"LstmParams(input_dim={self.input_dim}, hidden_dim={self.hidden_dim})"

    @classmethod
    def initialize(cls, input_dim: int, hidden_dim: int, seed: int) -> "LstmParams":
        """Uniform ±sqrt(6/(fan_in+fan_out)) weights, zero biases, forget bias 1."""
        p = cls(input_dim, hidden_dim)
        rng = np.random.default_rng(seed)
        rows = input_dim + hidden_dim
        limit = math.sqrt(6.0 / (rows + hidden_dim))
        for g in GATES:
            p.W[:, p._gate(g)] = rng.uniform(-limit, limit, size=(rows, hidden_dim))
        limit_out = math.sqrt(6.0 / (hidden_dim + 1))
        p.w_out[:] = rng.uniform(-limit_out, limit_out, size=hidden_dim)
        p.b[p._gate("f")] = 1.0
        return p


class LstmState(NamedTuple):
    s: np.ndarray
    h: np.ndarray


class CellCache(NamedTuple):
    z: np.ndarray
    f: np.ndarray
    i: np.ndarray
    s_tilde: np.ndarray
    o: np.ndarray
    s_prev: np.ndarray
    tanh_s: np.ndarray


def zero_state(hidden_dim: int, batch: Optional[int] = None) -> LstmState:
    shape = (hidden_dim,) if batch is None else (batch, hidden_dim)
    return LstmState(np.zeros(shape), np.zeros(shape))


def cell_forward(x, prev: LstmState, params: LstmParams):
    """One LSTM step. ``x`` is ``(input_dim,)`` or a batch ``(B, input_dim)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.input_dim or prev.h.shape[-1] != params.hidden_dim:
        raise DataError(f"input width {x.shape[-1]} does not match params "
                        f"(input_dim={params.input_dim}, hidden_dim={params.hidden_dim})")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite LSTM input")
    H = params.hidden_dim
    z = np.concatenate([x, prev.h], axis=-1)
    a = z @ params.W + params.b
    f = expit(a[..., :H])
    i = expit(a[..., H:2 * H])
    s_tilde = np.tanh(a[..., 2 * H:3 * H])
    o = expit(a[..., 3 * H:])
    s = f * prev.s + i * s_tilde
    tanh_s = np.tanh(s)
    h = o * tanh_s
    return LstmState(s, h), CellCache(z, f, i, s_tilde, o, prev.s, tanh_s)


def sequence_forward(window, params: LstmParams, lag: Optional[int] = None):
    """Unroll over ``window`` (``(lag, input_dim)`` or ``(B, lag, input_dim)``) from a zero state.

    Returns the head prediction (scalar or ``(B,)``), the per-step caches and
    the final hidden output.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim not in (2, 3):
        raise DataError("window must be 2-D or a 3-D batch")
    if lag is not None and window.shape[-2] != lag:
        raise DataError(f"window has {window.shape[-2]} steps, expected lag={lag}")
    batch = window.shape[0] if window.ndim == 3 else None
    state = zero_state(params.hidden_dim, batch)
    caches = []
    for t in range(window.shape[-2]):
        state, cache = cell_forward(window[..., t, :], state, params)
        caches.append(cache)
    pred = state.h @ params.w_out + params.b_out
    return pred, caches, state.h


def mape_loss(pred, actual, epsilon: float = 1e-8) -> float:
    """Mean |pred - actual| / max(|actual|, epsilon), as a fraction."""
    pred = np.atleast_1d(np.asarray(pred, dtype=np.float64))
    actual = np.atleast_1d(np.asarray(actual, dtype=np.float64))
    if pred.shape != actual.shape:
        raise DataError(f"length mismatch: {pred.shape} vs {actual.shape}")
    if pred.size == 0:
        raise DataError("empty input to mape_loss")
    return float(np.mean(np.abs(pred - actual) / np.maximum(np.abs(actual), epsilon)))


def bptt(windows, targets, params: LstmParams, epsilon: float = 1e-8) -> LstmParams:
    """Gradient of the batch-mean MAPE with respect to every parameter.

    ``windows`` is ``(B, lag, input_dim)``. The kink at pred == actual takes
    subgradient 0.
    """
    windows = np.asarray(windows, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if windows.ndim != 3 or targets.shape != (windows.shape[0],):
        raise DataError("bptt expects windows (B, lag, input_dim) and targets (B,)")
    B = windows.shape[0]
    pred, caches, h_last = sequence_forward(windows, params)
    denom = np.maximum(np.abs(targets), epsilon)
    dpred = np.sign(pred - targets) / denom / B

    H, n_in = params.hidden_dim, params.input_dim
    grad = LstmParams(n_in, H)
    grad.w_out[:] = dpred @ h_last
    grad.b_out = float(dpred.sum())
    dh = np.outer(dpred, params.w_out)
    ds = np.zeros_like(dh)
    da = np.empty((B, 4 * H))
    W_h = params.W[n_in:]
    for c in reversed(caches):
        do = dh * c.tanh_s
        ds = ds + dh * c.o * (1.0 - c.tanh_s * c.tanh_s)
        da[:, :H] = ds * c.s_prev * c.f * (1.0 - c.f)
        da[:, H:2 * H] = ds * c.s_tilde * c.i * (1.0 - c.i)
        da[:, 2 * H:3 * H] = ds * c.i * (1.0 - c.s_tilde * c.s_tilde)
        da[:, 3 * H:] = do * c.o * (1.0 - c.o)
        grad.W += c.z.T @ da
        grad.b += da.sum(axis=0)
        dh = da @ W_h.T
        ds = ds * c.f
    for name, block in grad.named().items():
        if not np.all(np.isfinite(block)):
            raise NumericalError(f"non-finite gradient in {name}")
    return grad


class Adam:
    def __init__(self, n: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta: np.ndarray, g: np.ndarray) -> None:
        """In-place update of ``theta``."""
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * g
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * g * g
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    lag: int = 50
    batch_size: int = 5
    epochs: int = 200
    hidden_dim: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    mape_epsilon: float = 1e-8
    train_fraction: float = 0.8
    min_abs_target: float = 1e-6

    def __post_init__(self):
        for name in ("lag", "batch_size", "hidden_dim"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.epochs < 0 or int(self.epochs) != self.epochs:
            raise ConfigError("epochs must be a non-negative integer")
        if not self.learning_rate > 0 or not self.mape_epsilon > 0:
            raise ConfigError("learning_rate and mape_epsilon must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")


@dataclass
class TrainedModel:
    params: LstmParams
    config: TrainConfig
    split_index: int
    columns: tuple = ()
    scheme: Optional[Scheme] = None
    history: list = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.params.input_dim


def split_index(n_rows: int, train_fraction: float = 0.8) -> int:
    """First test row of a chronological split."""
    return int(math.floor(train_fraction * n_rows))


def sliding_windows(features: np.ndarray, lag: int) -> np.ndarray:
    """``out[j]`` holds feature rows ``j .. j+lag-1`` and predicts target row ``j+lag-1``."""
    return sliding_window_view(np.asarray(features, dtype=np.float64), lag, axis=0).transpose(0, 2, 1)


def _batched_forward(windows: np.ndarray, params: LstmParams, chunk: int = 512) -> np.ndarray:
    out = np.empty(windows.shape[0])
    for s in range(0, windows.shape[0], chunk):
        out[s:s + chunk] = sequence_forward(windows[s:s + chunk], params)[0]
    return out


def train(dataset: SchemeDataset, config: TrainConfig = TrainConfig(), log=None) -> TrainedModel:
    """Fit the LSTM on the first ``train_fraction`` of rows.

    Windows of ``lag`` rows slide with stride 1; mini-batches follow
    chronological order. Training batches drop samples whose target magnitude
    is below ``min_abs_target``; the recorded train/test MAPE keep every sample.
    """
    T, lag = len(dataset), config.lag
    if T < lag + 10:
        raise DataError(f"dataset has {T} rows; need at least lag + 10 = {lag + 10}")
    split = split_index(T, config.train_fraction)
    if split < lag:
        raise DataError(f"training segment of {split} rows is shorter than lag={lag}")
    windows = sliding_windows(dataset.features, lag)
    targets = dataset.target[lag - 1:]
    n_train = split - lag + 1
    train_w, train_y = windows[:n_train], targets[:n_train]
    test_w, test_y = windows[n_train:], targets[n_train:]
    usable = np.flatnonzero(np.abs(train_y) >= config.min_abs_target)

    params = LstmParams.initialize(dataset.n_features, config.hidden_dim, config.seed)
    model = TrainedModel(params, config, split, tuple(dataset.columns), dataset.scheme)
    opt = Adam(params.vector.shape[0], lr=config.learning_rate)
    eps = config.mape_epsilon
    for epoch in range(1, config.epochs + 1):
        for s in range(0, usable.shape[0], config.batch_size):
            idx = usable[s:s + config.batch_size]
            try:
                g = bptt(train_w[idx], train_y[idx], params, eps)
            except NumericalError as exc:
                raise NumericalError(f"training diverged in epoch {epoch} "
                                     f"(last finite epoch {epoch - 1}): {exc}") from None
            opt.step(params.vector, g.vector)
        train_loss = mape_loss(_batched_forward(train_w, params), train_y, eps)
        test_loss = mape_loss(_batched_forward(test_w, params), test_y, eps) \
            if test_y.size else math.nan
        if not math.isfinite(train_loss):
            raise NumericalError(f"training diverged in epoch {epoch} "
                                 f"(last finite epoch {epoch - 1})")
        model.history.append((epoch, train_loss, test_loss))
        if log is not None:
            log(epoch, train_loss, test_loss)
    return model


def predict(model: TrainedModel, dataset: SchemeDataset, rows=None):
    """Normalized predictions and denormalized volatility for target ``rows``.

    ``rows`` defaults to every row with a full window of history. Each
    prediction reads feature rows ``j-lag+1 .. j`` only.
    """
    if dataset.n_features != model.input_dim:
        raise DataError(f"dataset has {dataset.n_features} feature columns, "
                        f"model expects {model.input_dim}")
    lag = model.config.lag
    rows = np.arange(lag - 1, len(dataset)) if rows is None else np.asarray(rows, dtype=np.int64)
    if rows.size and (rows.min() < lag - 1 or rows.max() >= len(dataset)):
        raise DataError(f"prediction rows must lie in [{lag - 1}, {len(dataset) - 1}]")
    windows = sliding_windows(dataset.features, lag)[rows - (lag - 1)]
    normalized = _batched_forward(windows, model.params) if rows.size else np.empty(0)
    volatility = np.maximum(dataset.denormalize(normalized, rows), 0.0)
    return normalized, volatility


def holdout_rows(model: TrainedModel, dataset: SchemeDataset) -> np.ndarray:
    return np.arange(model.split_index, len(dataset))


# --- serialization -------------------------------------------------------

SECTIONS = ("format", "version", "config", "meta", "params", "history")


def _encode(arr) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    flat = arr.ravel().tolist()
    return {"shape": list(arr.shape), "hex": [float.hex(v) for v in flat],
            "decimal": [repr(v) for v in flat]}


def _decode(obj: dict, name: str) -> np.ndarray:
    try:
        shape, hexes, decs = obj["shape"], obj["hex"], obj["decimal"]
    except (KeyError, TypeError):
        raise DataError(f"model section {name!r} is malformed") from None
    if len(hexes) != len(decs) or len(hexes) != int(np.prod(shape, dtype=np.int64)):
        raise DataError(f"model section {name!r}: length does not match shape {shape}")
    out = np.empty(len(hexes))
    for j, (hx, dec) in enumerate(zip(hexes, decs)):
        try:
            v = float.fromhex(hx)
        except (TypeError, ValueError):
            raise DataError(f"corrupted float in {name}[{j}]: {hx!r}") from None
        try:
            agrees = float(dec) == v or (math.isnan(v) and math.isnan(float(dec)))
        except (TypeError, ValueError):
            agrees = False
        if not agrees:
            raise DataError(f"corrupted float in {name}[{j}]: hex {hx} != decimal {dec!r}")
        out[j] = v
    return out.reshape(shape)


def serialize_model(model: TrainedModel) -> bytes:
    p = model.params
    hist = np.array([h[1:] for h in model.history], dtype=np.float64).reshape(-1, 2)
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": asdict(model.config),
        "meta": {
            "input_dim": p.input_dim,
            "hidden_dim": p.hidden_dim,
            "split_index": model.split_index,
            "columns": list(model.columns),
            "scheme": None if model.scheme is None else
            {"delta_t": model.scheme.delta_t, "k": model.scheme.k},
        },
        "params": {name: _encode(block) for name, block in p.named().items()},
        "history": {"epochs": [int(h[0]) for h in model.history],
                    "train_mape": _encode(hist[:, 0]), "test_mape": _encode(hist[:, 1])},
    }
    return (json.dumps(doc, indent=1) + "\n").encode("utf-8")


def _truncation_section(text: str) -> str:
    present = [s for s in SECTIONS if re.search(rf'"{s}"\s*:', text)]
    if not present:
        return SECTIONS[0]
    last = present[-1]
    return last


def deserialize_model(data: bytes) -> TrainedModel:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"model stream truncated or invalid in section "
                        f"{_truncation_section(text)!r}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise DataError("model stream is not a JSON object")
    missing = [s for s in SECTIONS if s not in doc]
    if missing:
        raise DataError(f"model stream is missing section {missing[0]!r}")
    if doc["format"] != FORMAT_NAME:
        raise DataError(f"unknown model format {doc['format']!r}")
    if doc["version"] != FORMAT_VERSION:
        raise DataError(f"model version {doc['version']!r} is not supported "
                        f"(expected {FORMAT_VERSION})")
    known = {f.name for f in fields(TrainConfig)}
    cfg = doc["config"]
    if not isinstance(cfg, dict) or set(cfg) - known:
        raise DataError(f"model config has unknown keys: {sorted(set(cfg) - known)}")
    config = TrainConfig(**cfg)
    meta = doc["meta"]
    params = LstmParams(meta["input_dim"], meta["hidden_dim"])
    for name, block in params.named().items():
        if name not in doc["params"]:
            raise DataError(f"model params missing block {name!r}")
        values = _decode(doc["params"][name], name)
        if values.shape != block.shape:
            raise DataError(f"block {name!r} has shape {values.shape}, expected {block.shape}")
        block[...] = values
    hist = doc["history"]
    train_h = _decode(hist["train_mape"], "history.train_mape")
    test_h = _decode(hist["test_mape"], "history.test_mape")
    history = [(int(e), float(a), float(b)) for e, a, b in zip(hist["epochs"], train_h, test_h)]
    scheme = None if meta.get("scheme") is None else Scheme(**meta["scheme"])
    return TrainedModel(params, config, int(meta["split_index"]), tuple(meta["columns"]),
                        scheme, history)


def history_csv(model: TrainedModel) -> bytes:
    lines = ["epoch,train_mape,test_mape"]
    lines += [f"{e},{a!r},{b!r}" for e, a, b in model.history]
    return ("\n".join(lines) + "\n").encode("utf-8")

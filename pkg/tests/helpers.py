"""Shared constructions for the test suite."""

from datetime import date, timedelta

import numpy as np

from volcast.marketdata import AlignedPanel, TrendSeries


def make_panel(r, h, trends=()):
    n = len(r)
    dates = tuple(date(2010, 1, 1) + timedelta(days=i) for i in range(n))
    ts = [TrendSeries(f"t{j}", dates, np.asarray(v, dtype=float)) for j, v in enumerate(trends)]
    return AlignedPanel(dates, np.asarray(r, dtype=float), np.asarray(h, dtype=float), ts, bars=())


def planted_panel(n_blocks=4000, block=3, seed=0):
    """Panel whose next-period volatility is a function of the trend averaged over ``block`` days.

    Daily h is constant within each block at level v_b (i.i.d. uniform); the
    trend over block b carries v_{b+1} plus within-block noise that cancels
    in the block mean.
    """
    rng = np.random.default_rng(seed)
    v = rng.uniform(1.0, 2.0, n_blocks + 1)
    h = np.repeat(v[:-1], block)
    wiggle = rng.normal(0.0, 0.5, (n_blocks, block))
    wiggle -= wiggle.mean(axis=1, keepdims=True)
    trend = (v[1:, None] + wiggle).ravel() + 5.0
    r = rng.normal(0.0, 0.01, h.shape[0])
    return make_panel(r, h, [trend])


def make_dataset(features, target, norm_mean=None, norm_std=None):
    """SchemeDataset around given normalized features and target."""
    from volcast.preprocess import Scheme, SchemeDataset

    features = np.asarray(features, dtype=float)
    target = np.asarray(target, dtype=float)
    n = target.shape[0]
    mean = np.zeros(n) if norm_mean is None else np.asarray(norm_mean, dtype=float)
    std = np.ones(n) if norm_std is None else np.asarray(norm_std, dtype=float)
    dates = tuple(date(2010, 1, 1) + timedelta(days=i) for i in range(n))
    return SchemeDataset(Scheme(1, 2), tuple(f"c{j}" for j in range(features.shape[1])), features,
                         target, target * std + mean, mean, std, np.arange(n), dates, np.zeros(n + 1))


def learnable_dataset(n_rows=300, seed=0):
    """Target is a smooth function of the current feature row, bounded away from 0."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, (n_rows, 3))
    y = 1.5 + 0.4 * np.sin(2.0 * x[:, 0]) + 0.3 * x[:, 1] * x[:, 2]
    return make_dataset(x, y)


def reference_loss(vector, input_dim, hidden_dim, windows, targets):
    """Batch-mean MAPE of the LSTM written out gate by gate in extended precision.

    Independent of the package forward pass; ``vector`` uses the flat layout
    of ``LstmParams`` (stacked [f | i | s | o] columns, biases, head).
    """
    ld = np.longdouble
    vector = np.asarray(vector, dtype=ld)
    H, rows = hidden_dim, input_dim + hidden_dim
    W = vector[: rows * 4 * H].reshape(rows, 4 * H)
    b = vector[rows * 4 * H: rows * 4 * H + 4 * H]
    w_out = vector[rows * 4 * H + 4 * H: -1]
    b_out = vector[-1]
    gate = {g: (W[:, j * H:(j + 1) * H], b[j * H:(j + 1) * H]) for j, g in enumerate("fiso")}

    def sigmoid(a):
        return ld(1) / (ld(1) + np.exp(-a))

    total = ld(0)
    for x_seq, y in zip(np.asarray(windows, dtype=ld), np.asarray(targets, dtype=ld)):
        s = np.zeros(H, dtype=ld)
        h = np.zeros(H, dtype=ld)
        for x in x_seq:
            z = np.concatenate([x, h])
            f = sigmoid(z @ gate["f"][0] + gate["f"][1])
            i = sigmoid(z @ gate["i"][0] + gate["i"][1])
            s_tilde = np.tanh(z @ gate["s"][0] + gate["s"][1])
            o = sigmoid(z @ gate["o"][0] + gate["o"][1])
            s = f * s + i * s_tilde
            h = o * np.tanh(s)
        total += abs(h @ w_out + b_out - y) / abs(y)
    return total / len(targets)


def gradient_check(seed, input_dim=5, hidden_dim=4, lag=6, batch=3, step=1e-5):
    """Largest relative error between analytic and central-difference gradients.

    The difference quotient is evaluated in 80-bit extended precision: in
    float64 the rounding floor eps*|loss|/step (~1e-11) is comparable to
    the smallest gradient coordinates and would swamp the comparison.
    """
    from volcast.lstmnet import LstmParams, bptt, sequence_forward

    rng = np.random.default_rng(seed)
    size = LstmParams(input_dim, hidden_dim).vector.size
    params = LstmParams(input_dim, hidden_dim, rng.normal(0.0, 0.5, size))
    windows = rng.normal(size=(batch, lag, input_dim))
    pred = sequence_forward(windows, params)[0]
    # targets sit well away from the predictions so no kink lies within the step
    targets = pred + rng.choice([-1.0, 1.0], batch) * rng.uniform(0.5, 1.0, batch)
    analytic = bptt(windows, targets, params).vector
    base = params.vector.astype(np.longdouble)
    h = np.longdouble(step)
    numeric = np.empty(size)
    for j in range(size):
        up, down = base.copy(), base.copy()
        up[j] += h
        down[j] -= h
        diff = (reference_loss(up, input_dim, hidden_dim, windows, targets)
                - reference_loss(down, input_dim, hidden_dim, windows, targets))
        numeric[j] = float(diff / (2 * h))
    rel = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(rel.max())


# argv for every CLI command at desk-test sizes; "{d}" is a directory holding ohlc.csv/trends.csv
CLI_COMMANDS = {
    "synth": ["synth", "--n-days", "250", "--n-trends", "2"],
    "ingest-check": ["ingest-check", "--ohlc", "{d}/ohlc.csv", "--trends", "{d}/trends.csv"],
    "gk": ["gk", "--ohlc", "{d}/ohlc.csv"],
    "mi-grid": ["mi-grid", "--ohlc", "{d}/ohlc.csv", "--trends", "{d}/trends.csv",
                "--dt-range", "1:3", "--k-range", "2:4", "--bins", "20"],
    "train": ["train", "--ohlc", "{d}/ohlc.csv", "--trends", "{d}/trends.csv", "--delta-t", "2",
              "-k", "3", "--lag", "5", "--epochs", "2", "--hidden-dim", "4"],
    "fit-garch": ["fit-garch", "--ohlc", "{d}/ohlc.csv", "--delta-t", "1"],
    "run": ["run", "--n-days", "300", "--n-trends", "2", "--delta-t", "2", "-k", "3",
            "--lag", "5", "--epochs", "2", "--hidden-dim", "4"],
    "report": ["report", "--run-dir", "{d}"],
}


def output_files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


# pass/fail lines for the acceptance criteria, printed in the terminal summary
ACCEPTANCE = []

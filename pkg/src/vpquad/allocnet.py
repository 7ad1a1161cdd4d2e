"""Control-allocation network: (thrust, torque, pitch) -> rotor speed.

A single tanh hidden layer with a linear read-out (no output bias),
trained by Levenberg-Marquardt least squares on data generated from the
tip-loss-free rotor model.  Inputs and the output are affinely
normalized to [-1, 1] over the training ranges.  The four rotors are
identical, so one trained weight set serves all four actuators.

Training is deterministic under a fixed seed; inference is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import params, rotor
from .rotor import BladeGeometry, RotorOperatingPoint, RotorSolveError

_INPUT_PAD = 0.05          # allowed normalized overhang before clamping


class DatasetError(RuntimeError):
    """Too many grid cells failed to converge while generating samples."""


@dataclass(frozen=True)
class AllocDataset:
    """Samples (thrust N, torque N m, pitch deg) -> omega rad/s."""

    inputs: np.ndarray          # (n, 3)
    omega: np.ndarray           # (n,)
    skipped_cells: int = 0

    def __len__(self):
        return self.omega.size


def generate_dataset(geom: BladeGeometry, polar,
                     pitch_grid=None, omega_grid=None) -> AllocDataset:
    """Evaluate the tip-loss-free rotor model over a (pitch, omega) grid.

    Non-converged cells are skipped and counted; more than 5% skipped
    raises DatasetError.
    """
    if pitch_grid is None:
        pitch_grid = np.arange(-6.0, 14.0 + 0.5, 1.0)
    if omega_grid is None:
        omega_grid = np.arange(2000.0, 8000.0 + 25.0, 50.0) * params.RPM_TO_RADS
    rows, targets = [], []
    skipped = 0
    for p in pitch_grid:
        for om in omega_grid:
            try:
                perf = rotor.rotor_performance(
                    geom, polar, RotorOperatingPoint(float(p), float(om)), use_tip_loss=False
                )
            except RotorSolveError:
                skipped += 1
                continue
            rows.append((perf.thrust, perf.torque, float(p)))
            targets.append(float(om))
    total = len(pitch_grid) * len(omega_grid)
    if skipped > 0.05 * total:
        raise DatasetError("%d of %d grid cells failed to converge" % (skipped, total))
    return AllocDataset(np.asarray(rows), np.asarray(targets), skipped)


@dataclass(frozen=True)
class AllocNet:
    """Trained network weights plus the input/output normalization."""

    hidden_count: int
    w1: np.ndarray              # (hidden, 3)
    b: np.ndarray               # (hidden,)
    w2: np.ndarray              # (hidden,)
    x_offset: np.ndarray        # (3,)
    x_scale: np.ndarray         # (3,)
    y_offset: float
    y_scale: float

    def normalize_inputs(self, x):
        return (np.asarray(x, dtype=float) - self.x_offset) / self.x_scale


def _norm_constants(values, axis=0):
    lo = values.min(axis=axis)
    hi = values.max(axis=axis)
    scale = 0.5 * (hi - lo)
    offset = 0.5 * (hi + lo)
    return offset, np.where(scale > 0.0, scale, 1.0)


def forward(net: AllocNet, x) -> tuple[float, bool]:
    """Network speed estimate (rad/s) for one (thrust, torque, pitch) input.

    Inputs beyond the padded normalization box are clamped; the second
    return value flags that.
    """
    xn = net.normalize_inputs(x)
    clamped = bool(np.any(np.abs(xn) > 1.0 + _INPUT_PAD))
    xn = np.clip(xn, -1.0 - _INPUT_PAD, 1.0 + _INPUT_PAD)
    h = np.tanh(net.w1 @ xn + net.b)
    return float(net.w2 @ h) * net.y_scale + net.y_offset, clamped


def _forward_batch(theta, hidden, xn):
    w1 = theta[: hidden * 3].reshape(hidden, 3)
    b = theta[hidden * 3: hidden * 4]
    w2 = theta[hidden * 4:]
    h = np.tanh(xn @ w1.T + b)
    return h @ w2, h


def _jacobian(theta, hidden, xn, h):
    """Analytic d(yhat)/d(theta) rows for every sample, columns in theta order."""
    w2 = theta[hidden * 4:]
    sech2 = 1.0 - h * h                          # (n, hidden)
    g_b = sech2 * w2                             # (n, hidden)
    g_w1 = g_b[:, :, None] * xn[:, None, :]      # (n, hidden, 3)
    return np.concatenate([g_w1.reshape(len(xn), hidden * 3), g_b, h], axis=1)


@dataclass(frozen=True)
class TrainResult:
    net: AllocNet
    mse_history: tuple          # normalized-space MSE after each accepted step
    epochs: int
    converged: bool
    grad_norm: float


def train(dataset: AllocDataset, hidden_count: int, max_epochs: int = 300,
          target_mse: float = 1.0e-7, seed: int = 0,
          sample_indices=None) -> TrainResult:
    """Levenberg-Marquardt fit of all weights and biases.

    Damped normal equations with multiplicative damping adaptation
    (x0.1 on an accepted step, x10 on rejection).  Stops at target_mse
    (normalized output space), a vanishing gradient, or max_epochs.
    Deterministic for a fixed seed.
    """
    idx = np.arange(len(dataset)) if sample_indices is None else np.asarray(sample_indices)
    x_off, x_scl = _norm_constants(dataset.inputs[idx])
    y_off, y_scl = _norm_constants(dataset.omega[idx])
    xn = (dataset.inputs[idx] - x_off) / x_scl
    yn = (dataset.omega[idx] - y_off) / y_scl

    n_params = 5 * hidden_count
    if len(idx) < 20 * n_params:
        raise ValueError(
            "dataset of %d samples is below 20x the %d parameters" % (len(idx), n_params)
        )
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-0.5, 0.5, n_params)

    yhat, h = _forward_batch(theta, hidden_count, xn)
    resid = yhat - yn
    sse = float(resid @ resid)
    history = [sse / len(idx)]
    damping = 1.0e-2
    grad_norm = math.inf
    converged = False
    epochs = 0

    for _ in range(max_epochs):
        jac = _jacobian(theta, hidden_count, xn, h)
        grad = jac.T @ resid
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < 1.0e-10 or history[-1] < target_mse:
            converged = True
            break
        jtj = jac.T @ jac
        accepted = False
        while damping < 1.0e12:
            try:
                step = np.linalg.solve(jtj + damping * np.eye(n_params), -grad)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            trial = theta + step
            yhat_t, h_t = _forward_batch(trial, hidden_count, xn)
            resid_t = yhat_t - yn
            sse_t = float(resid_t @ resid_t)
            if sse_t < sse:
                theta, yhat, h, resid, sse = trial, yhat_t, h_t, resid_t, sse_t
                damping = max(damping * 0.1, 1.0e-12)
                accepted = True
                break
            damping *= 10.0
        if not accepted:
            break
        epochs += 1
        history.append(sse / len(idx))
        if history[-1] < target_mse:
            converged = True
            break

    net = AllocNet(
        hidden_count=hidden_count,
        w1=theta[: hidden_count * 3].reshape(hidden_count, 3).copy(),
        b=theta[hidden_count * 3: hidden_count * 4].copy(),
        w2=theta[hidden_count * 4:].copy(),
        x_offset=np.asarray(x_off, dtype=float),
        x_scale=np.asarray(x_scl, dtype=float),
        y_offset=float(y_off),
        y_scale=float(y_scl),
    )
    return TrainResult(net, tuple(history), epochs, converged, grad_norm)


def evaluate_rmse(net: AllocNet, dataset: AllocDataset, indices=None) -> float:
    """RMS speed error (rad/s) over the given samples."""
    idx = np.arange(len(dataset)) if indices is None else np.asarray(indices)
    xn = (dataset.inputs[idx] - net.x_offset) / net.x_scale
    h = np.tanh(xn @ net.w1.T + net.b)
    pred = (h @ net.w2) * net.y_scale + net.y_offset
    err = pred - dataset.omega[idx]
    return float(np.sqrt(np.mean(err * err)))


def split_indices(n: int, train_fraction: float = 0.8, seed: int = 0):
    """Deterministic shuffled train/validation split."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    cut = int(round(train_fraction * n))
    return perm[:cut], perm[cut:]


def select_hidden_count(dataset: AllocDataset, candidate_counts=(4, 6, 8, 12, 16),
                        seed: int = 0, max_epochs: int = 300):
    """Smallest hidden width whose validation RMSE is within 5% of the best.

    Trains each candidate on the same deterministic 80/20 split and
    returns (selected_count, {count: validation_rmse}).
    """
    tr, va = split_indices(len(dataset), 0.8, seed)
    scores = {}
    for count in candidate_counts:
        result = train(dataset, count, max_epochs=max_epochs, seed=seed, sample_indices=tr)
        scores[count] = evaluate_rmse(result.net, dataset, va)
    best = min(scores.values())
    for count in sorted(scores):
        if scores[count] <= 1.05 * best:
            return count, scores
    return max(scores), scores


# ---------------------------------------------------------------------------
# serialization: versioned text, bit-exact round trip

_FORMAT_HEADER = "vpquad-allocnet 1"


def save_net(net: AllocNet, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_FORMAT_HEADER + "\n")
        fh.write("hidden %d\n" % net.hidden_count)
        fh.write("x_offset %s\n" % " ".join(repr(float(v)) for v in net.x_offset))
        fh.write("x_scale %s\n" % " ".join(repr(float(v)) for v in net.x_scale))
        fh.write("y_offset %s\n" % repr(float(net.y_offset)))
        fh.write("y_scale %s\n" % repr(float(net.y_scale)))
        for row in net.w1:
            fh.write("w1 %s\n" % " ".join(repr(float(v)) for v in row))
        fh.write("b %s\n" % " ".join(repr(float(v)) for v in net.b))
        fh.write("w2 %s\n" % " ".join(repr(float(v)) for v in net.w2))


def load_net(path) -> AllocNet:
    if hasattr(path, "read"):
        lines = path.read().splitlines()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    lines = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if lines[0].strip() != _FORMAT_HEADER:
        raise ValueError("unrecognized allocation-net format: %r" % lines[0])
    fields = {}
    w1_rows = []
    for ln in lines[1:]:
        key, rest = ln.split(None, 1)
        if key == "w1":
            w1_rows.append([float(v) for v in rest.split()])
        else:
            fields[key] = rest
    hidden = int(fields["hidden"])
    net = AllocNet(
        hidden_count=hidden,
        w1=np.asarray(w1_rows),
        b=np.asarray([float(v) for v in fields["b"].split()]),
        w2=np.asarray([float(v) for v in fields["w2"].split()]),
        x_offset=np.asarray([float(v) for v in fields["x_offset"].split()]),
        x_scale=np.asarray([float(v) for v in fields["x_scale"].split()]),
        y_offset=float(fields["y_offset"]),
        y_scale=float(fields["y_scale"]),
    )
    if net.w1.shape != (hidden, 3) or net.b.shape != (hidden,) or net.w2.shape != (hidden,):
        raise ValueError("allocation-net weight shapes inconsistent with header")
    return net


def bundled_net() -> AllocNet:
    """The trained network shipped with the package (see tools/train_default_net.py)."""
    import importlib.resources

    ref = importlib.resources.files("vpquad").joinpath("data").joinpath("alloc_net.txt")
    with ref.open("r", encoding="utf-8") as fh:
        return load_net(fh)

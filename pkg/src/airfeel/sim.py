"""Monte-Carlo simulation of federated ridge-regression training with analog
over-the-air gradient aggregation over fading channels.

The synthetic regression data follows y = x(2) + 3*x(5) + 0.2*z with standard
Gaussian features and observation noise (1-based coordinate indexing).
Training minimizes

    F(w) = (1/D) * sum_i 0.5 * (x_i' w - y_i)^2 + rho * ||w||^2

whose Hessian is X'X/D + 2*rho*I; the smoothness and PL constants are its
extreme eigenvalues and the minimizer solves (X'X + 2*rho*D*I) w = X'y.

Each round, devices compute full-batch local gradients, transmit them
simultaneously scaled by sqrt(p); the server receives the gain-weighted sum
plus real Gaussian noise with per-coordinate variance N0 and divides by K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import ChannelGains, PowerSchedule, SystemDims

#: run_training noise seeds are decoupled from channel seeds by this offset.
NOISE_SEED_OFFSET = 2 ** 32


@dataclass(frozen=True)
class Dataset:
    """Train/test split plus an equal-size partition of training rows over devices."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    partition: np.ndarray  # (K, D_train // K) int64 row indices

    def __post_init__(self):
        for name in ("x_train", "y_train", "x_test", "y_test"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        part = np.array(self.partition, dtype=np.int64)
        part.setflags(write=False)
        object.__setattr__(self, "partition", part)
        d_train = self.x_train.shape[0]
        if self.y_train.shape != (d_train,):
            raise ValueError("y_train length does not match x_train")
        if self.x_test.shape[0] != self.y_test.shape[0]:
            raise ValueError("y_test length does not match x_test")
        if part.ndim != 2:
            raise ValueError("partition must be a (K, D_train/K) index matrix")
        flat = np.sort(part.reshape(-1))
        if flat.shape[0] != d_train or not np.array_equal(flat, np.arange(d_train)):
            raise ValueError("partition must cover all training rows exactly once")

    @property
    def num_devices(self) -> int:
        return self.partition.shape[0]

    @property
    def local_size(self) -> int:
        return self.partition.shape[1]


@dataclass(frozen=True)
class RidgeTask:
    """Regularized least-squares objective with its curvature constants and optimum."""

    rho: float
    L: float
    mu: float
    w_star: np.ndarray
    f_star: float

    def __post_init__(self):
        w = np.array(self.w_star, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "w_star", w)
        if not (self.L >= self.mu > 0):
            raise ValueError("need L >= mu > 0")


@dataclass(frozen=True)
class TrainRunResult:
    """Per-round metric history of one simulated training run.

    Arrays have length N + 1 (index 0 is the initial model). If the loss
    turns non-finite the run is flagged diverged; entries past the divergence
    round stay NaN.
    """

    loss: np.ndarray
    gap: np.ndarray
    pred_error: np.ndarray
    w_final: np.ndarray
    seed: int
    diverged: bool = False
    diverged_round: int | None = None


def generate_dataset(d: SystemDims, d_tot: int, d_test: int, seed: int) -> Dataset:
    """Synthetic regression data, deterministically from ``seed``.

    Training rows are the first d_tot - d_test samples, split into K
    contiguous equal blocks. Requires q >= 5 (the label rule reads the fifth
    feature) and K to divide the training size.
    """
    if d.q < 5:
        raise ValueError(f"label rule references coordinate 5; need q >= 5, got {d.q}")
    if d_test < 0 or d_test >= d_tot:
        raise ValueError("need 0 <= d_test < d_tot")
    d_train = d_tot - d_test
    if d_train % d.K != 0:
        raise ValueError(
            f"device count K={d.K} does not divide training size {d_train}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((d_tot, d.q))
    z = rng.standard_normal(d_tot)
    y = x[:, 1] + 3.0 * x[:, 4] + 0.2 * z
    partition = np.arange(d_train, dtype=np.int64).reshape(d.K, d_train // d.K)
    return Dataset(x[:d_train], y[:d_train], x[d_train:], y[d_train:], partition)


def global_loss(ds: Dataset, rho: float, w: np.ndarray) -> float:
    """F(w) over the full training set."""
    r = ds.x_train @ w - ds.y_train
    return float(0.5 * (r @ r) / ds.x_train.shape[0] + rho * (w @ w))


def full_gradient(ds: Dataset, rho: float, w: np.ndarray) -> np.ndarray:
    r = ds.x_train @ w - ds.y_train
    return ds.x_train.T @ r / ds.x_train.shape[0] + 2.0 * rho * w


def prediction_error(ds: Dataset, w: np.ndarray) -> float:
    """Mean squared prediction error on the held-out rows."""
    r = ds.x_test @ w - ds.y_test
    return float((r @ r) / ds.x_test.shape[0])


def ridge_task_from_data(ds: Dataset, rho: float) -> RidgeTask:
    """Curvature constants and exact optimum of the training objective."""
    x = ds.x_train
    d_train, q = x.shape
    if d_train == 0:
        raise ValueError("empty training matrix")
    gram = x.T @ x
    hessian = gram / d_train + 2.0 * rho * np.eye(q)
    eigs = np.linalg.eigvalsh(hessian)
    w_star = np.linalg.solve(gram + 2.0 * rho * d_train * np.eye(q), x.T @ ds.y_train)
    return RidgeTask(rho=rho, L=float(eigs[-1]), mu=float(eigs[0]),
                     w_star=w_star, f_star=global_loss(ds, rho, w_star))


def local_gradient(ds: Dataset, task: RidgeTask, w: np.ndarray, k: int) -> np.ndarray:
    """Full-batch gradient of device k's local objective at ``w``."""
    if not 0 <= k < ds.num_devices:
        raise ValueError(f"device index {k} out of range")
    rows = ds.partition[k]
    xk = ds.x_train[rows]
    r = xk @ w - ds.y_train[rows]
    return xk.T @ r / rows.shape[0] + 2.0 * task.rho * w


def generate_channels(d: SystemDims, seed: int) -> ChannelGains:
    """Rayleigh channel magnitudes with unit mean square, from ``seed``.

    Each entry is |u + jv| with u, v independent zero-mean Gaussians of
    variance 1/2.
    """
    rng = np.random.default_rng(seed)
    parts = rng.normal(0.0, np.sqrt(0.5), size=(2, d.K, d.N))
    return ChannelGains(np.hypot(parts[0], parts[1]))


def aircomp_round(gradients: np.ndarray, h_col: np.ndarray, p_col: np.ndarray,
                  n0: float, d: SystemDims, noise_seed: int) -> np.ndarray:
    """Server-side gradient estimate of one analog aggregation round.

    Returns (sum_k h_k * sqrt(p_k) * g_k + z) / K where z has independent
    real Gaussian coordinates of variance ``n0``.
    """
    gradients = np.asarray(gradients, dtype=np.float64)
    h_col = np.asarray(h_col, dtype=np.float64).reshape(-1)
    p_col = np.asarray(p_col, dtype=np.float64).reshape(-1)
    if gradients.shape != (d.K, d.q):
        raise ValueError(f"gradients shape {gradients.shape} != {(d.K, d.q)}")
    if h_col.shape != (d.K,) or p_col.shape != (d.K,):
        raise ValueError(f"round columns must have length K={d.K}")
    if np.any(p_col < 0):
        raise ValueError("transmit powers must be nonnegative")
    if n0 < 0:
        raise ValueError("noise power must be nonnegative")
    z = np.random.default_rng(noise_seed).normal(0.0, np.sqrt(n0), size=d.q)
    return ((h_col * np.sqrt(p_col)) @ gradients + z) / d.K


def _device_stacks(ds: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs = np.ascontiguousarray(ds.x_train[ds.partition])          # (K, Db, q)
    xst = np.ascontiguousarray(xs.transpose(0, 2, 1))            # (K, q, Db)
    ys = np.ascontiguousarray(ds.y_train[ds.partition])          # (K, Db)
    return xs, xst, ys


def run_training(ds: Dataset, task: RidgeTask, h: ChannelGains, p: PowerSchedule,
                 eta: float, n0: float, w0: np.ndarray, seed: int) -> TrainRunResult:
    """Simulate N rounds of over-the-air training; deterministic given ``seed``.

    Per round: local full-batch gradients at the current model, analog
    aggregation with fresh noise, gradient step with rate ``eta``. Loss,
    optimality gap and prediction error are recorded before the first round
    and after every round. A non-finite loss flags the run diverged and stops
    it, keeping the partial history.
    """
    K, N = h.h.shape
    if p.p.shape != (K, N):
        raise ValueError(f"schedule shape {p.p.shape} != channel shape {(K, N)}")
    if K != ds.num_devices:
        raise ValueError(f"channel device count {K} != dataset partition {ds.num_devices}")
    if eta < 0 or n0 < 0:
        raise ValueError("eta and noise power must be nonnegative")
    w0 = np.asarray(w0, dtype=np.float64)
    if w0.shape != (ds.x_train.shape[1],):
        raise ValueError("w0 length does not match the feature dimension")

    xs, xst, ys = _device_stacks(ds)
    coef = np.ascontiguousarray(h.h * np.sqrt(p.p))
    noise = np.random.default_rng(seed).normal(0.0, np.sqrt(n0), size=(N, ds.x_train.shape[1]))
    loss, pred, w_final, diverged_at = _kernels.train_loop(
        xs, xst, ys, ds.x_train, ds.y_train, ds.x_test, ds.y_test,
        coef, noise, float(eta), task.rho, w0)
    diverged = diverged_at >= 0
    return TrainRunResult(
        loss=loss,
        gap=loss - task.f_star,
        pred_error=pred,
        w_final=w_final,
        seed=seed,
        diverged=diverged,
        diverged_round=int(diverged_at) if diverged else None,
    )


def estimate_sigma_sq_norm(ds: Dataset, task: RidgeTask, w_ref: np.ndarray,
                           d: SystemDims) -> float:
    """Squared 2-norm of the per-coordinate gradient-deviation bounds.

    Each coordinate's bound is the largest squared deviation of any device's
    local gradient from the device average, evaluated at ``w_ref``.
    """
    if d.K != ds.num_devices:
        raise ValueError(f"dims K={d.K} != dataset partition {ds.num_devices}")
    locals_ = np.stack([local_gradient(ds, task, w_ref, k) for k in range(d.K)])
    mean = locals_.mean(axis=0)
    dev_sq = (locals_ - mean) ** 2
    return float(dev_sq.max(axis=0).sum())

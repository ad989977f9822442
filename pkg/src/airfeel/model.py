"""Shared domain types for power-controlled analog gradient aggregation.

All types are immutable value objects (frozen dataclasses holding read-only
arrays); they carry validation but no algorithms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Relative slack applied to power-constraint checks so optimizer outputs that
#: sit numerically on a constraint boundary still validate.
FEASIBILITY_RTOL = 1e-9


def _frozen_array(obj, field_name: str, value, shape=None) -> None:
    arr = np.array(value, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ValueError(
            f"{type(obj).__name__}.{field_name}: expected shape {shape}, got {arr.shape}"
        )
    arr.setflags(write=False)
    object.__setattr__(obj, field_name, arr)


@dataclass(frozen=True)
class SystemDims:
    """Problem sizes: K devices, N communication rounds, model dimension q."""

    K: int
    N: int
    q: int

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"device count K must be >= 1, got {self.K}")
        if self.N < 0:
            raise ValueError(f"round count N must be >= 0, got {self.N}")
        if self.q < 1:
            raise ValueError(f"model dimension q must be >= 1, got {self.q}")


@dataclass(frozen=True)
class PowerBudgets:
    """Per-device maximum and average transmit power caps, in Watts.

    ``p_max[k]`` bounds every round's power; ``p_avg[k]`` bounds the mean
    power over the N rounds. Both must be positive with p_avg <= p_max.
    """

    p_max: np.ndarray
    p_avg: np.ndarray

    def __post_init__(self):
        _frozen_array(self, "p_max", self.p_max)
        _frozen_array(self, "p_avg", self.p_avg)
        if self.p_max.ndim != 1 or self.p_avg.ndim != 1:
            raise ValueError("power budgets must be 1-D per-device vectors")
        if self.p_max.shape != self.p_avg.shape:
            raise ValueError(
                f"budget lengths differ: {self.p_max.shape} vs {self.p_avg.shape}"
            )
        if not np.all(np.isfinite(self.p_max)) or not np.all(np.isfinite(self.p_avg)):
            raise ValueError("power budgets must be finite")
        if np.any(self.p_avg <= 0) or np.any(self.p_max <= 0):
            raise ValueError("power budgets must be positive")
        if np.any(self.p_avg > self.p_max):
            raise ValueError("average budget p_avg must not exceed p_max")

    @classmethod
    def broadcast(cls, p_max, p_avg, K: int) -> "PowerBudgets":
        """Build budgets from scalars or per-device sequences of length K."""
        return cls(np.broadcast_to(np.asarray(p_max, dtype=np.float64), (K,)),
                   np.broadcast_to(np.asarray(p_avg, dtype=np.float64), (K,)))


@dataclass(frozen=True)
class ChannelGains:
    """K x N matrix of nonnegative channel magnitudes, one per device and round."""

    h: np.ndarray

    def __post_init__(self):
        _frozen_array(self, "h", self.h)
        if self.h.ndim != 2:
            raise ValueError(f"channel gains must be a K x N matrix, got ndim={self.h.ndim}")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("channel gains must be finite")
        if np.any(self.h < 0):
            raise ValueError("channel gains must be nonnegative")


@dataclass(frozen=True)
class PowerSchedule:
    """K x N matrix of nonnegative transmit powers, in Watts."""

    p: np.ndarray

    def __post_init__(self):
        _frozen_array(self, "p", self.p)
        if self.p.ndim != 2:
            raise ValueError(f"power schedule must be a K x N matrix, got ndim={self.p.ndim}")
        if not np.all(np.isfinite(self.p)):
            raise ValueError("power schedule must be finite")
        if np.any(self.p < 0):
            raise ValueError("power schedule must be nonnegative")


@dataclass(frozen=True)
class LearningParams:
    """Scalar constants entering the convergence-gap objective.

    eta            learning rate
    L              smoothness constant (max-norm of the per-coordinate vector)
    mu             Polyak-Lojasiewicz constant, mu <= L
    sigma_sq_norm  squared 2-norm of the per-coordinate gradient deviation bounds
    noise_power    channel noise power per coordinate (N0)
    init_gap       loss gap at the initial model, F(w0) - F*
    """

    eta: float
    L: float
    mu: float
    sigma_sq_norm: float
    noise_power: float
    init_gap: float

    def __post_init__(self):
        vals = (self.eta, self.L, self.mu, self.sigma_sq_norm,
                self.noise_power, self.init_gap)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("learning parameters must be finite")
        if self.eta <= 0:
            raise ValueError(f"learning rate eta must be positive, got {self.eta}")
        if self.L <= 0 or self.mu <= 0:
            raise ValueError("smoothness L and PL constant mu must be positive")
        if self.mu > self.L:
            raise ValueError(f"PL constant mu={self.mu} exceeds smoothness L={self.L}")
        if self.sigma_sq_norm < 0 or self.noise_power < 0 or self.init_gap < 0:
            raise ValueError("sigma_sq_norm, noise_power and init_gap must be nonnegative")


def check_dims(h: ChannelGains, p: PowerSchedule, d: SystemDims) -> None:
    """Raise ValueError unless both matrices are K x N per ``d``."""
    want = (d.K, d.N)
    if h.h.shape != want:
        raise ValueError(f"channel gains shape {h.h.shape} != dims {want}")
    if p.p.shape != want:
        raise ValueError(f"power schedule shape {p.p.shape} != dims {want}")


def validate_feasible(p: PowerSchedule, b: PowerBudgets, d: SystemDims) -> bool:
    """Check the two power-constraint families.

    True iff every entry respects its device's maximum power and every
    device's mean power over rounds respects the average budget, both with
    relative slack ``FEASIBILITY_RTOL`` (optimizer outputs sit on constraint
    boundaries). Dimension mismatches raise.
    """
    if p.p.shape != (d.K, d.N):
        raise ValueError(f"power schedule shape {p.p.shape} != dims {(d.K, d.N)}")
    if b.p_max.shape != (d.K,):
        raise ValueError(f"budget length {b.p_max.shape[0]} != device count {d.K}")
    if d.N == 0:
        return True
    max_ok = np.all(p.p <= b.p_max[:, None] * (1.0 + FEASIBILITY_RTOL))
    avg_ok = np.all(p.p.mean(axis=1) <= b.p_avg * (1.0 + FEASIBILITY_RTOL))
    return bool(max_ok and avg_ok)

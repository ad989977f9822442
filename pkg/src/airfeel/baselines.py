"""Reference power-control policies used for comparison."""

from __future__ import annotations

import enum

import numpy as np

from .model import ChannelGains, PowerBudgets, PowerSchedule, SystemDims


class PolicyKind(enum.Enum):
    UNIFORM = "uniform"
    CHANNEL_INVERSION = "channel_inversion"
    OPTIMIZED = "optimized"


def uniform_power(b: PowerBudgets, d: SystemDims) -> PowerSchedule:
    """Every device transmits at its average budget in every round."""
    if b.p_avg.shape != (d.K,):
        raise ValueError(f"budget length {b.p_avg.shape[0]} != device count {d.K}")
    return PowerSchedule(np.tile(b.p_avg[:, None], (1, d.N)))


def channel_inversion(h: ChannelGains, b: PowerBudgets, d: SystemDims) -> PowerSchedule:
    """Align effective gains h*sqrt(p) across devices, then enforce budgets.

    Per round, the alignment level is the largest value no device's maximum
    power forbids: min_k p_max[k] * h[k]^2; each device then inverts its own
    channel to meet it. Devices whose resulting mean power exceeds the
    average budget get their whole row scaled down uniformly, which keeps the
    per-round proportions intact.

    Zero gains make inversion undefined and raise.
    """
    if h.h.shape != (d.K, d.N):
        raise ValueError(f"channel gains shape {h.h.shape} != dims {(d.K, d.N)}")
    if b.p_max.shape != (d.K,):
        raise ValueError(f"budget length {b.p_max.shape[0]} != device count {d.K}")
    if np.any(h.h == 0):
        raise ValueError("deep fade: inversion undefined for zero channel gain")
    if d.N == 0:
        return PowerSchedule(np.zeros((d.K, 0)))
    gain_sq = h.h * h.h
    align = np.min(b.p_max[:, None] * gain_sq, axis=0)      # per-round level
    p = align[None, :] / gain_sq
    mean_power = p.mean(axis=1)
    over = mean_power > b.p_avg
    if np.any(over):
        scale = np.where(over, b.p_avg / mean_power, 1.0)
        p = p * scale[:, None]
    return PowerSchedule(p)

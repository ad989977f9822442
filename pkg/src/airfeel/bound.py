"""Convergence-gap objective for analog gradient aggregation under a given
power schedule: per-round terms, the N-round bound, a relaxed closed form,
and the exact gradient with respect to every power variable.

Round n contributes a contraction factor and an additive noise term,

    contraction = 1 - (2*mu*eta/K) * sum_k (h*sqrt(p) - (eta*L/(2K)) * h^2 * p)
    noise       = (eta^2*L/(2K^2)) * (||sigma||^2 * sum_k h^2 * p + N0 * q)

and the objective is the recurrence ``value <- contraction * value + noise``
over rounds, started at the initial gap. The gradient follows from the
product rule on that recurrence: with fwd[n] the value after n rounds and
suf[n] the product of the contractions from round n on,

    d(value)/d(p[k, n]) = fwd[n] * suf[n+1] * d(contraction[n])/dp
                          + suf[n+1] * d(noise[n])/dp.

This prefix/suffix form is used instead of transcribing a closed-form sum
because it stays exact when contraction factors cross zero and runs in
O(K*N); a finite-difference oracle in the test suite arbitrates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import ChannelGains, LearningParams, PowerSchedule, SystemDims, check_dims


@dataclass(frozen=True)
class BoundTerms:
    """Per-round contraction factors and noise terms of the gap objective."""

    contraction: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.contraction, dtype=np.float64)
        z = np.asarray(self.noise, dtype=np.float64)
        if c.shape != z.shape or c.ndim != 1:
            raise ValueError("contraction and noise must be 1-D arrays of equal length")
        c.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "contraction", c)
        object.__setattr__(self, "noise", z)


def _check_nonneg(h: np.ndarray, p: np.ndarray) -> None:
    if np.any(p < 0):
        raise ValueError("transmit powers must be nonnegative")
    if np.any(h < 0):
        raise ValueError("channel gains must be nonnegative")


def bound_terms(h: ChannelGains, p: PowerSchedule, lp: LearningParams,
                d: SystemDims) -> BoundTerms:
    """Contraction/noise pairs for all N rounds."""
    check_dims(h, p, d)
    contraction, noise = _kernels.gap_terms(
        h.h, p.p, lp.eta, lp.L, lp.mu, lp.sigma_sq_norm, lp.noise_power, float(d.q))
    return BoundTerms(contraction, noise)


def round_terms(h_col: np.ndarray, p_col: np.ndarray, lp: LearningParams,
                d: SystemDims) -> tuple[float, float]:
    """Contraction factor and noise term of a single round.

    ``h_col`` and ``p_col`` are the length-K gain and power columns of that
    round. Negative entries raise.
    """
    h_col = np.asarray(h_col, dtype=np.float64).reshape(-1)
    p_col = np.asarray(p_col, dtype=np.float64).reshape(-1)
    if h_col.shape != (d.K,) or p_col.shape != (d.K,):
        raise ValueError(f"round columns must have length K={d.K}")
    _check_nonneg(h_col, p_col)
    contraction, noise = _kernels.gap_terms(
        h_col[:, None], p_col[:, None], lp.eta, lp.L, lp.mu,
        lp.sigma_sq_norm, lp.noise_power, float(d.q))
    return float(contraction[0]), float(noise[0])


def optimality_gap(h: ChannelGains, p: PowerSchedule, lp: LearningParams,
                   d: SystemDims) -> float:
    """N-round gap objective under schedule ``p``.

    Evaluated by the left-to-right recurrence, which is algebraically equal
    to the product/sum expansion but numerically stable for long horizons.
    """
    check_dims(h, p, d)
    _check_nonneg(h.h, p.p)
    terms = _kernels.gap_terms(h.h, p.p, lp.eta, lp.L, lp.mu,
                               lp.sigma_sq_norm, lp.noise_power, float(d.q))
    fwd = _kernels.gap_forward(terms[0], terms[1], lp.init_gap)
    return float(fwd[-1])


def relaxed_gap(h: ChannelGains, p: PowerSchedule, lp: LearningParams,
                d: SystemDims) -> float:
    """Looser closed-form bound obtained by replacing each product of
    contraction factors with the matching power of their mean.

    Requires every contraction factor to be nonnegative (the mean inequality
    does); otherwise raises. Always >= optimality_gap on the same inputs.
    """
    check_dims(h, p, d)
    _check_nonneg(h.h, p.p)
    if d.N == 0:
        return float(lp.init_gap)
    terms = bound_terms(h, p, lp, d)
    a = terms.contraction
    z = terms.noise
    if np.any(a < 0):
        raise ValueError(
            "mean-inequality precondition violated: negative contraction factor")
    n_rounds = d.N
    alpha = a.mean()
    value = alpha ** n_rounds * lp.init_gap
    # suffix means: beta[n] = mean(a[n+1:]) for n < N-1, last round weight is 1
    suffix_sums = np.concatenate([np.cumsum(a[::-1])[::-1], [0.0]])
    for n in range(n_rounds):
        remaining = n_rounds - (n + 1)
        beta = suffix_sums[n + 1] / remaining if remaining > 0 else 1.0
        value += z[n] * beta ** remaining
    return float(value)


def gap_gradient(h: ChannelGains, p: PowerSchedule, lp: LearningParams,
                 d: SystemDims) -> np.ndarray:
    """Exact K x N gradient of ``optimality_gap`` with respect to each power.

    The derivative contains 1/sqrt(p), so every power must be strictly
    positive; zero entries raise.
    """
    check_dims(h, p, d)
    _check_nonneg(h.h, p.p)
    if np.any(p.p == 0):
        raise ValueError("gradient singular at zero power")
    terms = _kernels.gap_terms(h.h, p.p, lp.eta, lp.L, lp.mu,
                               lp.sigma_sq_norm, lp.noise_power, float(d.q))
    fwd = _kernels.gap_forward(terms[0], terms[1], lp.init_gap)
    suf = _kernels.suffix_products(terms[0])
    return _kernels.gap_gradient_kernel(h.h, p.p, fwd, suf, lp.eta, lp.L,
                                        lp.mu, lp.sigma_sq_norm)

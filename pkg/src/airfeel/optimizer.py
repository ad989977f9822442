"""Power-schedule optimization: successive convex approximation with a trust
region, an exact greedy solver for the linearized subproblem, and a one-
dimensional learning-rate search.

Each outer iteration linearizes the gap objective at the incumbent schedule,
minimizes the linearization inside a trust-region box intersected with the
power constraints (a continuous knapsack that decomposes per device), and
accepts the candidate only if the true objective strictly decreases;
otherwise the trust radius is halved. Iteration stops once the radius falls
below a threshold.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .baselines import channel_inversion, uniform_power
from .bound import gap_gradient, optimality_gap
from .model import (ChannelGains, FEASIBILITY_RTOL, LearningParams,
                    PowerBudgets, PowerSchedule, SystemDims, validate_feasible)


@dataclass(frozen=True)
class ScaConfig:
    """Trust-region / termination parameters.

    gamma0    initial trust radius, Watts
    epsilon   stop once the radius is at or below this
    max_iters cap on accepted steps (rejections only shrink the radius)
    p_floor   minimum allowed power, keeps 1/sqrt(p) finite in gradients
    """

    gamma0: float
    epsilon: float = 1e-4
    max_iters: int = 200
    p_floor: float = 1e-8

    def __post_init__(self):
        if not (self.gamma0 > 0 and np.isfinite(self.gamma0)):
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if not (0 < self.epsilon < self.gamma0):
            raise ValueError("epsilon must satisfy 0 < epsilon < gamma0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.p_floor <= 0:
            raise ValueError("p_floor must be positive")

    @classmethod
    def for_budgets(cls, b: PowerBudgets, **overrides) -> "ScaConfig":
        """Defaults scaled to the problem: gamma0 = max p_max / 2."""
        overrides.setdefault("gamma0", float(b.p_max.max()) / 2.0)
        return cls(**overrides)


@dataclass(frozen=True)
class ScaStep:
    """One evaluated candidate (iterate 0 is the initial point)."""

    schedule: PowerSchedule
    phi: float
    gamma: float
    accepted: bool


@dataclass(frozen=True)
class ScaTrace:
    steps: tuple[ScaStep, ...]
    truncated: bool = False

    @property
    def accepted_phis(self) -> list[float]:
        return [s.phi for s in self.steps if s.accepted]


class InitPolicy(enum.Enum):
    """How an SCA run is initialized."""

    UNIFORM = "uniform"
    CHANNEL_INVERSION = "channel_inversion"
    BEST_OF = "best_of"


@dataclass(frozen=True)
class EtaSearchConfig:
    """Candidate learning rates for the one-dimensional search."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64).reshape(-1)
        if g.size == 0:
            raise ValueError("eta grid must be nonempty")
        if np.any(g <= 0) or not np.all(np.isfinite(g)):
            raise ValueError("eta grid values must be positive and finite")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("eta grid must be strictly increasing")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    @classmethod
    def geometric(cls, smoothness: float, size: int = 20,
                  lo_frac: float = 1e-3, hi_frac: float = 1.0) -> "EtaSearchConfig":
        """Geometric grid spanning [lo_frac/L, hi_frac/L]."""
        if size == 1:
            return cls(np.array([hi_frac / smoothness]))
        return cls(np.geomspace(lo_frac / smoothness, hi_frac / smoothness, size))


@dataclass(frozen=True)
class EtaSearchResult:
    eta: float
    schedule: PowerSchedule
    phi: float


def linearize(h: ChannelGains, p0: PowerSchedule, lp: LearningParams,
              d: SystemDims) -> np.ndarray:
    """First-order coefficients of the gap objective at ``p0``.

    The linearization's constant term does not move the subproblem argmin, so
    only the K x N gradient is returned.
    """
    return gap_gradient(h, p0, lp, d)


def solve_subproblem(c: np.ndarray, p0: PowerSchedule, gamma: float,
                     b: PowerBudgets, d: SystemDims,
                     p_floor: float = 1e-8) -> PowerSchedule:
    """Exact minimizer of the linearized objective in the trust-region box.

    Minimizes sum(c * p) subject to, per entry,
    max(p_floor, p0 - gamma) <= p <= min(p_max, p0 + gamma), and per device
    mean_n p <= p_avg. The problem splits per device into a continuous
    knapsack: start every round at its lower bound and raise the rounds with
    negative coefficients, most negative first (ties by ascending round
    index), until the device budget is spent.

    Raises if some device's lower bounds alone exceed its budget; that cannot
    happen when ``p0`` is feasible and above the floor, so it signals a
    caller bug.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (d.K, d.N):
        raise ValueError(f"coefficient shape {c.shape} != dims {(d.K, d.N)}")
    if p0.p.shape != (d.K, d.N):
        raise ValueError(f"schedule shape {p0.p.shape} != dims {(d.K, d.N)}")
    if gamma <= 0:
        raise ValueError("trust radius must be positive")
    if d.N == 0:
        return PowerSchedule(np.zeros((d.K, 0)))

    lo = np.maximum(p_floor, p0.p - gamma)
    hi = np.minimum(b.p_max[:, None], p0.p + gamma)
    budget = d.N * b.p_avg
    leftover = budget - lo.sum(axis=1)
    if np.any(leftover < -FEASIBILITY_RTOL * budget):
        raise ValueError("trust region infeasible: lower bounds exceed average budget")
    leftover = np.maximum(leftover, 0.0)

    fill_cap = np.where(c < 0, hi - lo, 0.0)
    order = np.argsort(c, axis=1, kind="stable")        # ascending c, ties by round
    cap_sorted = np.take_along_axis(fill_cap, order, axis=1)
    consumed_before = np.cumsum(cap_sorted, axis=1) - cap_sorted
    fill_sorted = np.clip(leftover[:, None] - consumed_before, 0.0, cap_sorted)
    fill = np.zeros_like(lo)
    np.put_along_axis(fill, order, fill_sorted, axis=1)
    return PowerSchedule(lo + fill)


def floor_schedule(p: PowerSchedule, b: PowerBudgets, d: SystemDims,
                   p_floor: float) -> PowerSchedule:
    """Raise sub-floor powers to ``p_floor`` without breaking budgets.

    Rows whose mean would exceed the average budget after clamping are
    rescaled: a common factor shrinks the unclamped entries so the row meets
    its budget exactly while every entry stays at or above the floor.
    """
    if d.N == 0 or np.all(p.p >= p_floor):
        return p
    if p_floor > float(b.p_avg.min()):
        raise ValueError("p_floor exceeds an average budget; cannot floor schedule")
    out = np.maximum(p.p, p_floor)
    budgets = d.N * b.p_avg
    for k in range(d.K):
        if out[k].sum() <= budgets[k] * (1.0 + FEASIBILITY_RTOL):
            continue
        row = p.p[k]
        asc = np.sort(row)
        prefix = np.concatenate([[0.0], np.cumsum(asc)])
        total = prefix[-1]
        # clamp the m smallest entries, scale the rest to spend the budget
        for m in range(d.N):
            tail = total - prefix[m]
            if tail <= 0.0:
                out[k] = np.full(d.N, p_floor)
                break
            scale = (budgets[k] - m * p_floor) / tail
            smallest_kept = scale * asc[m]
            largest_clamped = scale * asc[m - 1] if m > 0 else -np.inf
            if smallest_kept >= p_floor and largest_clamped < p_floor:
                out[k] = np.maximum(scale * row, p_floor)
                break
        else:
            out[k] = np.full(d.N, p_floor)
    return PowerSchedule(out)


def sca_optimize(h: ChannelGains, p_init: PowerSchedule, lp: LearningParams,
                 b: PowerBudgets, d: SystemDims,
                 cfg: ScaConfig) -> tuple[PowerSchedule, ScaTrace]:
    """Minimize the gap objective from ``p_init`` by SCA with a trust region.

    Returns a feasible schedule whose objective never exceeds the initial
    one, plus a trace of every evaluated candidate. Accepted candidates
    strictly decrease the objective; rejections halve the trust radius; the
    loop stops when the radius reaches ``cfg.epsilon`` or after
    ``cfg.max_iters`` acceptances (flagged as truncated).
    """
    if not validate_feasible(p_init, b, d):
        raise ValueError("initial schedule is infeasible")
    if d.N > 0 and np.any(p_init.p < cfg.p_floor):
        raise ValueError("initial schedule has entries below p_floor")
    if cfg.p_floor >= float(b.p_avg.min()):
        raise ValueError("p_floor must be well below the smallest average budget")

    current = p_init
    phi = optimality_gap(h, current, lp, d)
    gamma = cfg.gamma0
    steps = [ScaStep(current, phi, gamma, True)]
    accepts = 0
    truncated = False
    while gamma > cfg.epsilon:
        if accepts >= cfg.max_iters:
            truncated = True
            break
        coeffs = gap_gradient(h, current, lp, d)
        candidate = solve_subproblem(coeffs, current, gamma, b, d, cfg.p_floor)
        phi_cand = optimality_gap(h, candidate, lp, d)
        accepted = phi_cand < phi
        steps.append(ScaStep(candidate, phi_cand, gamma, accepted))
        if accepted:
            current = candidate
            phi = phi_cand
            accepts += 1
        else:
            gamma /= 2.0
    return current, ScaTrace(tuple(steps), truncated)


def build_init(policy: InitPolicy, h: ChannelGains, lp: LearningParams,
               b: PowerBudgets, d: SystemDims, p_floor: float) -> PowerSchedule:
    """Feasible, floor-respecting starting schedule for an SCA run."""
    if policy is InitPolicy.UNIFORM:
        p = uniform_power(b, d)
    elif policy is InitPolicy.CHANNEL_INVERSION:
        p = channel_inversion(h, b, d)
    else:  # best of the two baselines under the current learning rate
        cand_u = floor_schedule(uniform_power(b, d), b, d, p_floor)
        cand_i = floor_schedule(channel_inversion(h, b, d), b, d, p_floor)
        return (cand_u if optimality_gap(h, cand_u, lp, d)
                <= optimality_gap(h, cand_i, lp, d) else cand_i)
    return floor_schedule(p, b, d, p_floor)


def eta_search(h: ChannelGains, lp_base: LearningParams, b: PowerBudgets,
               d: SystemDims, cfg: ScaConfig, ecfg: EtaSearchConfig,
               p_init_policy: InitPolicy = InitPolicy.BEST_OF) -> EtaSearchResult:
    """Grid search over learning rates, re-optimizing powers per candidate.

    ``p_init_policy`` names how each grid point's SCA run is initialized; the
    BEST_OF default starts from the better of the two baselines at that
    learning rate, which guarantees the returned objective is at most either
    baseline's. Ties in the objective resolve toward the smaller learning
    rate.
    """
    best: EtaSearchResult | None = None
    for eta in ecfg.grid:
        lp = replace(lp_base, eta=float(eta))
        p0 = build_init(p_init_policy, h, lp, b, d, cfg.p_floor)
        schedule, _ = sca_optimize(h, p0, lp, b, d, cfg)
        phi = optimality_gap(h, schedule, lp, d)
        if best is None or phi < best.phi:
            best = EtaSearchResult(float(eta), schedule, phi)
    assert best is not None
    return best

"""
Power allocation over K mutually interfering links: classical
water-filling and the damped iterative water-filling fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .wavefield import sinr_and_rate


DEFAULT_ZETA = 0.75

# a damped iterate must beat the incumbent by more than rounding noise
_BEST_MARGIN = 1e-12


class DegenerateProblemError(ValueError):
    """Every user has zero direct gain; no allocation is meaningful."""


@dataclass(frozen=True)
class IwfOptions:
    """Settings for :func:`iterative_waterfilling`.

    ``zeta=None`` selects ``max(1/K, DEFAULT_ZETA)``: damped, but light
    enough to converge in a few tens of iterations at K = 4.
    """

    zeta: float | None = None
    tol: float = 1e-6
    max_iter: int = 100
    bisection_tol: float = 1e-12

    def damping(self, K):
        zeta = max(1.0 / K, DEFAULT_ZETA) if self.zeta is None else float(self.zeta)
        if not (1.0 / K - 1e-12 <= zeta <= 1.0):
            raise ValueError(f"damping weight must lie in [1/K, 1] = [{1 / K:g}, 1], got {zeta!r}")
        return zeta


@dataclass
class IwfResult:
    p: np.ndarray
    trace: list = field(default_factory=list)
    iterations: int = 0
    initial_rate: float = 0.0
    history: list = field(default_factory=list)  # damped iterate per iteration


def waterfill(floors, budget, tol=1e-12, max_bisections=200):
    """Distribute ``budget`` as ``max(0, level - floor_k)``.

    Infinite floors receive nothing. The water level is located by
    bisection on ``[0, budget + max floor]``; once the active set
    is known the level is recomputed in closed form so the budget is met
    to rounding error.
    """
    floors = np.asarray(floors, dtype=float)
    finite = np.isfinite(floors)
    if not finite.any():
        raise DegenerateProblemError("all users have zero direct gain")
    p = np.zeros_like(floors)
    if budget <= 0:
        return p
    f = floors[finite]
    lo, hi = 0.0, budget + f.max()
    for _ in range(max_bisections):
        level = 0.5 * (lo + hi)
        total = np.maximum(level - f, 0.0).sum()
        if abs(total - budget) <= tol:
            break
        if total > budget:
            hi = level
        else:
            lo = level
    active = f < level
    if not active.any():
        active = f == f.min()
    while True:
        level = (budget + f[active].sum()) / active.sum()
        keep = active & (f < level)
        if keep.sum() in (0, active.sum()):
            break
        active = keep
    alloc = np.where(active, np.maximum(level - f, 0.0), 0.0)
    p[finite] = alloc
    return p


def effective_floors(g, p_prev, sigma2):
    """Interference-plus-noise over direct gain for each user (inf when gain is 0)."""
    g = np.asarray(g, dtype=float)
    received = g * np.asarray(p_prev, dtype=float)[None, :]
    interference = received.sum(axis=1) - np.diag(received) + sigma2
    direct = np.diag(g)
    with np.errstate(divide="ignore"):
        return np.where(direct > 0, interference / np.where(direct > 0, direct, 1.0), np.inf)


def waterfill_step(g, p_prev, sigma2, budget, bisection_tol=1e-12):
    """One water-filling update treating the others' interference as noise."""
    return waterfill(effective_floors(g, p_prev, sigma2), budget, bisection_tol)


def iterative_waterfilling(g, sigma2, budget, opts: IwfOptions | None = None, p0=None) -> IwfResult:
    """Damped iterative water-filling for a fixed gain matrix.

    Stops when the fractional sum-rate increase drops below ``opts.tol``
    (a decrease also stops it). Both the damped iterates and the undamped
    water-filling responses are candidates; the best allocation seen is
    returned, so the result is never worse than ``p0``. Without
    interference the undamped response is the exact optimum.
    """
    opts = opts or IwfOptions()
    g = np.asarray(g, dtype=float)
    K = g.shape[0]
    zeta = opts.damping(K)
    p = np.full(K, budget / K) if p0 is None else np.asarray(p0, dtype=float).copy()
    rate = sinr_and_rate(g, p, sigma2)[1]
    best_p, best_rate = p, rate
    initial_rate = rate
    trace, history = [], []
    it = 0
    while it < opts.max_iter:
        it += 1
        response = waterfill_step(g, p, sigma2, budget, opts.bisection_tol)
        p = zeta * response + (1 - zeta) * p
        new_rate = sinr_and_rate(g, p, sigma2)[1]
        trace.append(new_rate)
        history.append(p)
        # the water-filling response wins on any gain; damped iterates must clear rounding noise
        response_rate = sinr_and_rate(g, response, sigma2)[1]
        if response_rate > best_rate:
            best_p, best_rate = response, response_rate
        if new_rate > best_rate + _BEST_MARGIN * abs(best_rate):
            best_p, best_rate = p, new_rate
        increase = (new_rate - rate) / rate if rate > 0 else (np.inf if new_rate > 0 else 0.0)
        rate = new_rate
        if increase < opts.tol:
            break
    return IwfResult(p=best_p, trace=trace, iterations=it, initial_rate=initial_rate, history=history)

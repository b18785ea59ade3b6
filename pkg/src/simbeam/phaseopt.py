"""
Phase-shift optimization of the SIM for a fixed power allocation.

Four solvers share the same objective (the sum rate): successive
refinement (cyclic coordinate ascent over the codebook), projected
gradient ascent with an analytic gradient, exhaustive enumeration and a
random codebook search.

For layer ``l`` the end-to-end link ``h_k^H G w_k'`` is linear in each
phasor of that layer::

    y[k, k'] = sum_n exp(j theta_n^l) * left[k, n] * right[n, k']

with ``left = h^H V^l`` (layers after ``l``) and ``right = U^l W^1``
(layers before ``l``). Both solvers that touch single coordinates work on
these factors instead of re-running the cascade.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .powerctl import IwfOptions, iterative_waterfilling
from .wavefield import PhaseConfig, cascade, codebook, gain_matrix, sinr_and_rate, sum_rate

LOG2E = 1.0 / np.log(2.0)

# relative margin a coordinate move must win by; absorbs rounding drift
_SR_MARGIN = 1e-12


class SearchTooLargeError(ValueError):
    """Exhaustive search would exceed the enumeration cap."""


@dataclass(frozen=True)
class GaOptions:
    step0: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 100
    tol: float = 1e-6
    max_iter: int = 100
    restarts: int = 1

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError(f"shrink must lie in (0, 1), got {self.shrink!r}")
        if not self.step0 > 0:
            raise ValueError(f"step0 must be positive, got {self.step0!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class PhaseResult:
    phases: PhaseConfig
    rate: float
    trace: list = field(default_factory=list)
    iterations: int = 0
    initial_rate: float = 0.0


def project_phase(theta, bits):
    """Nearest codebook phase, with wrap-around at 2*pi."""
    return quantize(theta, bits) * (2 * np.pi / 2**bits)


def quantize(theta, bits):
    """Codebook indices of the nearest phases in ``{0, ..., 2**bits - 1}``."""
    levels = 2**bits
    step = 2 * np.pi / levels
    wrapped = np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
    return np.mod(np.rint(wrapped / step).astype(np.int64), levels)


def _layer_factors(phasors, channels: ChannelSet):
    """Left factors ``h^H V^l`` (K x N) for every layer, and ``W^1`` as the first right factor."""
    W = channels.W
    L = len(W)
    lefts = [None] * L
    a = np.conj(channels.h)
    lefts[L - 1] = a
    for l in range(L - 2, -1, -1):
        a = (a * phasors[l + 1][None, :]) @ W[l + 1]
        lefts[l] = a
    return lefts


def _next_right(right, phasors_l, W_next):
    return W_next @ (phasors_l[:, None] * right)


@dataclass
class GradientWorkspace:
    """Prefix/suffix products and SINR terms at one phase configuration."""

    phasors: np.ndarray
    lefts: list
    rights: list
    y: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    p: np.ndarray

    @classmethod
    def build(cls, theta, channels: ChannelSet, p):
        theta = theta.theta if isinstance(theta, PhaseConfig) else np.asarray(theta, dtype=float)
        if theta.shape != (channels.L, channels.N):
            raise ValueError(f"phase tensor must be {channels.L} x {channels.N}, got {theta.shape}")
        p = np.asarray(p, dtype=float)
        e = np.exp(1j * theta)
        lefts = _layer_factors(e, channels)
        rights = [channels.W[0]]
        for l in range(1, channels.L):
            rights.append(_next_right(rights[-1], e[l - 1], channels.W[l]))
        y = (lefts[0] * e[0][None, :]) @ rights[0]
        g = np.abs(y) ** 2
        gamma, _ = sinr_and_rate(g, p, channels.sigma2)
        delta = 1.0 / ((g * p[None, :]).sum(axis=1) + channels.sigma2)
        return cls(e, lefts, rights, y, gamma, delta, p)

    def gradient(self) -> np.ndarray:
        """Partial derivatives of the sum rate w.r.t. every phase (L x N)."""
        K = self.y.shape[0]
        weights = -(self.delta * self.gamma)[:, None] * self.p[None, :]
        weights[np.diag_indices(K)] = self.delta * self.p
        Z = self.y * weights
        grad = np.empty(self.phasors.shape)
        for l, (a, r) in enumerate(zip(self.lefts, self.rights)):
            T = np.conj(r) @ Z.T
            s = np.sum(np.conj(a).T * T, axis=1)
            grad[l] = np.imag(np.conj(self.phasors[l]) * s)
        return 2 * LOG2E * grad


def sum_rate_gradient(phases, channels: ChannelSet, p) -> np.ndarray:
    return GradientWorkspace.build(phases, channels, p).gradient()


def finite_diff_gradient(phases, channels: ChannelSet, p, step=1e-6) -> np.ndarray:
    """Central differences of the sum rate, without codebook projection."""
    if not step > 0:
        raise ValueError("step must be positive")
    theta = phases.theta if isinstance(phases, PhaseConfig) else np.asarray(phases, dtype=float)
    grad = np.empty(theta.shape)
    for idx in np.ndindex(theta.shape):
        up = theta.copy()
        dn = theta.copy()
        up[idx] += step
        dn[idx] -= step
        grad[idx] = (sum_rate(up, channels, p) - sum_rate(dn, channels, p)) / (2 * step)
    return grad


def _candidate_rates(y_cand, p, sigma2):
    received = np.abs(y_cand) ** 2 * p
    signal = np.einsum("bkk->bk", received)
    interference = received.sum(axis=2) - signal + sigma2
    return np.log2(1 + signal / interference).sum(axis=1)


def successive_refinement(phases0: PhaseConfig, channels: ChannelSet, p, tol=1e-6, max_iter=100) -> PhaseResult:
    """Cyclic coordinate ascent over the phase codebook.

    Coordinates are visited layer by layer, atom by atom. A coordinate
    keeps its incumbent phase unless another codeword is strictly better.
    """
    if not phases0.is_discrete:
        raise ValueError("successive refinement needs a discrete phase configuration")
    bits = phases0.bits
    p = np.asarray(p, dtype=float)
    sigma2 = channels.sigma2
    book = np.exp(1j * codebook(bits))
    idx = phases0.indices.copy()
    W = channels.W
    L, N = idx.shape

    rate = initial = sum_rate(PhaseConfig(idx, bits), channels, p)
    trace = []
    sweeps = 0
    while sweeps < max_iter:
        sweeps += 1
        e = book[idx]
        lefts = _layer_factors(e, channels)
        right = W[0]
        for l in range(L):
            C = lefts[l].T[:, :, None] * right[:, None, :]
            y = np.einsum("n,nkm->km", e[l], C)
            for n in range(N):
                cur = idx[l, n]
                y_cand = y[None] + (book - book[cur])[:, None, None] * C[n][None]
                rates = _candidate_rates(y_cand, p, sigma2)
                best = int(np.argmax(rates))
                if rates[best] - rates[cur] > _SR_MARGIN * abs(rates[cur]) and rates[best] > rates[cur]:
                    idx[l, n] = best
                    e[l, n] = book[best]
                    y = y_cand[best]
            if l + 1 < L:
                right = _next_right(right, e[l], W[l + 1])
        new_rate = sum_rate(PhaseConfig(idx, bits), channels, p)
        trace.append(new_rate)
        increase = (new_rate - rate) / rate if rate > 0 else 0.0
        rate = new_rate
        if increase < tol:
            break
    return PhaseResult(PhaseConfig(idx, bits), rate, trace, sweeps, initial)


def _ascend(theta, channels, p, bits, opts: GaOptions):
    """One projected (or plain, if ``bits`` is None) gradient-ascent run."""
    rate = initial = sum_rate(theta, channels, p)
    trace = []
    it = 0
    while it < opts.max_iter:
        it += 1
        grad = GradientWorkspace.build(theta, channels, p).gradient()
        gnorm2 = float(np.sum(grad**2))
        if gnorm2 == 0.0:
            break
        mu = opts.step0
        accepted = None
        for _ in range(opts.max_backtracks):
            trial = theta + mu * grad
            trial_rate = sum_rate(trial, channels, p)
            if trial_rate >= rate + opts.armijo_c * mu * gnorm2:
                accepted = trial
                break
            mu *= opts.shrink
        if accepted is None:
            break
        if bits is None:
            new_theta, new_rate = accepted, trial_rate
        else:
            new_theta = project_phase(accepted, bits)
            new_rate = sum_rate(new_theta, channels, p)
            if new_rate <= rate:
                break
        increase = (new_rate - rate) / rate if rate > 0 else 0.0
        theta, rate = new_theta, new_rate
        trace.append(rate)
        if increase < opts.tol:
            break
    return theta, rate, trace, it, initial


def projected_gradient_ascent(phases0: PhaseConfig, channels: ChannelSet, p, opts: GaOptions | None = None,
                              rng=None, continuous=None) -> PhaseResult:
    """Gradient ascent with Armijo backtracking, projecting to the codebook after each step.

    Continuous mode (``phases0`` continuous, or ``continuous=True``) skips
    the projection. With ``opts.restarts > 1`` further runs start from
    random phases drawn from ``rng`` and the best run is returned (the
    earliest on ties).
    """
    opts = opts or GaOptions()
    if continuous is None:
        continuous = not phases0.is_discrete
    bits = None if continuous else phases0.bits
    if not continuous and not phases0.is_discrete:
        raise ValueError("discrete projection needs a codebook resolution")
    p = np.asarray(p, dtype=float)
    L, N = phases0.shape
    if opts.restarts > 1 and rng is None:
        raise ValueError("restarts need an rng")

    best = None
    for run in range(opts.restarts):
        if run == 0:
            theta0 = phases0.theta.astype(float)
        elif bits is None:
            theta0 = rng.uniform(0, 2 * np.pi, size=(L, N))
        else:
            theta0 = codebook(bits)[rng.integers(0, 2**bits, size=(L, N))]
        run_result = _ascend(theta0, channels, p, bits, opts)
        if best is None or run_result[1] > best[1]:
            best = run_result
    theta, rate, trace, it, initial = best
    if bits is None:
        phases = PhaseConfig.continuous(np.mod(theta, 2 * np.pi))
    else:
        phases = PhaseConfig(quantize(theta, bits), bits)
    return PhaseResult(phases, sum_rate(phases, channels, p), trace, it, initial)


def _batch_rates(thetas, channels: ChannelSet, p):
    """Sum rates of a batch of phase tensors (C x L x N)."""
    e = np.exp(1j * thetas)
    W = channels.W
    x = e[:, 0, :, None] * W[0][None]
    for l in range(1, len(W)):
        x = e[:, l, :, None] * (W[l] @ x)
    y = np.conj(channels.h)[None] @ x
    return _candidate_rates(y, np.asarray(p, dtype=float), channels.sigma2)


def exhaustive_search(channels: ChannelSet, p, bits, cap=2**20, chunk=4096) -> PhaseResult:
    """Global maximizer by enumerating every codebook configuration.

    Enumeration is lexicographic over the flattened L x N index tensor;
    the first maximizer encountered is returned.
    """
    L, N = channels.L, channels.N
    levels = 2**bits
    count = levels ** (L * N)
    if count > cap:
        raise SearchTooLargeError(f"exhaustive search over {levels}^{L * N} = {count} configurations exceeds cap {cap}")
    step = 2 * np.pi / levels
    best_rate, best_idx = -np.inf, None
    configs = itertools.product(range(levels), repeat=L * N)
    evaluated = 0
    while evaluated < count:
        block = np.array(list(itertools.islice(configs, chunk)), dtype=np.int64).reshape(-1, L, N)
        rates = _batch_rates(block * step, channels, p)
        j = int(np.argmax(rates))
        if rates[j] > best_rate:
            best_rate, best_idx = float(rates[j]), block[j]
        evaluated += len(block)
    phases = PhaseConfig(best_idx, bits)
    return PhaseResult(phases, best_rate, [best_rate], evaluated, best_rate)


@dataclass
class CodebookResult:
    phases: PhaseConfig
    p: np.ndarray
    rate: float
    rates: list = field(default_factory=list)


def codebook_search(channels: ChannelSet, budget, Q, rng, bits, iwf_opts: IwfOptions | None = None) -> CodebookResult:
    """Best of ``Q`` random codebook configurations, each with its own IWF power allocation."""
    if Q < 1:
        raise ValueError("codebook size must be >= 1")
    L, N = channels.L, channels.N
    best = None
    rates = []
    for _ in range(Q):
        phases = PhaseConfig.random(L, N, bits, rng)
        g = gain_matrix(cascade(phases, channels), channels.h)
        res = iterative_waterfilling(g, channels.sigma2, budget, iwf_opts)
        rate = sinr_and_rate(g, res.p, channels.sigma2)[1]
        rates.append(rate)
        if best is None or rate > best.rate:
            best = CodebookResult(phases, res.p, rate)
    best.rates = rates
    return best

"""
Joint power allocation and wave-based beamforming.

:func:`alternating_optimize` alternates damped iterative water-filling
with one of the phase optimizers until the sum rate settles. The other
entry points are the comparison schemes: quantized continuous phases,
equal power, and a conventional zero-forcing MISO transmitter without a
SIM.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, Environment, path_losses
from .phaseopt import GaOptions, projected_gradient_ascent, quantize, successive_refinement
from .powerctl import IwfOptions, iterative_waterfilling, waterfill
from .wavefield import PhaseConfig, cascade, gain_matrix, sinr_and_rate

METHODS = ("sr", "pga", "pga-cont")


@dataclass(frozen=True)
class AoOptions:
    bits: int = 2
    tol: float = 1e-6
    max_iter: int = 100
    iwf: IwfOptions = field(default_factory=IwfOptions)
    ga: GaOptions = field(default_factory=GaOptions)
    sr_tol: float = 1e-6
    sr_max_iter: int = 100


@dataclass
class SolveReport:
    """Outcome of one solve, including the measured iteration counters."""

    phases: PhaseConfig
    p: np.ndarray
    rate: float
    trace: list
    method: str
    initial_rate: float = 0.0
    ao_iterations: int = 0
    iwf_iterations: list = field(default_factory=list)
    phase_iterations: list = field(default_factory=list)
    iwf_traces: list = field(default_factory=list)
    phase_traces: list = field(default_factory=list)
    seed: int | None = None

    @property
    def continuous(self) -> bool:
        return not self.phases.is_discrete


def link_gains(phases, channels: ChannelSet):
    return gain_matrix(cascade(phases, channels), channels.h)


def evaluate(phases, channels: ChannelSet, p) -> float:
    return sinr_and_rate(link_gains(phases, channels), p, channels.sigma2)[1]


def _fractional_increase(new, old):
    if old > 0:
        return (new - old) / old
    return np.inf if new > 0 else 0.0


def _optimize_phases(method, phases, channels, p, opts: AoOptions, rng):
    if method == "sr":
        return successive_refinement(phases, channels, p, opts.sr_tol, opts.sr_max_iter)
    if method == "pga":
        return projected_gradient_ascent(phases, channels, p, opts.ga, rng=rng)
    if method == "pga-cont":
        return projected_gradient_ascent(phases, channels, p, opts.ga, rng=rng, continuous=True)
    raise ValueError(f"unknown phase optimizer {method!r}; expected one of {METHODS}")


def initial_phases(channels: ChannelSet, method, bits, rng):
    phases = PhaseConfig.random(channels.L, channels.N, bits, rng)
    if method == "pga-cont":
        return PhaseConfig.continuous(phases.theta)
    return phases


def alternating_optimize(channels: ChannelSet, budget, method="sr", opts: AoOptions | None = None,
                         phases0=None, p0=None, rng=None, optimize_power=True) -> SolveReport:
    """Alternate power allocation and phase optimization until the rate converges.

    ``phases0`` defaults to random codebook phases drawn from ``rng``;
    ``p0`` defaults to equal power. With ``optimize_power=False`` the power
    stays at ``p0`` and only the phases are optimized.
    """
    opts = opts or AoOptions()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if rng is None:
        rng = np.random.default_rng()
    if phases0 is None:
        phases = initial_phases(channels, method, opts.bits, rng)
    elif method == "pga-cont" and phases0.is_discrete:
        phases = PhaseConfig.continuous(phases0.theta)
    else:
        phases = phases0
    p = np.full(channels.K, budget / channels.K) if p0 is None else np.asarray(p0, dtype=float)

    rate = evaluate(phases, channels, p)
    report = SolveReport(phases, p, rate, [], method, initial_rate=rate)
    while report.ao_iterations < opts.max_iter:
        report.ao_iterations += 1
        if optimize_power:
            res = iterative_waterfilling(link_gains(phases, channels), channels.sigma2, budget, opts.iwf, p0=p)
            p = res.p
            report.iwf_iterations.append(res.iterations)
            report.iwf_traces.append(res.trace)
        ph = _optimize_phases(method, phases, channels, p, opts, rng)
        if ph.rate >= evaluate(phases, channels, p):
            phases = ph.phases
        report.phase_iterations.append(ph.iterations)
        report.phase_traces.append(ph.trace)
        new_rate = evaluate(phases, channels, p)
        report.trace.append(new_rate)
        increase = _fractional_increase(new_rate, rate)
        rate = new_rate
        if increase < opts.tol or not optimize_power:
            break
    report.phases, report.p, report.rate = phases, p, rate
    return report


def quantized_continuous_baseline(channels: ChannelSet, budget, bits, opts: AoOptions | None = None,
                                  rng=None) -> SolveReport:
    """Optimize continuous phases, round them to the codebook once, then re-allocate power."""
    opts = opts or AoOptions()
    cont = alternating_optimize(channels, budget, "pga-cont", opts, rng=rng)
    phases = PhaseConfig(quantize(cont.phases.theta, bits), bits)
    res = iterative_waterfilling(link_gains(phases, channels), channels.sigma2, budget, opts.iwf, p0=cont.p)
    rate = evaluate(phases, channels, res.p)
    return SolveReport(phases, res.p, rate, cont.trace + [rate], "quantized", cont.initial_rate,
                       ao_iterations=cont.ao_iterations,
                       iwf_iterations=cont.iwf_iterations + [res.iterations],
                       phase_iterations=cont.phase_iterations,
                       iwf_traces=cont.iwf_traces + [res.trace], phase_traces=cont.phase_traces)


def average_power_baseline(channels: ChannelSet, budget, method="sr", opts: AoOptions | None = None,
                           rng=None, phases0=None) -> SolveReport:
    """Equal power ``budget/K`` for every user; only the phases are optimized."""
    report = alternating_optimize(channels, budget, method, opts, phases0=phases0, rng=rng, optimize_power=False)
    report.method = f"avg-{method}"
    return report


@dataclass
class ZfResult:
    rate: float
    p: np.ndarray
    gains: np.ndarray
    precoder: np.ndarray
    channel: np.ndarray


ZF_NORMALIZATIONS = ("column", "total")


def zf_precoder(H, normalization="column"):
    """Pseudo-inverse precoder for ``H`` (K x M, rows ``h_k^H``).

    ``"column"`` scales every beam to unit norm; ``"total"`` applies one
    common scale so that ``||F||_F**2 = K``.
    """
    F = np.linalg.pinv(H)
    if normalization == "column":
        return F / np.linalg.norm(F, axis=0, keepdims=True)
    if normalization == "total":
        return F * np.sqrt(F.shape[1]) / np.linalg.norm(F)
    raise ValueError(f"normalization must be one of {ZF_NORMALIZATIONS}, got {normalization!r}")


def zero_forcing(H, budget, sigma2, normalization="column") -> ZfResult:
    """ZF precoding over the rows of ``H`` with classical water-filling."""
    if np.linalg.matrix_rank(H) < H.shape[0]:
        raise np.linalg.LinAlgError("channel matrix is rank deficient; zero forcing is undefined")
    F = zf_precoder(H, normalization)
    g = np.abs(H @ F) ** 2
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (H.shape[0],))
    p = waterfill(sigma2 / np.diag(g), budget)
    _, rate = sinr_and_rate(g, p, sigma2)
    return ZfResult(rate, p, g, F, H)


def zf_baseline(K, M, budget, sigma2, env: Environment, rng, wavelength=None, max_resample=10,
                normalization="column") -> ZfResult:
    """Conventional MISO downlink without a SIM, i.i.d. Rayleigh BS-UE channels."""
    if M != K:
        raise ValueError("zero-forcing baseline requires M == K")
    beta = path_losses(K, env, sim_thickness=0.0, wavelength=wavelength)
    for _ in range(max_resample):
        z = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) / np.sqrt(2)
        h = np.sqrt(beta)[:, None] * z
        try:
            return zero_forcing(np.conj(h), budget, sigma2, normalization)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError(f"no full-rank channel after {max_resample} draws")

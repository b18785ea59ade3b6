"""
User-side channel model: spatial correlation at the last SIM layer,
distance-dependent path loss and correlated Rayleigh sampling.

All powers are linear (watts); dB/dBm conversions happen in
:class:`Environment` only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SimLayout, build_transmission_matrices


class ChannelModelError(ValueError):
    """Raised when channel statistics are physically inconsistent."""


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watt(dbm):
    return db_to_linear(dbm) * 1e-3


@dataclass(frozen=True)
class Environment:
    """Propagation environment around the BS.

    ``c0_db=None`` computes the reference loss from the free-space formula
    ``(lambda / (4*pi*d0))**2`` instead of using a fixed value.
    """

    tx_power_dbm: float = 10.0
    noise_dbm: float = -104.0
    pathloss_exp: float = 3.5
    bs_height: float = 10.0
    ue_spacing: float = 10.0
    bs_gain_dbi: float = 5.0
    ue_gain_dbi: float = 0.0
    c0_db: float | None = -40.0
    d0: float = 1.0
    bandwidth_hz: float = 10e6  # recorded only; rates are per Hz

    @property
    def tx_power(self) -> float:
        return float(dbm_to_watt(self.tx_power_dbm))

    @property
    def noise_power(self) -> float:
        return float(dbm_to_watt(self.noise_dbm))

    def reference_loss(self, wavelength=None) -> float:
        if self.c0_db is not None:
            return float(db_to_linear(self.c0_db))
        if wavelength is None:
            raise ChannelModelError("free-space reference loss needs the wavelength")
        return (wavelength / (4 * np.pi * self.d0)) ** 2


def user_distance(k, env: Environment, sim_thickness=0.0):
    """Distance from the radiating aperture to UE ``k`` (1-based)."""
    return float(np.hypot(env.bs_height - sim_thickness, env.ue_spacing * (k - 1)))


def path_loss(k, env: Environment, sim_thickness=0.0, wavelength=None):
    """Linear large-scale gain of UE ``k``, antenna gains included."""
    d = user_distance(k, env, sim_thickness)
    if d < env.d0:
        raise ChannelModelError(f"UE {k} at {d:.4g} m is closer than the reference distance {env.d0} m")
    gains = db_to_linear(env.bs_gain_dbi + env.ue_gain_dbi)
    return float(gains * env.reference_loss(wavelength) * (d / env.d0) ** (-env.pathloss_exp))


def path_losses(K, env: Environment, sim_thickness=0.0, wavelength=None):
    return np.array([path_loss(k, env, sim_thickness, wavelength) for k in range(1, K + 1)])


def correlation_matrix(layout: SimLayout) -> np.ndarray:
    """Isotropic-scattering correlation ``sinc(2 d / lambda)`` of the last layer."""
    return np.sinc(2 * layout.in_plane_distances() / layout.wavelength)


def correlation_factor(R, tol=1e-10):
    """PSD square root ``F`` with ``F @ F.conj().T == R``.

    Uses a symmetric eigendecomposition, because the sinc correlation is
    frequently singular and Cholesky would fail. Eigenvalues in
    ``[-tol, 0)`` are clipped to zero.
    """
    R = np.asarray(R)
    vals, vecs = np.linalg.eigh(R)
    if vals.min() < -tol:
        raise ChannelModelError(f"correlation matrix is not PSD (min eigenvalue {vals.min():.3e})")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))).astype(complex)


@dataclass(frozen=True)
class ChannelStatistics:
    R: np.ndarray
    beta: np.ndarray
    sigma2: np.ndarray
    factor: np.ndarray

    @classmethod
    def from_parts(cls, R, beta, sigma2):
        R = np.asarray(R)
        beta = np.asarray(beta, dtype=float)
        sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), beta.shape).copy()
        if not np.allclose(np.diag(R), 1.0):
            raise ChannelModelError("correlation matrix must have unit diagonal")
        if np.any(beta < 0) or np.any(sigma2 <= 0):
            raise ChannelModelError("path losses must be >= 0 and noise powers > 0")
        return cls(R=R, beta=beta, sigma2=sigma2, factor=correlation_factor(R))


def channel_statistics(layout: SimLayout, env: Environment) -> ChannelStatistics:
    cfg = layout.config
    beta = path_losses(cfg.K, env, cfg.thickness, cfg.wavelength)
    return ChannelStatistics.from_parts(correlation_matrix(layout), beta, np.full(cfg.K, env.noise_power))


def sample_user_channels(stats: ChannelStatistics, rng: np.random.Generator) -> np.ndarray:
    """Draw ``h_k ~ CN(0, beta_k R)``; row k of the result is ``h_k``."""
    K, N = stats.beta.size, stats.factor.shape[0]
    z = (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))) / np.sqrt(2)
    return np.sqrt(stats.beta)[:, None] * (z @ stats.factor.T)


@dataclass(frozen=True)
class ChannelSet:
    """One realization: SIM transmission matrices plus user channels."""

    W: list
    h: np.ndarray
    sigma2: np.ndarray
    stats: ChannelStatistics | None = None
    seed: int | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.h)):
            raise ChannelModelError("user channels must be finite")
        N = self.W[0].shape[0]
        if self.h.ndim != 2 or self.h.shape[1] != N:
            raise ChannelModelError(f"user channels must be K x {N}, got {self.h.shape}")
        if any(w.shape != (N, N) for w in self.W[1:]):
            raise ChannelModelError("inter-layer matrices must be N x N")

    @property
    def K(self):
        return self.h.shape[0]

    @property
    def N(self):
        return self.W[0].shape[0]

    @property
    def L(self):
        return len(self.W)


def sample_channel_set(layout: SimLayout, env: Environment, rng, seed=None) -> ChannelSet:
    stats = channel_statistics(layout, env)
    h = sample_user_channels(stats, rng)
    return ChannelSet(W=build_transmission_matrices(layout), h=h, sigma2=stats.sigma2, stats=stats, seed=seed)

"""
Forward model of the SIM: cascaded wave-domain beamformer, per-link
gains, SINR and sum rate (bits/s/Hz).

Phase tensors are ``L x N`` arrays; row ``l`` holds the phases of layer
``l+1``. User channels are stored as rows ``h_k`` and enter as ``h_k^H``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet


@dataclass(frozen=True)
class PhaseConfig:
    """Phase shifts of every meta-atom.

    Discrete configurations hold integer codebook indices in ``[0, 2**bits)``;
    continuous ones (``bits is None``) hold real phases in ``values``.
    """

    indices: np.ndarray | None = None
    bits: int | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.bits is None:
            if self.values is None:
                raise ValueError("continuous PhaseConfig needs values")
            vals = np.array(self.values, dtype=float)
            if vals.ndim != 2 or not np.all(np.isfinite(vals)):
                raise ValueError("phase values must be a finite L x N array")
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)
            return
        if int(self.bits) != self.bits or self.bits < 1:
            raise ValueError(f"bits must be an integer >= 1, got {self.bits!r}")
        idx = np.array(self.indices, dtype=np.int64)
        if idx.ndim != 2:
            raise ValueError("phase indices must be an L x N array")
        if np.any(idx < 0) or np.any(idx >= 2**self.bits):
            raise ValueError(f"phase indices must lie in [0, {2 ** self.bits})")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "bits", int(self.bits))

    @classmethod
    def continuous(cls, theta):
        return cls(values=theta)

    @classmethod
    def random(cls, L, N, bits, rng):
        return cls(indices=rng.integers(0, 2**bits, size=(L, N)), bits=bits)

    @property
    def is_discrete(self) -> bool:
        return self.bits is not None

    @property
    def step(self) -> float:
        return 2 * np.pi / 2**self.bits

    @property
    def theta(self) -> np.ndarray:
        if self.bits is None:
            return self.values
        return self.indices * self.step

    @property
    def shape(self):
        return self.theta.shape

    def phasors(self) -> np.ndarray:
        return np.exp(1j * self.theta)


def codebook(bits) -> np.ndarray:
    return np.arange(2**bits) * (2 * np.pi / 2**bits)


def _theta(phases):
    return phases.theta if isinstance(phases, PhaseConfig) else np.asarray(phases, dtype=float)


def cascade(phases, channels: ChannelSet, include_feed=True) -> np.ndarray:
    """``Phi^L W^L ... Phi^2 W^2 Phi^1`` applied to ``W^1`` (or to I).

    Evaluated right to left so only matrix products with the feed block
    (N x M) are formed when ``include_feed`` is set.
    """
    theta = _theta(phases)
    W = channels.W
    if theta.shape != (len(W), channels.N):
        raise ValueError(f"phase tensor must be {len(W)} x {channels.N}, got {theta.shape}")
    e = np.exp(1j * theta)
    x = W[0] if include_feed else np.eye(channels.N, dtype=complex)
    x = e[0][:, None] * x
    for l in range(1, len(W)):
        x = e[l][:, None] * (W[l] @ x)
    return x


def gain_matrix(cascaded, h) -> np.ndarray:
    """``g[k, k'] = |h_k^H cascaded[:, k']|**2``."""
    return np.abs(np.conj(h) @ cascaded) ** 2


def sinr_and_rate(g, p, sigma2):
    """Per-user SINR and the sum rate ``sum log2(1 + gamma_k)``."""
    g = np.asarray(g, dtype=float)
    p = np.asarray(p, dtype=float)
    received = g * p[None, :]
    signal = np.diag(received)
    interference = received.sum(axis=1) - signal
    gamma = signal / (interference + sigma2)
    return gamma, float(np.sum(np.log2(1 + gamma)))


def sum_rate(phases, channels: ChannelSet, p) -> float:
    return sinr_and_rate(gain_matrix(cascade(phases, channels), channels.h), p, channels.sigma2)[1]


def rate_norm_bound(channels: ChannelSet, p) -> float:
    """Phase-independent upper bound on the sum rate.

    Each phase layer is unitary, so ``|h^H G w| <= ||h|| prod ||W^l||_2``;
    dropping interference then bounds every SINR.
    """
    p = np.asarray(p, dtype=float)
    norm = np.prod([np.linalg.norm(w, 2) for w in channels.W])
    snr = np.sum(np.abs(channels.h) ** 2, axis=1) * norm**2 * p / channels.sigma2
    return float(np.sum(np.log2(1 + snr)))

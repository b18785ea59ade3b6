"""
Physical layout of a stacked intelligent metasurface (SIM) and the
diffraction transmission matrices between its layers.

Meta-atoms are indexed row-major along x, then y: atom ``n`` (1-based)
sits at column ``mod(n-1, Nx)`` and row ``ceil(n/Nx) - 1``. The BS
antennas form a uniform linear array on the x-axis, centred on the
z-axis, and layer ``l`` lies in the plane ``z = l * d_layer``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0


class LayoutError(ValueError):
    """Invalid SIM layout parameters."""


@dataclass(frozen=True)
class SimLayoutConfig:
    """User-facing description of a SIM transmitter.

    Lengths left as ``None`` take their default relative to the wavelength:
    ``sim_thickness = 5*lambda`` and every spacing/element size ``lambda/2``.
    """

    M: int = 4
    K: int = 4
    L: int = 7
    Nx: int = 7
    Ny: int = 7
    carrier_freq: float = 28e9
    sim_thickness: float | None = None
    element_size: float | None = None
    antenna_spacing: float | None = None
    atom_spacing: float | None = None

    def __post_init__(self):
        for name in ("M", "K", "L", "Nx", "Ny"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise LayoutError(f"{name} must be an integer >= 1, got {value!r}")
        if self.M != self.K:
            raise LayoutError(f"M must equal K (antenna selection is not modelled), got M={self.M}, K={self.K}")
        if not self.carrier_freq > 0:
            raise LayoutError(f"carrier_freq must be positive, got {self.carrier_freq!r}")
        for name in ("sim_thickness", "element_size", "antenna_spacing", "atom_spacing"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise LayoutError(f"{name} must be positive, got {value!r}")

    @property
    def N(self) -> int:
        return self.Nx * self.Ny

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    def _or_half_wave(self, value):
        return self.wavelength / 2 if value is None else float(value)

    @property
    def thickness(self) -> float:
        return 5 * self.wavelength if self.sim_thickness is None else float(self.sim_thickness)

    @property
    def layer_spacing(self) -> float:
        return self.thickness / self.L

    @property
    def element_area(self) -> float:
        size = self._or_half_wave(self.element_size)
        return size * size

    @property
    def atom_pitch(self) -> float:
        return self._or_half_wave(self.atom_spacing)

    @property
    def antenna_pitch(self) -> float:
        return self._or_half_wave(self.antenna_spacing)


@dataclass(frozen=True)
class SimLayout:
    """Resolved geometry for a :class:`SimLayoutConfig`.

    ``origin`` shifts the reported 3-D positions only; every matrix derived
    from the layout depends on index offsets and spacings, so it is
    translation invariant by construction.
    """

    config: SimLayoutConfig
    origin: tuple = (0.0, 0.0, 0.0)
    antenna_positions: np.ndarray = field(init=False, repr=False)
    atom_positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cfg = self.config
        ox, oy, oz = (float(c) for c in self.origin)
        m = np.arange(1, cfg.M + 1)
        ant = np.zeros((cfg.M, 3))
        ant[:, 0] = (m - (cfg.M + 1) / 2) * cfg.antenna_pitch + ox
        ant[:, 1] = oy
        ant[:, 2] = oz
        xy = _atom_offsets(cfg.Nx, cfg.Ny) * cfg.atom_pitch
        atoms = np.zeros((cfg.L, cfg.N, 3))
        atoms[:, :, 0] = xy[:, 0] + ox
        atoms[:, :, 1] = xy[:, 1] + oy
        atoms[:, :, 2] = (np.arange(1, cfg.L + 1) * cfg.layer_spacing)[:, None] + oz
        ant.setflags(write=False)
        atoms.setflags(write=False)
        object.__setattr__(self, "antenna_positions", ant)
        object.__setattr__(self, "atom_positions", atoms)

    @property
    def wavelength(self) -> float:
        return self.config.wavelength

    @property
    def layer_spacing(self) -> float:
        return self.config.layer_spacing

    def in_plane_distances(self) -> np.ndarray:
        """N x N in-plane meta-atom separations used for diffraction and correlation."""
        cfg = self.config
        n = np.arange(1, cfg.N + 1)
        return _index_distance(np.abs(n[:, None] - n[None, :]), cfg.Nx, cfg.atom_pitch)

    def inter_layer_distances(self) -> np.ndarray:
        """N x N propagation distances between atoms of adjacent layers."""
        return np.sqrt(self.layer_spacing**2 + self.in_plane_distances() ** 2)

    def feed_distances(self) -> np.ndarray:
        """N x M distances from each antenna to each first-layer atom."""
        cfg = self.config
        n = np.arange(1, cfg.N + 1)
        m = np.arange(1, cfg.M + 1)
        col = np.mod(n - 1, cfg.Nx) - (cfg.Nx - 1) / 2
        row = np.ceil(n / cfg.Nx) - (cfg.Ny + 1) / 2
        dx = col[:, None] * cfg.atom_pitch - (m[None, :] - (cfg.M + 1) / 2) * cfg.antenna_pitch
        dy = row[:, None] * cfg.atom_pitch
        return np.sqrt(self.layer_spacing**2 + dx**2 + dy**2)


def _atom_offsets(Nx, Ny):
    n = np.arange(1, Nx * Ny + 1)
    col = np.mod(n - 1, Nx) - (Nx - 1) / 2
    row = np.ceil(n / Nx) - (Ny + 1) / 2
    return np.stack([col, row], axis=1)


def _index_distance(diff, Nx, pitch):
    diff = np.asarray(diff)
    return pitch * np.sqrt((diff // Nx) ** 2 + np.mod(diff, Nx) ** 2)


def meta_atom_distance(n, n2, Nx, wavelength, N=None):
    """In-plane distance between meta-atoms ``n`` and ``n2`` (1-based).

    Uses the row-major index arithmetic
    ``(lambda/2) * sqrt(floor(|n-n2|/Nx)**2 + mod(|n-n2|, Nx)**2)``.
    """
    if N is None:
        N = np.inf
    for idx in (n, n2):
        if int(idx) != idx or not 1 <= idx <= N:
            raise LayoutError(f"meta-atom index {idx!r} out of range [1, {N}]")
    if int(Nx) != Nx or Nx < 1:
        raise LayoutError(f"Nx must be an integer >= 1, got {Nx!r}")
    return float(_index_distance(abs(int(n) - int(n2)), int(Nx), wavelength / 2))


def diffraction_coefficient(d, cos_chi, wavelength, area):
    """Rayleigh-Sommerfeld transmission coefficient between two point radiators.

    ``(area*cos_chi/d) * (1/(2*pi*d) - 1j/wavelength) * exp(2j*pi*d/wavelength)``.
    Works elementwise on arrays.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise LayoutError("diffraction distance must be positive (coincident elements)")
    if not (wavelength > 0 and area > 0):
        raise LayoutError("wavelength and area must be positive")
    out = (area * np.asarray(cos_chi) / d) * (1 / (2 * np.pi * d) - 1j / wavelength) * np.exp(2j * np.pi * d / wavelength)
    return out[()] if out.ndim == 0 else out


def build_transmission_matrices(layout: SimLayout) -> list[np.ndarray]:
    """Return ``[W1, W2, ..., WL]``.

    ``W1`` is N x M (column m is the feed vector of antenna m); the rest
    are N x N inter-layer matrices, all identical for equally spaced layers.
    """
    cfg = layout.config
    lam, area, d_layer = cfg.wavelength, cfg.element_area, cfg.layer_spacing
    d_feed = layout.feed_distances()
    mats = [diffraction_coefficient(d_feed, d_layer / d_feed, lam, area)]
    if cfg.L > 1:
        d = layout.inter_layer_distances()
        w = diffraction_coefficient(d, d_layer / d, lam, area)
        w.setflags(write=False)
        mats.extend([w] * (cfg.L - 1))
    return mats

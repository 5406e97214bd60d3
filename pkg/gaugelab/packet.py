"""
Positive-frequency wave packets on a uniform momentum grid.

A packet is a set of normalized amplitudes alpha(k) on the nodes of a KGrid.
Its field is the discrete form of the standard packet

    psi(x, t) = sum_k dk^d / sqrt((2 pi)^d 2 k0) * alpha(k) * exp(i(k.x - w(k) t))

evaluated exactly with an inverse FFT on the dual position grid.
"""
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import fft

from .errors import DimensionMismatch, GridTooNarrow, ZeroNorm, ZeroWeight

MARGIN_NODES = 4
LOCALIZATION_TOL = 1e-12
NORM_TOL = 1e-10
SUPPORT_SIGMAS = 6.0


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar, c, m and q. Natural units with a negative unit charge by default."""
    hbar: float = 1.0
    c: float = 1.0
    m: float = 1.0
    q: float = -1.0

    def __post_init__(self):
        for name in ("hbar", "c", "m"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not np.isfinite(self.q) or self.q == 0:
            raise ValueError(f"q must be nonzero and finite, got {self.q}")

    @property
    def compton_wavenumber(self):
        """mu = mc/hbar."""
        return self.m * self.c / self.hbar

    @property
    def gamma(self):
        """Coupling q/hbar of the covariant derivative."""
        return self.q / self.hbar

    @property
    def rest_frequency(self):
        return self.m * self.c ** 2 / self.hbar


def _per_axis(value, dim, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"{name} needs {dim} components, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class KGrid:
    """
    Uniform momentum grid and its dual position grid.

    Node j on an axis sits at offset + (j - points/2) * spacing. The offset
    must be a multiple of half a spacing: whole multiples keep k = 0 on the
    lattice, half multiples give a staggered lattice with no node on the
    coordinate planes.
    """
    dim: int
    points: int
    spacing: tuple
    offset: tuple = None

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ValueError(f"dim must be 1 or 3, got {self.dim}")
        if self.points <= 0 or self.points % 2:
            raise ValueError(f"points must be a positive even integer, got {self.points}")
        spacing = _per_axis(self.spacing, self.dim, "spacing")
        if np.any(spacing <= 0):
            raise ValueError("spacing must be positive")
        offset = _per_axis(0.0 if self.offset is None else self.offset, self.dim, "offset")
        halves = 2.0 * offset / spacing
        if np.any(np.abs(halves - np.round(halves)) > 1e-9 * np.maximum(1.0, np.abs(halves))):
            raise ValueError("offset must be a multiple of half the spacing")
        object.__setattr__(self, "spacing", tuple(float(s) for s in spacing))
        object.__setattr__(self, "offset", tuple(float(o) for o in offset))

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def size(self):
        return self.points ** self.dim

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    @property
    def dk_volume(self):
        return float(np.prod(self.spacing))

    @property
    def x_spacing(self):
        return tuple(2.0 * np.pi / (self.points * s) for s in self.spacing)

    @property
    def dx_volume(self):
        return float(np.prod(self.x_spacing))

    @property
    def staggered(self):
        return any(round(2.0 * o / s) % 2 == 1 for o, s in zip(self.offset, self.spacing))

    @cached_property
    def k_axes(self):
        j = np.arange(self.points) - self.points // 2
        return tuple(o + j * s for o, s in zip(self.offset, self.spacing))

    @cached_property
    def x_axes(self):
        j = np.arange(self.points) - self.points // 2
        return tuple(j * s for s in self.x_spacing)

    @cached_property
    def k_vectors(self):
        return np.stack(np.meshgrid(*self.k_axes, indexing="ij"))

    @cached_property
    def x_vectors(self):
        return np.stack(np.meshgrid(*self.x_axes, indexing="ij"))

    @cached_property
    def k_norm_sq(self):
        return np.sum(self.k_vectors ** 2, axis=0)

    @cached_property
    def offset_phase(self):
        """exp(i k_offset . x) on the position grid."""
        arg = sum(o * x for o, x in zip(self.offset, self.x_vectors))
        return np.exp(1j * arg)

    @cached_property
    def margin_mask(self):
        """True on nodes within MARGIN_NODES of any boundary."""
        idx = np.arange(self.points)
        edge = (idx < MARGIN_NODES) | (idx >= self.points - MARGIN_NODES)
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            view = [np.newaxis] * self.dim
            view[axis] = slice(None)
            mask |= edge[tuple(view)]
        return mask

    @property
    def k_extent(self):
        return tuple((float(k[0]), float(k[-1])) for k in self.k_axes)

    @property
    def k_max(self):
        """Largest |k| on the grid."""
        return float(np.sqrt(sum(max(lo * lo, hi * hi) for lo, hi in self.k_extent)))

    @property
    def nyquist(self):
        return tuple(np.pi / dx for dx in self.x_spacing)

    def centered(self):
        """Same grid with the band centered on k = 0, used for real potentials."""
        return replace(self, offset=(0.0,) * self.dim)

    def same_lattice(self, other):
        return (self.dim == other.dim and self.points == other.points
                and np.allclose(self.spacing, other.spacing, rtol=1e-12, atol=0.0))


def to_spectrum(grid, values):
    """Coefficients c with values(x) = sum_j c_j exp(i k_j . x) on the grid's band."""
    shifted = fft.ifftshift(values * np.conj(grid.offset_phase), axes=grid.axes)
    return fft.fftshift(fft.fftn(shifted, axes=grid.axes), axes=grid.axes) / grid.size


def from_spectrum(grid, coeffs):
    """sum_j c_j exp(i k_j . x) on every position node."""
    shifted = fft.ifftshift(coeffs, axes=grid.axes)
    values = fft.fftshift(fft.ifftn(shifted, axes=grid.axes), axes=grid.axes)
    return values * grid.size * grid.offset_phase


def spectral_derivative(grid, values, axis):
    """d/dx_axis of a field whose spectrum lies in the grid's band."""
    return from_spectrum(grid, 1j * grid.k_vectors[axis] * to_spectrum(grid, values))


def spectral_laplacian(grid, values):
    return from_spectrum(grid, -grid.k_norm_sq * to_spectrum(grid, values))


def dispersion(k, constants):
    """w(k) = c sqrt(|k|^2 + (mc/hbar)^2). k is a scalar or has components on axis 0."""
    k = np.asarray(k, dtype=float)
    k_sq = k ** 2 if k.ndim == 0 else np.sum(k ** 2, axis=0)
    return constants.c * np.sqrt(k_sq + constants.compton_wavenumber ** 2)


@dataclass(frozen=True, eq=False)
class MomentumPacket:
    """Normalized amplitudes alpha(k), sum |alpha|^2 dk^d = 1."""
    grid: KGrid
    alpha: np.ndarray
    constants: PhysicalConstants = PhysicalConstants()
    sigma: float = 1.0

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=complex)
        if alpha.shape != self.grid.shape:
            raise ValueError(f"alpha has shape {alpha.shape}, grid is {self.grid.shape}")
        total = float(np.sum(np.abs(alpha) ** 2) * self.grid.dk_volume)
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"amplitudes are not normalized (sum = {total!r}); use normalize()")
        edge = np.abs(alpha[self.grid.margin_mask])
        if edge.size and edge.max() >= LOCALIZATION_TOL:
            raise GridTooNarrow(
                f"amplitude {edge.max():.3e} within {MARGIN_NODES} nodes of the grid boundary")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @property
    def probability(self):
        """|alpha|^2 dk^d per node."""
        return np.abs(self.alpha) ** 2 * self.grid.dk_volume

    @cached_property
    def k0(self):
        """Time component w(k)/c of every node's wave vector, always positive."""
        return dispersion(self.grid.k_vectors, self.constants) / self.constants.c

    @property
    def mean_wavevector(self):
        p = self.probability
        return np.array([np.sum(p * k) for k in self.grid.k_vectors])

    def translated(self, x0):
        """Same packet moved by x0 in position space (phase ramp exp(-i k.x0))."""
        x0 = _per_axis(x0, self.grid.dim, "x0")
        ramp = np.exp(-1j * np.tensordot(x0, self.grid.k_vectors, axes=1))
        return replace(self, alpha=self.alpha * ramp)

    def with_phase(self, z):
        return replace(self, alpha=self.alpha * (z / abs(z)))


@dataclass(frozen=True, eq=False)
class FieldState:
    """
    psi on the position grid dual to `grid`. dpsi_dt is the exact time
    derivative when the field was synthesized from a packet, otherwise None.
    """
    grid: KGrid
    psi: np.ndarray
    t: float = 0.0
    constants: PhysicalConstants = PhysicalConstants()
    dpsi_dt: np.ndarray = None

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != self.grid.shape:
            raise ValueError(f"psi has shape {psi.shape}, grid is {self.grid.shape}")
        object.__setattr__(self, "psi", psi)
        if self.dpsi_dt is not None:
            object.__setattr__(self, "dpsi_dt", np.asarray(self.dpsi_dt, dtype=complex))

    @property
    def norm_sq(self):
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.dx_volume)

    def is_localized(self, tol=LOCALIZATION_TOL):
        edge = np.abs(self.psi[self.grid.margin_mask])
        return not edge.size or edge.max() < tol

    def replace(self, **changes):
        return replace(self, **changes)


def _check_support(grid, center, half_width):
    for axis, (lo, hi) in enumerate(grid.k_extent):
        if center[axis] - half_width < lo or center[axis] + half_width > hi:
            raise GridTooNarrow(
                f"support [{center[axis] - half_width:g}, {center[axis] + half_width:g}] "
                f"exceeds grid axis {axis} extent [{lo:g}, {hi:g}]")


def gaussian_amplitude(grid, k0, delta_k):
    """Raw a(k) = exp(-|k - k0|^2 / (4 delta_k^2)); |a|^2 has standard deviation delta_k."""
    if delta_k <= 0:
        raise ValueError("delta_k must be positive")
    k0 = _per_axis(k0, grid.dim, "k0")
    _check_support(grid, k0, SUPPORT_SIGMAS * delta_k)
    dist_sq = sum((k - c) ** 2 for k, c in zip(grid.k_vectors, k0))
    return np.exp(-dist_sq / (4.0 * delta_k ** 2))


def unit_directions(grid):
    """k/|k| on every node; the origin (if present) is given +z."""
    k_mag = np.sqrt(grid.k_norm_sq)
    safe = np.where(k_mag > 0, k_mag, 1.0)
    directions = grid.k_vectors / safe
    if grid.dim == 3:
        directions[2] = np.where(k_mag > 0, directions[2], 1.0)
    return directions


def shell_amplitude(grid, k_mag, delta_k, angular_weight=None):
    """
    Raw outgoing-shell amplitudes angular_weight(k_hat) * exp(-(|k| - k_mag)^2 / (4 delta_k^2)).

    angular_weight receives the (3, ...) array of unit directions and returns
    nonnegative weights; None means isotropic.
    """
    if grid.dim != 3:
        raise DimensionMismatch("shell packets need a 3D grid")
    if delta_k <= 0:
        raise ValueError("delta_k must be positive")
    if k_mag - SUPPORT_SIGMAS * delta_k <= 0:
        raise ValueError("shell must stay clear of k = 0 (k_mag > 6 delta_k)")
    reach = k_mag + SUPPORT_SIGMAS * delta_k
    for axis, (lo, hi) in enumerate(grid.k_extent):
        if reach > min(-lo, hi):
            raise GridTooNarrow(f"shell radius {reach:g} exceeds grid axis {axis}")
    radial = np.exp(-(np.sqrt(grid.k_norm_sq) - k_mag) ** 2 / (4.0 * delta_k ** 2))
    if angular_weight is None:
        return radial
    weight = np.asarray(angular_weight(unit_directions(grid)), dtype=float)
    weight = np.broadcast_to(weight, grid.shape)
    if np.any(weight < 0):
        raise ValueError("angular weight must be nonnegative")
    if not np.any(weight > 0):
        raise ZeroWeight("angular weight vanishes on every node")
    return weight * radial


def normalize(a, grid, constants=None):
    """alpha = sigma * a with sigma = (sum |a|^2 dk^d)^(-1/2)."""
    a = np.asarray(a, dtype=complex)
    total = float(np.sum(np.abs(a) ** 2) * grid.dk_volume)
    if not np.isfinite(total) or total <= 0:
        raise ZeroNorm("amplitudes are identically zero")
    sigma = total ** -0.5
    return MomentumPacket(grid, sigma * a, constants or PhysicalConstants(), sigma)


def synthesize_amplitudes(grid, amplitudes, constants, t=0.0):
    """Field of arbitrary (not necessarily normalized) amplitudes, with its time derivative."""
    omega = dispersion(grid.k_vectors, constants)
    measure = grid.dk_volume / np.sqrt((2.0 * np.pi) ** grid.dim * 2.0 * omega / constants.c)
    coeffs = measure * np.asarray(amplitudes, dtype=complex) * np.exp(-1j * omega * t)
    return FieldState(grid, from_spectrum(grid, coeffs), t, constants,
                      dpsi_dt=from_spectrum(grid, -1j * omega * coeffs))


def synthesize(packet, t=0.0):
    return synthesize_amplitudes(packet.grid, packet.alpha, packet.constants, t)


def gaussian_field(grid, x0, sigma, k0, constants=None):
    """exp(-|x - x0|^2 / (4 sigma^2) + i k0.x), normalized so that sum |psi|^2 dx^d = 1."""
    x0 = _per_axis(x0, grid.dim, "x0")
    k0 = _per_axis(k0, grid.dim, "k0")
    dist_sq = sum((x - c) ** 2 for x, c in zip(grid.x_vectors, x0))
    phase = np.tensordot(k0, grid.x_vectors, axes=1)
    psi = np.exp(-dist_sq / (4.0 * sigma ** 2) + 1j * phase)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx_volume)
    return FieldState(grid, psi, 0.0, constants or PhysicalConstants())

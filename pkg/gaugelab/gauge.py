"""
The electromagnetic connection A_mu = (phi/c, A_1, ..., A_d), its curvature,
gauge transformations and the current identity of the coupled Lagrangian.

Conventions:
    D_mu = d_mu + i (q/hbar) A_mu
    psi' = exp(-i (q/hbar) lam) psi,   A'_mu = A_mu + d_mu lam

EMPotential stores the lower-index spatial components A_i. The Maxwell
3-vector potential is -A_i, so the kinetic momentum of a low-energy state is
hbar k + q A_i.
"""
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import fft
from scipy.special import erf

from .errors import DimensionMismatch, GridMismatch, RoughLambda, RoughPotential
from .noether import charge_density, current_density, field_charge, time_derivative
from .packet import PhysicalConstants, spectral_derivative, synthesize

SMOOTH_CUTOFF = 0.8
SMOOTH_TOL = 1e-8
WINDOW_EDGE = 3.0       # erf edge width, in position spacings
WINDOW_CLEARANCE = 6.0  # edge widths between plateau edge and boundary
INTERIOR_CLEARANCE = 5.0


def high_frequency_fraction(grid, values):
    """Share of spectral power above SMOOTH_CUTOFF * Nyquist on any axis."""
    values = np.asarray(values)
    power = np.abs(fft.fftn(values, axes=grid.axes)) ** 2
    total = float(np.sum(power))
    if total == 0.0:
        return 0.0
    high = np.zeros(grid.shape, dtype=bool)
    for axis, dx in enumerate(grid.x_spacing):
        k = np.abs(fft.fftfreq(grid.points, d=dx)) * 2.0 * np.pi
        view = [np.newaxis] * grid.dim
        view[axis] = slice(None)
        high |= (k > SMOOTH_CUTOFF * grid.nyquist[axis])[tuple(view)]
    return float(np.sum(power[..., high]) / total)


def _real_derivative(grid, values, axis):
    return spectral_derivative(grid.centered(), values, axis).real


@dataclass(frozen=True, eq=False)
class EMPotential:
    """
    Static potentials on the position grid of `grid`: phi has the grid's shape,
    A has shape (d, *grid.shape). Missing parts are zero.
    """
    grid: object
    phi: np.ndarray = None
    A: np.ndarray = None
    constants: PhysicalConstants = PhysicalConstants()
    static: bool = field(default=True, init=False)

    def __post_init__(self):
        grid = self.grid
        phi = np.zeros(grid.shape) if self.phi is None else np.array(self.phi, dtype=float)
        A = np.zeros((grid.dim,) + grid.shape) if self.A is None else np.array(self.A, dtype=float)
        if phi.shape != grid.shape:
            raise ValueError(f"phi has shape {phi.shape}, grid is {grid.shape}")
        if A.shape != (grid.dim,) + grid.shape:
            raise ValueError(f"A has shape {A.shape}, expected {(grid.dim,) + grid.shape}")
        for name, values in [("phi", phi)] + [(f"A[{i}]", a) for i, a in enumerate(A)]:
            share = high_frequency_fraction(grid, values)
            if share >= SMOOTH_TOL:
                raise RoughPotential(f"{name} carries {share:.2e} of its power near Nyquist")
        phi.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "A", A)

    def component(self, mu):
        """Lower-index A_mu; A_0 = phi/c."""
        return self.phi / self.constants.c if mu == 0 else self.A[mu - 1]

    @property
    def vector_potential(self):
        """The Maxwell 3-vector potential, -A_i."""
        return -self.A

    @property
    def has_vector_part(self):
        return bool(np.any(self.A != 0.0))

    @property
    def is_zero(self):
        return not self.has_vector_part and not np.any(self.phi != 0.0)

    def uniform_vector_part(self, rtol=1e-12):
        """The constant value of each A_i, or None when A varies over the grid."""
        values = []
        for a in self.A:
            mean = float(np.mean(a))
            if np.max(np.abs(a - mean)) > rtol * max(1.0, abs(mean)):
                return None
            values.append(mean)
        return np.array(values)


def _check_grid(psi, em):
    if not psi.grid.same_lattice(em.grid):
        raise GridMismatch(f"field grid {psi.grid.shape} does not match potential grid {em.grid.shape}")


def covariant_derivative(psi, em, mu, packet=None):
    """D_mu psi. mu = 0 needs time-derivative data on psi or its packet."""
    _check_grid(psi, em)
    gamma = psi.constants.gamma
    if mu == 0:
        base = time_derivative(psi, packet)
    else:
        base = spectral_derivative(psi.grid, psi.psi, mu - 1)
    return psi.replace(psi=base + 1j * gamma * em.component(mu) * psi.psi, dpsi_dt=None)


def gauge_transform(psi, em, lam):
    """(psi', em') for the static gauge function lam; phi is unchanged."""
    _check_grid(psi, em)
    lam = np.asarray(lam, dtype=float)
    share = high_frequency_fraction(em.grid, lam)
    if share >= SMOOTH_TOL:
        raise RoughLambda(f"gauge function carries {share:.2e} of its power near Nyquist")
    phase = np.exp(-1j * psi.constants.gamma * lam)
    dpsi_dt = None if psi.dpsi_dt is None else phase * psi.dpsi_dt
    grad = np.stack([_real_derivative(em.grid, lam, i) for i in range(em.grid.dim)])
    new_em = EMPotential(em.grid, em.phi, em.A + grad, em.constants)
    return psi.replace(psi=phase * psi.psi, dpsi_dt=dpsi_dt), new_em


def smooth_gauge_function(grid, seed=0, modes=2, amplitude=0.5):
    """Random periodic lam built from Fourier modes with |n_i| <= modes."""
    rng = np.random.default_rng(seed)
    lam = np.zeros(grid.shape)
    lengths = [grid.points * dx for dx in grid.x_spacing]
    for n in itertools.product(range(-modes, modes + 1), repeat=grid.dim):
        if not any(n):
            continue
        arg = sum(2.0 * np.pi * ni * x / length for ni, x, length in zip(n, grid.x_vectors, lengths))
        lam += rng.normal() * np.cos(arg + rng.uniform(0.0, 2.0 * np.pi))
    return amplitude * lam / np.max(np.abs(lam))


@dataclass(frozen=True, eq=False)
class CurvatureTensor:
    """
    F_{mu nu} over d+1 spacetime indices. Only mu < nu is stored, in the
    order of `pairs`; the rest follows from antisymmetry.
    """
    grid: object
    components: np.ndarray

    @property
    def pairs(self):
        return list(itertools.combinations(range(self.grid.dim + 1), 2))

    def __post_init__(self):
        expected = (len(self.pairs),) + self.grid.shape
        components = np.asarray(self.components, dtype=float)
        if components.shape != expected:
            raise ValueError(f"components have shape {components.shape}, expected {expected}")
        object.__setattr__(self, "components", components)

    def component(self, mu, nu):
        if mu == nu:
            return np.zeros(self.grid.shape)
        if mu < nu:
            return self.components[self.pairs.index((mu, nu))]
        return -self.components[self.pairs.index((nu, mu))]

    def full(self):
        n = self.grid.dim + 1
        return np.stack([np.stack([self.component(mu, nu) for nu in range(n)]) for mu in range(n)])

    @property
    def electric(self):
        """F_{0i}, shape (d, ...)."""
        return np.stack([self.component(0, i) for i in range(1, self.grid.dim + 1)])


def curvature(em):
    grid = em.grid
    grads = {}

    def d(axis, mu):
        # static fields: d_0 of anything is zero
        if axis == 0:
            return np.zeros(grid.shape)
        if (axis, mu) not in grads:
            grads[axis, mu] = _real_derivative(grid, em.component(mu), axis - 1)
        return grads[axis, mu]

    pairs = itertools.combinations(range(grid.dim + 1), 2)
    return CurvatureTensor(grid, np.stack([d(mu, nu) - d(nu, mu) for mu, nu in pairs]))


def _permutation_sign(perm):
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def interior_mask(grid):
    """Nodes where every axis window equals one to roundoff."""
    mask = np.ones(grid.shape, dtype=bool)
    for x, dx in zip(grid.x_vectors, grid.x_spacing):
        edge, half = _window_geometry(grid.points, dx)
        mask &= np.abs(x) <= half - INTERIOR_CLEARANCE * edge
    return mask


def bianchi_residual(F):
    """
    max |eps^{abmn} d_b F_mn| over interior nodes. With two spacetime
    dimensions the identity is vacuous and the residual is 0.0.
    """
    grid = F.grid
    if grid.dim == 1:
        return 0.0
    if grid.dim != 3:
        raise DimensionMismatch("the Bianchi identity is checked in 3D")
    derivs = {}
    residual = np.zeros((4,) + grid.shape)
    for perm in itertools.permutations(range(4)):
        alpha, beta, mu, nu = perm
        if beta == 0:
            continue
        if (beta, mu, nu) not in derivs:
            derivs[beta, mu, nu] = _real_derivative(grid, F.component(mu, nu), beta - 1)
        residual[alpha] += _permutation_sign(perm) * derivs[beta, mu, nu]
    interior = interior_mask(grid)
    if not np.any(interior):
        interior = ~grid.margin_mask
    return float(np.max(np.abs(residual[:, interior])))


def _window_geometry(points, dx):
    edge = WINDOW_EDGE * dx
    half = points * dx / 2.0 - WINDOW_CLEARANCE * edge
    return edge, half


def plateau_window(x, points, dx):
    """Smooth top hat equal to one on the interior and vanishing at the boundary."""
    edge, half = _window_geometry(points, dx)
    return 0.5 * (erf((x + half) / edge) - erf((x - half) / edge))


def _windowed(grid, axis, power=1):
    x = grid.x_vectors[axis]
    return x ** power * plateau_window(x, grid.points, grid.x_spacing[axis])


POTENTIAL_PRESETS = ("zero", "constant", "uniform-e", "uniform-b", "harmonic")


def potential_preset(grid, name, strength=1.0, constants=None):
    """
    Named static potentials. `strength` is the constant phi, the field E along
    x_1, the magnetic curvature F_12 or the angular frequency of the oscillator.
    """
    constants = constants or PhysicalConstants()
    if name == "zero":
        return EMPotential(grid, constants=constants)
    if name == "constant":
        return EMPotential(grid, np.full(grid.shape, float(strength)), constants=constants)
    if name == "uniform-e":
        return EMPotential(grid, -strength * _windowed(grid, 0), constants=constants)
    if name == "uniform-b":
        if grid.dim != 3:
            raise DimensionMismatch("uniform-b needs a 3D grid")
        A = np.zeros((3,) + grid.shape)
        A[0] = -0.5 * strength * _windowed(grid, 1)
        A[1] = 0.5 * strength * _windowed(grid, 0)
        return EMPotential(grid, A=A, constants=constants)
    if name == "harmonic":
        energy = sum(_windowed(grid, axis, power=2) for axis in range(grid.dim))
        phi = 0.5 * constants.m * strength ** 2 * energy / constants.q
        return EMPotential(grid, phi, constants=constants)
    raise ValueError(f"unknown potential preset {name!r}; choose from {', '.join(POTENTIAL_PRESETS)}")


def potential_from_columns(grid, columns, constants=None):
    """
    Potential from columnar node values in C order: a 'phi' column and
    optional 'A1'..'Ad' columns.
    """
    def column(name):
        values = np.asarray(columns[name], dtype=float)
        if values.size != grid.size:
            raise ValueError(f"column {name} has {values.size} values, grid has {grid.size} nodes")
        return values.reshape(grid.shape)

    phi = column("phi") if "phi" in columns else None
    A = None
    if any(f"A{i + 1}" in columns for i in range(grid.dim)):
        A = np.stack([column(f"A{i + 1}") if f"A{i + 1}" in columns else np.zeros(grid.shape)
                      for i in range(grid.dim)])
    return EMPotential(grid, phi, A, constants or PhysicalConstants())


def kinetic_momentum(psi, em, packet=None):
    """
    Gauge-invariant P^mu of the coupled field,
    T^{00} = hbar(|D0 psi|^2 + sum |D_i psi|^2 + mu^2 |psi|^2), T^{0i} = -2 hbar Re((D0 psi)* D_i psi).
    """
    c = psi.constants
    d = [covariant_derivative(psi, em, mu, packet).psi for mu in range(psi.grid.dim + 1)]
    energy = c.hbar * (sum(np.abs(v) ** 2 for v in d) + c.compton_wavenumber ** 2 * np.abs(psi.psi) ** 2)
    dv = psi.grid.dx_volume
    spatial = [-2.0 * c.hbar * np.sum(np.real(np.conj(d[0]) * v)) * dv for v in d[1:]]
    return np.array([np.sum(energy) * dv] + spatial)


@dataclass(frozen=True)
class CurrentIdentityResult:
    numeric: float
    analytic: float
    relative_error: float


def _bump(psi, width=None):
    """Gaussian centered on the field's |psi|^2 centroid, as wide as the field by default."""
    weight = np.abs(psi.psi) ** 2
    weight = weight / np.sum(weight)
    center = [np.sum(weight * x) for x in psi.grid.x_vectors]
    if width is None:
        width = np.sqrt(sum(np.sum(weight * (x - m) ** 2) for x, m in zip(psi.grid.x_vectors, center)))
        width = max(width, 3.0 * max(psi.grid.x_spacing))
    dist_sq = sum((x - m) ** 2 for x, m in zip(psi.grid.x_vectors, center))
    return np.exp(-dist_sq / (2.0 * width ** 2))


def coupled_lagrangian(psi, d0, perturbation, mu):
    """
    L_D on every node for the free field psi with A_mu = perturbation and every
    other component zero, L_D = hbar(|D0 psi|^2 - sum |D_i psi|^2 - mu^2 |psi|^2).
    """
    c = psi.constants
    shift = 1j * c.gamma * perturbation * psi.psi
    total = np.zeros(psi.grid.shape)
    for nu in range(psi.grid.dim + 1):
        base = d0 if nu == 0 else spectral_derivative(psi.grid, psi.psi, nu - 1)
        derivative = base + shift if nu == mu else base
        total += np.abs(derivative) ** 2 if nu == 0 else -np.abs(derivative) ** 2
    total -= c.compton_wavenumber ** 2 * np.abs(psi.psi) ** 2
    return c.hbar * total


def current_identity_check(packet, mu, epsilon=1e-5, bump=None, scheme="central"):
    """
    Compare the A_mu-derivative of the action at A = 0, taken by finite
    differences along epsilon * bump(x), with -(q/hbar) int bump j^mu.

    L_D is quadratic in A, so the central difference is exact up to roundoff;
    scheme="forward" keeps the first-order truncation term.
    """
    psi = synthesize(packet)
    d0 = time_derivative(psi)
    bump = _bump(psi) if bump is None else np.asarray(bump, dtype=float)
    if mu == 0:
        current = charge_density(psi)
    else:
        current = current_density(psi)[mu - 1]
    analytic = float(-psi.constants.gamma * np.sum(bump * current) * psi.grid.dx_volume)

    if scheme == "central":
        lower, step = -epsilon, 2.0 * epsilon
    elif scheme == "forward":
        lower, step = 0.0, epsilon
    else:
        raise ValueError(f"unknown difference scheme {scheme!r}")
    # differences are taken node by node, so nodes the bump misses cancel exactly
    change = (coupled_lagrangian(psi, d0, epsilon * bump, mu)
              - coupled_lagrangian(psi, d0, lower * bump, mu))
    numeric = float(np.sum(change) * psi.grid.dx_volume / step)
    scale = abs(analytic)
    error = abs(numeric - analytic) / scale if scale > 0 else abs(numeric - analytic)
    return CurrentIdentityResult(numeric, analytic, error)


def gauge_audit(packet, em, lam):
    """
    Residuals of gauge covariance and invariance for the packet's field under lam.
    Every entry should vanish to roundoff.
    """
    psi = synthesize(packet)
    psi_t, em_t = gauge_transform(psi, em, lam)
    phase = np.exp(-1j * psi.constants.gamma * np.asarray(lam, dtype=float))

    covariance = []
    for mu in range(psi.grid.dim + 1):
        before = covariant_derivative(psi, em, mu).psi
        after = covariant_derivative(psi_t, em_t, mu).psi
        covariance.append(float(np.linalg.norm(after - phase * before) / np.linalg.norm(before)))

    charge = field_charge(psi, em.phi)
    p_before = kinetic_momentum(psi, em)
    p_after = kinetic_momentum(psi_t, em_t)
    f_before = curvature(em).components
    f_after = curvature(em_t).components
    return {
        "covariance": covariance,
        "charge": abs(field_charge(psi_t, em_t.phi) - charge) / abs(charge),
        "density": float(np.max(np.abs(np.abs(psi_t.psi) ** 2 - np.abs(psi.psi) ** 2))),
        "momentum": float(np.max(np.abs(p_after - p_before)) / np.max(np.abs(p_before))),
        "curvature": float(np.max(np.abs(f_after - f_before))),
        "pure_gauge_curvature": float(np.max(np.abs(curvature(EMPotential(
            em.grid, A=em_t.A - em.A, constants=em.constants)).components))),
        "bianchi": bianchi_residual(curvature(em_t)),
    }

"""
Noether functionals of a packet: charge, 4-momentum, angular momentum and
position, computed through the bra-ket symbol

    <psi|O|psi> = i int [psi* O(d0 psi) - (d0 psi*) O(psi)] d^dx      (Klein-Gordon form)
    <psi|O|psi> = int psi* O psi d^dx                                  (low-energy form)

Operators are small immutable trees; chains apply left to right.
"""
from dataclasses import dataclass

import numpy as np

from .errors import Delocalized, DimensionMismatch, MissingPacket
from .packet import dispersion, from_spectrum, spectral_derivative, synthesize, to_spectrum


class Operator:
    """A linear operator on field values. `apply` gets the values and the FieldState they live on."""

    # numpy scalars must defer to __rmul__
    __array_ufunc__ = None

    def apply(self, values, state):
        raise NotImplementedError

    def then(self, other):
        """Apply self first, then other."""
        return Chain((self, other))

    def __add__(self, other):
        return Sum((self, other))

    def __sub__(self, other):
        return Sum((self, Scaled(-1.0, other)))

    def __rmul__(self, scalar):
        return Scaled(scalar, self)

    def __neg__(self):
        return Scaled(-1.0, self)


@dataclass(frozen=True)
class Identity(Operator):
    def apply(self, values, state):
        return values


@dataclass(frozen=True)
class Coordinate(Operator):
    """Multiply by x_axis (axis counts spatial directions from 0)."""
    axis: int

    def apply(self, values, state):
        return state.grid.x_vectors[self.axis] * values


@dataclass(frozen=True)
class Momentum(Operator):
    """pi_axis = -i hbar d/dx_axis, spectral."""
    axis: int

    def apply(self, values, state):
        return -1j * state.constants.hbar * spectral_derivative(state.grid, values, self.axis)


@dataclass(frozen=True)
class Derivative(Operator):
    """
    Lower-index d_mu. mu = 0 is d/d(ct) of a positive-frequency field and is
    evaluated spectrally as -i w(k)/c; mu >= 1 is the spatial axis mu - 1.
    """
    mu: int

    def apply(self, values, state):
        grid = state.grid
        if self.mu == 0:
            k0 = dispersion(grid.k_vectors, state.constants) / state.constants.c
            return from_spectrum(grid, -1j * k0 * to_spectrum(grid, values))
        return spectral_derivative(grid, values, self.mu - 1)


@dataclass(frozen=True, eq=False)
class Multiply(Operator):
    function: np.ndarray

    def apply(self, values, state):
        return self.function * values


@dataclass(frozen=True)
class Scaled(Operator):
    scalar: complex
    op: Operator

    def apply(self, values, state):
        return self.scalar * self.op.apply(values, state)


@dataclass(frozen=True)
class Sum(Operator):
    ops: tuple

    def apply(self, values, state):
        return sum(op.apply(values, state) for op in self.ops)


@dataclass(frozen=True)
class Chain(Operator):
    ops: tuple

    def apply(self, values, state):
        for op in self.ops:
            values = op.apply(values, state)
        return values


def upper_derivative(mu):
    """d^mu with metric diag(1, -1, -1, -1)."""
    return Derivative(mu) if mu == 0 else -Derivative(mu)


def four_momentum_operator(mu, constants):
    """i hbar d^mu."""
    return complex(1j * constants.hbar) * upper_derivative(mu)


def angular_momentum_operator(axis):
    """(x cross pi)_axis."""
    a, b = (axis + 1) % 3, (axis + 2) % 3
    return Momentum(b).then(Coordinate(a)) - Momentum(a).then(Coordinate(b))


def time_derivative(psi, packet=None):
    """d0 psi = (1/c) dpsi/dt from the packet or from the state's spectral data."""
    if packet is not None:
        dpsi_dt = synthesize(packet, psi.t).dpsi_dt
    elif psi.dpsi_dt is not None:
        dpsi_dt = psi.dpsi_dt
    else:
        raise MissingPacket("time derivative needs the generating packet")
    return dpsi_dt / psi.constants.c


def braket_kg(psi, op, packet=None):
    d0 = time_derivative(psi, packet)
    integrand = np.conj(psi.psi) * op.apply(d0, psi) - np.conj(d0) * op.apply(psi.psi, psi)
    return complex(1j * np.sum(integrand) * psi.grid.dx_volume)


def braket_nr(psi, op):
    return complex(np.sum(np.conj(psi.psi) * op.apply(psi.psi, psi)) * psi.grid.dx_volume)


def charge_density(psi, phi=None, packet=None):
    """
    j0 = i hbar (psi* D0 psi - psi (D0 psi)*), with D0 = d0 + i(q/hbar)(phi/c).
    """
    c = psi.constants
    d0 = time_derivative(psi, packet)
    density = 1j * c.hbar * (np.conj(psi.psi) * d0 - psi.psi * np.conj(d0))
    if phi is not None:
        density = density - 2.0 * c.hbar * c.gamma * phi / c.c * np.abs(psi.psi) ** 2
    return density.real


def field_charge(psi, phi=None, packet=None):
    return float(np.sum(charge_density(psi, phi, packet)) * psi.grid.dx_volume)


def current_density(psi):
    """Spatial j^i = -i hbar (psi* d_i psi - psi d_i psi*), shape (d, ...)."""
    hbar = psi.constants.hbar
    return np.stack([2.0 * hbar * np.imag(np.conj(psi.psi) * spectral_derivative(psi.grid, psi.psi, i))
                     for i in range(psi.grid.dim)])


def noether_charge(packet):
    """int j0 d^dx of the packet's field; hbar for every normalized packet."""
    return field_charge(synthesize(packet))


def noether_momentum(packet):
    """P^mu = hbar sum |alpha|^2 k^mu dk^d, returned as [P0, P1, ..., Pd]."""
    p = packet.probability
    hbar = packet.constants.hbar
    spatial = [hbar * np.sum(p * k) for k in packet.grid.k_vectors]
    return np.array([hbar * np.sum(p * packet.k0)] + spatial)


def canonical_momentum(psi, phi=None, packet=None):
    """
    P^mu from the translation-invariance densities of the Lagrangian,
    T^{00} = hbar[2 Re((D0 psi)* d0 psi) - |D0 psi|^2 + |grad psi|^2 + mu^2 |psi|^2]
    and T^{0i} = -2 hbar Re((D0 psi)* d_i psi).
    """
    c = psi.constants
    d0 = time_derivative(psi, packet)
    big_d0 = d0 if phi is None else d0 + 1j * c.gamma * phi / c.c * psi.psi
    grads = [spectral_derivative(psi.grid, psi.psi, i) for i in range(psi.grid.dim)]
    grad_sq = sum(np.abs(g) ** 2 for g in grads)
    energy = c.hbar * (2.0 * np.real(np.conj(big_d0) * d0) - np.abs(big_d0) ** 2
                       + grad_sq + c.compton_wavenumber ** 2 * np.abs(psi.psi) ** 2)
    dv = psi.grid.dx_volume
    spatial = [-2.0 * c.hbar * np.sum(np.real(np.conj(big_d0) * g)) * dv for g in grads]
    return np.array([np.sum(energy) * dv] + spatial)


def _has_kg_data(psi, packet):
    return packet is not None or psi.dpsi_dt is not None


def angular_momentum(psi, packet=None):
    """
    J = <psi| x cross (-i hbar grad) |psi> about the coordinate origin.
    Uses the Klein-Gordon form when time-derivative data exists, otherwise
    the low-energy form divided by <psi|psi>.
    """
    if psi.grid.dim != 3:
        raise DimensionMismatch("angular momentum needs a 3D field")
    if _has_kg_data(psi, packet):
        return np.array([braket_kg(psi, angular_momentum_operator(a), packet).real for a in range(3)])
    norm = braket_nr(psi, Identity()).real
    return np.array([braket_nr(psi, angular_momentum_operator(a)).real / norm for a in range(3)])


def position_expectation(psi):
    """<x> in the low-energy form, int psi* x psi / int |psi|^2."""
    if not psi.is_localized():
        raise Delocalized("field does not vanish within the boundary margin")
    norm = braket_nr(psi, Identity()).real
    return np.array([braket_nr(psi, Coordinate(i)).real / norm for i in range(psi.grid.dim)])


def commutator_check(psi, i, j):
    """|| (x_i pi_j - pi_j x_i) psi - i hbar delta_ij psi || / || psi ||."""
    x_pi = Momentum(j).then(Coordinate(i)).apply(psi.psi, psi)
    pi_x = Coordinate(i).then(Momentum(j)).apply(psi.psi, psi)
    expected = 1j * psi.constants.hbar * psi.psi if i == j else 0.0
    residual = x_pi - pi_x - expected
    return float(np.linalg.norm(residual) / np.linalg.norm(psi.psi))


def functional_record(packet, t=0.0):
    """Charge, P, J (3D), <x> and both norms of the packet's field at time t."""
    psi = synthesize(packet, t)
    record = {
        "t": float(t),
        "charge": noether_charge(packet),
        "P": [float(v) for v in noether_momentum(packet)],
        "norms": {
            "kg": braket_kg(psi, Identity()).real,
            "low_energy": psi.norm_sq,
        },
    }
    if packet.grid.dim == 3:
        record["J"] = [float(v) for v in angular_momentum(psi)]
    if psi.is_localized():
        record["x"] = [float(v) for v in position_expectation(psi)]
    return record

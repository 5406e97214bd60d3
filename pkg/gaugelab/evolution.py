"""
Time evolution: exact spectral free Klein-Gordon, a reversible leapfrog for
Klein-Gordon in a static scalar potential, split-step Schrodinger, and the
low-energy comparison between the last two.

With V = q phi / hbar the coupled Klein-Gordon equation reads

    psi_tt = c^2 lap psi - c^2 mu^2 psi - 2i V psi_t + V^2 psi

and the minimally coupled Schrodinger equation is

    i hbar psi_t = (hbar k + q A)^2 / 2m psi + q phi psi

with A the stored lower-index components.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .errors import (GridMismatch, NonuniformVectorPotential, NonzeroVectorPotential,
                     TooRelativistic, UnstableStep)
from .gauge import EMPotential
from .noether import canonical_momentum, field_charge, position_expectation
from .packet import (FieldState, KGrid, PhysicalConstants, dispersion, from_spectrum,
                     gaussian_amplitude, normalize, spectral_laplacian, synthesize, to_spectrum)

STABILITY_FACTOR = 0.5
DEFAULT_STEP_FACTOR = 0.1
MAX_LOW_ENERGY_SPEED = 0.3


@dataclass(frozen=True, eq=False)
class KGState:
    """psi and psi_dot = d psi / dt at time t."""
    grid: KGrid
    psi: np.ndarray
    psi_dot: np.ndarray
    t: float = 0.0
    constants: object = None

    def as_field(self):
        return FieldState(self.grid, self.psi, self.t, self.constants, dpsi_dt=self.psi_dot)


def kg_state_from_packet(packet, em=None):
    """
    Initial data of the packet's field. With a scalar potential the velocity
    gets the extra -iV psi of the locally shifted frequency.
    """
    state = synthesize(packet)
    psi_dot = state.dpsi_dt
    if em is not None:
        psi_dot = psi_dot - 1j * packet.constants.gamma * em.phi * state.psi
    return KGState(packet.grid, state.psi, psi_dot, 0.0, packet.constants)


@dataclass
class EvolutionReport:
    """Observables sampled during a run. Drift columns are measured from the first sample."""
    kind: str
    parameters: dict = field(default_factory=dict)
    times: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    charge: list = field(default_factory=list)
    momentum: list = field(default_factory=list)
    position: list = field(default_factory=list)
    discrepancy: list = field(default_factory=list)
    momentum_start: int = 0

    def record(self, t, norm, charge, momentum, position=None, discrepancy=None):
        self.times.append(float(t))
        self.norm.append(float(norm))
        self.charge.append(float(charge))
        self.momentum.append([float(v) for v in momentum])
        if position is not None:
            self.position.append([float(v) for v in position])
        if discrepancy is not None:
            self.discrepancy.append(float(discrepancy))

    @staticmethod
    def _drift(series):
        values = np.asarray(series, dtype=float)
        return values - values[0] if values.size else values

    @property
    def norm_drift(self):
        return self._drift(self.norm)

    @property
    def charge_drift(self):
        return self._drift(self.charge)

    @property
    def momentum_drift(self):
        return self._drift(self.momentum)

    def to_columns(self):
        columns = {"t": list(self.times), "norm": list(self.norm),
                   "norm_drift": list(self.norm_drift), "charge": list(self.charge),
                   "charge_drift": list(self.charge_drift)}
        momentum = np.asarray(self.momentum, dtype=float)
        drift = self.momentum_drift
        for j in range(momentum.shape[1] if momentum.ndim == 2 else 0):
            label = f"P{j + self.momentum_start}"
            columns[label] = list(momentum[:, j])
            columns[label + "_drift"] = list(drift[:, j])
        if len(self.position) == len(self.times):
            for j, series in enumerate(np.asarray(self.position).T):
                columns[f"x{j + 1}"] = list(series)
        if len(self.discrepancy) == len(self.times):
            columns["discrepancy"] = list(self.discrepancy)
        return columns

    def summary(self):
        summary = {
            "kind": self.kind,
            "parameters": self.parameters,
            "samples": len(self.times),
            "t_final": self.times[-1] if self.times else 0.0,
            "max_norm_drift": float(np.max(np.abs(self.norm_drift))) if self.times else 0.0,
            "max_charge_drift": float(np.max(np.abs(self.charge_drift))) if self.times else 0.0,
        }
        if self.momentum:
            summary["max_momentum_drift"] = float(np.max(np.abs(self.momentum_drift)))
        if self.discrepancy:
            summary["final_discrepancy"] = self.discrepancy[-1]
            summary["max_discrepancy"] = max(self.discrepancy)
        return summary


def evolve_free_kg(packet, t):
    """Exact: every mode keeps |alpha| and picks up exp(-i w t)."""
    return synthesize(packet, t)


def max_frequency(grid, em=None, constants=None):
    constants = constants or (em.constants if em is not None else None)
    omega = float(dispersion(grid.k_max, constants))
    if em is not None:
        omega += float(np.max(np.abs(constants.gamma * em.phi)))
    return omega


def stability_bound(grid, em=None, constants=None):
    """Largest leapfrog step accepted, STABILITY_FACTOR / w_max."""
    return STABILITY_FACTOR / max_frequency(grid, em, constants)


def default_time_step(grid, em=None, constants=None):
    return DEFAULT_STEP_FACTOR / max_frequency(grid, em, constants)


def _check_grid(grid, em):
    if not grid.same_lattice(em.grid):
        raise GridMismatch(f"field grid {grid.shape} does not match potential grid {em.grid.shape}")


def _kg_stepper(grid, em, dt):
    """
    One velocity-Verlet step with the velocity coupling -2iV psi_t treated
    implicitly at the half step, which keeps the map time reversible.
    """
    c = em.constants
    V = c.gamma * em.phi
    mass_term = c.c ** 2 * c.compton_wavenumber ** 2 - V ** 2

    def force(psi):
        return c.c ** 2 * spectral_laplacian(grid, psi) - mass_term * psi

    def step(psi, psi_dot):
        half = (psi_dot + 0.5 * dt * force(psi)) / (1.0 + 1j * V * dt)
        psi = psi + dt * half
        psi_dot = half * (1.0 - 1j * V * dt) + 0.5 * dt * force(psi)
        return psi, psi_dot

    return step


def _kg_observables(grid, psi, psi_dot, t, em):
    state = FieldState(grid, psi, t, em.constants, dpsi_dt=psi_dot)
    position = position_expectation(state) if state.is_localized() else None
    return dict(norm=state.norm_sq, charge=field_charge(state, em.phi),
                momentum=canonical_momentum(state, em.phi), position=position)


def evolve_kg_coupled(state, em=None, dt=None, steps=1, record_every=1, pbar=None):
    """
    Leapfrog Klein-Gordon in a static scalar potential. dt may be negative to
    run backwards. Returns the final KGState and an EvolutionReport.
    """
    em = em or EMPotential(state.grid, constants=state.constants)
    _check_grid(state.grid, em)
    if em.has_vector_part:
        raise NonzeroVectorPotential("the Klein-Gordon stepper couples the scalar potential only")
    bound = stability_bound(state.grid, em)
    dt = default_time_step(state.grid, em) if dt is None else float(dt)
    if abs(dt) > bound:
        raise UnstableStep(f"|dt| = {abs(dt):.3e} exceeds the stability bound {bound:.3e}")
    if steps < 0 or record_every < 1:
        raise ValueError("steps must be >= 0 and record_every >= 1")

    report = EvolutionReport("evolve-kg", {"dt": dt, "steps": steps, "stability_bound": bound})
    step = _kg_stepper(state.grid, em, dt)
    psi, psi_dot, t = state.psi, state.psi_dot, state.t
    report.record(t, **_kg_observables(state.grid, psi, psi_dot, t, em))
    iterator = range(1, steps + 1)
    if pbar is not None:
        iterator = pbar(iterator, desc="Klein-Gordon steps")
    for n in iterator:
        psi, psi_dot = step(psi, psi_dot)
        t = state.t + n * dt
        if n % record_every == 0 or n == steps:
            report.record(t, **_kg_observables(state.grid, psi, psi_dot, t, em))
    return KGState(state.grid, psi, psi_dot, t, state.constants), report


def _schrodinger_stepper(grid, em, dt):
    """Strang splitting: half potential phase, full kinetic phase, half potential phase."""
    c = em.constants
    shift = em.uniform_vector_part()
    if shift is None:
        raise NonuniformVectorPotential("split-step Schrodinger accepts only a uniform vector potential")
    momentum = [c.hbar * k + c.q * a for k, a in zip(grid.k_vectors, shift)]
    kinetic = sum(p ** 2 for p in momentum) / (2.0 * c.m)
    kinetic_phase = np.exp(-1j * kinetic * dt / c.hbar)
    half_potential = np.exp(-0.5j * c.q * em.phi * dt / c.hbar)

    def step(psi):
        psi = half_potential * psi
        psi = from_spectrum(grid, kinetic_phase * to_spectrum(grid, psi))
        return half_potential * psi

    return step, shift


def _schrodinger_observables(grid, psi, t, constants, shift):
    state = FieldState(grid, psi, t, constants)
    norm = state.norm_sq
    spectrum = np.abs(to_spectrum(grid, psi)) ** 2
    weights = spectrum / np.sum(spectrum)
    kinetic = [np.sum(weights * (constants.hbar * k + constants.q * a))
               for k, a in zip(grid.k_vectors, shift)]
    position = position_expectation(state) if state.is_localized() else None
    return dict(norm=norm, charge=constants.hbar * norm, momentum=kinetic, position=position)


def evolve_schrodinger(psi, em=None, dt=0.01, steps=1, record_every=1, pbar=None):
    """Split-step evolution of a low-energy field. Returns the final FieldState and a report."""
    em = em or EMPotential(psi.grid, constants=psi.constants)
    _check_grid(psi.grid, em)
    if steps < 0 or record_every < 1:
        raise ValueError("steps must be >= 0 and record_every >= 1")
    step, shift = _schrodinger_stepper(psi.grid, em, dt)

    report = EvolutionReport("evolve-schrodinger", {"dt": dt, "steps": steps}, momentum_start=1)
    values, t = psi.psi, psi.t
    report.record(t, **_schrodinger_observables(psi.grid, values, t, psi.constants, shift))
    iterator = range(1, steps + 1)
    if pbar is not None:
        iterator = pbar(iterator, desc="Schrodinger steps")
    for n in iterator:
        values = step(values)
        t = psi.t + n * dt
        if n % record_every == 0 or n == steps:
            report.record(t, **_schrodinger_observables(psi.grid, values, t, psi.constants, shift))
    return FieldState(psi.grid, values, t, psi.constants), report


def reduce_nonrelativistic(kg, t=None):
    """psi_S = exp(+i m c^2 t / hbar) psi_KG."""
    field_state = kg.as_field() if isinstance(kg, KGState) else kg
    t = field_state.t if t is None else t
    rest = field_state.constants.rest_frequency
    phase = np.exp(1j * rest * t)
    dpsi_dt = None
    if field_state.dpsi_dt is not None:
        dpsi_dt = phase * (field_state.dpsi_dt + 1j * rest * field_state.psi)
    return field_state.replace(psi=phase * field_state.psi, dpsi_dt=dpsi_dt, t=t)


def aligned_discrepancy(values, reference):
    """min over global phases of ||e^{i theta} values - reference|| / ||reference||."""
    a = np.ravel(values)
    b = np.ravel(reference)
    ref_sq = float(np.vdot(b, b).real)
    gap = float(np.vdot(a, a).real) + ref_sq - 2.0 * abs(np.vdot(a, b))
    return math.sqrt(max(gap, 0.0) / ref_sq)


def low_energy_speed(packet):
    """hbar |<k>| / (m c)."""
    c = packet.constants
    return float(c.hbar * np.linalg.norm(packet.mean_wavevector) / (c.m * c.c))


def compare_low_energy(packet, em=None, horizon=1.0, dt=None, samples=50, pbar=None):
    """
    Evolve the packet's field under Klein-Gordon and, from the same initial
    values, under Schrodinger; report the phase-aligned L2 discrepancy of the
    reduced Klein-Gordon field at `samples` + 1 times. A vanishing potential
    uses the exact spectral Klein-Gordon evolution.
    """
    constants = packet.constants
    grid = packet.grid
    em = em or EMPotential(grid, constants=constants)
    _check_grid(grid, em)
    speed = low_energy_speed(packet)
    if speed > MAX_LOW_ENERGY_SPEED:
        raise TooRelativistic(f"hbar|k|/mc = {speed:.3f} exceeds {MAX_LOW_ENERGY_SPEED}")
    if horizon <= 0 or samples < 1:
        raise ValueError("horizon must be positive and samples >= 1")

    exact = em.is_zero
    if exact:
        per_sample = 1
        dt = horizon / samples
    else:
        if em.has_vector_part:
            raise NonzeroVectorPotential("the Klein-Gordon stepper couples the scalar potential only")
        dt = default_time_step(grid, em) if dt is None else float(dt)
        per_sample = max(1, math.ceil(horizon / (samples * dt)))
        dt = horizon / (samples * per_sample)
        bound = stability_bound(grid, em)
        if dt > bound:
            raise UnstableStep(f"dt = {dt:.3e} exceeds the stability bound {bound:.3e}")

    report = EvolutionReport("compare-low-energy", {
        "horizon": horizon, "dt": dt, "samples": samples, "speed": speed,
        "kg_solver": "spectral" if exact else "leapfrog"})
    schrodinger_step, _ = _schrodinger_stepper(grid, em, dt)
    kg_step = None if exact else _kg_stepper(grid, em, dt)
    kg = kg_state_from_packet(packet, None if exact else em)
    psi_s = kg.psi

    iterator = range(samples + 1)
    if pbar is not None:
        iterator = pbar(iterator, desc="Low-energy comparison")
    for i in iterator:
        if i > 0:
            for _ in range(per_sample):
                psi_s = schrodinger_step(psi_s)
                if not exact:
                    kg = KGState(grid, *kg_step(kg.psi, kg.psi_dot), kg.t + dt, constants)
            if exact:
                t = i * dt
                state = evolve_free_kg(packet, t)
                kg = KGState(grid, state.psi, state.dpsi_dt, t, constants)
        t = i * per_sample * dt
        reduced = reduce_nonrelativistic(kg, t)
        schrodinger = FieldState(grid, psi_s, t, constants)
        observables = _kg_observables(grid, kg.psi, kg.psi_dot, t, em)
        observables["norm"] = schrodinger.norm_sq
        observables["position"] = (position_expectation(schrodinger)
                                   if schrodinger.is_localized() else None)
        report.record(t, discrepancy=aligned_discrepancy(reduced.psi, psi_s), **observables)
    return report


@dataclass
class VelocitySweep:
    velocities: list
    discrepancies: list
    exponent: float
    reports: list

    def summary(self):
        return {"velocities": list(self.velocities), "discrepancies": list(self.discrepancies),
                "exponent": self.exponent}


def sweep_packet(speed, constants, points=128):
    """
    A Gaussian packet moving at `speed` (in units of c) on a grid scaled to it:
    delta_k = 0.1 k0, the band spans k0 +/- 2 k0 and the packet starts five
    position widths left of the origin.
    """
    k0 = speed * constants.compton_wavenumber
    delta_k = 0.1 * k0
    grid = KGrid(1, points, k0 / (points / 4), offset=k0)
    sigma_x = 1.0 / (2.0 * delta_k)
    packet = normalize(gaussian_amplitude(grid, k0, delta_k), grid, constants).translated(-5.0 * sigma_x)
    horizon = 10.0 * sigma_x * constants.m / (constants.hbar * k0)
    return packet, horizon


def velocity_sweep(speeds=(0.01, 0.03, 0.1), constants=None, points=128, samples=20, pbar=None):
    """
    Final low-energy discrepancy for each speed (v/c) after ten position widths
    of travel, and the slope of log(discrepancy) against log(v/c).
    """
    constants = constants or PhysicalConstants()
    if len(speeds) < 2 or min(speeds) <= 0:
        raise ValueError("a sweep needs at least two positive speeds")
    iterator = list(speeds)
    if pbar is not None:
        iterator = pbar(iterator, desc="Velocity sweep")
    reports = []
    for speed in iterator:
        packet, horizon = sweep_packet(speed, constants, points)
        reports.append(compare_low_energy(packet, None, horizon, samples=samples))
    finals = [r.discrepancy[-1] for r in reports]
    exponent = float(np.polyfit(np.log(speeds), np.log(finals), 1)[0])
    return VelocitySweep(list(speeds), finals, exponent, reports)


def oscillation_frequency(times, series):
    """Angular frequency of a sampled sinusoid, fitted by least squares."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    centered = series - np.mean(series)
    crossings = np.count_nonzero(np.diff(np.signbit(centered)))
    span = times[-1] - times[0]
    guess = max(crossings, 1) * np.pi / span
    amplitude = 0.5 * (np.max(series) - np.min(series))
    phase = 0.0 if centered[0] >= 0 else np.pi

    def model(t, a, w, p, offset):
        return a * np.cos(w * (t - times[0]) + p) + offset

    params, _ = curve_fit(model, times, series, p0=[amplitude, guess, phase, np.mean(series)])
    return abs(float(params[1]))

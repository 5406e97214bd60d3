"""Turn config sections into lab objects."""
import numpy as np

from .errors import ConfigInvalid, DimensionMismatch
from .gauge import POTENTIAL_PRESETS, potential_from_columns, potential_preset
from .io import load_amplitudes, load_columns
from .measurement import KIntervals, SolidAngleTiling
from .packet import KGrid, gaussian_amplitude, normalize, shell_amplitude


def build_grid(config):
    g = config.grid
    try:
        return KGrid(g.dim, g.points, g.spacing, g.offset)
    except ValueError as exc:
        raise ConfigInvalid("grid", str(exc)) from exc


def _vector(values, dim, name):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.size == 1:
        return np.full(dim, float(values[0]))
    if values.size != dim:
        raise ConfigInvalid(name, f"needs 1 or {dim} components, got {values.size}")
    return values


def build_packet(config, grid, constants):
    try:
        return _packet(config.packet, grid, constants)
    except ValueError as exc:
        field = "packet.amplitudes_file" if config.packet.shape == "file" else "packet"
        raise ConfigInvalid(field, str(exc)) from exc


def _packet(p, grid, constants):
    if p.shape == "gaussian":
        raw = gaussian_amplitude(grid, _vector(p.k0, grid.dim, "packet.k0"), p.delta_k)
    elif p.shape == "shell":
        weight = None
        if p.angular == "dipole":
            def weight(directions):
                return 1.0 + p.anisotropy * directions[2]
        elif p.angular != "isotropic":
            raise ConfigInvalid("packet.angular", f"unknown angular weight {p.angular!r}")
        raw = shell_amplitude(grid, p.k_mag, p.delta_k, weight)
    elif p.shape == "file":
        if not p.amplitudes_file:
            raise ConfigInvalid("packet.amplitudes_file", "required when shape is 'file'")
        return load_amplitudes(p.amplitudes_file, grid, constants)
    else:
        raise ConfigInvalid("packet.shape", f"unknown packet shape {p.shape!r}")
    packet = normalize(raw, grid, constants)
    x0 = _vector(p.x0, grid.dim, "packet.x0")
    return packet.translated(x0) if np.any(x0 != 0) else packet


def build_potential(config, grid, constants):
    p = config.potential
    if p.preset == "file":
        if not p.file:
            raise ConfigInvalid("potential.file", "required when preset is 'file'")
        try:
            return potential_from_columns(grid, load_columns(p.file), constants)
        except ValueError as exc:
            raise ConfigInvalid("potential.file", str(exc)) from exc
    if p.preset not in POTENTIAL_PRESETS:
        raise ConfigInvalid("potential.preset", f"unknown preset {p.preset!r}")
    if p.preset == "uniform-b" and grid.dim != 3:
        raise DimensionMismatch("uniform-b needs a 3D grid")
    try:
        return potential_preset(grid, p.preset, p.strength, constants)
    except ValueError as exc:
        raise ConfigInvalid("potential", str(exc)) from exc


def build_array(config, grid):
    m = config.measurement
    if grid.dim == 3:
        try:
            return SolidAngleTiling(m.n_polar, m.n_azimuth)
        except ValueError as exc:
            raise ConfigInvalid("measurement", str(exc)) from exc
    if m.edges:
        try:
            return KIntervals(tuple(m.edges))
        except ValueError as exc:
            raise ConfigInvalid("measurement.edges", str(exc)) from exc
    if m.bins < 1:
        raise ConfigInvalid("measurement.bins", "must be at least 1")
    return KIntervals.uniform(grid, m.bins)

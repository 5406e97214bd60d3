from .builders import build_array, build_grid, build_packet, build_potential
from .errors import ConfigInvalid, LabError
from .evolution import MAX_LOW_ENERGY_SPEED, low_energy_speed, stability_bound
from .measurement import tabulate_bins

NEEDS_POTENTIAL = {"evolve-kg", "evolve-schrodinger", "compare-low-energy", "gauge-audit", "full-suite"}
NEEDS_DETECTORS = {"born-trials", "detection-force", "full-suite"}


def _diagnostic(exc):
    if isinstance(exc, LabError):
        return f"{exc.code}: {exc}"
    return f"invalid: {exc}"


def _invalid(field, message):
    return _diagnostic(ConfigInvalid(field, message))


def config_error(diagnostics):
    """
    The first config-invalid diagnostic, rebuilt as a ConfigInvalid with its
    field path, or None when the config itself is sound.
    """
    prefix = f"{ConfigInvalid.code}: "
    for d in diagnostics:
        if d.startswith(prefix):
            field, _, message = d[len(prefix):].partition(": ")
            return ConfigInvalid(field, message)
    return None


def check_solver(config):
    """
    Check step counts and sampling parameters.
    """
    warnings = []
    s = config.solver
    if s.steps < 0:
        warnings.append(_invalid("solver.steps", "must be >= 0"))
    if s.record_every < 1:
        warnings.append(_invalid("solver.record_every", "must be >= 1"))
    if s.samples < 1:
        warnings.append(_invalid("solver.samples", "must be >= 1"))
    if s.horizon is not None and s.horizon <= 0:
        warnings.append(_invalid("solver.horizon", "must be positive"))
    if s.dt is not None and s.dt == 0:
        warnings.append(_invalid("solver.dt", "must be nonzero"))
    if len(s.sweep) < 2 or min(s.sweep) <= 0:
        warnings.append(_invalid("solver.sweep", "needs at least two positive speeds"))
    return warnings


def check_measurement(config):
    warnings = []
    m = config.measurement
    if m.trials < 1:
        warnings.append(_invalid("measurement.trials", "must be >= 1"))
    if m.seed < 0:
        warnings.append(_invalid("measurement.seed", "must be >= 0"))
    return warnings


def check_dynamics(config, grid, packet, em):
    """
    Check the preconditions of the steppers: stability of dt, the vector
    potential restrictions and the low-energy speed limit.
    """
    warnings = []
    kind = config.kind
    dt = config.solver.dt
    if kind in ("evolve-kg", "full-suite") and em is not None:
        bound = stability_bound(grid, em)
        if dt is not None and abs(dt) > bound:
            warnings.append(f"unstable-step: dt = {dt:g} exceeds the stability bound {bound:.6g}")
        if em.has_vector_part:
            warnings.append("nonzero-vector-potential: the Klein-Gordon stepper couples phi only")
    if kind == "evolve-schrodinger" and em is not None and em.uniform_vector_part() is None:
        warnings.append("nonuniform-vector-potential: split-step needs a uniform A")
    if kind == "compare-low-energy" and packet is not None:
        speed = low_energy_speed(packet)
        if speed > MAX_LOW_ENERGY_SPEED:
            warnings.append(f"too-relativistic: hbar|k|/mc = {speed:.3g} exceeds {MAX_LOW_ENERGY_SPEED}")
        if em is not None and not em.is_zero:
            bound = stability_bound(grid, em)
            if dt is not None and abs(dt) > bound:
                warnings.append(f"unstable-step: dt = {dt:g} exceeds the stability bound {bound:.6g}")
    return warnings


def validate(config):
    """
    Run all validations without running the experiment.
    Returns a list of diagnostics, empty when the config is runnable.
    """
    all_warnings = []
    all_warnings.extend(check_solver(config))
    all_warnings.extend(check_measurement(config))
    try:
        constants = config.constants.build()
        grid = build_grid(config)
    except (LabError, ValueError) as exc:
        all_warnings.append(_diagnostic(exc))
        return all_warnings

    packet = em = None
    try:
        packet = build_packet(config, grid, constants)
    except (LabError, ValueError, FileNotFoundError) as exc:
        all_warnings.append(_diagnostic(exc))
    if config.kind in NEEDS_POTENTIAL:
        try:
            em = build_potential(config, grid, constants)
        except (LabError, ValueError, FileNotFoundError) as exc:
            all_warnings.append(_diagnostic(exc))
    if config.kind in NEEDS_DETECTORS and packet is not None:
        try:
            tabulate_bins(packet, build_array(config, grid))
        except (LabError, ValueError) as exc:
            all_warnings.append(_diagnostic(exc))
    all_warnings.extend(check_dynamics(config, grid, packet, em))
    return all_warnings

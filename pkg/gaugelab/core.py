import os

import numpy as np
from tqdm import tqdm

from .builders import build_array, build_grid, build_packet, build_potential
from .config import SCHEMA_VERSION
from .evolution import (compare_low_energy, default_time_step, evolve_kg_coupled,
                        evolve_schrodinger, kg_state_from_packet, low_energy_speed, velocity_sweep)
from .gauge import bianchi_residual, curvature, current_identity_check, gauge_audit, smooth_gauge_function
from .io import save_amplitudes, save_columns, save_json, save_text, write_plot_script
from .measurement import born_rule_audit, detection_force_trials, expectation_vs_noether, tabulate_bins
from .noether import canonical_momentum, commutator_check, functional_record, noether_momentum
from .packet import FieldState, synthesize
from .validator import config_error, validate

SUITE = ("packet-info", "evolve-free", "evolve-kg", "evolve-schrodinger",
         "compare-low-energy", "gauge-audit", "born-trials", "detection-force")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        # JSON has no NaN or infinity
        return float(value) if np.isfinite(value) else None
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


class Lab:
    """Objects shared by the experiments of one run, built once from the config."""

    def __init__(self, config, pbar=tqdm):
        self.config = config
        self.pbar = pbar
        self.constants = config.constants.build()
        self.grid = build_grid(config)
        self.packet = build_packet(config, self.grid, self.constants)
        self._em = None
        self.series = {}
        self.export_amplitudes = False

    @property
    def em(self):
        if self._em is None:
            self._em = build_potential(self.config, self.grid, self.constants)
        return self._em

    def time_step(self):
        s = self.config.solver
        if s.dt is not None:
            return s.dt
        if s.horizon is not None:
            return s.horizon / max(s.steps, 1)
        return default_time_step(self.grid, self.em)

    def horizon(self):
        """Configured horizon, else ten position widths of travel (or of spreading for a packet at rest)."""
        s = self.config.solver
        if s.horizon is not None:
            return s.horizon
        c = self.constants
        sigma_x = 1.0 / (2.0 * self.config.packet.delta_k)
        speed = low_energy_speed(self.packet) * c.c
        if speed > 0:
            return 10.0 * sigma_x / speed
        return 10.0 * 2.0 * c.m * sigma_x ** 2 / c.hbar


def packet_info(lab):
    record = functional_record(lab.packet)
    psi = synthesize(lab.packet)
    c = lab.constants
    P = noether_momentum(lab.packet)
    record["momentum_condition"] = float(
        abs(P[0] ** 2 - np.sum(P[1:] ** 2) - (c.m * c.c) ** 2) / (c.m * c.c) ** 2)
    record["canonical_P"] = canonical_momentum(psi)
    if psi.is_localized():
        record["commutator_residual"] = max(commutator_check(psi, i, i) for i in range(lab.grid.dim))
    lab.export_amplitudes = True
    return record


def evolve_free(lab):
    s = lab.config.solver
    times = np.linspace(0.0, lab.horizon(), s.samples + 1)
    iterator = lab.pbar(times, desc="Free evolution") if lab.pbar else times
    records = [functional_record(lab.packet, t) for t in iterator]
    columns = {"t": times, "charge": [r["charge"] for r in records]}
    if all("x" in r for r in records):
        for j in range(lab.grid.dim):
            columns[f"x{j + 1}"] = [r["x"][j] for r in records]
    lab.series["evolve_free"] = columns
    return {"samples": len(records), "t_final": float(times[-1]),
            "charge_drift": float(max(abs(r["charge"] - records[0]["charge"]) for r in records)),
            "final": records[-1]}


def evolve_kg(lab):
    s = lab.config.solver
    state = kg_state_from_packet(lab.packet, lab.em)
    _, report = evolve_kg_coupled(state, lab.em, s.dt, s.steps, s.record_every, pbar=lab.pbar)
    lab.series["evolve_kg"] = report.to_columns()
    return report.summary()


def evolve_schrodinger_run(lab):
    s = lab.config.solver
    start = synthesize(lab.packet)
    psi = FieldState(lab.grid, start.psi / np.sqrt(start.norm_sq), 0.0, lab.constants)
    _, report = evolve_schrodinger(psi, lab.em, lab.time_step(), s.steps, s.record_every, pbar=lab.pbar)
    lab.series["evolve_schrodinger"] = report.to_columns()
    return report.summary()


def compare(lab):
    s = lab.config.solver
    report = compare_low_energy(lab.packet, lab.em, lab.horizon(), s.dt, s.samples, pbar=lab.pbar)
    lab.series["compare_low_energy"] = report.to_columns()
    sweep = velocity_sweep(s.sweep, lab.constants, pbar=lab.pbar)
    lab.series["velocity_sweep"] = {"speed": sweep.velocities, "discrepancy": sweep.discrepancies}
    result = report.summary()
    result["sweep"] = sweep.summary()
    return result


def gauge_run(lab):
    g = lab.config.gauge
    lam = smooth_gauge_function(lab.grid, lab.config.measurement.seed, g.lambda_modes, g.lambda_amplitude)
    audit = gauge_audit(lab.packet, lab.em, lam)
    identity = {}
    for mu in range(lab.grid.dim + 1):
        central = current_identity_check(lab.packet, mu, g.epsilon)
        coarse = current_identity_check(lab.packet, mu, g.epsilon, scheme="forward")
        fine = current_identity_check(lab.packet, mu, g.epsilon / 2, scheme="forward")
        identity[f"mu{mu}"] = {
            "numeric": central.numeric, "analytic": central.analytic,
            "relative_error": central.relative_error,
            "forward_error_ratio": (coarse.relative_error / fine.relative_error
                                    if fine.relative_error > 0 else None),
        }
    F = curvature(lab.em)
    return {"audit": audit, "current_identity": identity,
            "curvature_max": float(np.max(np.abs(F.components))),
            "bianchi": bianchi_residual(F)}


def born_trials(lab):
    m = lab.config.measurement
    table = tabulate_bins(lab.packet, build_array(lab.config, lab.grid))
    audit = born_rule_audit(table.probabilities, m.trials, m.seed, pbar=lab.pbar)
    last = audit["attempts"][-1]
    lab.series["born_trials"] = {"bin": np.arange(table.count), "probability": table.probabilities,
                                 "frequency": last["frequencies"], "z": last["z_scores"]}
    return audit


def detection_force(lab):
    m = lab.config.measurement
    array = build_array(lab.config, lab.grid)
    ledger, summary = detection_force_trials(lab.packet, array, m.trials, m.seed, pbar=lab.pbar)
    summary["expectation"] = expectation_vs_noether(lab.packet, array, m.trials, m.seed)
    summary["detector"] = array.describe()
    lab.series["detection_trials"] = ledger.to_columns()
    return summary


EXPERIMENTS = {
    "packet-info": packet_info,
    "evolve-free": evolve_free,
    "evolve-kg": evolve_kg,
    "evolve-schrodinger": evolve_schrodinger_run,
    "compare-low-energy": compare,
    "gauge-audit": gauge_run,
    "born-trials": born_trials,
    "detection-force": detection_force,
}

PLOTS = {
    "evolve_free": ("t", ["charge", "x1"], "linear"),
    "evolve_kg": ("t", ["norm_drift", "charge_drift", "P0_drift"], "linear"),
    "evolve_schrodinger": ("t", ["norm_drift", "x1"], "linear"),
    "compare_low_energy": ("t", ["discrepancy"], "log"),
    "velocity_sweep": ("speed", ["discrepancy"], "log"),
    "born_trials": ("bin", ["probability", "frequency"], "linear"),
}


def _report_lines(kind, results, diagnostics):
    lines = [f"# Gauge Lab Report for `{kind}`"]
    for name, result in results.items():
        lines.append(f"\n## {name}")
        for key, value in sorted(result.items()):
            if isinstance(value, (dict, list)):
                continue
            lines.append(f"- **{key}**: {value}")
    if diagnostics:
        lines.append("\n## Diagnostics")
        lines.extend(f"- {d}" for d in diagnostics)
    return lines


def run(config, out_dir=None, emit_plots=None, pbar=tqdm):
    """
    Run an experiment and write its artifacts.

    Args:
        config (ExperimentConfig): The resolved configuration.
        out_dir (str): Output directory; defaults to config.output.directory.
        emit_plots (bool): Also write plot scripts; defaults to config.output.emit_plots.

    Returns:
        dict: The result record written to result.json.

    Raises:
        ConfigInvalid: When validation finds an invalid field; nothing is written.
    """
    out_dir = out_dir or config.output.directory
    emit_plots = config.output.emit_plots if emit_plots is None else emit_plots

    print(f"Validating {config.kind} config...")
    diagnostics = validate(config)
    if diagnostics:
        print("Validation Warnings:")
        for d in diagnostics[:10]:
            print(f"  - {d}")
        if len(diagnostics) > 10:
            print(f"  ... and {len(diagnostics) - 10} more.")
    error = config_error(diagnostics)
    if error is not None:
        raise error

    lab = Lab(config, pbar=pbar)
    print(f"Built a {lab.grid.dim}D grid of {lab.grid.size} nodes.")
    kinds = SUITE if config.kind == "full-suite" else (config.kind,)
    results = {}
    for kind in kinds:
        print(f"Running {kind}...")
        results[kind] = _jsonable(EXPERIMENTS[kind](lab))

    record = {"schema_version": SCHEMA_VERSION, "kind": config.kind,
              "config": _jsonable(config.to_dict()), "results": results, "diagnostics": diagnostics}
    print(f"Saving to {out_dir}...")
    os.makedirs(out_dir, exist_ok=True)
    save_json(record, os.path.join(out_dir, "result.json"))
    if lab.export_amplitudes:
        save_amplitudes(lab.packet, os.path.join(out_dir, "amplitudes.tsv"))
    for name, columns in lab.series.items():
        data_file = os.path.join(out_dir, f"{name}.tsv")
        save_columns(columns, data_file)
        if emit_plots and name in PLOTS:
            x, series, yscale = PLOTS[name]
            write_plot_script(os.path.join(out_dir, f"plot_{name}.py"), data_file, x, series,
                              name.replace("_", " "), yscale)
    report_file = os.path.join(out_dir, "report.md")
    save_text("\n".join(_report_lines(config.kind, results, diagnostics)) + "\n", report_file)
    print(f"Report saved to {report_file}")
    print("Done.")
    return record

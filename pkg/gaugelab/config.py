"""
Experiment configuration: a tree of dataclasses that maps one to one onto
the JSON config files read by the command-line driver.
"""
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigInvalid
from .packet import PhysicalConstants

SCHEMA_VERSION = 1

KINDS = (
    "packet-info",
    "evolve-free",
    "evolve-kg",
    "evolve-schrodinger",
    "compare-low-energy",
    "gauge-audit",
    "born-trials",
    "detection-force",
    "full-suite",
)


@dataclass
class ConstantsConfig:
    hbar: float = 1.0
    c: float = 1.0
    m: float = 1.0
    q: float = -1.0

    def build(self):
        try:
            return PhysicalConstants(self.hbar, self.c, self.m, self.q)
        except ValueError as exc:
            raise ConfigInvalid("constants", str(exc)) from exc


@dataclass
class GridConfig:
    dim: int = 1
    points: int = 1024
    spacing: float = 0.01
    offset: float = 0.0


@dataclass
class PacketConfig:
    # gaussian | shell | file
    shape: str = "gaussian"
    k0: list = field(default_factory=lambda: [0.1])
    delta_k: float = 0.05
    k_mag: float = 4.0
    # isotropic | dipole (weight 1 + anisotropy * cos theta)
    angular: str = "isotropic"
    anisotropy: float = 0.5
    x0: list = field(default_factory=lambda: [0.0])
    amplitudes_file: str = None


@dataclass
class PotentialConfig:
    # zero | constant | uniform-e | uniform-b | harmonic | file
    preset: str = "zero"
    strength: float = 0.0
    file: str = None


@dataclass
class SolverConfig:
    dt: float = None
    steps: int = 1000
    record_every: int = 10
    horizon: float = None
    samples: int = 50
    sweep: list = field(default_factory=lambda: [0.01, 0.03, 0.1])


@dataclass
class MeasurementConfig:
    n_polar: int = 2
    n_azimuth: int = 4
    bins: int = 8
    edges: list = None
    trials: int = 100000
    seed: int = 0


@dataclass
class GaugeConfig:
    lambda_modes: int = 2
    lambda_amplitude: float = 0.5
    epsilon: float = 1e-5


@dataclass
class OutputConfig:
    directory: str = "lab_output"
    emit_plots: bool = False


SECTIONS = {
    "constants": ConstantsConfig,
    "grid": GridConfig,
    "packet": PacketConfig,
    "potential": PotentialConfig,
    "solver": SolverConfig,
    "measurement": MeasurementConfig,
    "gauge": GaugeConfig,
    "output": OutputConfig,
}


@dataclass
class ExperimentConfig:
    kind: str = "packet-info"
    constants: ConstantsConfig = field(default_factory=ConstantsConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    packet: PacketConfig = field(default_factory=PacketConfig)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    gauge: GaugeConfig = field(default_factory=GaugeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        """Build a config from parsed JSON; unknown keys raise ConfigInvalid with their path."""
        if not isinstance(data, dict):
            raise ConfigInvalid("<root>", "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known and key != "include":
                raise ConfigInvalid(key, "unknown field")
        kwargs = {}
        for name, section_cls in SECTIONS.items():
            if name in data:
                kwargs[name] = _section(name, section_cls, data[name])
        if "kind" in data:
            kwargs["kind"] = data["kind"]
        if "schema_version" in data:
            kwargs["schema_version"] = data["schema_version"]
        config = cls(**kwargs)
        if config.kind not in KINDS:
            raise ConfigInvalid("kind", f"unknown experiment kind {config.kind!r}")
        if config.schema_version != SCHEMA_VERSION:
            raise ConfigInvalid("schema_version", f"expected {SCHEMA_VERSION}, got {config.schema_version}")
        return config


def _section(name, section_cls, values):
    if not isinstance(values, dict):
        raise ConfigInvalid(name, "section must be a JSON object")
    known = {f.name for f in fields(section_cls)}
    for key in values:
        if key not in known:
            raise ConfigInvalid(f"{name}.{key}", "unknown field")
    return section_cls(**values)


def merge_dicts(base, override):
    """Recursive merge; keys of override win, nested objects merge."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_dicts(merged[key], value)
        else:
            merged[key] = value
    return merged

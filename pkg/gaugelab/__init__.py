from .core import run
from .config import ExperimentConfig
from .errors import LabError

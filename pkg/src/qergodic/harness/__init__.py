from .config import ExperimentConfig, validate
from .runner import ResultManifest, run

__all__ = ["ExperimentConfig", "ResultManifest", "run", "validate"]

from .afshar import ImagingConditionError, run_afshar
from .config import (DEFAULT_SEED, AfsharConfig, ConfigError, DelayedChoiceConfig, EraserConfig,
                     config_echo, config_from_toml, config_to_toml)
from .delayed import run_delayed_choice
from .eraser import run_eraser
from .result import ExperimentResult, Histogram

__all__ = [
    "AfsharConfig", "ConfigError", "DEFAULT_SEED", "DelayedChoiceConfig", "EraserConfig",
    "ExperimentResult", "Histogram", "ImagingConditionError", "config_echo", "config_from_toml",
    "config_to_toml", "run_afshar", "run_delayed_choice", "run_eraser",
]

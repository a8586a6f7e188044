from .config_and_parser import (
    SOFTWARE_VERSION,
    RunReport,
    cmd_spectrum,
    cmd_tomography,
    cmd_car_stability,
    cmd_rate_budget,
    cmd_sweep,
    tomography_inputs,
    drift_from_config,
    apply_overrides,
    main,
)
from .number_crunchers.source_config import SourceConfig, load_config

__version__ = SOFTWARE_VERSION

__all__ = [
    "SourceConfig",
    "load_config",
    "RunReport",
    "cmd_spectrum",
    "cmd_tomography",
    "cmd_car_stability",
    "cmd_rate_budget",
    "cmd_sweep",
    "tomography_inputs",
    "drift_from_config",
    "apply_overrides",
    "main",
    "number_crunchers",
]

from .config import ConfigError, ExperimentConfig, MethodSpec, from_dict, load

__all__ = ["ConfigError", "ExperimentConfig", "MethodSpec", "from_dict", "load"]

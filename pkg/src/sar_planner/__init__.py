"""Human-centric UAV search-and-rescue trajectory planning with TD3, AHP reward weighting and similarity replay."""

from .enums import ConfigError, Label, Scenario, Terminal

__version__ = "0.1.0"

__all__ = ["ConfigError", "Label", "Scenario", "Terminal", "__version__"]

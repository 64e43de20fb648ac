"""Spatial correlation estimation for MIMO-OFDM doubly selective channels.

Modules
-------
numkernel    Bessel J0, Kronecker/vec/commutation algebra, SVD and pseudo-inverse.
channel      Delay profiles, correlation matrices and the LS-estimate sampler.
pilots       Comb pilot patterns, pilot sequences and LS estimation.
estimator    Sample auto-correlation and the SVD-domain MLE.
bounds       Fisher information, CRLB and the closed-form MSE bounds.
experiments  Seeded Monte-Carlo sweeps and the CRLB cross-check.
"""

from .channel import SpatialCorrelation, SystemConfig, load_profile
from .config import ExperimentConfig, load_config
from .errors import CapacityError, ConfigError, InvalidArgumentError, NumericError

__version__ = "0.1.0"

__all__ = [
    "SpatialCorrelation", "SystemConfig", "load_profile", "ExperimentConfig", "load_config",
    "CapacityError", "ConfigError", "InvalidArgumentError", "NumericError",
]

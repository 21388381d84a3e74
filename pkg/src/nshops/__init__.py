"""Open quantum systems coupled to nonstationary Gaussian baths.

Pseudo-Fock hierarchies of pure states (linear and nonlinear), the
hierarchy and pseudomode master equations, and the pseudomode stochastic
Schroedinger equation, with squeezed-reservoir bath models, noise
generators and error estimation.
"""

from .bcf import (
    BathMode,
    BathModel,
    SystemModel,
    dpa_three_mode,
    effective_squeezing,
    eval_bcf,
    single_mode_squeezed,
    thermal_embedding,
    uniform_squeezed_multimode,
)
from .exceptions import (
    CapacityError,
    ConfigError,
    DegenerateTrajectoryError,
    InvalidBCFError,
    ModelDomainError,
    NSHopsError,
    NumericalError,
    StatisticalValidationError,
    UnsupportedModelError,
)
from .fock import FockBasis, Rectangular, Triangular, build_basis

__version__ = "0.1.0"

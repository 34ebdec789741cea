"""Cyclic adjacent transposition shuffle: simulation, exact laws and mixing bounds."""

__version__ = "0.1.0"

from .errors import CapacityError, DomainError, InvariantError  # noqa: E402
from .permcore import (BlockPartition, ExactDistribution, Permutation,  # noqa: E402
                       order_leq, sigma_tilde, uniformize)
from .dynamics import (CensoringScheme, Direction, SweepRandomness,  # noqa: E402
                       censored_sweep, coupled_sweep, monotone_sweep, sweep)
from .observables import height, phi  # noqa: E402

__all__ = [
    "__version__", "CapacityError", "DomainError", "InvariantError", "Permutation",
    "BlockPartition", "ExactDistribution", "order_leq", "sigma_tilde", "uniformize",
    "CensoringScheme", "Direction", "SweepRandomness", "sweep", "monotone_sweep",
    "censored_sweep", "coupled_sweep", "height", "phi",
]

"""Exact phase-space simulation of thermal-state superpositions and entanglement.

Closed-form Gaussian-kernel algebra (kernel_core), constructors for every
state family (state_factory), a truncated Fock-space oracle (fock_oracle),
Bell-CHSH optimization (bell_chsh), Bell-state discrimination statistics
(bell_measurement), teleportation of thermal-state qubits (teleportation),
and a CSV/JSON command-line front end (cli).
"""

__version__ = "0.1.0"

from . import kernel_core
from . import state_factory
from . import fock_oracle
from . import bell_chsh
from . import bell_measurement
from . import teleportation

__all__ = [
    "kernel_core",
    "state_factory",
    "fock_oracle",
    "bell_chsh",
    "bell_measurement",
    "teleportation",
    "__version__",
]

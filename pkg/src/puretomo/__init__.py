"""Pure-state tomography from parallel unentangled Pauli measurements."""

__version__ = "0.1.0"

from .likelihood import MLResult, minimize, nll_exact, nll_gauss  # noqa: E402
from .measurements import MeasurementSetup, SetupKind, probabilities  # noqa: E402
from .phasecut import PhaseCutResult, phasecut  # noqa: E402
from .recursive import RecursiveResult, reconstruct_recursive  # noqa: E402
from .sampling import ShotRecord, simulate_shots  # noqa: E402
from .states import StateVector, error_mu, random_state, state_at_error  # noqa: E402

__all__ = [
    "__version__",
    "MLResult",
    "MeasurementSetup",
    "PhaseCutResult",
    "RecursiveResult",
    "SetupKind",
    "ShotRecord",
    "StateVector",
    "error_mu",
    "minimize",
    "nll_exact",
    "nll_gauss",
    "phasecut",
    "probabilities",
    "random_state",
    "reconstruct_recursive",
    "simulate_shots",
    "state_at_error",
]

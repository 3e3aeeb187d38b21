"""Pronking-gait simulation and adaptive stride control toolkit.

Core layers: dimensionless spring-leg template dynamics (`slip`), hybrid
apex-to-apex plants (`hybrid`, `slimpod`), a predictive approximate return
map (`predictor`), dead-beat + adaptive stride control (`control`, `loop`),
fixed-point/stability/sweep analysis (`analysis`), and the experiment
harness (`config`, `runio`, `cli`).
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DivergedError,
    InfeasibleControlError,
    InfeasiblePlacementError,
    NoEventError,
    OutOfWorkspaceError,
    PhaseMismatchError,
    PronkError,
    SimulationFault,
    SingularConfigurationError,
)
from .params import (
    ApexState,
    ControlInput,
    DimensionlessScale,
    ParamEstimate,
    PlantParams,
    SlimpodParams,
    SlipParams,
)

__all__ = [
    "__version__",
    "ApexState", "ControlInput", "DimensionlessScale", "ParamEstimate",
    "PlantParams", "SlimpodParams", "SlipParams",
    "ConfigError", "DivergedError", "InfeasibleControlError",
    "InfeasiblePlacementError", "NoEventError", "OutOfWorkspaceError",
    "PhaseMismatchError", "PronkError", "SimulationFault",
    "SingularConfigurationError",
]

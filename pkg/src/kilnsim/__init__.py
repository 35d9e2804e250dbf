"""Dynamic one-dimensional counter-current rotary cement kiln simulator."""
from .balances import BoundaryConditions, KilnModel, KilnState, ModelParameters, Stream
from .geometry import KilnDimensions
from .integrator import SolverSettings, consistent_initialization, simulate
from .output import write_outputs
from .runner import RunResult, run_scenario
from .scenario import Scenario, ScenarioError, load_scenario, reference_scenario, write_scenario
from .thermo import GASES, SOLIDS, SpeciesSet, default_species

__all__ = [
    "BoundaryConditions", "GASES", "KilnDimensions", "KilnModel", "KilnState", "ModelParameters",
    "RunResult", "SOLIDS", "Scenario", "ScenarioError", "SolverSettings", "SpeciesSet", "Stream",
    "consistent_initialization", "default_species", "load_scenario", "reference_scenario",
    "run_scenario", "simulate", "write_outputs", "write_scenario",
]
__version__ = "0.1.0"

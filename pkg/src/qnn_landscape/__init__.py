"""Loss landscapes of under-parameterized quantum neural networks."""
from .circuit import CircuitProblem, CircuitSpec, Dataset, QuantumDatum, TwoLevelGenerator
from .construction import ExampleForm, canonical_example, combine, hard_instance
from .errors import (
    CapacityError,
    ConstructionError,
    DegenerateLandscapeError,
    DimensionError,
    IntegrityError,
    PeriodicityError,
    QNNError,
)
from .optimize import OptimizerConfig, minimize, sweep
from .trig import PolyProblem, ScalarTrigPoly, expand_observable

__version__ = "0.1.0"

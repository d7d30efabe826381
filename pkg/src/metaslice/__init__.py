"""Admission control for shared-function multi-resource slicing.

Event-driven simulation of a loss system whose slices can share function
instances, baseline and learned admission policies, and exact
small-instance solvers for validating both.
"""

from .config import ScenarioConfig
from .simulation import AdmissionSimulator

__all__ = ["ScenarioConfig", "AdmissionSimulator"]
__version__ = "0.1.0"

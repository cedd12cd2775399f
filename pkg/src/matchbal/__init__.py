"""Discrete load balancing in the matching model: graphs, processes, metrics and bounds."""

from .errors import *  # noqa: F401,F403
from .graphs import Graph, GraphSpec, generate, validate
from .matchings import Circuit, Matching, build_circuit
from .process import ProcessConfig, ReplayLog, run
from .spectral import GraphAnalytics, analyze

__all__ = ["Graph", "GraphSpec", "generate", "validate", "Circuit", "Matching",
           "build_circuit", "ProcessConfig", "ReplayLog", "run", "GraphAnalytics", "analyze"]
__version__ = "0.1.0"

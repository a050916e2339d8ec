"""Cluster-based content-centric WSN simulator: naming, lite queries, a
127-byte wire codec, CN/CH protocol state machines, a broadcast medium, and
a vanilla NDN flooding baseline for comparison."""
from .config import RunConfig, load, loads
from .sim import Simulation, run

__all__ = ["RunConfig", "Simulation", "load", "loads", "run"]
__version__ = "0.1.0"

"""Fast-sweeping steady-state solvers for hyperbolic conservation laws."""

__version__ = "0.1.0"

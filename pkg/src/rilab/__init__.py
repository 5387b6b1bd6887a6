"""Random interlacements on Z^d: Green functions, capacities, sampling and renormalization."""

__version__ = "0.1.0"

"""Network SIR screening: simulation, estimation and budgeted allocation."""

__version__ = "0.1.0"

"""Two-qubit spin-locking noise spectroscopy: simulation and robust estimation."""

__version__ = "0.1.0"

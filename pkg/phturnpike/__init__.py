"""Energy-optimal control and turnpike analysis for linear port-Hamiltonian descriptor systems."""

__version__ = "1.0.0"

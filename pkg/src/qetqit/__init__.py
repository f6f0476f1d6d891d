"""Joint quantum energy and information teleportation on finite-dimensional resources."""

__version__ = "0.1.0"

"""Multi-objective MAP-Elites with crowding on a toy Lennard-Jones crystal domain."""

__version__ = "0.1.0"

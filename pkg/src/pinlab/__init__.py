"""Disordered pinning models on renewal processes: exact finite-volume
transfer recursions, homogeneous-model solvers, and disorder-averaged
estimators with reproducible seeding."""

__version__ = "0.1.0"

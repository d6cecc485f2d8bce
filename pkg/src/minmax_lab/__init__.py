"""Constrained min-max problems, (quasi-)variational inequalities and their verifiers."""
__version__ = "0.1.0"

"""Isotropic four-wave kinetic equation: collision operators, time stepping and diagnostics."""

__version__ = "0.1.0"

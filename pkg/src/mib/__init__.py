"""Variational mutual-information bounds, toy ground-truth distributions,
a minimal reverse-mode autodiff engine, and a bias/variance benchmark harness."""

from . import autodiff, bounds, critics, harness, toy, training

__all__ = ["autodiff", "bounds", "critics", "harness", "toy", "training"]

"""Optimal nonlinear damping (OND) motion control: simulation and benchmarking."""

__version__ = "0.1.0"

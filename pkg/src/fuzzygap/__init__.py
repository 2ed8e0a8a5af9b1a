"""Real-time simulation of the qubitised O(3) sigma model and mass-gap extraction."""

__version__ = "0.1.0"

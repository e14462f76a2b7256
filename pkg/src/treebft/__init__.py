"""Tree-based BFT consensus simulator with an analytic performance model."""

__version__ = "0.1.0"

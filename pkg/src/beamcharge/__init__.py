"""Beam-steered wireless charging schedules for rechargeable sensor networks."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]

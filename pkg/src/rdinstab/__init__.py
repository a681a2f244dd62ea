"""Instability certificates for an ODE coupled to a reaction-diffusion PDE."""
from .model import SystemParams, scalar_example, example2

__version__ = "0.1.0"
__all__ = ["SystemParams", "scalar_example", "example2"]

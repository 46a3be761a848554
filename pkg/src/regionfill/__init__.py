"""Region-wise adversarial image inpainting toolkit."""

__version__ = "0.1.0"

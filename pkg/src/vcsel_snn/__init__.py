"""Simulated single-VCSEL photonic spiking network for time-multiplexed classification."""

__version__ = "0.1.0"

from .errors import SNNError  # noqa: E402

__all__ = ["SNNError", "__version__"]

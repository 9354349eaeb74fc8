"""Time-correlated atmospheric quantum channels: two-time transmittance
sampling and the quantum figures of merit built on it."""

__version__ = "0.1.0"

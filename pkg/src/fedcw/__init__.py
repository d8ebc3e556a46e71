"""Federated DDPG control of the Wi-Fi contention window in a simulated dense cell."""

__version__ = "0.1.0"

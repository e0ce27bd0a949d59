"""Longitudinal driving via gradient IRL reward recovery and policy-gradient RL."""

__version__ = "0.1.0"

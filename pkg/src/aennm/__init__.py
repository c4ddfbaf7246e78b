"""Exact solutions of nonlinear PDEs from network-shaped Riccati trial functions."""

__version__ = "0.1.0"

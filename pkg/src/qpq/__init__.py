"""Simulation of quantum private queries and of the attacks against them."""

__version__ = "0.1.0"

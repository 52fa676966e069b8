"""Rateless coding over state-varying channels: capacity solvers, chunked
constant-composition codebooks, adaptive-threshold decoders, codebook-family
derandomization, jammer models, and a Monte Carlo harness."""

__version__ = "0.1.0"

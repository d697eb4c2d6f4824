"""Adaptive auxin-transport networks on graphs and their continuum limit."""
from .grid import Graph, boundary_vertices, build_diamond, build_shape

__version__ = "0.1.0"

__all__ = ["Graph", "boundary_vertices", "build_diamond", "build_shape"]

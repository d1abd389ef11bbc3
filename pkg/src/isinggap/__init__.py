"""Stochastic Ising model on boxes with nearly-plus boundary conditions.

Exact spectral gaps on small boxes, the indicator (Cheeger-type) bound through
the event ``D``, Swendsen-Wang sampling via the FK coupling, and dual
surface tension estimates.
"""

__version__ = "0.1.0"

from .geometry import BoundarySpec, Geometry, build_box, build_rect, constant_boundary, eta, region
from .ising import BETA_C, P_C, ModelParams, bond_probability, energy, flip_rate, gibbs_table, run_chain

__all__ = [
    "BETA_C",
    "P_C",
    "BoundarySpec",
    "Geometry",
    "ModelParams",
    "bond_probability",
    "build_box",
    "build_rect",
    "constant_boundary",
    "energy",
    "eta",
    "flip_rate",
    "gibbs_table",
    "region",
    "run_chain",
]

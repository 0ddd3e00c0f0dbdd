"""Generalized Potts model on the periodic triangular lattice: samplers, contours, bridging and sortedness checks."""

from .lattice import TorusLattice
from .model import Configuration, CostMatrix, DensityVector, builtin_matrix, hamiltonian, magnetization
from .dynamics import ChainParams, ChainState, exact_gibbs, run_chain
from .contours import extract_contours
from .bridging import build_bridge_system, verify_bridge_system
from .analysis import check_sorted, minimal_cost_subdivision

__version__ = "0.1.0"

"""Solitons on scarred backgrounds of blockade-constrained Rydberg chains.

Subpackages cover the blockade-constrained basis, sparse exact/Krylov
engines, the initial-state zoo (scarred cells, soliton cells, layouts),
TEBD time evolution of matrix-product states, the classical variational
flow with its soliton-angle optimizer, and a config-driven batch CLI.
"""

__version__ = "0.1.0"

from .basis import BlockadeRule, ConstrainedBasis, enumerate_basis, embed_full_vector

__all__ = [
    "BlockadeRule",
    "ConstrainedBasis",
    "enumerate_basis",
    "embed_full_vector",
]

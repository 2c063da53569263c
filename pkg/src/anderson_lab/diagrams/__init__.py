"""Perturbation-expansion layer: Duhamel terms, residue kernels, ladder values, combinatorics."""
from .combinatorics import (connected_graph_coefficient, degree_distribution, permutation_degree,
                            verify_moment_identity)
from .duhamel import duhamel_term, duhamel_terms
from .ladder import (ExperimentScale, LadderEstimate, MomentumProfile, ladder_observable_value,
                     ladder_sum, ladder_value)
from .residues import residue_kernel

__all__ = [
    "ExperimentScale", "LadderEstimate", "MomentumProfile", "connected_graph_coefficient",
    "degree_distribution", "duhamel_term", "duhamel_terms", "ladder_observable_value", "ladder_sum",
    "ladder_value", "permutation_degree", "residue_kernel", "verify_moment_identity",
]

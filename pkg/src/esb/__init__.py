"""Exact subgraph bounds for Max-Cut, stable set and vertex coloring.

The basic semidefinite relaxations are tightened by requiring selected
principal submatrices to lie in the convex hull of the combinatorial
extreme matrices of their induced subgraphs.  The resulting relaxation is
solved through its partial Lagrangian dual with a proximal bundle method;
violated subgraphs are found by probe-guided local search and scored by
projection distance.
"""

from .bundle import DualState, LinearCut, dual_value, run_bundle
from .driver import EsbParams, EsbReport, compute_esb, emit_report, heuristic_lower_bound
from .graphs import (Graph, ParseError, complement, gen_erdos_renyi, gen_near_regular,
                     gen_torus, induced_subgraph, laplacian, make_graph, parse_dimacs,
                     parse_weighted_edge_list, write_weighted_edge_list)
from .polytopes import (EscBlock, build_esc, enum_coloring_matrices, enum_cut_matrices,
                        enum_stable_set_matrices, extraction_mask, projection_distance)
from .sdp_oracle import (SdpError, SdpProblem, SdpSolution, build_basic_relaxation,
                         evaluate_h, solve_monolithic, solve_sdp)
from .separation import find_violations, generate_probes, local_search_min, weaken_to_cut

__version__ = "0.1.0"

__all__ = [
    "Graph", "ParseError", "make_graph", "parse_dimacs", "parse_weighted_edge_list",
    "write_weighted_edge_list", "gen_torus", "gen_near_regular", "gen_erdos_renyi",
    "laplacian", "complement", "induced_subgraph",
    "EscBlock", "build_esc", "enum_cut_matrices", "enum_stable_set_matrices",
    "enum_coloring_matrices", "extraction_mask", "projection_distance",
    "SdpProblem", "SdpSolution", "SdpError", "build_basic_relaxation", "solve_sdp",
    "evaluate_h", "solve_monolithic",
    "DualState", "LinearCut", "run_bundle", "dual_value",
    "generate_probes", "local_search_min", "find_violations", "weaken_to_cut",
    "EsbParams", "EsbReport", "compute_esb", "emit_report", "heuristic_lower_bound",
]

"""Max-Cut as a QUBO, solved by PI-GNN, GRL and MCTS-GNN on a small numpy autodiff."""
from .baselines import OracleResult, brute_force_maxcut, local_search_1flip
from .graph import (Graph, GraphFormatError, QuboMatrix, build_maxcut_qubo, cut_size,
                    evaluate_hamiltonian, generate_random_graph, parse_edge_list, read_graph)
from .grl import GrlConfig, train_grl
from .mcts import MctsConfig, train_mcts_gnn
from .pignn import PignnConfig, train_pignn
from .result import NumericalError, SolveResult
from .stopping import StopMonitor

__all__ = [
    "Graph", "GraphFormatError", "QuboMatrix", "build_maxcut_qubo", "cut_size",
    "evaluate_hamiltonian", "generate_random_graph", "parse_edge_list", "read_graph",
    "PignnConfig", "train_pignn", "GrlConfig", "train_grl", "MctsConfig", "train_mcts_gnn",
    "OracleResult", "brute_force_maxcut", "local_search_1flip", "NumericalError",
    "SolveResult", "StopMonitor",
]

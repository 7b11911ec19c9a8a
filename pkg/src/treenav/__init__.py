"""Decision-tree conversation engine: edge-list trees, a two-step turn loop
(iterative transition evaluation, then decoupled message generation), a
single-prompt baseline for comparison, and a replay-based evaluation
harness."""

from .tree_core import (
    DecisionTree,
    NodeMeta,
    NodeRole,
    TransitionEdge,
    TreeStats,
    is_terminal,
    out_degree,
    tree_from_json,
    tree_stats,
    tree_to_json,
)
from .validation import ValidationReport, validate

__all__ = [
    "DecisionTree",
    "NodeMeta",
    "NodeRole",
    "TransitionEdge",
    "TreeStats",
    "ValidationReport",
    "is_terminal",
    "out_degree",
    "tree_from_json",
    "tree_stats",
    "tree_to_json",
    "validate",
]

__version__ = "1.0.0"

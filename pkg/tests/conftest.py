from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from treenav.edge_store import TreeStore
from treenav.tree_core import DecisionTree, NodeMeta, TransitionEdge


def edge(key: str, a: str, b: str, question: str = "", answer: str = "") -> TransitionEdge:
    return TransitionEdge(
        transition_key=key,
        node_from=a,
        node_to=b,
        question=question or f"question at {a}?",
        answer=answer or f"answer for {b}",
    )


def chain_tree(*, tree_id: str = "chain") -> DecisionTree:
    # A -> B -> C, C terminal
    return DecisionTree(
        tree_id=tree_id,
        version=0,
        entry="A",
        edges=(edge("t1", "A", "B"), edge("t2", "B", "C")),
        node_meta={
            "A": NodeMeta(question_explanation="first step", tree_context="ctx A"),
            "B": NodeMeta(question_explanation="second step"),
            "C": NodeMeta(role="terminal"),
        },
    )


def branch_tree(*, tree_id: str = "branch") -> DecisionTree:
    # A -> {B, C}; B -> D; C, D terminal
    return DecisionTree(
        tree_id=tree_id,
        version=0,
        entry="A",
        edges=(
            edge("t1", "A", "B", "any pain?", "yes"),
            edge("t2", "A", "C", "any pain?", "no"),
            edge("t3", "B", "D", "worse at night?", "yes"),
        ),
        node_meta={
            "A": NodeMeta(question_explanation="screening"),
            "B": NodeMeta(question_explanation="follow-up"),
            "C": NodeMeta(role="terminal"),
            "D": NodeMeta(role="terminal"),
        },
    )


@pytest.fixture
def store(tmp_path) -> TreeStore:
    return TreeStore(tmp_path / "store")


@pytest.fixture
def chain() -> DecisionTree:
    return chain_tree()


@pytest.fixture
def branch() -> DecisionTree:
    return branch_tree()

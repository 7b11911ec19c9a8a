from __future__ import annotations

import pytest

from treenav.errors import DatasetError
from treenav.eval_harness import Strategy
from treenav.synthetic import (
    ENTRY_CHILDREN,
    generate_dataset,
    generate_tree,
    scripted_ground_truth,
    shortest_path_keys,
)
from treenav.tree_core import tree_stats, tree_to_doc
from treenav.validation import validate


class TestTreeGeneration:
    @pytest.mark.parametrize(
        "nodes,edges", [(10, 15), (50, 110), (449, 980), (800, 1200)]
    )
    def test_counts_and_validity(self, nodes, edges):
        tree = generate_tree(nodes, edges, seed=7)
        assert len(tree.nodes) == nodes
        assert len(tree.edges) == edges
        report = validate(tree)
        assert report.is_valid, report.to_doc()
        stats = tree_stats(tree)
        assert stats.node_count == nodes and stats.edge_count == edges
        assert any(not tree.adjacency[n] for n in tree.nodes)  # ≥1 terminal

    def test_deterministic_per_seed(self):
        a = tree_to_doc(generate_tree(60, 120, seed=5))
        b = tree_to_doc(generate_tree(60, 120, seed=5))
        c = tree_to_doc(generate_tree(60, 120, seed=6))
        assert a == b
        assert a != c

    def test_entry_locality_is_size_independent(self):
        def entry_view(tree):
            return [
                (e.transition_key, e.question, e.answer, e.extra_context)
                for e in tree.adjacency[tree.entry]
            ]

        small = generate_tree(20, 40, seed=1)
        large = generate_tree(2000, 4200, seed=99)
        assert len(entry_view(small)) == ENTRY_CHILDREN
        assert entry_view(small) == entry_view(large)

    def test_highest_node_is_terminal(self):
        tree = generate_tree(37, 80, seed=3)
        last = max(tree.nodes)
        assert not tree.adjacency[last]
        assert tree.meta_for(last).role == "terminal"

    def test_rejects_impossible_shapes(self):
        with pytest.raises(ValueError):
            generate_tree(3, 10)  # too few nodes
        with pytest.raises(ValueError):
            generate_tree(10, 8)  # disconnected
        with pytest.raises(ValueError):
            generate_tree(6, 100)  # more edges than a forward DAG can hold


class TestShortestPath:
    def test_follows_edges(self):
        tree = generate_tree(30, 60, seed=2)
        for node in sorted(tree.nodes):
            if not tree.adjacency[node]:
                continue
            edge = tree.adjacency[node][0]
            assert shortest_path_keys(tree, node, edge.node_to) == [edge.transition_key]

    def test_same_node_is_empty(self):
        tree = generate_tree(30, 60, seed=2)
        assert shortest_path_keys(tree, tree.entry, tree.entry) == []

    def test_path_keys_resolve_to_target(self):
        tree = generate_tree(80, 170, seed=4)
        by_key = {e.transition_key: e for e in tree.edges}
        reachable = [n for n in sorted(tree.nodes) if n != tree.entry]
        for dst in reachable[::7]:
            keys = shortest_path_keys(tree, tree.entry, dst)
            node = tree.entry
            for key in keys:
                edge = by_key[key]
                assert edge.node_from == node
                node = edge.node_to
            assert node == dst

    def test_unreachable_raises(self):
        tree = generate_tree(30, 60, seed=2)
        last = max(tree.nodes)  # a terminal: nothing is reachable from it
        with pytest.raises(DatasetError):
            shortest_path_keys(tree, last, tree.entry)


class TestDatasetGeneration:
    def test_counts_and_reference_integrity(self):
        tree = generate_tree(60, 130, seed=8)
        turns = generate_dataset(tree, 174, seed=11)
        assert len(turns) == 174
        assert len({t.turn_id for t in turns}) == 174
        for turn in turns:
            assert turn.current_node in tree.nodes
            assert turn.target_node in tree.nodes
            # target is reachable from current (0..max_hops forward)
            shortest_path_keys(tree, turn.current_node, turn.target_node)

    def test_deterministic(self):
        tree = generate_tree(60, 130, seed=8)
        a = [t.to_doc() for t in generate_dataset(tree, 20, seed=11)]
        b = [t.to_doc() for t in generate_dataset(tree, 20, seed=11)]
        assert a == b

    def test_current_nodes_never_terminal(self):
        tree = generate_tree(60, 130, seed=8)
        for turn in generate_dataset(tree, 50, seed=13):
            assert tree.adjacency[turn.current_node]


class TestGroundTruthScripts:
    def test_arbor_script_has_one_reply_per_hop_plus_generation(self):
        tree = generate_tree(40, 90, seed=9)
        turns = generate_dataset(tree, 12, seed=5)
        factory = scripted_ground_truth(tree, Strategy.ARBOR)
        for turn in turns:
            config = factory(turn, 1)
            backend = config.script
            path_len = len(
                shortest_path_keys(tree, turn.current_node, turn.target_node)
            )
            stay = 1 if tree.adjacency[turn.target_node] else 0
            assert backend.pending("evaluation") == path_len + stay
            assert backend.pending("generation") == 1

    def test_baseline_script_single_reply(self):
        tree = generate_tree(40, 90, seed=9)
        turn = generate_dataset(tree, 1, seed=5)[0]
        backend = scripted_ground_truth(tree, Strategy.BASELINE)(turn, 1).script
        assert backend.pending("baseline") == 1
        assert backend.pending("evaluation") == 0

    def test_fresh_backend_per_call(self):
        tree = generate_tree(40, 90, seed=9)
        turn = generate_dataset(tree, 1, seed=5)[0]
        factory = scripted_ground_truth(tree, Strategy.ARBOR)
        assert factory(turn, 1).script is not factory(turn, 2).script

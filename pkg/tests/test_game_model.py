import json

import pytest

from corrsolve.game_model import (
    CHANCE, GameTree, Node, InfoSet, GameBuilder, GameFormatError, GameValidationError,
    UnknownLeafError, load_game, save_game, leaf_payoff, validate_perfect_recall,
    collapse_forced_moves, swap_players,
)
from corrsolve.generators import gen_m2, gen_sheriff, gen_sat_game
from corrsolve.sequence_form import build_sequences, relevant_pairs
from corrsolve.equilibrium_lp import CONCEPTS, build_context, solve_equilibrium

from conftest import BUNDLED


def _document(nodes, infosets, players=2, root=0):
    return json.dumps({"players": players, "root": root, "nodes": nodes, "infosets": infosets})


def _leaf(i, payoffs):
    return {"id": i, "owner": None, "payoffs": payoffs}


def forgetful_game():
    """Player 1 moves twice and forgets the first move."""
    nodes = [
        {"id": 0, "owner": 1, "infoset": 0, "actions": ["L", "R"], "children": [1, 2]},
        {"id": 1, "owner": 1, "infoset": 1, "actions": ["a", "b"], "children": [3, 4]},
        {"id": 2, "owner": 1, "infoset": 1, "actions": ["a", "b"], "children": [5, 6]},
    ] + [_leaf(i, [i, -i]) for i in range(3, 7)]
    infosets = [
        {"id": 0, "player": 1, "members": [0], "actions": ["L", "R"]},
        {"id": 1, "player": 1, "members": [1, 2], "actions": ["a", "b"]},
    ]
    return _document(nodes, infosets)


class TestGameTree:

    def test_m2_layout(self, m2):
        assert len(m2.nodes) == 7
        assert m2.leaves == (2, 3, 5, 6)
        assert [I.player for I in m2.infosets] == [1, 2]
        assert m2.infosets[1].members == (1, 4)
        assert m2.root == 0
        assert not m2.has_chance

    def test_node_at_and_path(self, m2):
        z = m2.node_at(["T", "t"])
        assert m2.payoff(z) == (1.0, 1.0)
        assert m2.path(z) == [(0, 1), (4, 1)]
        with pytest.raises(KeyError):
            m2.node_at(["X"])

    def test_leaf_payoff(self, m2):
        z = m2.node_at(["H", "t"])
        assert leaf_payoff(m2, z, 1) == 0.0
        with pytest.raises(UnknownLeafError):
            leaf_payoff(m2, m2.root, 1)
        with pytest.raises(ValueError):
            leaf_payoff(m2, z, 3)

    def test_infosets_of(self, sheriff111):
        assert len(sheriff111.infosets_of(1)) == 3
        assert len(sheriff111.infosets_of(2)) == 2

    def test_rejects_mismatched_ids(self):
        nodes = (Node(id=1, owner=None, payoffs=(0.0, 0.0)),)
        with pytest.raises(GameValidationError):
            GameTree(num_players=2, nodes=nodes, infosets=())

    def test_rejects_leaf_with_wrong_payoff_count(self):
        nodes = (Node(id=0, owner=None, payoffs=(1.0,)),)
        with pytest.raises(GameValidationError, match="payoffs"):
            GameTree(num_players=2, nodes=nodes, infosets=())

    def test_rejects_owner_infoset_mismatch(self):
        nodes = (
            Node(id=0, owner=1, actions=("a", "b"), children=(1, 2), infoset=0),
            Node(id=1, owner=None, payoffs=(0.0, 0.0)),
            Node(id=2, owner=None, payoffs=(0.0, 0.0)),
        )
        infosets = (InfoSet(id=0, player=2, members=(0,), actions=("a", "b")),)
        with pytest.raises(GameValidationError, match="owner"):
            GameTree(num_players=2, nodes=nodes, infosets=infosets)

    def test_rejects_unreachable_nodes(self):
        nodes = (
            Node(id=0, owner=CHANCE, actions=("a", "b"), children=(1, 2), chance_probs=(0.5, 0.5)),
            Node(id=1, owner=None, payoffs=(0.0, 0.0)),
            Node(id=2, owner=None, payoffs=(0.0, 0.0)),
            Node(id=3, owner=None, payoffs=(0.0, 0.0)),
        )
        with pytest.raises(GameValidationError, match="unreachable"):
            GameTree(num_players=2, nodes=nodes, infosets=())


class TestBuilder:

    def test_single_action_nodes_are_collapsed(self):
        b = GameBuilder(2)
        forced = b.decision(2, "forced", ["only"], [b.leaf((1, 1))])
        root = b.decision(1, "root", ["a", "b"], [forced, b.leaf((0, 0))])
        game = b.build(root)
        assert len(game.nodes) == 3
        assert len(game.infosets) == 1

    def test_infoset_members_must_agree_on_actions(self):
        b = GameBuilder(2)
        left = b.decision(2, "I", ["x", "y"], [b.leaf((0, 0)), b.leaf((1, 1))])
        right = b.decision(2, "I", ["x", "z"], [b.leaf((0, 0)), b.leaf((1, 1))])
        with pytest.raises(GameValidationError, match="disagree"):
            b.build(b.decision(1, "root", ["L", "R"], [left, right]))

    def test_chance_probabilities_checked(self):
        b = GameBuilder(2)
        with pytest.raises(GameValidationError):
            b.chance(["a", "b"], [0.5, 0.6], [b.leaf((0, 0)), b.leaf((0, 0))])

    def test_keys_are_scoped_per_player(self):
        b = GameBuilder(2)
        inner = b.decision(2, "same", ["x", "y"], [b.leaf((0, 0)), b.leaf((1, 1))])
        game = b.build(b.decision(1, "same", ["a", "b"], [inner, b.leaf((2, 2))]))
        assert [I.player for I in game.infosets] == [1, 2]

    def test_collapse_forced_moves_is_idempotent(self, sheriff111):
        assert collapse_forced_moves(sheriff111) == sheriff111


class TestRecall:

    def test_generated_games_have_perfect_recall(self, m2, sheriff111, battleship212, goofspiel3):
        for game in (m2, sheriff111, battleship212, goofspiel3):
            assert validate_perfect_recall(game).ok

    def test_forgetful_player_is_reported(self):
        b = GameBuilder(2)
        first = b.decision(1, "again", ["a", "b"], [b.leaf((0, 0)), b.leaf((1, 1))])
        second = b.decision(1, "again", ["a", "b"], [b.leaf((2, 2)), b.leaf((3, 3))])
        game = b.build(b.decision(1, "start", ["L", "R"], [first, second]))

        report = validate_perfect_recall(game)
        assert not report.ok
        assert report.first.infoset == 1
        assert report.first.player == 1


class TestSwapPlayers:

    def test_swap_exchanges_roles_and_payoffs(self, sheriff111):
        swapped = swap_players(sheriff111)
        assert [I.player for I in swapped.infosets] == [3 - I.player for I in sheriff111.infosets]
        z = sheriff111.node_at(["n=1", "b=1", "accept"])
        assert swapped.payoff(z) == (1.0, 4.0)
        assert swap_players(swapped) == sheriff111

    @pytest.mark.parametrize("fixture", ["m2", "sheriff111", "battleship211"])
    def test_swap_transposes_relevant_pairs(self, request, fixture):
        game = request.getfixturevalue(fixture)

        def named(g):
            index = build_sequences(g)
            pairs = relevant_pairs(g, index)

            def name(player, s):
                seq = index[player].sequences[s]
                return None if seq.is_empty else (seq.infoset, seq.action)
            return {(name(1, s1), name(2, s2)) for s1, s2 in pairs.pairs}

        original = named(game)
        assert named(swap_players(game)) == {(b, a) for a, b in original}

    @pytest.mark.parametrize("fixture", ["m2", "sheriff111", "battleship211"])
    def test_swap_keeps_optimal_welfare(self, request, fixture):
        game = request.getfixturevalue(fixture)
        ctx, swapped = build_context(game), build_context(swap_players(game))
        for concept in CONCEPTS:
            before = solve_equilibrium(ctx, concept, options=BUNDLED)
            after = solve_equilibrium(swapped, concept, options=BUNDLED)
            assert before.optimal and after.optimal
            assert after.objective == pytest.approx(before.objective, abs=1e-7)

    def test_swap_needs_two_players(self, three_player_match):
        with pytest.raises(ValueError):
            swap_players(three_player_match)


class TestGameFile:

    def test_save_then_load_keeps_the_game(self, m2, sheriff111, sat_satisfiable):
        for game in (m2, sheriff111, sat_satisfiable):
            assert load_game(save_game(game)) == game

    def test_file_layout(self, sat_contradiction):
        document = json.loads(save_game(sat_contradiction))
        root = document["nodes"][0]
        assert root["owner"] == "chance"
        assert root["chance_probs"] == [0.5, 0.5]
        leaf = next(n for n in document["nodes"] if "payoffs" in n)
        assert leaf["owner"] is None

    def test_invalid_json_reports_line(self):
        with pytest.raises(GameFormatError) as excinfo:
            load_game('{\n "players": 2,\n "root": \n}')
        assert excinfo.value.line == 4

    def test_missing_field(self):
        with pytest.raises(GameFormatError) as excinfo:
            load_game(json.dumps({"root": 0, "nodes": [], "infosets": []}))
        assert excinfo.value.field == "game.players"

    def test_unknown_infoset(self):
        nodes = [{"id": 0, "owner": 1, "infoset": 7, "actions": ["a", "b"], "children": [1, 2]},
                 _leaf(1, [0, 0]), _leaf(2, [0, 0])]
        with pytest.raises(GameFormatError, match="unknown infoset"):
            load_game(_document(nodes, []))

    def test_unknown_child(self):
        nodes = [{"id": 0, "owner": 1, "infoset": 0, "actions": ["a", "b"], "children": [1, 9]},
                 _leaf(1, [0, 0])]
        infosets = [{"id": 0, "player": 1, "members": [0], "actions": ["a", "b"]}]
        with pytest.raises(GameFormatError, match="unknown child"):
            load_game(_document(nodes, infosets))

    def test_cycle(self):
        nodes = [{"id": 0, "owner": 1, "infoset": 0, "actions": ["a", "b"], "children": [0, 1]},
                 _leaf(1, [0, 0])]
        infosets = [{"id": 0, "player": 1, "members": [0], "actions": ["a", "b"]}]
        with pytest.raises(GameValidationError, match="cycle"):
            load_game(_document(nodes, infosets))

    def test_member_must_point_back(self):
        nodes = [{"id": 0, "owner": 1, "infoset": 0, "actions": ["a", "b"], "children": [1, 2]},
                 _leaf(1, [0, 0]), _leaf(2, [0, 0])]
        infosets = [{"id": 0, "player": 1, "members": [0, 1], "actions": ["a", "b"]}]
        with pytest.raises(GameValidationError):
            load_game(_document(nodes, infosets))

    def test_bad_chance_probabilities(self):
        nodes = [{"id": 0, "owner": "chance", "actions": ["a", "b"], "children": [1, 2],
                  "chance_probs": [0.3, 0.3]},
                 _leaf(1, [0, 0]), _leaf(2, [0, 0])]
        with pytest.raises(GameValidationError, match="sum"):
            load_game(_document(nodes, []))

    def test_perfect_recall_checked_on_load(self):
        with pytest.raises(GameValidationError, match="perfect recall"):
            load_game(forgetful_game())

    def test_forced_moves_collapsed_on_load(self):
        nodes = [
            {"id": 0, "owner": 1, "infoset": 0, "actions": ["a", "b"], "children": [1, 2]},
            {"id": 1, "owner": 2, "infoset": 1, "actions": ["only"], "children": [3]},
            _leaf(2, [0, 0]),
            _leaf(3, [1, 1]),
        ]
        infosets = [
            {"id": 0, "player": 1, "members": [0], "actions": ["a", "b"]},
            {"id": 1, "player": 2, "members": [1], "actions": ["only"]},
        ]
        game = load_game(_document(nodes, infosets))
        assert len(game.nodes) == 3
        assert game.payoff(game.node_at(["a"])) == (1.0, 1.0)

    def test_nodes_renumbered_in_preorder(self):
        nodes = [
            _leaf(0, [1, 1]),
            _leaf(1, [2, 2]),
            {"id": 5, "owner": 1, "infoset": 3, "actions": ["a", "b"], "children": [1, 0]},
        ]
        infosets = [{"id": 3, "player": 1, "members": [5], "actions": ["a", "b"]}]
        game = load_game(_document(nodes, infosets, root=5))
        assert game.root == 0
        assert game.payoff(1) == (2.0, 2.0)
        assert game.infosets[0].members == (0,)


def test_generators_roundtrip_through_loader():
    game = gen_sheriff(1, 2, 2)
    assert load_game(save_game(game)) == game
    sat = gen_sat_game([["x", "~y"], ["y"]])
    assert load_game(save_game(sat)).has_chance
    assert gen_m2() == gen_m2()

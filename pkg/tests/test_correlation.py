import numpy as np
import pytest

from corrsolve.sequence_form import build_sequences, relevant_pairs
from corrsolve.plans import enumerate_plans, correlation_from_joint
from corrsolve.lp_core import LinearProgram, solve
from corrsolve.correlation import (
    CompactnessError, NonRelevantPairError, LeafSubstitutionIndex, build_xi_constraints,
    require_compact, check_membership, worst_row, row_residuals, xi_leaf,
)

from conftest import HIGHS


def pure_plan(game, k1, k2):
    index = build_sequences(game)
    pairs = relevant_pairs(game, index)
    plansets = [enumerate_plans(index, i) for i in (1, 2)]
    mu = np.zeros((len(plansets[0]), len(plansets[1])))
    mu[k1, k2] = 1.0
    return index, pairs, correlation_from_joint(plansets, pairs, mu)


def test_m2_system(m2):
    index = build_sequences(m2)
    system = build_xi_constraints(m2, index, relevant_pairs(m2, index))
    assert system.n_rows == 7
    assert system.n_vars == 9
    assert system.tags[0] == "xi(empty,empty) = 1"
    assert system.tags[1] == "mass(p2 I1 | empty1)"
    assert system.b.tolist() == [1.0] + [0.0] * 6


def test_compactness_required(sat_satisfiable, three_player_match):
    with pytest.raises(CompactnessError, match="oracle"):
        require_compact(sat_satisfiable)
    with pytest.raises(CompactnessError, match="oracle"):
        require_compact(three_player_match)


@pytest.mark.parametrize("fixture", ["m2", "sheriff111", "battleship211", "goofspiel2"])
def test_pure_profiles_are_members(request, fixture):
    game = request.getfixturevalue(fixture)
    index = build_sequences(game)
    pairs = relevant_pairs(game, index)
    system = build_xi_constraints(game, index, pairs)
    plansets = [enumerate_plans(index, i) for i in (1, 2)]
    for k1 in range(len(plansets[0])):
        for k2 in range(len(plansets[1])):
            mu = np.zeros((len(plansets[0]), len(plansets[1])))
            mu[k1, k2] = 1.0
            xi = correlation_from_joint(plansets, pairs, mu)
            assert check_membership(xi, system) == 0.0
            assert set(np.unique(xi)) <= {0.0, 1.0}


def test_worst_row_names_the_broken_mass_row(m2):
    index, pairs, xi = pure_plan(m2, 0, 0)
    system = build_xi_constraints(m2, index, pairs)
    tampered = xi.copy()
    tampered[pairs.index[(1, 1)]] = 0.0

    tag, violation = worst_row(tampered, system)
    assert tag == "mass(p2 I1 | (I0,H))"
    assert violation == pytest.approx(1.0)
    assert check_membership(tampered, system) == pytest.approx(1.0)
    assert row_residuals(xi, system).max() == 0.0


def test_worst_row_reports_negative_entries(m2):
    index, pairs, xi = pure_plan(m2, 0, 0)
    system = build_xi_constraints(m2, index, pairs)
    tampered = xi.copy()
    tampered[pairs.index[(2, 2)]] = -3.0
    tag, violation = worst_row(tampered, system)
    assert tag == f"xi[{pairs.index[(2, 2)]}] >= 0"
    assert violation == 3.0


def test_membership_shape_checked(m2):
    index = build_sequences(m2)
    system = build_xi_constraints(m2, index, relevant_pairs(m2, index))
    with pytest.raises(ValueError):
        check_membership(np.zeros(4), system)


def test_leaf_substitution(m2):
    index, pairs, xi = pure_plan(m2, 1, 1)
    leaves = LeafSubstitutionIndex(m2, index, pairs)
    z = m2.node_at(["T", "t"])
    # xi[empty ⋈ z] for player 1 is xi(empty, t)
    assert leaves.coordinate(1, 0, z) == pairs.index[(0, 2)]
    assert xi_leaf(xi, leaves, 1, 0, z) == 1.0
    assert xi_leaf(xi, leaves, 2, index[2].seq(1, "t"), z) == 1.0
    assert xi[leaves.leaf_pair].sum() == 1.0


def test_non_relevant_leaf_coordinate(goofspiel3):
    index = build_sequences(goofspiel3)
    pairs = relevant_pairs(goofspiel3, index)
    leaves = LeafSubstitutionIndex(goofspiel3, index, pairs)
    p1 = index[1]
    raised = 0
    for z in goofspiel3.leaves:
        for s in range(len(p1)):
            if (s, index.sigma(2, z)) not in pairs:
                with pytest.raises(NonRelevantPairError):
                    leaves.coordinate(1, s, z)
                raised += 1
    assert raised > 0


def xi_polytope_lp(system):
    lp = LinearProgram("max")
    for k in range(system.n_vars):
        lp.add_variable(f"xi[{k}]")
    A = system.A.tocsr()
    for r in range(system.n_rows):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        lp.add_row(f"xi_row[{r}]", zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist()), "=",
                   float(system.b[r]))
    return lp


@pytest.mark.parametrize("fixture", ["m2", "sheriff111", "battleship211", "battleship212",
                                     "goofspiel2"])
def test_rows_describe_mixtures_of_joint_plans(request, fixture):
    game = request.getfixturevalue(fixture)
    index = build_sequences(game)
    pairs = relevant_pairs(game, index)
    system = build_xi_constraints(game, index, pairs)
    plansets = [enumerate_plans(index, i) for i in (1, 2)]
    s1 = [p[0] for p in pairs.pairs]
    s2 = [p[1] for p in pairs.pairs]
    reach1 = plansets[0].mask[s1].astype(float)
    reach2 = plansets[1].mask[s2].astype(float)
    lp = xi_polytope_lp(system)

    rng = np.random.default_rng(7)
    for _ in range(10):
        c = rng.normal(size=system.n_vars)
        # a linear objective over mixtures peaks at a pure profile
        best_profile = float((reach1.T @ (c[:, None] * reach2)).max())
        lp.set_objective(list(enumerate(c.tolist())))
        result = solve(lp, HIGHS)
        assert result.optimal
        assert result.objective == pytest.approx(best_profile, abs=1e-6)

import io
import math
import logging

import numpy as np
import pytest

from corrsolve.plans import PlanEnumerationError, enumerate_plans, correlation_from_joint
from corrsolve.generators import gen_sheriff
from corrsolve.lp_core import LpStatus, solve
from corrsolve.equilibrium_lp import (
    Concept, CONCEPTS, Trigger, build_context, build_deviation_lp, incentive_block, triggers_for,
    solve_equilibrium, welfare_vector, direction_vector,
)
from corrsolve.verify import (
    certify, attach_certificate, followed_value, best_deviation_value, oracle_optimum,
    oracle_decide_welfare,
    region_directions, sample_payoff_region, region_nesting, region_report, write_region_csv,
    inclusion_check, sweep_strict_chain,
)

from conftest import BUNDLED, HIGHS


class TestCertify:

    @pytest.mark.parametrize("concept", CONCEPTS)
    def test_lp_optimum_is_certified(self, sheriff111_ctx, concept):
        solution = solve_equilibrium(sheriff111_ctx, concept, options=BUNDLED)
        report = certify(sheriff111_ctx, solution.xi, concept)
        assert report.passed
        assert report.max_gap <= 1e-6
        assert report.membership_residual <= 1e-6

    def test_attach_certificate(self, m2_ctx):
        solution = solve_equilibrium(m2_ctx, Concept.EFCE, options=BUNDLED)
        report = certify(m2_ctx, solution.xi, Concept.EFCE)
        attach_certificate(solution, report)
        assert set(solution.gaps) == {"p1:I0=H", "p1:I0=T", "p2:I1=h", "p2:I1=t"}
        assert solution.max_gap == report.max_gap

    def test_tampered_plan_fails(self, m2_ctx):
        solution = solve_equilibrium(m2_ctx, Concept.NFCCE, options=BUNDLED)
        xi = solution.xi.copy()
        k = int(np.argmax(xi[1:])) + 1
        xi[k] = 0.0
        report = certify(m2_ctx, xi, Concept.NFCCE)
        assert not report.passed
        assert report.worst_row[0].startswith("mass(")
        document = report.to_dict()
        assert document["verdict"] == "fail"
        assert document["worst_row"]["violation"] > 1e-6

    def test_report_layout(self, m2_ctx):
        solution = solve_equilibrium(m2_ctx, Concept.EFCCE, options=BUNDLED)
        document = certify(m2_ctx, solution.xi, Concept.EFCCE).to_dict()
        assert document["verdict"] == "pass"
        assert [t["trigger"] for t in document["triggers"]] == ["p1:I0", "p2:I1"]

    def test_followed_value_warns_outside_the_polytope(self, m2_ctx, caplog):
        with caplog.at_level(logging.WARNING, logger="corrsolve.verify"):
            value = followed_value(m2_ctx, np.zeros(m2_ctx.n_xi), 1)
        assert value == 0.0
        assert "violates its polytope" in caplog.text

    def test_stronger_certificates_imply_weaker_ones(self, sheriff111_ctx):
        ctx = sheriff111_ctx
        rng = np.random.default_rng(0)
        for _ in range(20):
            objective = rng.normal(size=ctx.n_xi)
            solution = solve_equilibrium(ctx, Concept.EFCE, objective, options=BUNDLED)
            assert solution.optimal
            assert certify(ctx, solution.xi, Concept.EFCE).passed
            assert certify(ctx, solution.xi, Concept.EFCCE).passed
            assert certify(ctx, solution.xi, Concept.NFCCE).passed


def joint_plan(ctx, mu):
    plansets = [enumerate_plans(ctx.index, i) for i in (1, 2)]
    return correlation_from_joint(plansets, ctx.pairs, np.asarray(mu, dtype=float))


class TestHandComputed:

    def test_diagonal_on_m2(self, m2_ctx):
        xi = joint_plan(m2_ctx, [[0.5, 0.0], [0.0, 0.5]])
        assert followed_value(m2_ctx, xi, 1) == pytest.approx(1.0)
        assert followed_value(m2_ctx, xi, 2) == pytest.approx(1.0)
        assert best_deviation_value(m2_ctx, xi, Trigger(Concept.NFCCE, 1)) == pytest.approx(0.5)
        for concept in CONCEPTS:
            assert certify(m2_ctx, xi, concept).passed

    def test_uniform_product_on_m2(self, m2_ctx):
        xi = joint_plan(m2_ctx, np.full((2, 2), 0.25))
        assert followed_value(m2_ctx, xi, 1) == pytest.approx(0.5)
        assert followed_value(m2_ctx, xi, 2) == pytest.approx(0.5)

    def test_uniform_product_on_pennies(self, pennies_ctx):
        xi = joint_plan(pennies_ctx, np.full((2, 2), 0.25))
        for concept in CONCEPTS:
            report = certify(pennies_ctx, xi, concept)
            assert report.passed
            assert report.max_gap == pytest.approx(0.0, abs=1e-12)

    def test_recommending_a_mismatch_fails(self, m2_ctx):
        xi = joint_plan(m2_ctx, [[0.0, 1.0], [0.0, 0.0]])
        report = certify(m2_ctx, xi, Concept.NFCCE)
        assert not report.passed
        assert report.max_gap == pytest.approx(1.0)
        assert report.membership_residual == 0.0


class TestPureDeviations:

    @pytest.mark.parametrize("name", ["m2_ctx", "sheriff111_ctx"])
    @pytest.mark.parametrize("concept", CONCEPTS)
    def test_mixed_deviations_gain_nothing_more(self, request, name, concept):
        ctx = request.getfixturevalue(name)
        plansets = [enumerate_plans(ctx.index, i) for i in (1, 2)]
        shape = (len(plansets[0]), len(plansets[1]))
        rng = np.random.default_rng(11)
        for _ in range(5):
            mu = rng.dirichlet(np.full(shape[0] * shape[1], 0.5)).reshape(shape)
            xi = correlation_from_joint(plansets, ctx.pairs, mu)
            for trigger in triggers_for(ctx, concept):
                followed = incentive_block(ctx, trigger).b @ xi
                pure = best_deviation_value(ctx, xi, trigger) - followed
                mixed = solve(build_deviation_lp(ctx, xi, concept, [trigger]), BUNDLED)
                assert mixed.optimal
                assert mixed.objective <= pure + 1e-9
                assert mixed.objective >= pure - 1e-9


class TestOracle:

    @pytest.mark.parametrize("name", ["m2", "goofspiel2", "sheriff111", "battleship211"])
    @pytest.mark.parametrize("concept", CONCEPTS)
    def test_matches_the_compact_lp(self, request, name, concept):
        game = request.getfixturevalue(name)
        ctx = request.getfixturevalue(f"{name}_ctx")
        solution = solve_equilibrium(ctx, concept, options=BUNDLED)
        oracle = oracle_optimum(game, concept, options=BUNDLED)
        assert oracle.optimal
        assert solution.objective == pytest.approx(oracle.value, abs=1e-6)

    def test_matches_on_a_direction(self, sheriff111, sheriff111_ctx):
        for concept in CONCEPTS:
            solution = solve_equilibrium(sheriff111_ctx, concept,
                                         direction_vector(sheriff111_ctx, 1.0, 0.0), options=BUNDLED)
            oracle = oracle_optimum(sheriff111, concept, weights=(1.0, 0.0), options=BUNDLED)
            assert solution.objective == pytest.approx(oracle.value, abs=1e-6)

    def test_distribution_and_utilities(self, m2):
        result = oracle_optimum(m2, Concept.NFCCE, options=BUNDLED)
        assert result.mu.shape == (2, 2)
        assert result.mu.sum() == pytest.approx(1.0)
        assert sum(result.utilities) == pytest.approx(2.0)

    @pytest.mark.parametrize("concept", CONCEPTS)
    def test_satisfiable_formula(self, sat_satisfiable, concept):
        result = oracle_optimum(sat_satisfiable, concept, options=BUNDLED)
        assert result.value == pytest.approx(2.0, abs=1e-9)

    @pytest.mark.parametrize("concept", [Concept.NFCCE, Concept.EFCCE])
    def test_contradiction(self, sat_contradiction, concept):
        result = oracle_optimum(sat_contradiction, concept, options=BUNDLED)
        assert result.value <= 2.0 - 0.5 + 1e-6
        assert result.value == pytest.approx(1.0)

    def test_three_players(self, three_player_match):
        for concept in CONCEPTS:
            result = oracle_optimum(three_player_match, concept, options=BUNDLED)
            assert result.value == pytest.approx(3.0)
            assert result.mu.shape == (2, 2, 2)

    def test_decide_welfare(self, sat_contradiction):
        assert oracle_decide_welfare(sat_contradiction, Concept.EFCCE, 1.0, options=BUNDLED)
        assert not oracle_decide_welfare(sat_contradiction, Concept.EFCCE, 1.5, options=BUNDLED)

    def test_infeasible_floor_is_a_status(self, m2):
        result = oracle_optimum(m2, Concept.EFCE, options=BUNDLED, floor=3.0)
        assert result.status == LpStatus.INFEASIBLE
        assert math.isnan(result.value)

    def test_cap(self, goofspiel3):
        with pytest.raises(PlanEnumerationError, match="too large for enumeration"):
            oracle_optimum(goofspiel3, Concept.NFCCE, cap=100)


class TestOrdering:

    @pytest.mark.parametrize("name", ["m2_ctx", "goofspiel2_ctx", "sheriff111_ctx",
                                      "battleship211_ctx"])
    def test_inclusion(self, request, name):
        result = inclusion_check(request.getfixturevalue(name), BUNDLED)
        assert result.ok
        assert all(status == LpStatus.OPTIMAL for status in result.statuses.values())

    def test_goofspiel_concepts_agree(self, goofspiel3_ctx):
        result = inclusion_check(goofspiel3_ctx, HIGHS)
        values = [result.welfare[c] for c in CONCEPTS]
        assert result.ok
        assert max(values) - min(values) <= 1e-6
        assert values[0] == pytest.approx(6.0, abs=1e-6)

    def test_goofspiel_optimum_is_certified(self, goofspiel3_ctx):
        solution = solve_equilibrium(goofspiel3_ctx, Concept.EFCE, options=HIGHS)
        assert certify(goofspiel3_ctx, solution.xi, Concept.EFCE).passed
        assert float(welfare_vector(goofspiel3_ctx) @ solution.xi) == pytest.approx(6.0, abs=1e-6)

    def test_sheriff_211_separates_every_concept(self):
        result = inclusion_check(build_context(gen_sheriff(2, 1, 1)), HIGHS)
        w = result.welfare
        assert result.ok
        assert w[Concept.NFCCE] == pytest.approx(70 / 13, abs=1e-5)
        assert w[Concept.EFCCE] == pytest.approx(235 / 93, abs=1e-5)
        assert w[Concept.EFCE] == pytest.approx(10 / 7, abs=1e-5)
        assert w[Concept.EFCE] < w[Concept.EFCCE] < w[Concept.NFCCE]

    def test_sheriff_212_ties_the_extensive_form_concepts(self):
        result = inclusion_check(build_context(gen_sheriff(2, 1, 2)), HIGHS)
        w = result.welfare
        assert result.ok
        assert w[Concept.NFCCE] == pytest.approx(6.667, abs=1e-3)
        assert w[Concept.EFCCE] == pytest.approx(5.0, abs=1e-3)
        assert w[Concept.EFCE] == pytest.approx(5.0, abs=1e-3)

    @pytest.mark.slow
    def test_strict_chain_sweep(self):
        params = [(1, 1, 1), (1, 2, 1), (2, 1, 1), (2, 2, 1), (1, 1, 2), (2, 2, 2)]
        witness = sweep_strict_chain(params, HIGHS)
        assert witness is not None
        assert witness.params == (2, 1, 1)
        w = witness.welfare
        assert w[Concept.EFCE] < w[Concept.EFCCE] < w[Concept.NFCCE]
        assert sweep_strict_chain([(1, 1, 1), (1, 2, 1)], HIGHS) is None


class TestRegions:

    def test_directions(self):
        plain = region_directions(8)
        assert plain[0] == (1.0, 0.0)
        assert all(math.hypot(dx, dy) == pytest.approx(1.0) for dx, dy in plain)
        seeded = region_directions(8, seed=0)
        assert seeded == region_directions(8, seed=0)
        offset = math.atan2(seeded[0][1], seeded[0][0])
        assert 0.0 <= offset < 2 * math.pi / 8
        with pytest.raises(ValueError):
            region_directions(0)

    def test_m2_region(self, m2_ctx):
        sample = sample_payoff_region(m2_ctx, 8, options=BUNDLED, max_workers=2)
        assert len(sample.points) == 24
        assert sample.concepts() == list(CONCEPTS)
        assert region_nesting(sample)
        diagonal = [p for p in sample.points if p.concept == Concept.NFCCE][1]
        assert diagonal.support == pytest.approx(2.0 / math.sqrt(2.0))

        stream = io.StringIO()
        write_region_csv(sample, stream)
        lines = stream.getvalue().splitlines()
        assert lines[0] == "concept,dx,dy,u1,u2"
        assert len(lines) == 25
        assert lines[1].startswith("nfcce,1.0,0.0,")

    def test_nesting_detects_violations(self, m2_ctx):
        sample = sample_payoff_region(m2_ctx, 4, options=BUNDLED)
        efce = [p for p in sample.points if p.concept == Concept.EFCE]
        efce[0].u1 += 1.0
        assert not region_nesting(sample)
        assert not region_report(sample).nested

    @pytest.mark.slow
    def test_battleship_region(self, battleship212_ctx):
        sample = sample_payoff_region(battleship212_ctx, 64, seed=0, options=HIGHS, max_workers=4)
        assert all(p.status == LpStatus.OPTIMAL for p in sample.points)
        report = region_report(sample)
        assert report.nested
        assert report.efce_equals_efcce
        assert report.nfcce_separated
        assert report.max_separation > 0.1

"""Independent checks of correlation plans.

Best deviations are computed by dynamic programming over the deviator's sequences, never by
LP. The oracle solves the equilibrium problem directly over joint reduced plans and works
for any number of players and with chance.
"""

import csv
import math
import itertools
import logging
from typing import List, Dict, Any, Optional, Tuple, Sequence, TextIO, Iterable
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from corrsolve.game_model import GameTree
from corrsolve.generators import gen_sheriff
from corrsolve.sequence_form import SequenceFormIndex, build_sequences
from corrsolve.plans import PlanSet, enumerate_plans, DEFAULT_PLAN_CAP, PlanEnumerationError
from corrsolve.correlation import check_membership, worst_row
from corrsolve.lp_core import LinearProgram, LpStatus, SolverOptions, INF, solve
from corrsolve.equilibrium_lp import (
    Concept, CONCEPTS, Trigger, SolverContext, EquilibriumSolution,
    triggers_for, deviation_block_scope, incentive_block, player_utility_vector,
    direction_vector, solve_equilibrium, build_context,
)


logger = logging.getLogger(__name__)

VERIFY_TOL = 1e-6


def followed_value(ctx: SolverContext, xi: np.ndarray, player: int, tol: float = VERIFY_TOL) -> float:
    """Expected utility of ``player`` when everybody follows the recommendations."""
    residual = check_membership(xi, ctx.xi_system)
    if residual > tol:
        logger.warning(f"Correlation plan violates its polytope by {residual:.3g}; "
                       f"followed value of player {player} is not meaningful")
    return float(player_utility_vector(ctx, player) @ xi)


def best_deviation_value(ctx: SolverContext, xi: np.ndarray, trigger: Trigger) -> float:
    """Best value a trigger agent can reach by deviating, by backward induction over sequences."""
    scope = deviation_block_scope(ctx, trigger)
    i = trigger.player
    seqs = ctx.index[i]
    value = np.zeros(len(seqs))
    for z in scope.deviation_leaves:
        z = int(z)
        u = ctx.game.nodes[z].payoffs[i - 1]
        if u:
            value[ctx.index.sigma(i, z)] += u * xi[ctx.leaves.coordinate(i, scope.anchor, z)]

    # An infoset's sequences are numbered after its parent sequence.
    for s in reversed(range(len(seqs))):
        for I in seqs.children[s]:
            value[s] += max(value[c] for c in seqs.infoset_seqs[I])
    return float(value[scope.normalization])


@dataclass
class TriggerCheck:
    label: str
    followed: float
    deviation: float

    @property
    def gap(self) -> float:
        return self.deviation - self.followed


@dataclass
class VerificationReport:
    concept: Concept
    checks: List[TriggerCheck]
    membership_residual: float
    worst_row: Tuple[str, float]
    tol: float = VERIFY_TOL

    @property
    def max_gap(self) -> float:
        return max((c.gap for c in self.checks), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.tol and self.membership_residual <= self.tol

    def to_dict(self) -> Dict[str, Any]:
        return {
            "concept": self.concept.value,
            "verdict": "pass" if self.passed else "fail",
            "tol": self.tol,
            "max_gap": self.max_gap,
            "membership_residual": self.membership_residual,
            "worst_row": {"row": self.worst_row[0], "violation": self.worst_row[1]},
            "triggers": [
                {"trigger": c.label, "followed": c.followed, "deviation": c.deviation, "gap": c.gap}
                for c in self.checks
            ],
        }


def certify(ctx: SolverContext, xi: np.ndarray, concept: Concept,
            tol: float = VERIFY_TOL) -> VerificationReport:
    """Check every trigger of the concept and membership of xi in the polytope."""
    concept = Concept(concept)
    xi = np.asarray(xi, dtype=float)
    residual = check_membership(xi, ctx.xi_system)
    checks = []
    for trigger in triggers_for(ctx, concept):
        block = incentive_block(ctx, trigger)
        followed = float(block.b @ xi)
        deviation = best_deviation_value(ctx, xi, trigger)
        checks.append(TriggerCheck(trigger.label, followed, deviation))
        logger.debug(f"{concept.value} {trigger.label}: followed {followed:.9g}, "
                     f"deviation {deviation:.9g}")

    report = VerificationReport(concept=concept, checks=checks, membership_residual=residual,
                                worst_row=worst_row(xi, ctx.xi_system), tol=tol)
    logger.info(f"Certified {concept.value}: max gap {report.max_gap:.3g}, "
                f"residual {residual:.3g} -> {'pass' if report.passed else 'fail'}")
    return report


def attach_certificate(solution: EquilibriumSolution,
                       report: VerificationReport) -> EquilibriumSolution:
    solution.gaps = {c.label: c.gap for c in report.checks}
    solution.max_gap = report.max_gap
    return solution


# ---------------------------------------------------------------------------
# Brute-force oracle over joint reduced plans
# ---------------------------------------------------------------------------

@dataclass
class OracleResult:
    concept: Concept
    status: LpStatus
    value: float
    mu: np.ndarray
    utilities: List[float] = field(default_factory=list)
    n_constraints: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


def _oracle_triggers(index: SequenceFormIndex, num_players: int, concept: Concept) -> List[Trigger]:
    triggers = []
    for player in range(1, num_players + 1):
        seqs = index[player]
        if concept == Concept.NFCCE:
            triggers.append(Trigger(concept, player, label=f"p{player}"))
        elif concept == Concept.EFCCE:
            triggers.extend(Trigger(concept, player, infoset=I, label=f"p{player}:I{I}")
                            for I in seqs.infosets)
        else:
            triggers.extend(
                Trigger(concept, player, infoset=seqs.seq_infoset[s], sequence=s,
                        label=f"p{player}:I{seqs.seq_infoset[s]}={seqs.sequences[s].action}")
                for s in range(1, len(seqs))
            )
    return triggers


def _deviations(planset: PlanSet, trigger: Trigger) -> List[np.ndarray]:
    """Pure deviation plans, distinct on the part of the tree the trigger agent controls."""
    if trigger.concept == Concept.NFCCE:
        return [planset.plans[k] for k in range(len(planset))]
    seqs = planset.seqs
    I = trigger.infoset
    below = [seqs.infoset_row[J] - 1 for J in seqs.infosets
             if J == I or any(seqs.is_below(seqs.infoset_parent[J], c) for c in seqs.infoset_seqs[I])]
    distinct: Dict[Tuple[int, ...], np.ndarray] = {}
    for plan in planset.plans:
        if plan[seqs.infoset_row[I] - 1] < 0:
            continue
        distinct.setdefault(tuple(plan[below]), plan)
    return list(distinct.values())


class _Simulator:
    """Expected payoffs of a joint plan profile, optionally with one trigger agent."""

    def __init__(self, game: GameTree, plansets: Dict[int, PlanSet]):
        self.game = game
        self.plansets = plansets

    def payoff(self, profile: Sequence[int], trigger: Optional[Trigger] = None,
               deviation: Optional[np.ndarray] = None) -> np.ndarray:
        game, plansets = self.game, self.plansets
        deviator = trigger.player if trigger is not None else None
        trigger_action = -1
        if trigger is not None and trigger.concept == Concept.EFCE:
            seqs = plansets[deviator].seqs
            trigger_action = seqs.infoset_seqs[trigger.infoset].index(trigger.sequence)

        def walk(v: int, triggered: bool) -> np.ndarray:
            node = game.nodes[v]
            if node.is_leaf:
                return np.asarray(node.payoffs, dtype=float)
            if node.is_chance:
                return sum(p * walk(c, triggered) for p, c in zip(node.chance_probs, node.children))
            j = node.owner
            planset = plansets[j]
            pos = planset.seqs.infoset_row[node.infoset] - 1
            recommended = int(planset.plans[profile[j - 1], pos])
            if j == deviator and not triggered and node.infoset == trigger.infoset:
                if trigger.concept == Concept.EFCCE or recommended == trigger_action:
                    triggered = True
            a = int(deviation[pos]) if j == deviator and triggered else recommended
            if a < 0:
                raise RuntimeError(f"plan leaves infoset {node.infoset} unspecified")
            return walk(node.children[a], triggered)

        start_triggered = trigger is not None and trigger.concept == Concept.NFCCE
        return walk(game.root, start_triggered)


def _oracle_lp(game: GameTree, concept: Concept, weights: Optional[Sequence[float]],
               cap: int) -> Tuple[LinearProgram, List[Tuple[int, ...]], np.ndarray, Tuple[int, ...]]:
    concept = Concept(concept)
    index = build_sequences(game)
    players = range(1, game.num_players + 1)
    plansets = {i: enumerate_plans(index, i, cap) for i in players}
    shape = tuple(len(plansets[i]) for i in players)
    if math.prod(shape) > cap:
        raise PlanEnumerationError(
            f"{math.prod(shape)} joint plan profiles: too large for enumeration (cap {cap})"
        )
    profiles = list(itertools.product(*(range(n) for n in shape)))
    sim = _Simulator(game, plansets)
    followed = np.array([sim.payoff(p) for p in profiles])

    weights = np.ones(game.num_players) if weights is None else np.asarray(weights, dtype=float)
    lp = LinearProgram("max")
    mu = [lp.add_variable(f"mu[{k}]", 0.0, INF) for k in range(len(profiles))]
    lp.add_row("total", [(m, 1.0) for m in mu], "=", 1.0)

    for t, trigger in enumerate(_oracle_triggers(index, game.num_players, concept)):
        i = trigger.player
        for d, deviation in enumerate(_deviations(plansets[i], trigger)):
            gain = np.array([sim.payoff(p, trigger, deviation)[i - 1] for p in profiles])
            coef = followed[:, i - 1] - gain
            if np.all(coef >= 0):
                continue
            lp.add_row(f"incentive[{t}][{d}]",
                       [(mu[k], coef[k]) for k in np.flatnonzero(coef)], ">=", 0.0)

    objective = followed @ weights
    lp.set_objective((mu[k], objective[k]) for k in np.flatnonzero(objective))
    return lp, profiles, followed, shape


def oracle_optimum(game: GameTree, concept: Concept, weights: Optional[Sequence[float]] = None,
                   cap: int = DEFAULT_PLAN_CAP, options: Optional[SolverOptions] = None,
                   floor: Optional[float] = None) -> OracleResult:
    """Optimum of ``weights . u`` over concept equilibria, as an LP over joint plan profiles.

    Raises:
        PlanEnumerationError: plans or joint profiles exceed ``cap``.
    """
    concept = Concept(concept)
    lp, profiles, followed, shape = _oracle_lp(game, concept, weights, cap)
    if floor is not None:
        welfare = followed.sum(axis=1)
        lp.add_row("welfare_floor",
                   [(k, welfare[k]) for k in np.flatnonzero(welfare)], ">=", floor)
    result = solve(lp, options)
    if not result.optimal:
        logger.info(f"Oracle {concept.value}: {result.status.value}")
        return OracleResult(concept, result.status, float("nan"), np.zeros(shape),
                            n_constraints=lp.n_rows)
    mu = np.clip(result.x, 0.0, None)
    utilities = [float(u) for u in mu @ followed]
    logger.info(f"Oracle {concept.value}: optimum {result.objective:.9g} over "
                f"{len(profiles)} profiles, {lp.n_rows} rows")
    return OracleResult(concept, result.status, result.objective, mu.reshape(shape),
                        utilities=utilities, n_constraints=lp.n_rows)


def oracle_decide_welfare(game: GameTree, concept: Concept, kappa: float,
                          cap: int = DEFAULT_PLAN_CAP,
                          options: Optional[SolverOptions] = None) -> bool:
    """Whether some equilibrium of the concept reaches social welfare kappa."""
    return oracle_optimum(game, concept, cap=cap, options=options, floor=kappa).optimal


# ---------------------------------------------------------------------------
# Payoff regions and welfare ordering
# ---------------------------------------------------------------------------

@dataclass
class RegionPoint:
    concept: Concept
    dx: float
    dy: float
    u1: float
    u2: float
    status: LpStatus = LpStatus.OPTIMAL

    @property
    def support(self) -> float:
        return self.dx * self.u1 + self.dy * self.u2


@dataclass
class PayoffRegionSample:
    directions: List[Tuple[float, float]]
    points: List[RegionPoint]

    def support(self, concept: Concept) -> np.ndarray:
        return np.array([p.support for p in self.points if p.concept == concept])

    def concepts(self) -> List[Concept]:
        return [c for c in CONCEPTS if any(p.concept == c for p in self.points)]


def region_directions(k: int, seed: Optional[int] = None) -> List[Tuple[float, float]]:
    """k unit vectors evenly spaced on the circle; a seed rotates them by a random offset."""
    if k < 1:
        raise ValueError("need at least one direction")
    offset = 0.0
    if seed is not None:
        offset = float(np.random.default_rng(seed).uniform(0.0, 2 * math.pi / k))
    return [(math.cos(offset + 2 * math.pi * n / k), math.sin(offset + 2 * math.pi * n / k))
            for n in range(k)]


def sample_payoff_region(ctx: SolverContext, k: int, concepts: Iterable[Concept] = CONCEPTS,
                         seed: Optional[int] = None, options: Optional[SolverOptions] = None,
                         max_workers: int = 1) -> PayoffRegionSample:
    """Per-direction optimal payoff vectors for each concept (inner hull of its payoff region)."""
    directions = region_directions(k, seed)
    jobs = [(Concept(c), dx, dy) for c in concepts for dx, dy in directions]

    def run(job: Tuple[Concept, float, float]) -> RegionPoint:
        concept, dx, dy = job
        solution = solve_equilibrium(ctx, concept, direction_vector(ctx, dx, dy), options=options)
        if not solution.optimal:
            return RegionPoint(concept, dx, dy, float("nan"), float("nan"), solution.status)
        return RegionPoint(concept, dx, dy, *solution.utilities, status=solution.status)

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        points = list(executor.map(run, jobs))
    logger.info(f"Sampled {len(points)} region points over {len(directions)} directions")
    return PayoffRegionSample(directions=directions, points=points)


@dataclass
class RegionReport:
    nested: bool
    efce_equals_efcce: bool
    nfcce_separated: bool
    max_separation: float


def region_nesting(sample: PayoffRegionSample, margin: float = 1e-6) -> bool:
    """Support values never grow from a weaker to a stronger concept in any direction."""
    present = sample.concepts()
    for weaker, stronger in zip(present, present[1:]):
        if np.any(sample.support(stronger) > sample.support(weaker) + margin):
            return False
    return True


def region_report(sample: PayoffRegionSample, margin: float = 1e-6,
                  separation: float = 1e-4) -> RegionReport:
    efce = sample.support(Concept.EFCE)
    efcce = sample.support(Concept.EFCCE)
    nfcce = sample.support(Concept.NFCCE)
    gap = float(np.max(nfcce - efcce)) if len(nfcce) and len(efcce) else 0.0
    return RegionReport(
        nested=region_nesting(sample, margin),
        efce_equals_efcce=bool(len(efce) and np.allclose(efce, efcce, rtol=0.0, atol=margin)),
        nfcce_separated=gap > separation,
        max_separation=gap,
    )


def write_region_csv(sample: PayoffRegionSample, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["concept", "dx", "dy", "u1", "u2"])
    for p in sample.points:
        writer.writerow([p.concept.value, repr(p.dx), repr(p.dy), repr(p.u1), repr(p.u2)])


@dataclass
class InclusionResult:
    welfare: Dict[Concept, float]
    statuses: Dict[Concept, LpStatus]
    ok: bool


def inclusion_check(ctx: SolverContext, options: Optional[SolverOptions] = None,
                    margin: float = 1e-6) -> InclusionResult:
    """Maximum welfare per concept and whether EFCE <= EFCCE <= NFCCE holds."""
    welfare: Dict[Concept, float] = {}
    statuses: Dict[Concept, LpStatus] = {}
    for concept in CONCEPTS:
        solution = solve_equilibrium(ctx, concept, options=options)
        welfare[concept] = solution.objective
        statuses[concept] = solution.status
    ok = (all(s == LpStatus.OPTIMAL for s in statuses.values())
          and welfare[Concept.EFCE] <= welfare[Concept.EFCCE] + margin
          and welfare[Concept.EFCCE] <= welfare[Concept.NFCCE] + margin)
    return InclusionResult(welfare=welfare, statuses=statuses, ok=ok)


@dataclass
class StrictChainWitness:
    params: Tuple[int, int, int]
    welfare: Dict[Concept, float]


def sweep_strict_chain(params: Iterable[Tuple[int, int, int]],
                       options: Optional[SolverOptions] = None,
                       margin: float = 1e-6) -> Optional[StrictChainWitness]:
    """First Sheriff instance whose maximum welfare strictly drops at each stronger concept."""
    for n_max, b_max, r in params:
        ctx = build_context(gen_sheriff(n_max, b_max, r))
        result = inclusion_check(ctx, options, margin)
        w = result.welfare
        logger.info(f"Sheriff({n_max},{b_max},{r}): welfare "
                    + ", ".join(f"{c.value}={w[c]:.6f}" for c in CONCEPTS))
        if (result.ok and w[Concept.EFCE] < w[Concept.EFCCE] - margin
                and w[Concept.EFCCE] < w[Concept.NFCCE] - margin):
            return StrictChainWitness(params=(n_max, b_max, r), welfare=w)
    return None

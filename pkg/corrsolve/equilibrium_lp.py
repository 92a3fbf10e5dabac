"""Incentive blocks and the welfare-maximizing LPs for NFCCE, EFCCE and EFCE.

For a trigger t of player i, the deviation inequality reads

    max_y  xi^T A_t y  -  b_t^T xi  <=  0

over sequence-form strategies y with y(norm_t) = 1. Dualizing the inner maximum with
multipliers v (one per row of F_i) and w (for y(norm_t) = 1) gives the linear rows

    (a)  u - v[0] - w + b_t^T xi >= 0
    (b)  F_i^T v + w e_norm - A_t^T xi >= 0

with a shared u <= 0, so the whole problem is one LP over xi.
"""

import time
import logging
from enum import Enum
from typing import List, Dict, Optional, Tuple
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from corrsolve.game_model import GameTree
from corrsolve.sequence_form import (
    SequenceFormIndex, RelevantPairSet, build_sequences, relevant_pairs,
)
from corrsolve.correlation import (
    XiConstraintSystem, LeafSubstitutionIndex, build_xi_constraints, require_compact,
)
from corrsolve.lp_core import LinearProgram, LpSolution, LpStatus, SolverOptions, INF, solve


logger = logging.getLogger(__name__)


class TriggerError(ValueError):
    pass


class Concept(str, Enum):
    NFCCE = "nfcce"
    EFCCE = "efcce"
    EFCE = "efce"


# Weakest to strongest
CONCEPTS = (Concept.NFCCE, Concept.EFCCE, Concept.EFCE)


@dataclass(frozen=True)
class Trigger:
    """NFCCE: player only. EFCCE: player and infoset. EFCE: player, infoset and sequence."""
    concept: Concept
    player: int
    infoset: Optional[int] = None
    sequence: Optional[int] = None
    label: str = ""


@dataclass
class SolverContext:
    """Everything the LPs need about one compact game. Immutable once built."""
    game: GameTree
    index: SequenceFormIndex
    pairs: RelevantPairSet
    leaves: LeafSubstitutionIndex
    xi_system: XiConstraintSystem

    @property
    def n_xi(self) -> int:
        return len(self.pairs)


def build_context(game: GameTree) -> SolverContext:
    """Sequence form, relevant pairs and the correlation-plan system of a compact game.

    Raises:
        CompactnessError: the game has chance nodes or more than two players.
    """
    require_compact(game)
    index = build_sequences(game)
    pairs = relevant_pairs(game, index)
    leaves = LeafSubstitutionIndex(game, index, pairs)
    xi_system = build_xi_constraints(game, index, pairs)
    return SolverContext(game=game, index=index, pairs=pairs, leaves=leaves, xi_system=xi_system)


def triggers_for(ctx: SolverContext, concept: Concept) -> List[Trigger]:
    triggers = []
    for player in (1, 2):
        seqs = ctx.index[player]
        if concept == Concept.NFCCE:
            triggers.append(Trigger(concept, player, label=f"p{player}"))
        elif concept == Concept.EFCCE:
            for I in seqs.infosets:
                triggers.append(Trigger(concept, player, infoset=I, label=f"p{player}:I{I}"))
        else:
            for s in range(1, len(seqs)):
                I = seqs.seq_infoset[s]
                action = seqs.sequences[s].action
                triggers.append(Trigger(concept, player, infoset=I, sequence=s,
                                        label=f"p{player}:I{I}={action}"))
    return triggers


def _check_trigger(ctx: SolverContext, trigger: Trigger) -> None:
    if trigger.player not in (1, 2):
        raise TriggerError(f"unknown player {trigger.player}")
    seqs = ctx.index[trigger.player]
    if trigger.concept == Concept.NFCCE:
        if trigger.infoset is not None or trigger.sequence is not None:
            raise TriggerError("NFCCE triggers name a player only")
        return
    if trigger.infoset not in seqs.infoset_row:
        raise TriggerError(f"infoset {trigger.infoset} is not an infoset of player {trigger.player}")
    if trigger.concept == Concept.EFCCE:
        if trigger.sequence is not None:
            raise TriggerError("EFCCE triggers name an infoset, not a sequence")
        return
    if trigger.sequence is None or trigger.sequence not in seqs.infoset_seqs[trigger.infoset]:
        raise TriggerError(f"EFCE trigger needs a sequence of infoset {trigger.infoset}")


@dataclass
class BlockScope:
    """Leaves on the deviation and followed sides, the xi anchor and the normalized sequence."""
    deviation_leaves: np.ndarray
    followed_leaves: np.ndarray
    anchor: int
    normalization: int


def deviation_block_scope(ctx: SolverContext, trigger: Trigger) -> BlockScope:
    _check_trigger(ctx, trigger)
    seqs = ctx.index[trigger.player]
    leaves = ctx.leaves.leaves
    leaf_seq = ctx.leaves.leaf_seq[trigger.player]

    if trigger.concept == Concept.NFCCE:
        return BlockScope(leaves, leaves, anchor=0, normalization=0)

    I = trigger.infoset
    children = seqs.infoset_seqs[I]
    under_infoset = np.array([any(seqs.is_below(s, c) for c in children) for s in leaf_seq],
                             dtype=bool)
    in_infoset = leaves[under_infoset]
    parent = seqs.infoset_parent[I]
    if trigger.concept == Concept.EFCCE:
        return BlockScope(in_infoset, in_infoset, anchor=parent, normalization=parent)

    under_sequence = np.array([seqs.is_below(s, trigger.sequence) for s in leaf_seq], dtype=bool)
    return BlockScope(in_infoset, leaves[under_sequence], anchor=trigger.sequence,
                      normalization=parent)


@dataclass
class IncentiveBlock:
    """Sparse (A, b) of one trigger: rows are xi coordinates, A's columns are sequences."""
    trigger: Trigger
    A: sparse.csc_matrix
    b: np.ndarray
    scope: BlockScope


def incentive_block(ctx: SolverContext, trigger: Trigger) -> IncentiveBlock:
    scope = deviation_block_scope(ctx, trigger)
    i = trigger.player
    game, index = ctx.game, ctx.index

    rows, cols, vals = [], [], []
    for z in scope.deviation_leaves:
        u = game.nodes[z].payoffs[i - 1]
        if u == 0:
            continue
        rows.append(ctx.leaves.coordinate(i, scope.anchor, int(z)))
        cols.append(index.sigma(i, int(z)))
        vals.append(u)
    A = sparse.csc_matrix((vals, (rows, cols)), shape=(ctx.n_xi, len(index[i])))

    b = np.zeros(ctx.n_xi)
    position = {int(z): k for k, z in enumerate(ctx.leaves.leaves)}
    for z in scope.followed_leaves:
        np.add.at(b, ctx.leaves.leaf_pair[position[int(z)]], game.nodes[z].payoffs[i - 1])
    return IncentiveBlock(trigger=trigger, A=A, b=b, scope=scope)


def player_utility_vector(ctx: SolverContext, player: int) -> np.ndarray:
    """c_i with c_i . xi = expected utility of player i when everyone follows."""
    c = np.zeros(ctx.n_xi)
    payoffs = np.array([ctx.game.nodes[z].payoffs[player - 1] for z in ctx.leaves.leaves])
    np.add.at(c, ctx.leaves.leaf_pair, payoffs)
    return c


def welfare_vector(ctx: SolverContext) -> np.ndarray:
    """Social welfare per xi coordinate: sum over players of their payoffs at each leaf pair."""
    c = np.zeros(ctx.n_xi)
    welfare = np.array([sum(ctx.game.nodes[z].payoffs) for z in ctx.leaves.leaves])
    np.add.at(c, ctx.leaves.leaf_pair, welfare)
    return c


def direction_vector(ctx: SolverContext, dx: float, dy: float) -> np.ndarray:
    return dx * player_utility_vector(ctx, 1) + dy * player_utility_vector(ctx, 2)


def _xi_variables(lp: LinearProgram, ctx: SolverContext) -> List[int]:
    return [lp.add_variable(f"xi[{k}]", 0.0, INF) for k in range(ctx.n_xi)]


def _add_xi_rows(lp: LinearProgram, ctx: SolverContext, xi_vars: List[int]) -> None:
    A = ctx.xi_system.A
    for r in range(A.shape[0]):
        start, end = A.indptr[r], A.indptr[r + 1]
        terms = [(xi_vars[k], a) for k, a in zip(A.indices[start:end], A.data[start:end])]
        lp.add_row(f"xi_row[{r}]", terms, "=", ctx.xi_system.b[r])


def _add_dual_rows(lp: LinearProgram, ctx: SolverContext, t: int, block: IncentiveBlock,
                   u_var: int, xi_vars: Optional[List[int]], xi_value: Optional[np.ndarray]) -> None:
    """Rows (a) and (b) of one trigger; xi is either LP variables or a fixed vector."""
    trigger = block.trigger
    seqs = ctx.index[trigger.player]
    F = seqs.F.tocsc()
    v_vars = [lp.add_variable(f"v[{t}][{r}]", -INF, INF) for r in range(F.shape[0])]
    w_var = None
    if trigger.concept != Concept.NFCCE:
        w_var = lp.add_variable(f"w[{t}]", -INF, INF)

    row_a = [(u_var, 1.0), (v_vars[0], -1.0)]
    if w_var is not None:
        row_a.append((w_var, -1.0))
    if xi_vars is not None:
        nz = np.flatnonzero(block.b)
        row_a.extend((xi_vars[k], block.b[k]) for k in nz)
        lp.add_row(f"dev_a[{t}]", row_a, ">=", 0.0)
    else:
        lp.add_row(f"dev_a[{t}]", row_a, ">=", -float(block.b @ xi_value))

    A = block.A
    for s in range(len(seqs)):
        terms = [(v_vars[r], a) for r, a in zip(F.indices[F.indptr[s]:F.indptr[s + 1]],
                                                 F.data[F.indptr[s]:F.indptr[s + 1]])]
        if w_var is not None and s == block.scope.normalization:
            terms.append((w_var, 1.0))
        start, end = A.indptr[s], A.indptr[s + 1]
        if xi_vars is not None:
            terms.extend((xi_vars[k], -a) for k, a in zip(A.indices[start:end], A.data[start:end]))
            lp.add_row(f"dev_b[{t}][{s}]", terms, ">=", 0.0)
        else:
            rhs = float(A.data[start:end] @ xi_value[A.indices[start:end]])
            lp.add_row(f"dev_b[{t}][{s}]", terms, ">=", rhs)


def build_lp(ctx: SolverContext, concept: Concept,
             objective: Optional[np.ndarray] = None) -> LinearProgram:
    """The concept's equilibrium LP maximizing objective . xi (social welfare by default)."""
    concept = Concept(concept)
    c = welfare_vector(ctx) if objective is None else np.asarray(objective, dtype=float)
    if c.shape != (ctx.n_xi,):
        raise ValueError(f"objective has shape {c.shape}, expected ({ctx.n_xi},)")

    lp = LinearProgram("max")
    xi_vars = _xi_variables(lp, ctx)
    u_var = lp.add_variable("u", -INF, 0.0)
    triggers = triggers_for(ctx, concept)
    for t, trigger in enumerate(triggers):
        _add_dual_rows(lp, ctx, t, incentive_block(ctx, trigger), u_var, xi_vars, None)
    _add_xi_rows(lp, ctx, xi_vars)
    lp.set_objective((xi_vars[k], c[k]) for k in np.flatnonzero(c))

    logger.info(f"Built {concept.value} LP: {lp.n_vars} variables, {lp.n_rows} rows, "
                f"{len(triggers)} triggers")
    return lp


def build_deviation_lp(ctx: SolverContext, xi: np.ndarray, concept: Concept,
                       triggers: Optional[List[Trigger]] = None) -> LinearProgram:
    """LP whose optimum is the largest deviation gain over the given triggers at fixed xi."""
    concept = Concept(concept)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (ctx.n_xi,):
        raise ValueError(f"xi has shape {xi.shape}, expected ({ctx.n_xi},)")
    triggers = triggers_for(ctx, concept) if triggers is None else triggers

    lp = LinearProgram("min")
    u_var = lp.add_variable("u", -INF, INF)
    for t, trigger in enumerate(triggers):
        if trigger.concept != concept:
            raise TriggerError(f"trigger {trigger.label} is not a {concept.value} trigger")
        _add_dual_rows(lp, ctx, t, incentive_block(ctx, trigger), u_var, None, xi)
    lp.set_objective([(u_var, 1.0)])
    return lp


def add_welfare_floor(lp: LinearProgram, ctx: SolverContext, tau: float,
                      welfare: Optional[np.ndarray] = None) -> LinearProgram:
    """Copy of an equilibrium LP with the extra row welfare . xi >= tau."""
    c = welfare_vector(ctx) if welfare is None else welfare
    floored = lp.copy()
    terms = [(lp.var_index[f"xi[{k}]"], c[k]) for k in np.flatnonzero(c)]
    floored.add_row("welfare_floor", terms, ">=", tau)
    return floored


@dataclass
class EquilibriumSolution:
    concept: Concept
    status: LpStatus
    objective: float
    xi: np.ndarray
    welfare: float = float("nan")
    utilities: List[float] = field(default_factory=list)
    gaps: Dict[str, float] = field(default_factory=dict)
    max_gap: Optional[float] = None
    lp_rows: int = 0
    lp_cols: int = 0
    build_time: float = 0.0
    solve_time: float = 0.0
    backend: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL

    def to_dict(self, ctx: SolverContext) -> Dict:
        return {
            "concept": self.concept.value,
            "status": self.status.value,
            "objective": self.objective,
            "welfare": self.welfare,
            "utilities": self.utilities,
            "xi": self.xi.tolist(),
            "pairs": [list(p) for p in ctx.pairs.pairs],
            "gaps": self.gaps,
            "max_gap": self.max_gap,
            "lp": {"rows": self.lp_rows, "cols": self.lp_cols},
            "timing": {"build": self.build_time, "solve": self.solve_time},
            "backend": self.backend,
        }


def solve_equilibrium(ctx: SolverContext, concept: Concept,
                      objective: Optional[np.ndarray] = None, tau: Optional[float] = None,
                      options: Optional[SolverOptions] = None) -> EquilibriumSolution:
    """Build and solve the concept's LP; gaps are filled in by verify.attach_certificate."""
    concept = Concept(concept)
    start = time.perf_counter()
    lp = build_lp(ctx, concept, objective)
    if tau is not None:
        lp = add_welfare_floor(lp, ctx, tau)
    build_time = time.perf_counter() - start

    result: LpSolution = solve(lp, options)
    xi = result.x[:ctx.n_xi] if result.optimal else np.zeros(ctx.n_xi)
    solution = EquilibriumSolution(
        concept=concept,
        status=result.status,
        objective=result.objective,
        xi=np.array(xi),
        lp_rows=lp.n_rows,
        lp_cols=lp.n_vars,
        build_time=build_time,
        solve_time=result.time,
        backend=result.backend,
    )
    if result.optimal:
        solution.welfare = float(welfare_vector(ctx) @ xi)
        solution.utilities = [float(player_utility_vector(ctx, i) @ xi) for i in (1, 2)]
        logger.info(f"{concept.value}: objective {result.objective:.9g}, "
                    f"welfare {solution.welfare:.9g} ({result.time:.3f}s)")
    else:
        logger.warning(f"{concept.value} LP finished with status {result.status.value}")
    return solution


def decide_welfare(ctx: SolverContext, concept: Concept, kappa: float,
                   options: Optional[SolverOptions] = None) -> bool:
    """Whether some equilibrium of the concept reaches social welfare kappa."""
    solution = solve_equilibrium(ctx, concept, tau=kappa, options=options)
    return solution.status == LpStatus.OPTIMAL

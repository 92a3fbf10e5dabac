"""Compact constraint system of the correlation-plan polytope for two-player games without chance.

Besides xi(empty, empty) = 1 and xi >= 0, every row conserves mass at one infoset J of one
player against a fixed sequence of the other:

    sum_a xi(s, (J, a)) = xi(s, sigma(J))

for every sequence s of the other player that is empty or whose infoset is connected to J.
"""

import logging
from typing import List, Tuple
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from corrsolve.game_model import GameTree
from corrsolve.sequence_form import SequenceFormIndex, RelevantPairSet, connected_infosets


logger = logging.getLogger(__name__)


class CompactnessError(ValueError):
    """The game has no compact correlation-plan description (use the oracle instead)."""


class NonRelevantPairError(KeyError):
    pass


@dataclass
class XiConstraintSystem:
    A: sparse.csr_matrix
    b: np.ndarray
    tags: List[str]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]


def require_compact(game: GameTree) -> None:
    if game.num_players != 2:
        raise CompactnessError(f"players != 2 ({game.num_players}): use the oracle")
    if game.has_chance:
        raise CompactnessError("chance not supported by compact correlation plans: use the oracle")


def build_xi_constraints(game: GameTree, index: SequenceFormIndex,
                         pairs: RelevantPairSet) -> XiConstraintSystem:
    require_compact(game)

    rows: List[int] = [0]
    cols: List[int] = [0]
    vals: List[float] = [1.0]
    tags = ["xi(empty,empty) = 1"]

    def coord(player: int, own: int, other: int) -> int:
        key = (other, own) if player == 2 else (own, other)
        k = pairs.get(*key)
        if k is None:
            raise RuntimeError(f"conservation row touches non-relevant pair {key}")
        return k

    for player, other in ((2, 1), (1, 2)):
        own_seqs, other_seqs = index[player], index[other]
        for s in range(len(other_seqs)):
            if s == 0:
                candidates = own_seqs.infosets
            else:
                candidates = connected_infosets(index, other_seqs.seq_infoset[s], player)
            for J in candidates:
                r = len(tags)
                for child in own_seqs.infoset_seqs[J]:
                    rows.append(r)
                    cols.append(coord(player, child, s))
                    vals.append(1.0)
                rows.append(r)
                cols.append(coord(player, own_seqs.infoset_parent[J], s))
                vals.append(-1.0)
                tags.append(f"mass(p{player} I{J} | {other_seqs.sequences[s]})")

    A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(tags), len(pairs)))
    b = np.zeros(len(tags))
    b[0] = 1.0
    logger.info(f"Correlation-plan system: {len(pairs)} variables, {len(tags)} equality rows")
    return XiConstraintSystem(A=A, b=b, tags=tags)


class LeafSubstitutionIndex:
    """Coordinates of xi[s ⋈ z] = xi(s, sigma_{-i}(z)) for a sequence s of player i."""

    def __init__(self, game: GameTree, index: SequenceFormIndex, pairs: RelevantPairSet):
        self.game = game
        self.index = index
        self.pairs = pairs
        self.leaves = np.asarray(game.leaves, dtype=np.int64)
        self.leaf_seq = {
            i: index[i].node_seq[self.leaves] for i in (1, 2)
        }
        self.leaf_pair = np.array(
            [pairs.index[(index.sigma(1, z), index.sigma(2, z))] for z in game.leaves],
            dtype=np.int64,
        )

    def coordinate(self, player: int, s: int, z: int) -> int:
        other = 3 - player
        s_other = self.index.sigma(other, z)
        key = (s, s_other) if player == 1 else (s_other, s)
        k = self.pairs.get(*key)
        if k is None:
            raise NonRelevantPairError(
                f"pair {key} is not relevant (player {player} sequence {s}, leaf {z}, "
                f"opponent sequence of player {other} is {s_other})"
            )
        return k


def xi_leaf(xi: np.ndarray, leaves: LeafSubstitutionIndex, player: int, s: int, z: int) -> float:
    return float(xi[leaves.coordinate(player, s, z)])


def row_residuals(xi: np.ndarray, system: XiConstraintSystem) -> np.ndarray:
    return np.abs(system.A @ xi - system.b)


def check_membership(xi: np.ndarray, system: XiConstraintSystem) -> float:
    """Largest equality-row or nonnegativity violation."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (system.n_vars,):
        raise ValueError(f"xi has shape {xi.shape}, expected ({system.n_vars},)")
    worst = float(row_residuals(xi, system).max(initial=0.0))
    return max(worst, float(max(0.0, -xi.min(initial=0.0))))


def worst_row(xi: np.ndarray, system: XiConstraintSystem) -> Tuple[str, float]:
    """Tag and size of the worst violation (a row tag or ``xi[k] >= 0``)."""
    xi = np.asarray(xi, dtype=float)
    residuals = row_residuals(xi, system)
    r = int(np.argmax(residuals))
    k = int(np.argmin(xi))
    if xi.size and -xi[k] >= residuals[r] and xi[k] < 0:
        return f"xi[{k}] >= 0", float(-xi[k])
    return system.tags[r], float(residuals[r])

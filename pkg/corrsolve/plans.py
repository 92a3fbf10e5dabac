"""Reduced-normal-form plans and the distribution -> sequence-form / correlation-plan maps."""

import itertools
import logging
from typing import List, Dict, Sequence as Seq
from dataclasses import dataclass

import numpy as np

from corrsolve.sequence_form import SequenceFormIndex, PlayerSequences, RelevantPairSet, Sequence


logger = logging.getLogger(__name__)

DEFAULT_PLAN_CAP = 1_000_000
DISTRIBUTION_TOL = 1e-12
UNREACHED = -1


class PlanEnumerationError(ValueError):
    pass


class DistributionError(ValueError):
    pass


@dataclass
class PlanSet:
    """Reduced plans of one player.

    ``plans[k, pos]`` is the action index played at the infoset in position ``pos`` of the
    player's infoset list, or UNREACHED. ``mask[s, k]`` is True iff plan k reaches sequence s.
    """
    player: int
    plans: np.ndarray
    mask: np.ndarray
    seqs: PlayerSequences

    def __len__(self) -> int:
        return self.plans.shape[0]

    def action(self, k: int, infoset: int) -> int:
        return int(self.plans[k, self.seqs.infoset_row[infoset] - 1])

    def describe(self, k: int) -> Dict[int, str]:
        """Plan k as {infoset id: action label}."""
        result = {}
        for pos, I in enumerate(self.seqs.infosets):
            a = self.plans[k, pos]
            if a != UNREACHED:
                result[I] = self.seqs.sequences[self.seqs.infoset_seqs[I][a]].action
        return result


def count_plans(seqs: PlayerSequences, s: int = 0) -> int:
    """Reduced plans below sequence s: product over child infosets of the summed counts."""
    total = 1
    for I in seqs.children[s]:
        total *= sum(count_plans(seqs, child) for child in seqs.infoset_seqs[I])
    return total


def enumerate_plans(index: SequenceFormIndex, player: int,
                    cap: int = DEFAULT_PLAN_CAP) -> PlanSet:
    """Enumerate player's reduced plans in a fixed recursive order.

    Raises:
        PlanEnumerationError: the plan count exceeds ``cap``.
    """
    seqs = index[player]
    expected = count_plans(seqs)
    if expected > cap:
        raise PlanEnumerationError(
            f"player {player} has {expected} reduced plans: too large for enumeration "
            f"(cap {cap})"
        )

    def below(s: int) -> List[Dict[int, int]]:
        options = []
        for I in seqs.children[s]:
            choices = []
            for a, child in enumerate(seqs.infoset_seqs[I]):
                for rest in below(child):
                    choice = {seqs.infoset_row[I] - 1: a}
                    choice.update(rest)
                    choices.append(choice)
            options.append(choices)
        merged = []
        for combo in itertools.product(*options):
            plan: Dict[int, int] = {}
            for part in combo:
                plan.update(part)
            merged.append(plan)
        return merged

    partial = below(0)
    plans = np.full((len(partial), len(seqs.infosets)), UNREACHED, dtype=np.int64)
    for k, plan in enumerate(partial):
        for pos, a in plan.items():
            plans[k, pos] = a

    mask = np.zeros((len(seqs), len(partial)), dtype=bool)
    mask[0, :] = True
    for I in seqs.infosets:
        pos = seqs.infoset_row[I] - 1
        for a, s in enumerate(seqs.infoset_seqs[I]):
            mask[s, :] = plans[:, pos] == a

    logger.debug(f"Enumerated {len(partial)} plans for player {player}")
    return PlanSet(player=player, plans=plans, mask=mask, seqs=seqs)


def plans_reaching(planset: PlanSet, sequence: Sequence) -> np.ndarray:
    """Indices of the plans that reach ``sequence``."""
    if sequence.player != planset.player or sequence not in planset.seqs.index:
        raise KeyError(f"sequence {sequence} does not belong to player {planset.player}")
    return np.flatnonzero(planset.mask[planset.seqs.index[sequence]])


def check_distribution(mu: np.ndarray, shape: tuple) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != shape:
        raise DistributionError(f"distribution has shape {mu.shape}, expected {shape}")
    if np.any(mu < -DISTRIBUTION_TOL):
        raise DistributionError("distribution has negative mass")
    total = mu.sum()
    if abs(total - 1.0) > DISTRIBUTION_TOL * max(1, mu.size):
        raise DistributionError(f"distribution sums to {total}")
    return mu


def strategy_from_distribution(planset: PlanSet, mu: Seq[float]) -> np.ndarray:
    """Sequence-form strategy y(s) = sum of mu over plans reaching s."""
    mu = check_distribution(mu, (len(planset),))
    return planset.mask.astype(float) @ mu


def correlation_from_joint(plansets: Seq[PlanSet], pairs: RelevantPairSet,
                           mu: np.ndarray) -> np.ndarray:
    """Correlation plan xi(s1, s2) = sum of mu over plan pairs reaching s1 and s2."""
    if len(plansets) != 2:
        raise ValueError("correlation plans need exactly two players")
    first, second = plansets
    mu = check_distribution(mu, (len(first), len(second)))
    full = first.mask.astype(float) @ mu @ second.mask.astype(float).T
    s1 = np.fromiter((p[0] for p in pairs.pairs), dtype=np.int64, count=len(pairs))
    s2 = np.fromiter((p[1] for p in pairs.pairs), dtype=np.int64, count=len(pairs))
    return full[s1, s2]

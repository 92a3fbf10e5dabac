"""Sequences, parent-sequence maps, sequence-form constraints and relevant sequence pairs."""

import logging
from typing import List, Dict, Optional, Tuple, FrozenSet
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from corrsolve.game_model import GameTree, GameValidationError


logger = logging.getLogger(__name__)


class PerfectRecallError(GameValidationError):
    pass


@dataclass(frozen=True)
class Sequence:
    """Empty sequence of a player (infoset and action None) or an (infoset, action) pair."""
    player: int
    infoset: Optional[int] = None
    action: Optional[str] = None

    @property
    def is_empty(self) -> bool:
        return self.infoset is None

    def __str__(self) -> str:
        if self.is_empty:
            return f"empty{self.player}"
        return f"(I{self.infoset},{self.action})"


@dataclass
class PlayerSequences:
    """Sequence-form data of one player. Sequence 0 is the empty sequence."""
    player: int
    sequences: List[Sequence]
    index: Dict[Sequence, int]
    infosets: List[int]                   # this player's infoset ids, in id order
    infoset_row: Dict[int, int]           # infoset id -> row of F (rows start at 1)
    infoset_parent: Dict[int, int]        # sigma(I)
    infoset_seqs: Dict[int, List[int]]    # sequences (I, a) in action order
    seq_infoset: List[int]                # -1 for the empty sequence
    seq_parent: List[int]                 # parent sequence; -1 for the empty sequence
    children: List[List[int]]             # infosets I with sigma(I) = s
    node_seq: np.ndarray                  # sigma_i(v) for every node v
    F: sparse.csr_matrix
    f: np.ndarray
    ancestors: List[FrozenSet[int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sequences)

    def seq(self, infoset: int, action: str) -> int:
        return self.index[Sequence(self.player, infoset, action)]

    def is_below(self, s: int, ancestor: int) -> bool:
        """True iff ``ancestor`` lies on the chain from s up to the empty sequence (s included)."""
        return ancestor in self.ancestors[s]


@dataclass
class SequenceFormIndex:
    game: GameTree
    players: Dict[int, PlayerSequences]
    infoset_ancestors: Dict[int, FrozenSet[int]]   # infosets (any player) above each infoset

    def __getitem__(self, player: int) -> PlayerSequences:
        return self.players[player]

    def sigma(self, player: int, v: int) -> int:
        return int(self.players[player].node_seq[v])


def build_sequences(game: GameTree) -> SequenceFormIndex:
    """Number every player's sequences and build F_i, f_i.

    Raises:
        PerfectRecallError: an infoset's parent sequence differs between its members.
    """
    players = {}
    for player in range(1, game.num_players + 1):
        players[player] = _player_sequences(game, player)

    ancestors = _infoset_ancestors(game)
    logger.debug("Sequences per player: "
                 + ", ".join(f"{p}: {len(ps)}" for p, ps in players.items()))
    return SequenceFormIndex(game=game, players=players, infoset_ancestors=ancestors)


def _player_sequences(game: GameTree, player: int) -> PlayerSequences:
    infosets = game.infosets_of(player)
    sequences = [Sequence(player)]
    seq_infoset = [-1]
    infoset_seqs: Dict[int, List[int]] = {}
    for I in infosets:
        infoset_seqs[I] = []
        for action in game.infosets[I].actions:
            infoset_seqs[I].append(len(sequences))
            sequences.append(Sequence(player, I, action))
            seq_infoset.append(I)
    index = {s: k for k, s in enumerate(sequences)}

    node_seq = np.zeros(len(game.nodes), dtype=np.int64)
    infoset_parent: Dict[int, int] = {}
    stack = [(game.root, 0)]
    while stack:
        v, current = stack.pop()
        node_seq[v] = current
        node = game.nodes[v]
        if node.is_leaf:
            continue
        if node.owner == player:
            I = node.infoset
            known = infoset_parent.setdefault(I, current)
            if known != current:
                raise PerfectRecallError(
                    f"parent sequence is ambiguous ({sequences[known]} vs {sequences[current]})",
                    infoset=I,
                )
            for a, child in enumerate(node.children):
                stack.append((child, infoset_seqs[I][a]))
        else:
            for child in node.children:
                stack.append((child, current))

    seq_parent = [-1] * len(sequences)
    children: List[List[int]] = [[] for _ in sequences]
    for I in infosets:
        children[infoset_parent[I]].append(I)
        for s in infoset_seqs[I]:
            seq_parent[s] = infoset_parent[I]

    ancestors: List[FrozenSet[int]] = []
    for s in range(len(sequences)):
        chain = {s}
        if seq_parent[s] >= 0:
            chain |= ancestors[seq_parent[s]]
        ancestors.append(frozenset(chain))

    infoset_row = {I: k + 1 for k, I in enumerate(infosets)}
    rows, cols, vals = [0], [0], [1.0]
    for I in infosets:
        rows.append(infoset_row[I])
        cols.append(infoset_parent[I])
        vals.append(-1.0)
        for s in infoset_seqs[I]:
            rows.append(infoset_row[I])
            cols.append(s)
            vals.append(1.0)
    F = sparse.csr_matrix((vals, (rows, cols)), shape=(len(infosets) + 1, len(sequences)))
    f = np.zeros(len(infosets) + 1)
    f[0] = 1.0

    return PlayerSequences(
        player=player,
        sequences=sequences,
        index=index,
        infosets=infosets,
        infoset_row=infoset_row,
        infoset_parent=infoset_parent,
        infoset_seqs=infoset_seqs,
        seq_infoset=seq_infoset,
        seq_parent=seq_parent,
        children=children,
        node_seq=node_seq,
        F=F,
        f=f,
        ancestors=ancestors,
    )


def _infoset_ancestors(game: GameTree) -> Dict[int, FrozenSet[int]]:
    """For each infoset, the infosets of any player met on its members' root paths."""
    above: Dict[int, set] = {I.id: set() for I in game.infosets}
    stack: List[Tuple[int, FrozenSet[int]]] = [(game.root, frozenset())]
    while stack:
        v, path = stack.pop()
        node = game.nodes[v]
        if node.is_leaf:
            continue
        if node.infoset is not None:
            above[node.infoset] |= path
            path = path | {node.infoset}
        for child in node.children:
            stack.append((child, path))
    return {I: frozenset(s) for I, s in above.items()}


def connected(index: SequenceFormIndex, I: int, J: int) -> bool:
    """True iff some member of I lies on the root path of a member of J, or vice versa."""
    infosets = index.game.infosets
    if infosets[I].player == infosets[J].player:
        raise ValueError(f"infosets {I} and {J} belong to the same player")
    return J in index.infoset_ancestors[I] or I in index.infoset_ancestors[J]


def connected_infosets(index: SequenceFormIndex, I: int, player: int) -> List[int]:
    """Infosets of ``player`` connected to infoset I, in id order."""
    result = []
    for J in index[player].infosets:
        if J in index.infoset_ancestors[I] or I in index.infoset_ancestors[J]:
            result.append(J)
    return result


PROVENANCE_EMPTY_EMPTY = "empty/empty"
PROVENANCE_EMPTY_SEQ = "empty/seq"
PROVENANCE_CONNECTED = "connected"


@dataclass
class RelevantPairSet:
    """Relevant (sigma_1, sigma_2) pairs in lexicographic order; (empty, empty) is index 0."""
    pairs: List[Tuple[int, int]]
    index: Dict[Tuple[int, int], int]
    provenance: List[str]
    n_seq: Tuple[int, int]

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair: Tuple[int, int]) -> bool:
        return pair in self.index

    def get(self, s1: int, s2: int) -> Optional[int]:
        return self.index.get((s1, s2))

    @property
    def sequence_pairs(self) -> int:
        return self.n_seq[0] * self.n_seq[1]


def relevant_pairs(game: GameTree, index: SequenceFormIndex) -> RelevantPairSet:
    """All relevant sequence pairs of a two-player game."""
    if game.num_players != 2:
        raise ValueError(f"relevant pairs need exactly 2 players, got {game.num_players}")

    seq1, seq2 = index[1], index[2]
    partners = {I: connected_infosets(index, I, 2) for I in seq1.infosets}

    pairs: List[Tuple[int, int]] = []
    provenance: List[str] = []
    for s1 in range(len(seq1)):
        if s1 == 0:
            for s2 in range(len(seq2)):
                pairs.append((0, s2))
                provenance.append(PROVENANCE_EMPTY_EMPTY if s2 == 0 else PROVENANCE_EMPTY_SEQ)
            continue
        pairs.append((s1, 0))
        provenance.append(PROVENANCE_EMPTY_SEQ)
        second = sorted(s2 for J in partners[seq1.seq_infoset[s1]] for s2 in seq2.infoset_seqs[J])
        for s2 in second:
            pairs.append((s1, s2))
            provenance.append(PROVENANCE_CONNECTED)

    result = RelevantPairSet(
        pairs=pairs,
        index={pair: k for k, pair in enumerate(pairs)},
        provenance=provenance,
        n_seq=(len(seq1), len(seq2)),
    )
    logger.info(f"Relevant pairs: {len(result)} of {result.sequence_pairs} sequence pairs")
    return result

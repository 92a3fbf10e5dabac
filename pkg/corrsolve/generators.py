"""Benchmark and fixture games.

The Sheriff and Battleship rule sets are frozen in docs/games.md.
"""

import logging
from typing import List, Tuple, Sequence

from corrsolve.game_model import GameTree, GameBuilder, validate_perfect_recall


logger = logging.getLogger(__name__)

# Sheriff constants
SHERIFF_ITEM_VALUE = 5
SHERIFF_PENALTY = 1
SHERIFF_FALSE_ACCUSATION = 1

# Battleship: one length-1 ship of value 1 per player
SHIP_VALUE = 1
LOSS_MULTIPLIER = 2


def gen_m2() -> GameTree:
    """Two-by-two matching game: (1, 1) on a match, (0, 0) otherwise."""
    return _two_by_two({("H", "h"): (1, 1), ("H", "t"): (0, 0),
                        ("T", "h"): (0, 0), ("T", "t"): (1, 1)})


def gen_pennies() -> GameTree:
    """Zero-sum matching pennies in sequential form."""
    return _two_by_two({("H", "h"): (1, -1), ("H", "t"): (-1, 1),
                        ("T", "h"): (-1, 1), ("T", "t"): (1, -1)})


def _two_by_two(payoffs) -> GameTree:
    b = GameBuilder(2)
    children = []
    for first in ("H", "T"):
        leaves = [b.leaf(payoffs[(first, second)]) for second in ("h", "t")]
        children.append(b.decision(2, "I2", ["h", "t"], leaves))
    return b.build(b.decision(1, "I1", ["H", "T"], children))


def gen_sheriff(n_max: int, b_max: int, r: int) -> GameTree:
    """Smuggler (player 1) loads n illegal items, then r rounds of bribe / answer.

    The Sheriff (player 2) observes bribes and earlier answers but never the load.
    Only the final answer is binding.
    """
    if n_max < 1 or b_max < 1 or r < 1:
        raise ValueError("Sheriff parameters must be at least 1")

    b = GameBuilder(2)
    v, p, s = SHERIFF_ITEM_VALUE, SHERIFF_PENALTY, SHERIFF_FALSE_ACCUSATION

    def settle(n: int, bribe: int, accepted: bool) -> int:
        if accepted:
            return b.leaf((v * n - bribe, bribe))
        if n > 0:
            return b.leaf((-p * n, p * n))
        return b.leaf((s, -s))

    def bargain(n: int, history: Tuple[Tuple[int, str], ...]) -> int:
        final = len(history) == r - 1
        offers = []
        for bribe in range(b_max + 1):
            answers = []
            for answer in ("accept", "reject"):
                if final:
                    answers.append(settle(n, bribe, answer == "accept"))
                else:
                    answers.append(bargain(n, history + ((bribe, answer),)))
            offers.append(b.decision(2, ("answer", history, bribe), ["accept", "reject"], answers))
        return b.decision(1, ("bribe", n, history), [f"b={k}" for k in range(b_max + 1)], offers)

    loads = [bargain(n, ()) for n in range(n_max + 1)]
    game = b.build(b.decision(1, ("load",), [f"n={n}" for n in range(n_max + 1)], loads))
    _log_built(f"sheriff({n_max},{b_max},{r})", game)
    return game


def gen_battleship(w: int, h: int, r: int) -> GameTree:
    """Each player hides a one-cell ship, then up to r rounds of alternating shots.

    Player 1 places and shoots first. Shots may target any cell, repeats included; a player
    observes their own placement and every shot fired. Sinking ends the game: the sinker
    gets +1, the sunk player -2. No sink after r rounds pays (0, 0).
    """
    if w < 1 or h < 1 or w * h < 2:
        raise ValueError(f"Battleship grid {w}x{h} too small (need at least 2 cells)")
    if r < 1:
        raise ValueError("Battleship needs at least one round")

    cells = [f"{x},{y}" for y in range(h) for x in range(w)]
    b = GameBuilder(2)
    ship_value, loss = SHIP_VALUE, LOSS_MULTIPLIER * SHIP_VALUE

    def shoot(ships: Tuple[str, str], history: Tuple[str, ...]) -> int:
        shooter = 1 + len(history) % 2
        target = ships[2 - shooter]
        children = []
        for cell in cells:
            if cell == target:
                payoffs = [0, 0]
                payoffs[shooter - 1] = ship_value
                payoffs[2 - shooter] = -loss
                children.append(b.leaf(payoffs))
            elif len(history) + 1 == 2 * r:
                children.append(b.leaf((0, 0)))
            else:
                children.append(shoot(ships, history + (cell,)))
        key = ("shot", ships[shooter - 1], history)
        return b.decision(shooter, key, [f"shoot {c}" for c in cells], children)

    first = []
    for ship1 in cells:
        second = [shoot((ship1, ship2), ()) for ship2 in cells]
        first.append(b.decision(2, ("place",), [f"place {c}" for c in cells], second))
    game = b.build(b.decision(1, ("place",), [f"place {c}" for c in cells], first))
    _log_built(f"battleship({w},{h},{r})", game)
    return game


def gen_goofspiel(r: int) -> GameTree:
    """Goofspiel with r cards per deck and prize k in round k.

    Bids are simultaneous: player 1 bids first and player 2 does not see the bid until the
    round is revealed. A tie discards the prize. The forced last round is collapsed.
    """
    if r < 2:
        raise ValueError("Goofspiel needs r >= 2")

    b = GameBuilder(2)

    def play(history: Tuple[Tuple[int, int], ...]) -> int:
        if len(history) == r:
            score = [0, 0]
            for prize, (bid1, bid2) in enumerate(history, start=1):
                if bid1 > bid2:
                    score[0] += prize
                elif bid2 > bid1:
                    score[1] += prize
            return b.leaf(score)
        hand1 = [c for c in range(1, r + 1) if c not in {h[0] for h in history}]
        hand2 = [c for c in range(1, r + 1) if c not in {h[1] for h in history}]
        labels2 = [f"bid {c}" for c in hand2]
        after1 = []
        for bid1 in hand1:
            after2 = [play(history + ((bid1, bid2),)) for bid2 in hand2]
            after1.append(b.decision(2, ("bid", history), labels2, after2))
        return b.decision(1, ("bid", history), [f"bid {c}" for c in hand1], after1)

    game = b.build(play(()))
    _log_built(f"goofspiel({r})", game)
    return game


def parse_clauses(text: str) -> List[List[str]]:
    """Parse ``"~x;x,y;x,~y"`` into clauses of literals."""
    clauses = []
    for chunk in text.split(";"):
        literals = [lit.strip() for lit in chunk.split(",") if lit.strip()]
        clauses.append(literals)
    return clauses


def gen_sat_game(clauses: Sequence[Sequence[str]]) -> GameTree:
    """Chance picks a clause, player 1 picks one of its literals, player 2 assigns its variable.

    Player 2 has one infoset per variable pooling every arrival. Both players get 1 when the
    assignment satisfies the chosen literal and 0 otherwise.
    """
    if not clauses:
        raise ValueError("SAT game needs at least one clause")
    for k, clause in enumerate(clauses):
        if not clause:
            raise ValueError(f"clause {k} is empty")
        for literal in clause:
            if not literal.lstrip("~"):
                raise ValueError(f"bad literal {literal!r} in clause {k}")

    b = GameBuilder(2)
    branches = []
    for k, clause in enumerate(clauses):
        literals = list(dict.fromkeys(clause))
        picks = []
        for literal in literals:
            var = literal.lstrip("~")
            assignments = [var, f"~{var}"]
            leaves = [b.leaf((1, 1) if a == literal else (0, 0)) for a in assignments]
            picks.append(b.decision(2, ("var", var), assignments, leaves))
        branches.append(b.decision(1, ("clause", k), literals, picks))

    m = len(clauses)
    game = b.build(b.chance([f"clause {k}" for k in range(m)], [1.0 / m] * m, branches))
    _log_built(f"sat({m} clauses)", game)
    return game


def _log_built(name: str, game: GameTree) -> None:
    logger.debug(f"Generated {name}: {len(game.nodes)} nodes, {len(game.leaves)} leaves, "
                 f"{len(game.infosets)} infosets")
    if not validate_perfect_recall(game).ok:
        logger.warning(f"Generated {name} violates perfect recall")

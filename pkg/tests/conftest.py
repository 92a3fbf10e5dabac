import pytest

from corrsolve.game_model import GameBuilder
from corrsolve.generators import (
    gen_m2, gen_pennies, gen_sheriff, gen_battleship, gen_goofspiel, gen_sat_game,
)
from corrsolve.lp_core import SolverOptions
from corrsolve.equilibrium_lp import build_context


BUNDLED = SolverOptions(backend="bundled")
HIGHS = SolverOptions(backend="highs")


@pytest.fixture(autouse=True)
def _no_backend_override(monkeypatch):
    monkeypatch.delenv("CORRSOLVE_LP_BACKEND", raising=False)


@pytest.fixture(scope="session")
def m2():
    return gen_m2()


@pytest.fixture(scope="session")
def pennies():
    return gen_pennies()


@pytest.fixture(scope="session")
def goofspiel2():
    return gen_goofspiel(2)


@pytest.fixture(scope="session")
def goofspiel3():
    return gen_goofspiel(3)


@pytest.fixture(scope="session")
def sheriff111():
    return gen_sheriff(1, 1, 1)


@pytest.fixture(scope="session")
def battleship211():
    return gen_battleship(2, 1, 1)


@pytest.fixture(scope="session")
def battleship212():
    return gen_battleship(2, 1, 2)


@pytest.fixture(scope="session")
def sat_satisfiable():
    return gen_sat_game([["x", "y"], ["~x", "y"]])


@pytest.fixture(scope="session")
def sat_contradiction():
    return gen_sat_game([["x"], ["~x"]])


@pytest.fixture(scope="session")
def three_player_match():
    """Three players pick a or b without seeing each other; all get 1 when everyone matches."""
    b = GameBuilder(3)
    third = []
    for first in "ab":
        second = []
        for middle in "ab":
            leaves = [b.leaf((1, 1, 1) if first == middle == last else (0, 0, 0)) for last in "ab"]
            second.append(b.decision(3, "P3", ["a", "b"], leaves))
        third.append(b.decision(2, "P2", ["a", "b"], second))
    return b.build(b.decision(1, "P1", ["a", "b"], third))


@pytest.fixture(scope="session")
def m2_ctx(m2):
    return build_context(m2)


@pytest.fixture(scope="session")
def pennies_ctx(pennies):
    return build_context(pennies)


@pytest.fixture(scope="session")
def goofspiel2_ctx(goofspiel2):
    return build_context(goofspiel2)


@pytest.fixture(scope="session")
def goofspiel3_ctx(goofspiel3):
    return build_context(goofspiel3)


@pytest.fixture(scope="session")
def sheriff111_ctx(sheriff111):
    return build_context(sheriff111)


@pytest.fixture(scope="session")
def battleship211_ctx(battleship211):
    return build_context(battleship211)


@pytest.fixture(scope="session")
def battleship212_ctx(battleship212):
    return build_context(battleship212)


@pytest.fixture(scope="session")
def small_games(m2, goofspiel2, sheriff111, battleship211):
    """Compact games small enough for the brute-force oracle."""
    return {"m2": m2, "goofspiel2": goofspiel2, "sheriff111": sheriff111,
            "battleship211": battleship211}

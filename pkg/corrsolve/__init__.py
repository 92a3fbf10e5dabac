"""Optimal correlated equilibria (NFCCE, EFCCE, EFCE) of two-player extensive-form games."""

from corrsolve.game_model import GameTree, load_game, save_game
from corrsolve.sequence_form import build_sequences, relevant_pairs
from corrsolve.equilibrium_lp import Concept, CONCEPTS, build_context, build_lp, solve_equilibrium
from corrsolve.verify import certify, oracle_optimum

__version__ = "0.1.0"

__all__ = [
    "GameTree",
    "load_game",
    "save_game",
    "build_sequences",
    "relevant_pairs",
    "Concept",
    "CONCEPTS",
    "build_context",
    "build_lp",
    "solve_equilibrium",
    "certify",
    "oracle_optimum",
]

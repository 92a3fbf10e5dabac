"""Parameter-grid runs producing one CSV row per (instance, concept)."""

import csv
import time
import itertools
import logging
from typing import List, Dict, Optional, Tuple, Callable, Iterable, TextIO
from dataclasses import dataclass, asdict
from concurrent.futures import ThreadPoolExecutor

from corrsolve.game_model import GameTree
from corrsolve.generators import gen_m2, gen_pennies, gen_sheriff, gen_battleship, gen_goofspiel
from corrsolve.lp_core import SolverOptions
from corrsolve.equilibrium_lp import Concept, CONCEPTS, build_context, solve_equilibrium
from corrsolve.verify import certify


logger = logging.getLogger(__name__)

GENERATORS: Dict[str, Callable[..., GameTree]] = {
    "m2": gen_m2,
    "pennies": gen_pennies,
    "goofspiel": gen_goofspiel,
    "sheriff": gen_sheriff,
    "battleship": gen_battleship,
}

Instance = Tuple[str, Tuple[int, ...]]

DEFAULT_GRID: List[Instance] = (
    [("goofspiel", (r,)) for r in (2, 3)]
    + [("sheriff", p) for p in itertools.product((1, 2), repeat=3)]
    + [("battleship", (w, h, r)) for (w, h) in ((2, 1), (2, 2)) for r in (1, 2)]
)

CSV_COLUMNS = [
    # (a) instance
    "game", "params", "seq_pairs", "relevant_pairs",
    # (b) LP
    "concept", "lp_rows", "lp_cols", "wall_time",
    # (c) result
    "status", "sw", "max_gap",
]


@dataclass
class RunRecord:
    game: str
    params: str
    concept: str
    seq_pairs: int
    relevant_pairs: int
    lp_rows: int
    lp_cols: int
    wall_time: float
    status: str
    sw: float
    max_gap: float


def make_game(name: str, params: Tuple[int, ...]) -> GameTree:
    if name not in GENERATORS:
        raise ValueError(f"unknown game '{name}' (choose from {sorted(GENERATORS)})")
    return GENERATORS[name](*params)


def run_instance(name: str, params: Tuple[int, ...], concepts: Iterable[Concept] = CONCEPTS,
                 options: Optional[SolverOptions] = None) -> List[RunRecord]:
    ctx = build_context(make_game(name, params))
    label = ",".join(str(p) for p in params)
    records = []
    for concept in concepts:
        start = time.perf_counter()
        solution = solve_equilibrium(ctx, concept, options=options)
        max_gap = float("nan")
        if solution.optimal:
            max_gap = certify(ctx, solution.xi, concept).max_gap
        records.append(RunRecord(
            game=name,
            params=label,
            concept=Concept(concept).value,
            seq_pairs=ctx.pairs.sequence_pairs,
            relevant_pairs=len(ctx.pairs),
            lp_rows=solution.lp_rows,
            lp_cols=solution.lp_cols,
            wall_time=time.perf_counter() - start,
            status=solution.status.value,
            sw=solution.welfare,
            max_gap=max_gap,
        ))
    logger.info(f"{name}({label}): " + ", ".join(f"{r.concept} sw={r.sw:.6f}" for r in records))
    return records


def run_grid(grid: Iterable[Instance] = DEFAULT_GRID, concepts: Iterable[Concept] = CONCEPTS,
             options: Optional[SolverOptions] = None, max_workers: int = 1) -> List[RunRecord]:
    """Solve every instance; records come back in grid order whatever the completion order."""
    grid = list(grid)
    concepts = list(concepts)
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(run_instance, name, params, concepts, options)
                   for name, params in grid]
        results = [future.result() for future in futures]
    return [record for records in results for record in records]


def write_records_csv(records: Iterable[RunRecord], stream: TextIO) -> None:
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for record in records:
        row = asdict(record)
        row["wall_time"] = f"{record.wall_time:.3f}"
        row["sw"] = f"{record.sw:.9f}"
        row["max_gap"] = f"{record.max_gap:.3e}"
        writer.writerow(row)

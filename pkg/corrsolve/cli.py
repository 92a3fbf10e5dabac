"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or input error, 3 non-optimal solve.
"""

import sys
import json
import logging
import argparse
from pathlib import Path
from typing import List, Dict, Any, Optional

import numpy as np

from corrsolve.config import Config, setup_logging
from corrsolve.game_model import GameTree, GameFormatError, GameValidationError, load_game, save_game
from corrsolve.generators import (
    gen_m2, gen_pennies, gen_sheriff, gen_battleship, gen_goofspiel, gen_sat_game, parse_clauses,
)
from corrsolve.sequence_form import build_sequences, relevant_pairs
from corrsolve.plans import PlanEnumerationError
from corrsolve.correlation import CompactnessError
from corrsolve.lp_core import LpFormatError, LpStatus, UnknownBackendError, dump_lp
from corrsolve.equilibrium_lp import (
    Concept, CONCEPTS, TriggerError, build_context, build_lp, add_welfare_floor,
    direction_vector, solve_equilibrium,
)
from corrsolve.verify import (
    certify, attach_certificate, oracle_optimum, sample_payoff_region, region_report,
    write_region_csv,
)
from corrsolve.bench import DEFAULT_GRID, run_grid, write_records_csv


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_NOT_OPTIMAL = 3

INPUT_ERRORS = (
    GameFormatError, GameValidationError, CompactnessError, PlanEnumerationError,
    TriggerError, LpFormatError, UnknownBackendError, FileNotFoundError,
)


def _read_game(path: str) -> GameTree:
    return load_game(Path(path).read_text())


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
        print(f"✅ Wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _objective(args, ctx):
    if args.objective == "dir":
        return direction_vector(ctx, args.dx, args.dy)
    return None


def cmd_gen(args, config: Config) -> int:
    if args.kind == "m2":
        game = gen_m2()
    elif args.kind == "pennies":
        game = gen_pennies()
    elif args.kind == "sheriff":
        game = gen_sheriff(args.n_max, args.b_max, args.rounds)
    elif args.kind == "battleship":
        game = gen_battleship(args.width, args.height, args.rounds)
    elif args.kind == "goofspiel":
        game = gen_goofspiel(args.rounds)
    else:
        if not args.clauses:
            print("❌ sat needs --clauses, e.g. --clauses '~x;x,y;x,~y'", file=sys.stderr)
            return EXIT_USAGE
        try:
            game = gen_sat_game(parse_clauses(args.clauses))
        except ValueError as e:
            print(f"❌ Bad formula: {e}", file=sys.stderr)
            return EXIT_USAGE
    _emit(save_game(game), args.out)
    return EXIT_OK


def cmd_info(args, config: Config) -> int:
    game = _read_game(args.game)
    index = build_sequences(game)
    print(f"📊 {len(game.nodes)} nodes, {len(game.leaves)} leaves, {len(game.infosets)} infosets")
    for player in range(1, game.num_players + 1):
        print(f"   |Sigma_{player}| = {len(index[player])}")
    if game.num_players == 2:
        pairs = relevant_pairs(game, index)
        print(f"   sequence pairs = {pairs.sequence_pairs}")
        print(f"   relevant pairs = {len(pairs)}")
    if args.xi:
        ctx = build_context(game)
        print(f"   xi variables = {ctx.xi_system.n_vars}")
        print(f"   xi rows = {ctx.xi_system.n_rows}")
    return EXIT_OK


def cmd_solve(args, config: Config) -> int:
    game = _read_game(args.game)
    ctx = build_context(game)
    options = config.solver_options(args.backend)
    concept = Concept(args.concept)
    objective = _objective(args, ctx)

    if args.dump_lp:
        lp = build_lp(ctx, concept, objective)
        if args.tau is not None:
            lp = add_welfare_floor(lp, ctx, args.tau)
        Path(args.dump_lp).write_text(dump_lp(lp))
        print(f"✅ Wrote LP to {args.dump_lp}", file=sys.stderr)

    solution = solve_equilibrium(ctx, concept, objective, tau=args.tau, options=options)
    if not solution.optimal:
        _emit(json.dumps(solution.to_dict(ctx), indent=2), args.out)
        print(f"❌ Solver status: {solution.status.value}", file=sys.stderr)
        return EXIT_NOT_OPTIMAL

    report = certify(ctx, solution.xi, concept, tol=config.verify_tol)
    attach_certificate(solution, report)
    _emit(json.dumps(solution.to_dict(ctx), indent=2), args.out)
    print(f"{'✅' if report.passed else '❌'} {concept.value}: SW {solution.welfare:.9g}, "
          f"max gap {report.max_gap:.3g}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_verify(args, config: Config) -> int:
    game = _read_game(args.game)
    ctx = build_context(game)
    try:
        document: Dict[str, Any] = json.loads(Path(args.solution).read_text())
        xi = np.asarray(document["xi"], dtype=float)
        concept = Concept(args.concept or document["concept"])
    except (json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"❌ Bad solution file: {e}", file=sys.stderr)
        return EXIT_USAGE
    if xi.shape != (ctx.n_xi,):
        print(f"❌ Solution has {xi.size} entries, game has {ctx.n_xi} relevant pairs",
              file=sys.stderr)
        return EXIT_USAGE
    if "pairs" in document and [tuple(p) for p in document["pairs"]] != ctx.pairs.pairs:
        print("❌ Solution pairs do not match this game", file=sys.stderr)
        return EXIT_USAGE

    report = certify(ctx, xi, concept, tol=args.tol or config.verify_tol)
    print(json.dumps(report.to_dict(), indent=2))
    if report.passed:
        print(f"✅ {concept.value}: pass (max gap {report.max_gap:.3g})", file=sys.stderr)
        return EXIT_OK
    row, violation = report.worst_row
    print(f"❌ {concept.value}: fail (max gap {report.max_gap:.3g}, worst row {row} "
          f"off by {violation:.3g})", file=sys.stderr)
    return EXIT_VERIFY_FAILED


def cmd_region(args, config: Config) -> int:
    ctx = build_context(_read_game(args.game))
    sample = sample_payoff_region(ctx, args.directions, seed=args.seed,
                                  options=config.solver_options(args.backend),
                                  max_workers=config.max_workers)
    if args.out:
        with open(args.out, "w", newline="") as stream:
            write_region_csv(sample, stream)
        print(f"✅ Wrote {len(sample.points)} region points to {args.out}", file=sys.stderr)
    else:
        write_region_csv(sample, sys.stdout)
    report = region_report(sample)
    print(f"📊 nested={report.nested} efce=efcce={report.efce_equals_efcce} "
          f"nfcce separated={report.nfcce_separated} ({report.max_separation:.3g})",
          file=sys.stderr)
    if any(p.status != LpStatus.OPTIMAL for p in sample.points):
        return EXIT_NOT_OPTIMAL
    return EXIT_OK


def cmd_oracle(args, config: Config) -> int:
    game = _read_game(args.game)
    weights = (args.dx, args.dy) if args.objective == "dir" else None
    result = oracle_optimum(game, Concept(args.concept), weights=weights, cap=config.plan_cap,
                            options=config.solver_options(args.backend), floor=args.tau)
    document = {
        "concept": result.concept.value,
        "status": result.status.value,
        "value": result.value,
        "utilities": result.utilities,
        "constraints": result.n_constraints,
    }
    _emit(json.dumps(document, indent=2), args.out)
    return EXIT_OK if result.optimal else EXIT_NOT_OPTIMAL


def cmd_bench(args, config: Config) -> int:
    if args.game == "all":
        grid = list(DEFAULT_GRID)
    else:
        given = {
            "goofspiel": (args.rounds,),
            "sheriff": (args.n_max, args.b_max, args.rounds),
            "battleship": (args.width, args.height, args.rounds),
        }[args.game]
        if all(p is not None for p in given):
            grid = [(args.game, given)]
        else:
            grid = [entry for entry in DEFAULT_GRID if entry[0] == args.game]
    concepts = [Concept(args.concept)] if args.concept else list(CONCEPTS)

    records = run_grid(grid, concepts, options=config.solver_options(args.backend),
                       max_workers=args.workers or config.max_workers)
    if args.out:
        with open(args.out, "w", newline="") as stream:
            write_records_csv(records, stream)
        print(f"✅ Wrote {len(records)} rows to {args.out}", file=sys.stderr)
    else:
        write_records_csv(records, sys.stdout)
    if any(r.status != LpStatus.OPTIMAL.value for r in records):
        return EXIT_NOT_OPTIMAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrsolve",
        description="Welfare-maximizing NFCCE / EFCCE / EFCE of extensive-form games",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized steps")
    sub = parser.add_subparsers(dest="command", required=True)

    def size_flags(p, defaults: bool):
        p.add_argument("--n-max", type=int, default=1 if defaults else None)
        p.add_argument("--b-max", type=int, default=1 if defaults else None)
        p.add_argument("--rounds", "--r", dest="rounds", type=int, default=2 if defaults else None)
        p.add_argument("--width", type=int, default=2 if defaults else None)
        p.add_argument("--height", type=int, default=1 if defaults else None)

    def solve_flags(p):
        p.add_argument("--concept", choices=[c.value for c in CONCEPTS], default="nfcce")
        p.add_argument("--objective", choices=["welfare", "dir"], default="welfare")
        p.add_argument("--dx", type=float, default=1.0)
        p.add_argument("--dy", type=float, default=1.0)
        p.add_argument("--tau", type=float, default=None, help="social welfare floor")
        p.add_argument("--backend", default=None)
        p.add_argument("--out", default=None)

    p = sub.add_parser("gen", help="write a generated game file")
    p.add_argument("kind", choices=["m2", "pennies", "sheriff", "battleship", "goofspiel", "sat"])
    size_flags(p, defaults=True)
    p.add_argument("--clauses", default=None, help="CNF such as '~x;x,y;x,~y'")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("info", help="print sequence and pair counts")
    p.add_argument("game")
    p.add_argument("--xi", action="store_true", help="also print correlation-plan system sizes")
    p.set_defaults(handler=cmd_info)

    p = sub.add_parser("solve", help="solve the equilibrium LP")
    p.add_argument("game")
    solve_flags(p)
    p.add_argument("--dump-lp", default=None)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("verify", help="certify a solution file")
    p.add_argument("game")
    p.add_argument("solution")
    p.add_argument("--concept", choices=[c.value for c in CONCEPTS], default=None)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("region", help="sample payoff regions by objective direction")
    p.add_argument("game")
    p.add_argument("--directions", type=int, default=64)
    p.add_argument("--backend", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_region)

    p = sub.add_parser("oracle", help="brute-force LP over joint reduced plans")
    p.add_argument("game")
    solve_flags(p)
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("bench", help="run a parameter grid and write the results CSV")
    p.add_argument("--game", choices=["all", "goofspiel", "sheriff", "battleship"], default="all")
    size_flags(p, defaults=False)
    p.add_argument("--concept", choices=[c.value for c in CONCEPTS], default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--backend", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_bench)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_USAGE

    try:
        config = Config.from_env()
    except ValueError as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(config)

    try:
        return args.handler(args, config)
    except CompactnessError as e:
        logger.error(f"{e}")
        print(f"❌ {e}. Try `corrsolve oracle {getattr(args, 'game', '')}` instead.",
              file=sys.stderr)
        return EXIT_USAGE
    except INPUT_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    exit(main())

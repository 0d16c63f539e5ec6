"""Command-line front end.

Machine-readable results go to stdout (or ``--out``), diagnostics to stderr.
Exit codes: 0 success, 1 a demanded result does not exist, 2 usage or input
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bases import (
    BasisSet,
    InvalidBasisSet,
    haar_random_basis_set,
    mub_basis_set,
    pauli_bases,
    rank_of_span,
    transition_tensor,
    unbiasedness_check,
)
from .experiments import (
    estimate_table_row,
    fig1_csv,
    fig1_samples,
    qubit_third,
    report_csv,
    run_game,
)
from .model.debias import debias
from .model.fitting import iterative_fit
from .model.joint import CapExceeded
from .model.lp import solve_model_lp
from .model.simplex import LPError
from .sdp import BarrierFailure, unambiguous_value
from .strategy import DegenerateBasisSet, Strategy, StrategyError, build_strategy, verify_strategy

log = logging.getLogger("meanking")

EXIT_OK, EXIT_NONE, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=_positive_int, help="Hilbert space dimension d")
    common.add_argument("--bases", type=_positive_int, help="number of bases k (default d+1)")
    common.add_argument("--seed", type=_nonneg_int, default=0)
    common.add_argument("--tol", type=_positive_float, help="tolerance override")
    common.add_argument("--in", dest="inp", help="input JSON file ('-' for stdin)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=["json", "csv"], default=None)
    common.add_argument("--mub", action="store_true", help="standard mutually unbiased bases (prime d)")
    common.add_argument("--pauli", action="store_true", help="the three Pauli eigenbases")
    common.add_argument("--jobs", type=_positive_int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="meanking", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="emit a BasisSet JSON")
    sub.add_parser("classify", parents=[common], help="span rank and unbiasedness")
    p = sub.add_parser("model", parents=[common], help="classical model LP")
    p.add_argument("--fit", action="store_true", help="also run iterative proportional fitting")
    p.add_argument("--sweeps", type=_positive_int, default=1000)
    sub.add_parser("strategy", parents=[common], help="build and verify Alice's strategy")
    p = sub.add_parser("simulate", parents=[common], help="play the game with a strategy")
    p.add_argument("--rounds", type=_positive_int, default=10_000)
    sub.add_parser("value", parents=[common], help="unambiguous retrodiction value")
    p = sub.add_parser("table", parents=[common], help="Haar ensemble statistics")
    p.add_argument("--samples", type=_positive_int, default=1000)
    p = sub.add_parser("bell", parents=[common], help="qubit classical-model fraction")
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--fig1", action="store_true", help="emit sampled triples as CSV")
    p = sub.add_parser("debias", parents=[common], help="descend towards unbiased bases")
    p.add_argument("--steps", type=_positive_int, default=5000)
    return parser


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _basis_set(args) -> BasisSet:
    if args.inp:
        text = _read_text(args.inp)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidBasisSet(f"malformed JSON: {exc}") from exc
        if isinstance(data, dict) and "bases" in data and isinstance(data["bases"], dict):
            data = data["bases"]
        return BasisSet.from_dict(data)
    if args.pauli:
        return pauli_bases()
    if args.dim is None:
        raise UsageError("give --in, --pauli, or --dim")
    k = args.bases or args.dim + 1
    if args.mub:
        return mub_basis_set(args.dim, k)
    return haar_random_basis_set(args.dim, k, args.seed)


def _emit(args, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def cmd_sample(args) -> int:
    _emit(args, _basis_set(args).to_json())
    return EXIT_OK


def cmd_classify(args) -> int:
    bs = _basis_set(args)
    cls = rank_of_span(bs, args.tol or 1e-9)
    _emit(args, _dumps({
        "d": bs.d,
        "k": bs.k,
        "rank": cls.rank,
        "label": cls.label,
        "unbiasedness_deviation": unbiasedness_check(bs),
    }))
    return EXIT_OK


def cmd_model(args) -> int:
    bs = _basis_set(args)
    t = transition_tensor(bs)
    lp = solve_model_lp(t)
    out = {"status": lp.status, "value": lp.value, "weights": lp.jd.to_dict()}
    if args.fit:
        fit = iterative_fit(t, max_sweeps=args.sweeps, tol=args.tol or 1e-8)
        out["fit"] = {"residual": fit.residual, "sweeps": fit.sweeps, "weights": fit.jd.to_dict()}
    _emit(args, _dumps(out))
    return EXIT_OK if lp.feasible else EXIT_NONE


def cmd_strategy(args) -> int:
    bs = _basis_set(args)
    cls = rank_of_span(bs)
    if not cls.non_degenerate:
        log.error("basis set is %s (rank %d); no strategy construction", cls.label, cls.rank)
        return EXIT_NONE
    lp = solve_model_lp(transition_tensor(bs))
    if not lp.feasible:
        log.error("no classical model (LP optimum %.6f); Alice has no safe strategy", lp.value)
        return EXIT_NONE
    st = build_strategy(bs, lp.jd, cls)
    rep = verify_strategy(bs, st)
    log.info("max_offdiag=%.3e sum_check=%.3e min_eig=%.3e", rep.max_offdiag, rep.sum_check, rep.min_eig)
    out = st.to_dict()
    out["bases"] = bs.to_dict()
    _emit(args, json.dumps(out))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.inp or not (args.mub or args.pauli or args.dim):
        data = json.loads(_read_text(args.inp or "-"))
        if "bases" not in data:
            raise UsageError("strategy JSON lacks the embedded 'bases' field")
        bs = BasisSet.from_dict(data["bases"])
        st = Strategy.from_dict(data)
    else:
        bs = _basis_set(args)
        lp = solve_model_lp(transition_tensor(bs))
        if not lp.feasible:
            log.error("no classical model; nothing to simulate")
            return EXIT_NONE
        st = build_strategy(bs, lp.jd)
    tr = run_game(bs, st, args.rounds, args.seed)
    _emit(args, tr.summary())
    return EXIT_OK


def cmd_value(args) -> int:
    res = unambiguous_value(_basis_set(args))
    _emit(args, _dumps(res.to_dict()))
    return EXIT_OK


def cmd_table(args) -> int:
    if args.dim is None:
        raise UsageError("table needs --dim")
    rep = estimate_table_row(args.dim, args.samples, args.seed, jobs=args.jobs, k=args.bases)
    if args.format == "json":
        _emit(args, _dumps(rep.to_dict()))
    else:
        _emit(args, report_csv([rep]))
    log.info(
        "max gap %.2e, max LP residual %.2e, near-degenerate samples %d",
        rep.max_gap, rep.max_lp_residual, rep.near_degenerate,
    )
    return EXIT_OK


def cmd_bell(args) -> int:
    if args.fig1:
        _emit(args, fig1_csv(fig1_samples(args.samples, args.seed)))
        return EXIT_OK
    res = qubit_third(args.samples, args.seed, jobs=args.jobs)
    row = {"N": res.N, "classical": res.classical, "fraction": res.fraction, "lo": res.lo, "hi": res.hi, "seed": res.seed}
    if args.format == "csv":
        _emit(args, ",".join(row) + "\n" + ",".join(str(v) for v in row.values()))
    else:
        _emit(args, _dumps(row))
    return EXIT_OK


def cmd_debias(args) -> int:
    bs = _basis_set(args)
    res = debias(bs, max_steps=args.steps, tol=args.tol or 1e-10)
    log.info(
        "objective %.10f (bound %.10f) after %d steps, converged=%s",
        res.objective, res.lower_bound, res.steps, res.converged,
    )
    _emit(args, res.basis_set.to_json())
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "classify": cmd_classify,
    "model": cmd_model,
    "strategy": cmd_strategy,
    "simulate": cmd_simulate,
    "value": cmd_value,
    "table": cmd_table,
    "bell": cmd_bell,
    "debias": cmd_debias,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if args.out:
        parent = Path(args.out).resolve().parent
        if not parent.is_dir():
            log.error("output directory %s does not exist", parent)
            return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidBasisSet, json.JSONDecodeError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (ValueError, CapExceeded, DegenerateBasisSet) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (BarrierFailure, LPError, StrategyError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

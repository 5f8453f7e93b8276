"""``troplab`` command line.

Every verb reads/writes the JSON formats of :mod:`troplab.matrix_core` and
:mod:`troplab.maps` and emits a report ``{command, inputs_digest, config,
results, version}``.  Exit codes: 0 success, 1 usage or I/O error, 2 when a
classification is internally inconsistent or the regression corpus fails.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import run_corpus
from .funcalc import (
    ClosureError, FiniteTensor, NotContractiveError, evaluate_phi, op_functional_calculus,
    symmetric_functional_calculus, tro_closure_of_range,
)
from .generators import KINDS, generate
from .maps import LinearMap, estimate_norm_table, is_positive
from .matrix_core import Algebra, SchemaError, element_to_json, tolerances
from .preservers import (
    DecompositionError, FactorizationError, NotATripleHomError, classify_cop,
    classify_order_zero, decompose_triple_hom, factorize,
)
from .triple_ops import ScalarFunction

EXIT_OK, EXIT_USAGE, EXIT_ALARM = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    trials: int = 100
    restarts: int = 20
    tol_abs: float = 1e-12
    tol_rel: float = 1e-9
    rank_tol: float = 1e-10
    output_path: str | None = None

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if self.trials < 1 or self.restarts < 1:
            raise UsageError("--trials and --restarts must be positive")
        for name in ("tol_abs", "tol_rel", "rank_tol"):
            if not getattr(self, name) > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")


def _load_json(path: str, digest) -> object:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    digest.update(raw)
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: "
                         f"{exc.msg}") from exc


def _load_map(path: str, digest) -> LinearMap:
    data = _load_json(path, digest)
    try:
        return LinearMap.from_json(data)
    except SchemaError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _witness_failure(err: FactorizationError) -> dict:
    return {"identity": err.identity, "kind": err.kind, "defect": err.defect,
            "tolerance_ratio": err.ratio,
            "witness": [element_to_json(x) for x in err.witness]}


# --------------------------------------------------------------------------
# Verbs
# --------------------------------------------------------------------------

def cmd_classify(args, cfg: RunConfig, digest):
    t = _load_map(args.map, digest)
    cop = classify_cop(t, cfg.trials, cfg.seed)
    results = {"cop": cop.to_json()}
    consistent = cop.consistent
    if is_positive(t, cfg.trials, cfg.seed):
        oz = classify_order_zero(t, cfg.trials, cfg.seed)
        results["order_zero"] = oz.to_json()
        consistent = consistent and oz.consistent
    results["consistent"] = consistent
    return results, EXIT_OK if consistent else EXIT_ALARM


def cmd_factorize(args, cfg: RunConfig, digest):
    t = _load_map(args.map, digest)
    try:
        f = factorize(t)
    except FactorizationError as err:
        return {"factorizable": False, "failure": _witness_failure(err)}, EXIT_OK
    return {"factorizable": True, "factorization": f.to_json(),
            "supporting_map_is_tro_hom": bool(f.supporting_is_tro_hom)}, EXIT_OK


def cmd_decompose(args, cfg: RunConfig, digest):
    t = _load_map(args.map, digest)
    try:
        phi, psi = decompose_triple_hom(t)
    except NotATripleHomError as exc:
        raise UsageError(str(exc)) from exc
    except DecompositionError as exc:
        return {"decomposed": False, "defects": exc.defects}, EXIT_ALARM
    return {"decomposed": True, "tro_hom_part": phi.to_json(),
            "tro_anti_hom_part": psi.to_json()}, EXIT_OK


def cmd_norms(args, cfg: RunConfig, digest):
    if args.n_max < 1:
        raise UsageError("--n-max must be >= 1")
    t = _load_map(args.map, digest)
    table = estimate_norm_table(t, args.n_max, restarts=cfg.restarts, seed=cfg.seed)
    rows = [{"n": est.level, "lower_bound": est.lower_bound,
             "witness_norm": est.witness.norm(), "iterations": est.iterations,
             "converged": est.converged} for est in table]
    return {"norms": rows}, EXIT_OK


def cmd_funcalc(args, cfg: RunConfig, digest):
    t = _load_map(args.map, digest)
    try:
        func = ScalarFunction.parse(args.f)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    digest.update(args.f.encode())
    try:
        if args.symmetric:
            result = symmetric_functional_calculus(t, func)
            out = {"map": result.to_json()}
        else:
            f = factorize(t)
            out = {"map": op_functional_calculus(f, func).to_json()}
            if args.tensor:
                data = _load_json(args.tensor, digest)
                try:
                    tensor = FiniteTensor.from_json(data)
                except SchemaError as exc:
                    raise UsageError(f"{args.tensor}: {exc}") from exc
                out["phi"] = element_to_json(evaluate_phi(f, tensor))
    except FactorizationError as err:
        raise UsageError(f"map is not orthogonality preserving: {err}") from err
    except (NotContractiveError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out["function"] = func.label
    return out, EXIT_OK


def cmd_tro_closure(args, cfg: RunConfig, digest):
    t = _load_map(args.map, digest)
    try:
        sub = tro_closure_of_range(t, args.max_rounds)
    except ClosureError as exc:
        return {"stabilized": False, "dimensions": exc.dims}, EXIT_ALARM
    return {"stabilized": True, "dim": sub.dim, "rounds": sub.rounds,
            "subspace": sub.to_json()}, EXIT_OK


def cmd_generate(args, cfg: RunConfig, digest):
    try:
        blocks = tuple(int(b) for b in args.blocks.split(","))
        algebra = Algebra(blocks)
        gt = generate(args.kind, algebra, args.multiplicity, args.extra, cfg.seed, args.split)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    results = {"kind": args.kind, "truth": gt.to_json()}
    if args.map_out:
        path = Path(args.map_out)
        _write(path, gt.map.to_json())
        sidecar = path.with_suffix(".truth.json")
        _write(sidecar, gt.to_json())
        results["map_path"], results["truth_path"] = str(path), str(sidecar)
    else:
        results["map"] = gt.map.to_json()
    return results, EXIT_OK


def cmd_repro_paper(args, cfg: RunConfig, digest):
    items = run_corpus(cfg.restarts, cfg.seed)
    for item in items:
        print(f"{'PASS' if item.passed else 'FAIL'}  {item.name}", file=sys.stderr)
    ok = all(i.passed for i in items)
    return ({"items": [{"name": i.name, "passed": i.passed, "details": i.details} for i in items],
             "all_passed": ok}, EXIT_OK if ok else EXIT_ALARM)


COMMANDS = {
    "classify": cmd_classify, "factorize": cmd_factorize, "decompose": cmd_decompose,
    "norms": cmd_norms, "funcalc": cmd_funcalc, "tro-closure": cmd_tro_closure,
    "generate": cmd_generate, "repro-paper": cmd_repro_paper,
}


# --------------------------------------------------------------------------
# Plumbing
# --------------------------------------------------------------------------

def _write(path: Path, data) -> None:
    try:
        path.write_text(json.dumps(data, indent=2) + "\n")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad arguments; usage errors here exit with 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_flags(suppress: bool) -> argparse.ArgumentParser:
    # flags are accepted before or after the verb; the per-verb copy has no
    # defaults so it cannot overwrite a value given before the verb
    p = _Parser(add_help=False)
    flags = [("--seed", int, 0), ("--trials", int, 100), ("--restarts", int, 20),
             ("--tol-rel", float, 1e-9), ("--tol-abs", float, 1e-12), ("--rank-tol", float, 1e-10)]
    for flag, kind, default in flags:
        p.add_argument(flag, type=kind, default=argparse.SUPPRESS if suppress else default)
    p.add_argument("--out", default=argparse.SUPPRESS if suppress else None,
                   help="write the report here instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    top, common = _common_flags(False), _common_flags(True)
    parser = _Parser(prog="troplab", parents=[top],
                                     description="Orthogonality preservers and TROs "
                                                 "between finite-dimensional C*-algebras")
    parser.add_argument("--version", action="version", version=f"troplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in ("classify", "factorize", "decompose"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("map", help="LinearMap JSON file")
    p = sub.add_parser("norms", parents=[common])
    p.add_argument("map")
    p.add_argument("--n-max", type=int, default=4)
    p = sub.add_parser("funcalc", parents=[common])
    p.add_argument("--map", required=True)
    p.add_argument("--f", required=True, help="identity | cube | cuberoot | abs | chop:E | "
                                               "power:P | poly:[c1,c3,...]")
    p.add_argument("--tensor", help="FiniteTensor JSON to push through sum f_i(T)(a_i)")
    p.add_argument("--symmetric", action="store_true",
                   help="eigenvalue calculus f(h) J for symmetric maps")
    p = sub.add_parser("tro-closure", parents=[common])
    p.add_argument("--map", required=True)
    p.add_argument("--max-rounds", type=int, default=10)
    p = sub.add_parser("generate", parents=[common])
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--blocks", default="2", help="comma-separated summand sizes, e.g. 1,2,3")
    p.add_argument("--multiplicity", type=int, default=1)
    p.add_argument("--extra", type=int, default=0)
    p.add_argument("--split", action="store_true", help="one codomain summand per domain summand")
    p.add_argument("--map-out", help="write the map here and the ground truth next to it")
    sub.add_parser("repro-paper", parents=[common])
    return parser


def run(argv=None) -> tuple[dict | None, int]:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(args.seed, args.trials, args.restarts, args.tol_abs, args.tol_rel,
                        args.rank_tol, args.out)
        digest = hashlib.sha256()
        with tolerances(abs_tol=cfg.tol_abs, rel_tol=cfg.tol_rel, rank_tol=cfg.rank_tol):
            results, code = COMMANDS[args.command](args, cfg, digest)
    except UsageError as exc:
        print(f"troplab {args.command}: {exc}", file=sys.stderr)
        return None, EXIT_USAGE
    report = {"command": args.command, "inputs_digest": digest.hexdigest(),
              "config": asdict(cfg), "results": _jsonable(results), "version": __version__}
    text = json.dumps(report, indent=2, allow_nan=True)
    if cfg.output_path:
        try:
            Path(cfg.output_path).write_text(text + "\n")
        except OSError as exc:
            print(f"troplab: cannot write {cfg.output_path}: {exc.strerror}", file=sys.stderr)
            return report, EXIT_USAGE
    else:
        print(text)
    return report, code


def main(argv=None) -> int:
    return run(argv)[1]


if __name__ == "__main__":
    sys.exit(main())

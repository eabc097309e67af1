"""Command-line interface.

Every subcommand writes one report (JSON by default, or CSV of its scalar
fields) and exits with 0 on pass, 1 on a certified failure, 2 on an input
error and 3 when the result is inconclusive.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import assemblage as asmod
from . import matkernel as mk
from .activation import DEFAULT_TOL, POST_QUANTUM, activate_n, build_network_correlations
from .assemblage import Assemblage, AssemblageParseError, BipartiteAssemblage, NetworkAssemblage
from .certify import (
    EXTREMAL_DIST_TOL,
    EXTREMAL_SCORE_TOL,
    INDEPENDENCE_TOL,
    NONNEG_TOL,
    SELFTEST_EPS,
    classical_bound,
    extremality_certificate,
    independence_check,
    quantum_nonnegativity_sweep,
    selftest_certificate,
)
from .functionals import (
    chsh_expression,
    decompose_to_bell,
    icd_expression,
    load_functional,
    optimal_selftest_model,
    shifted_chsh_functional,
    table_from_model,
)
from .optimize import SeesawConfig, seesaw_bell
from .quantum import (
    QuantumModel,
    assemblage_from_model,
    ghjw_realization,
    load_model,
    pr_box_assemblage,
    reconstruction_error,
    reference_assemblage,
    X,
    Z,
    save_model,
)

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_INCONCLUSIVE = 0, 1, 2, 3
STATUS = {EXIT_PASS: "pass", EXIT_FAIL: "fail", EXIT_INPUT: "error", EXIT_INCONCLUSIVE: "inconclusive"}
GHJW_TOL = 1e-9


class InputError(Exception):
    def __init__(self, code, message, where=None):
        super().__init__(message)
        self.code = code
        self.where = where


def _tolerances(**overrides):
    tol = {
        "feasibility": mk.FEASIBILITY_TOL,
        "identity": mk.IDENTITY_TOL,
        "rank_cutoff": mk.RANK_CUTOFF,
        "activation": DEFAULT_TOL,
        "selftest_epsilon": SELFTEST_EPS,
        "extremality_score": EXTREMAL_SCORE_TOL,
        "extremality_distance": EXTREMAL_DIST_TOL,
        "independence": INDEPENDENCE_TOL,
        "nonnegativity": NONNEG_TOL,
        "ghjw": GHJW_TOL,
    }
    tol.update({k: v for k, v in overrides.items() if v is not None})
    return tol


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _require_file(path, flag):
    if path is None:
        raise InputError("missing_argument", f"{flag} is required")
    if not Path(path).is_file():
        raise InputError("file_not_found", f"no such file: {path}", flag)
    return path


def _load_assemblage(path, flag="--input"):
    _require_file(path, flag)
    return asmod.load(path)


def _check_r(r):
    if r is not None and not 0.0 <= r <= 1.0:
        raise InputError("invalid_argument", f"--r must lie in [0, 1], got {r}")


# ---------------------------------------------------------------------------
# subcommands; each returns (exit code, result dict, inputs dict, tolerances, seed)


def cmd_validate(args):
    asm = _load_assemblage(args.input)
    tol = args.tol if args.tol is not None else mk.FEASIBILITY_TOL
    report = asmod.validate(asm, tol)
    result = {"kind": asm.kind, "scenario": asm.scenario.to_dict(), "digest": asm.digest(),
              "report": report.to_dict(), "warnings": list(asm.warnings)}
    if not report.passed:
        result["failed_constraints"] = [c.name for c in report.failed()]
    code = EXIT_PASS if report.passed else EXIT_FAIL
    return code, result, {"input": _file_digest(args.input)}, _tolerances(feasibility=tol), None


def ghz_baseline_assemblage() -> Assemblage:
    """GHZ state with CHSH-type measurements for A and B; C is steered."""
    psi = np.zeros(8, dtype=complex)
    psi[0] = psi[7] = 1 / math.sqrt(2)
    state = np.outer(psi, psi.conj())

    def proj(obs):
        return np.stack([(np.eye(2) + obs) / 2, (np.eye(2) - obs) / 2])

    A = np.stack([proj(Z), proj(X)])
    B = np.stack([proj((Z + X) / math.sqrt(2)), proj((Z - X) / math.sqrt(2))])
    return assemblage_from_model(QuantumModel(state, (2, 2, 2), (A, B, None)))


def cmd_demo(args):
    r = 0.0 if args.r is None else args.r
    _check_r(r)
    tol = args.tol if args.tol is not None else DEFAULT_TOL
    n = 1 if args.n is None else args.n
    if args.quantum_baseline:
        if n != 1:
            raise InputError("invalid_argument", "the GHZ baseline is a one-qubit assemblage; drop --n")
        asm = ghz_baseline_assemblage()
    else:
        asm = pr_box_assemblage(2 ** n)
    F = shifted_chsh_functional(2 ** n)
    rep = activate_n(asm, F, r, tol=tol, assume_independence=args.assume_independence)
    if n == 1:
        table = build_network_correlations(asm, reference_assemblage(1, r)).marginal("cd")
    else:
        # every qubit of the reference is self-tested by the one-qubit fixture
        table = table_from_model(optimal_selftest_model(), "cd")
    cert = selftest_certificate(table)
    if rep.verdict == POST_QUANTUM and cert.passed:
        code = EXIT_PASS
    elif not cert.passed:
        code = EXIT_FAIL
    else:
        code = EXIT_INCONCLUSIVE
    result = {"input": "ghz_baseline" if args.quantum_baseline else "pr_box",
              "activation": rep.to_dict(), "selftest": cert.to_dict()}
    return code, result, {"assemblage": rep.assemblage_digest, "functional": rep.functional_digest}, \
        _tolerances(activation=tol), None


def cmd_activate(args):
    r = 0.0 if args.r is None else args.r
    _check_r(r)
    tol = args.tol if args.tol is not None else DEFAULT_TOL
    asm = _load_assemblage(args.input)
    if not isinstance(asm, Assemblage):
        raise InputError("wrong_kind", f"activation needs a tripartite assemblage, got {asm.kind}", args.input)
    F = load_functional(_require_file(args.functional, "--functional")) if args.functional else \
        shifted_chsh_functional(asm.dim)
    rep = activate_n(asm, F, r, tol=tol, assume_independence=args.assume_independence)
    code = EXIT_PASS if rep.verdict == POST_QUANTUM else EXIT_INCONCLUSIVE
    inputs = {"input": _file_digest(args.input), "assemblage": rep.assemblage_digest,
              "functional": rep.functional_digest}
    return code, rep.to_dict(), inputs, _tolerances(activation=tol), None


def cmd_selftest(args):
    eps = args.tol if args.tol is not None else SELFTEST_EPS
    if args.input:
        model = load_model(_require_file(args.input, "--input"))
        if len(model.dims) != 2 or any(m is None for m in model.measurements):
            raise InputError("wrong_kind", "self-test needs a two-party model with both parties measured", args.input)
        inputs = {"input": _file_digest(args.input)}
    else:
        model = optimal_selftest_model()
        inputs = {"input": "optimal_fixture"}
    cert = selftest_certificate(table_from_model(model, "cd"), eps)
    return (EXIT_PASS if cert.passed else EXIT_FAIL), cert.to_dict(), inputs, _tolerances(selftest_epsilon=eps), None


def cmd_seesaw(args):
    seed = 0 if args.seed is None else args.seed
    inputs = {}
    if args.expression == "chsh":
        expr, dims = chsh_expression(), (2, 2)
    elif args.expression == "icd":
        expr, dims = icd_expression(), (2, 2)
    else:
        F = load_functional(_require_file(args.functional, "--functional")) if args.functional else \
            shifted_chsh_functional()
        if args.functional:
            inputs["functional"] = _file_digest(args.functional)
        expr, dims = decompose_to_bell(F), (2, 2, 2)
    if args.dims:
        dims = tuple(args.dims)
    r = 0.0 if args.r is None else args.r
    _check_r(r)
    cfg = SeesawConfig(dims, max_iter=args.max_iter, restarts=args.restarts, seed=seed, direction=args.direction)
    res = seesaw_bell(expr, cfg, r=r)
    result = {"expression": args.expression, "config": cfg.to_dict(), "r": r, **res.to_dict()}
    return EXIT_PASS, result, inputs, _tolerances(seesaw_convergence=cfg.tol), seed


def cmd_ghjw(args):
    tol = args.tol if args.tol is not None else GHJW_TOL
    asm = _load_assemblage(args.input)
    if not isinstance(asm, BipartiteAssemblage):
        raise InputError("wrong_kind", f"GHJW needs a bipartite assemblage, got {asm.kind}", args.input)
    model = ghjw_realization(asm)
    err = reconstruction_error(asm, model)
    result = {"reconstruction_error": err, "purification_rank": model.dims[0], "digest": asm.digest()}
    if args.model_out:
        save_model(model, args.model_out)
        result["model_path"] = str(args.model_out)
    return (EXIT_PASS if err <= tol else EXIT_FAIL), result, {"input": _file_digest(args.input)}, \
        _tolerances(ghjw=tol), None


def cmd_certify(args):
    seed = None
    inputs = {}
    if args.kind == "extremality":
        asm = _load_assemblage(args.input)
        if not isinstance(asm, BipartiteAssemblage):
            raise InputError("wrong_kind", f"extremality needs a bipartite assemblage, got {asm.kind}", args.input)
        cert = extremality_certificate(asm)
        inputs["input"] = _file_digest(args.input)
        tol = _tolerances()
    elif args.kind == "independence":
        net = _load_assemblage(args.input)
        ref = _load_assemblage(args.reference, "--reference")
        if not isinstance(net, NetworkAssemblage) or not isinstance(ref, BipartiteAssemblage):
            raise InputError("wrong_kind", "independence needs a network assemblage and a bipartite reference")
        t = args.tol if args.tol is not None else INDEPENDENCE_TOL
        cert = independence_check(net, ref, t)
        inputs.update(input=_file_digest(args.input), reference=_file_digest(args.reference))
        tol = _tolerances(independence=t)
    elif args.kind == "nonnegativity":
        F = load_functional(_require_file(args.functional, "--functional")) if args.functional else \
            shifted_chsh_functional()
        if args.functional:
            inputs["functional"] = _file_digest(args.functional)
        seed = 0 if args.seed is None else args.seed
        t = args.tol if args.tol is not None else NONNEG_TOL
        cert = quantum_nonnegativity_sweep(decompose_to_bell(F), args.trials, seed, t)
        tol = _tolerances(nonnegativity=t)
    else:
        expr = {"icd": icd_expression, "chsh": chsh_expression}[args.expression]()
        bound = classical_bound(expr)
        result = {"kind": "classical_bound", "expression": args.expression, "bound": bound}
        return EXIT_PASS, result, inputs, _tolerances(), None
    return (EXIT_PASS if cert.passed else EXIT_FAIL), cert.to_dict(), inputs, tol, seed


COMMANDS = {
    "validate": cmd_validate,
    "demo": cmd_demo,
    "activate": cmd_activate,
    "selftest": cmd_selftest,
    "seesaw": cmd_seesaw,
    "ghjw": cmd_ghjw,
    "certify": cmd_certify,
}


# ---------------------------------------------------------------------------
# output


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif v is None or isinstance(v, (bool, int, float, str)):
            out[key] = v
    return out


def _render(report, fmt):
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["field", "value"])
        for k, v in _flatten(report).items():
            w.writerow([k, v])
        return buf.getvalue()
    return json.dumps(report, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(report, args):
    text = _render(report, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input file (assemblage, network or model JSON)")
    common.add_argument("--functional", help="steering functional JSON")
    common.add_argument("--n", type=int, help="qubit count for the reference assemblage")
    common.add_argument("--r", type=float, help="reference mixing weight in [0, 1]")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--trials", type=int, default=10_000, help="sweep trials")
    common.add_argument("--tol", type=float, help="override the command's decision tolerance")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    p = argparse.ArgumentParser(prog="pqsteer", description="Activation of post-quantum steering.")
    p.add_argument("--version", action="version", version=f"pqsteer {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="validate an assemblage file")
    d = sub.add_parser("demo", parents=[common], help="end-to-end PR-box activation")
    d.add_argument("--quantum-baseline", action="store_true", help="use a GHZ quantum assemblage instead")
    d.add_argument("--assume-independence", action="store_true")
    a = sub.add_parser("activate", parents=[common], help="activate an assemblage file")
    a.add_argument("--assume-independence", action="store_true")
    sub.add_parser("selftest", parents=[common], help="self-test certificate for a (C, D) model")
    s = sub.add_parser("seesaw", parents=[common], help="see-saw optimization")
    s.add_argument("--expression", choices=("chsh", "icd", "activated"), default="icd")
    s.add_argument("--direction", choices=("maximize", "minimize"), default="maximize")
    s.add_argument("--dims", type=int, nargs="+")
    s.add_argument("--restarts", type=int, default=8)
    s.add_argument("--max-iter", type=int, default=300)
    g = sub.add_parser("ghjw", parents=[common], help="GHJW realization of a bipartite assemblage")
    g.add_argument("--model-out", help="save the realizing model here")
    c = sub.add_parser("certify", parents=[common], help="extremality, independence, non-negativity or classical bound")
    c.add_argument("--kind", choices=("extremality", "independence", "nonnegativity", "classical"), required=True)
    c.add_argument("--reference", help="reference assemblage for the independence check")
    c.add_argument("--expression", choices=("icd", "chsh"), default="icd")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.n is not None and args.n < 1:
            raise InputError("invalid_argument", "--n must be >= 1")
        if args.trials < 1:
            raise InputError("invalid_argument", "--trials must be >= 1")
        code, result, inputs, tol, seed = COMMANDS[args.command](args)
    except InputError as exc:
        report = {"command": args.command, "status": "error",
                  "error": {"code": exc.code, "message": str(exc), "where": exc.where}}
        _emit(report, args)
        return EXIT_INPUT
    except AssemblageParseError as exc:
        report = {"command": args.command, "status": "error",
                  "error": {"code": "parse_error", "message": str(exc), "where": exc.where}}
        _emit(report, args)
        return EXIT_INPUT
    except ValueError as exc:
        report = {"command": args.command, "status": "error",
                  "error": {"code": type(exc).__name__, "message": str(exc), "where": None}}
        _emit(report, args)
        return EXIT_INPUT
    report = {"command": args.command, "status": STATUS[code], "exit_code": code, "version": __version__,
              "backend": mk.BACKEND, "seed": seed, "tolerances": tol, "inputs": inputs, "result": result}
    _emit(report, args)
    return code


if __name__ == "__main__":
    sys.exit(main())

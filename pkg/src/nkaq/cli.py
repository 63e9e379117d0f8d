"""Command-line entry point ``nkaq``.

Exit codes: 0 for success, equality, acceptance or validity; 1 for a
counterexample, rejection or invalid triple; 2 for usage and format errors.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import quantum as qc
from .hoare import RULES, check_partition, hoare_check, pqhl_rule_check, random_instance, triple_from_json
from .interpretation import (ConvergencePolicy, InterpretationSetting, check_enc_recovery, dual_interpret,
                             interpret)
from .normal_form import MAX_TOTAL_DIM, normal_form_distance, normalize_program
from .programs import (LOOP_TOL, MAX_ITER, EncoderSetting, NonConvergent, ProgramEnv, ProgramError,
                       VariableLayout, denote, encode, parse_program, print_program, random_program)
from .proof import ProofError, check_script, corpus_names, corpus_text
from .series import (Counterexample, Equal, Unsupported, bounded_equiv, coeff, eps_coeff, exact_equiv,
                     is_proper, series_dump)
from .syntax import Alphabet, ParseError, parse_expr, print_expr

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(args, report: dict, text: str) -> None:
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True, default=str))
    else:
        print(text)


def _expr(text: str, args):
    if not getattr(args, "effects", None):
        return parse_expr(text)
    effects = {n.strip() for n in args.effects.split(",") if n.strip()}
    actions = set(re.findall(r"[A-Za-z][A-Za-z0-9_']*", text)) - effects
    return parse_expr(text, Alphabet.of(sorted(actions), sorted(effects)))


def _tol(args, default: float) -> float:
    return default if args.tol is None else args.tol


def _word(text: str) -> tuple:
    t = text.strip()
    if t in ("", "eps", "1"):
        return ()
    return tuple(t.split()) if " " in t else tuple(t)


def _env(args) -> ProgramEnv:
    if getattr(args, "env", None):
        env = ProgramEnv.from_json(json.loads(Path(args.env).read_text()))
        if env.layout.registers:
            return env
        return ProgramEnv(VariableLayout.qubits("q"), env.unitaries, env.measurements)
    regs = []
    for part in (args.layout or "q:2").split(","):
        name, _, d = part.strip().partition(":")
        if not name:
            raise UsageError(f"bad register spec {part!r}")
        try:
            regs.append((name, int(d or 2)))
        except ValueError:
            raise UsageError(f"bad register dimension in {part!r}") from None
    return ProgramEnv(VariableLayout(tuple(regs)))


def _program(args):
    env = _env(args)
    text = args.program
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    return parse_program(text, env), env.layout


def _policy(args) -> ConvergencePolicy:
    return ConvergencePolicy(_tol(args, LOOP_TOL), args.max_terms)


# ---------------------------------------------------------------------------
# commands


def cmd_parse(args) -> int:
    e = _expr(args.expr, args)
    rep = {"expr": print_expr(e), "proper": is_proper(e), "eps": str(eps_coeff(e))}
    _emit(args, rep, print_expr(e))
    return OK


def cmd_coeff(args) -> int:
    e = _expr(args.expr, args)
    if args.word is None:
        dump = series_dump(e, args.bounded)
        _emit(args, {"expr": print_expr(e), "bound": args.bounded,
                     "series": [l.split("\t") for l in dump.splitlines()]}, dump or "(zero up to bound)")
        return OK
    w = _word(args.word)
    c = coeff(e, w)
    _emit(args, {"expr": print_expr(e), "word": list(w), "coeff": str(c)}, str(c))
    return OK


def cmd_equiv(args) -> int:
    e, f = _expr(args.lhs, args), _expr(args.rhs, args)
    r = bounded_equiv(e, f, args.bounded)
    rep = {"lhs": print_expr(e), "rhs": print_expr(f), "bound": args.bounded}
    if isinstance(r, Counterexample):
        rep.update(result="counterexample", word=list(r.word), lhs_coeff=str(r.coeff_e), rhs_coeff=str(r.coeff_f))
        _emit(args, rep, f"Counterexample: word {r.text}: {r.coeff_e} vs {r.coeff_f}")
        return FAIL
    lines = [f"Equal up to length {args.bounded}"]
    rep["result"] = "equal"
    if args.exact:
        x = exact_equiv(e, f)
        if isinstance(x, Unsupported):
            rep["exact"] = "unsupported"
            lines.append(f"exact check unsupported: {x.reason}")
        elif isinstance(x, Equal):
            rep["exact"] = "equal"
            lines.append("Equal as series")
        else:
            rep["exact"] = "distinguished"
            rep["exact_word"] = list(x.word)
            lines.append(f"Series differ at word {' '.join(x.word) or 'eps'}")
            _emit(args, rep, "\n".join(lines))
            return FAIL
    _emit(args, rep, "\n".join(lines))
    return OK


def cmd_interp(args) -> int:
    tol = _tol(args, LOOP_TOL)
    e = _expr(args.expr, args)
    setting = InterpretationSetting.from_json(json.loads(Path(args.setting).read_text()))
    run = dual_interpret if args.dual else interpret
    res = run(e, setting, _policy(args))
    rep = {"expr": print_expr(e), "dual": args.dual, "certificate": res.certificate,
           "tol": tol, "max_terms": args.max_terms, "superop": qc.superop_to_json(res.superop)}
    text = "\n".join([f"certificate: {res.certificate} (tol {tol}, max terms {args.max_terms})",
                      "transfer matrix:", np.array2string(res.superop.transfer(), precision=6,
                                                          suppress_small=True)])
    _emit(args, rep, text)
    return OK if res.converged else FAIL


def cmd_encode(args) -> int:
    p, _ = _program(args)
    enc = EncoderSetting.short(p)
    e = encode(p, enc)
    table = {s.name: list(map(str, k)) for k, s in enc.symbols.items()}
    text = print_expr(e) + "\n" + "\n".join(f"  {n}: {' '.join(v)}" for n, v in sorted(table.items()))
    _emit(args, {"program": print_program(p), "expr": print_expr(e), "symbols": table}, text)
    return OK


def cmd_run(args) -> int:
    tol = _tol(args, LOOP_TOL)
    p, layout = _program(args)
    E = denote(p, layout, tol, args.max_terms)
    val = qc.validate_superop(E)
    rep = {"program": print_program(p), "layout": layout.to_json(), "tol": tol,
           "max_terms": args.max_terms, "certificate": "converged", "checks": val,
           "superop": qc.superop_to_json(E)}
    lines = [f"program: {print_program(p)}", f"dim {layout.dim}, {len(E.kraus)} Kraus operators",
             f"certificate: converged (tol {tol}, max terms {args.max_terms})",
             "checks: " + ", ".join(f"{k}={v}" for k, v in val.items())]
    if args.state is not None:
        out = qc.apply(E, qc.proj(args.state, layout.dim))
        rep["output"] = qc.matrix_to_json(out)
        lines.append(f"output on basis state {args.state}:")
        lines.append(np.array2string(out, precision=6, suppress_small=True))
    _emit(args, rep, "\n".join(lines))
    return OK


def _script_text(path: str) -> str:
    p = Path(path)
    if p.is_file():
        return p.read_text()
    if p.name in corpus_names() or p.name + ".nka" in corpus_names():
        return corpus_text(p.name)
    raise UsageError(f"no such proof script: {path}")


def cmd_check_proof(args) -> int:
    rep = check_script(_script_text(args.script))
    out = rep.to_json()
    out["script"] = args.script
    text = "\n".join([rep.summary()] + [f"warning: {w}" for w in rep.warnings])
    _emit(args, out, text)
    return OK if rep.accepted else FAIL


def cmd_normalize(args) -> int:
    tol = _tol(args, LOOP_TOL)
    p, layout = _program(args)
    res = normalize_program(p, layout)
    rep = {"program": print_program(p), "prefix": print_program(res.prefix),
           "loop": print_program(res.loop()), "reset": print_program(res.reset),
           "guards": [list(g) for g in res.guards]}
    lines = [res.describe()]
    code = OK
    if args.verify:
        if res.layout.dim > MAX_TOTAL_DIM:
            rep["verified"] = None
            lines.append(f"not verified: combined dim {res.layout.dim} exceeds {MAX_TOTAL_DIM}")
        else:
            dist = normal_form_distance(p, res, tol, args.max_terms)
            ok = dist < 1e-8
            rep.update(verified=ok, distance=dist, threshold=1e-8, tol=tol)
            lines.append(f"Choi distance to original: {dist:.3e} ({'ok' if ok else 'MISMATCH'})")
            code = OK if ok else FAIL
    _emit(args, rep, "\n".join(lines))
    return code


def cmd_hoare(args) -> int:
    tol = _tol(args, qc.DEFAULT_TOL)
    obj = json.loads(Path(args.triple).read_text())
    t, parts = triple_from_json(obj)
    rng = np.random.default_rng(args.seed)
    v = hoare_check(t, tol, rng=rng, policy=_policy(args))
    rep = v.to_json()
    rep["program"] = print_program(t.program)
    rep["partitions"] = {d.name: check_partition(d.measurement, tol, rng=rng).to_json() for d in parts}
    lines = [f"{v.status}: margin {v.margin:.3e} (tol {v.tol})",
             f"sampled check: {'valid' if v.sampled_valid else 'invalid'} over {v.samples} states"]
    parts_ok = all(r["valid"] for r in rep["partitions"].values())
    for name, r in rep["partitions"].items():
        lines.append(f"partition {name}: {'ok' if r['valid'] else 'invalid'} (defect {r['defect']:.3e})")
    _emit(args, rep, "\n".join(lines))
    return OK if v.valid and parts_ok else FAIL


def cmd_selftest(args) -> int:
    tol = _tol(args, qc.DEFAULT_TOL)
    rng = np.random.default_rng(args.seed)
    results = {}
    t0 = time.perf_counter()
    bad = [n for n in corpus_names() if not check_script(corpus_text(n)).accepted]
    results["corpus"] = {"scripts": len(corpus_names()), "rejected": bad}
    sliding = bounded_equiv(parse_expr("(p q)* p"), parse_expr("p (q p)*"), 6)
    idem = bounded_equiv(parse_expr("a + a"), parse_expr("a"), 1)
    results["series"] = {"sliding": bool(sliding), "idempotence_refuted": not idem}
    enc_bad = 0
    for _ in range(args.rounds):
        layout = VariableLayout.qubits("q", "r")
        p = random_program(rng, layout, depth=2)
        try:
            enc_bad += not check_enc_recovery(p, layout)
        except NonConvergent:
            continue
    results["enc_recovery"] = {"programs": args.rounds, "failures": enc_bad}
    rule_bad = {}
    for rule in RULES:
        n = sum(not pqhl_rule_check(rule, random_instance(rule, rng), tol).ok for _ in range(args.rounds))
        rule_bad[rule] = n
    results["pqhl_rules"] = rule_bad
    nf_bad = 0
    for _ in range(args.rounds):
        layout = VariableLayout.qubits("q")
        p = random_program(rng, layout, depth=2)
        res = normalize_program(p, layout)
        if res.layout.dim > MAX_TOTAL_DIM:
            continue
        try:
            nf_bad += normal_form_distance(p, res) >= 1e-8
        except NonConvergent:
            continue
    results["normal_form"] = {"programs": args.rounds, "failures": nf_bad}
    ok = (not bad and sliding and not idem and enc_bad == 0 and not any(rule_bad.values()) and nf_bad == 0)
    results.update(ok=bool(ok), seed=args.seed, seconds=round(time.perf_counter() - t0, 2))
    lines = [f"corpus: {len(corpus_names()) - len(bad)}/{len(corpus_names())} accepted",
             f"series: sliding {'ok' if sliding else 'FAIL'}, non-idempotence {'ok' if not idem else 'FAIL'}",
             f"encoding recovery: {enc_bad} failures",
             "pqhl rules: " + ", ".join(f"{r}={n}" for r, n in rule_bad.items()),
             f"normal form: {nf_bad} failures",
             f"{'PASS' if ok else 'FAIL'} (seed {args.seed})"]
    _emit(args, results, "\n".join(lines))
    return OK if ok else FAIL


# ---------------------------------------------------------------------------


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable report")
    common.add_argument("--tol", type=_positive_float, default=None,
                        help=f"numeric tolerance (series/loops {LOOP_TOL}, order checks {qc.DEFAULT_TOL})")
    common.add_argument("--max-terms", type=_positive_int, default=MAX_ITER, help="star/loop term budget")
    common.add_argument("--seed", type=int, default=42, help="seed for randomized checks")

    ap = argparse.ArgumentParser(prog="nkaq",
                                 description="Non-idempotent Kleene algebra tools for quantum programs")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    def prog_args(p):
        p.add_argument("program", help="program text, or @file")
        p.add_argument("--layout", help="registers as name:dim,... (default q:2)")
        p.add_argument("--env", help="JSON file with layout, unitaries and measurements")

    p = add("parse", cmd_parse, "parse and print an expression")
    p.add_argument("expr")
    p.add_argument("--effects", help="comma-separated effect symbols")

    p = add("coeff", cmd_coeff, "coefficient of a word, or the series up to --bounded")
    p.add_argument("expr")
    p.add_argument("word", nargs="?")
    p.add_argument("--bounded", type=_nonneg_int, default=3)
    p.add_argument("--effects")

    p = add("equiv", cmd_equiv, "compare two expressions as series")
    p.add_argument("lhs")
    p.add_argument("rhs")
    p.add_argument("--bounded", type=_nonneg_int, default=6, metavar="L")
    p.add_argument("--exact", action="store_true", help="also run the exact check")
    p.add_argument("--effects")

    p = add("interp", cmd_interp, "interpret an expression in a setting file")
    p.add_argument("expr")
    p.add_argument("setting", help="JSON interpretation setting")
    p.add_argument("--dual", action="store_true")
    p.add_argument("--effects")

    p = add("encode", cmd_encode, "encode a program as an expression")
    prog_args(p)

    p = add("run", cmd_run, "denote a program as a superoperator")
    prog_args(p)
    p.add_argument("--state", type=_nonneg_int, help="apply to this computational basis state")

    p = add("check-proof", cmd_check_proof, "check a proof script")
    p.add_argument("script", help="path, or name of a bundled script")

    p = add("normalize", cmd_normalize, "rewrite a program to single-loop form")
    prog_args(p)
    p.add_argument("--verify", action="store_true", help="compare denotations")

    p = add("hoare", cmd_hoare, "check a partial-correctness triple file")
    p.add_argument("triple")

    p = add("selftest", cmd_selftest, "bundled corpus plus seeded random suites")
    p.add_argument("--rounds", type=_positive_int, default=20)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.fn(args)
    except NonConvergent as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL
    except (UsageError, ParseError, ProgramError, ProofError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())

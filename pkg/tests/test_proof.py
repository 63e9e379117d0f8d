import pytest

from nkaq.proof import (AmbiguousMatch, Context, Fact, ProofError, Rule, ScriptError, Step,
                        UnknownRule, UnprovenPremise, builtin_rules, check_script, check_step,
                        corpus_names, corpus_text, mutants, parse_script, schema_ineq)
from nkaq.syntax import parse_expr, parse_inequation

E = parse_expr
DB = builtin_rules()


def step(term, rule, direction="LR", relation="=", **kw):
    return Step(E(term) if term is not None else None, relation, rule, direction, **kw)


def test_lookup_examples():
    assert DB.lookup("denesting").statement == schema_ineq("(p + q)* = (p* q)* p*")
    sr = DB.lookup("star-rewrite")
    assert sr.kind == "conditional"
    assert sr.premises == (schema_ineq("p q = r p"),) and sr.statement == schema_ineq("p q* = r* p")
    assert DB.lookup("partition-transform").statement == schema_ineq("~(m0 a + m1 b) = m0 ~a + m1 ~b")
    with pytest.raises(UnknownRule):
        DB.lookup("idempotence")


def test_database_contents():
    need = {"plus-zero", "unit", "annihilation", "distributive", "star-unfold", "star-ind-left",
            "star-ind-right", "positivity", "fixed-point", "monotone-star", "product-star", "sliding",
            "denesting", "unrolling", "swap-star", "star-rewrite", "negation-reverse",
            "partition-transform", "complement", "double-negation", "effect-top"}
    assert need <= set(DB.names())
    assert set(DB.axioms_only().names()) == {"plus-zero", "unit", "annihilation", "distributive",
                                             "star-unfold", "star-ind-left", "star-ind-right"}


def test_denesting_step():
    cur = E("(m0 p m0 p + m0 p m1)*")
    out = check_step(DB, cur, step("(m0 p m0 p)* (m0 p m1 (m0 p m0 p)*)*", "denesting"))
    assert out == E("(m0 p m0 p)* (m0 p m1 (m0 p m0 p)*)*")


def test_hypothesis_in_context():
    hyp = parse_inequation("m1 m0 = 0")
    db = DB.extend([Rule("orth", "hypothesis", (hyp,), schematic=False)])
    out = check_step(db, E("(a m1 m0 b)*"), step("(a 0 b)*", "orth"))
    assert out == E("(a 0 b)*")


def test_idempotence_is_not_derivable():
    with pytest.raises(UnknownRule):
        check_step(DB, E("a + a"), step("a", "idempotence"))
    for rule in DB.names():
        for d in ("LR", "RL"):
            try:
                check_step(DB, E("a + a"), step("a", rule, d, relation=None))
            except ProofError:
                continue
            pytest.fail(f"{rule} {d} rewrote a + a into a")


def test_ambiguous_without_target():
    with pytest.raises(AmbiguousMatch):
        check_step(DB, E("1 a 1"), Step(None, "=", "unit", "LR"))
    # position pins it down
    out = check_step(DB, E("(1 a)* (a 1)*"), Step(None, "=", "unit", "LR", position=(0, 0)))
    assert out == E("a* (a 1)*")


def test_binding_and_position_in_scripts():
    text = """
alphabet: a b
lemma s: (a b)* a = a (b a)*
  (a b)* a
  a (b a)*   = by sliding LR with p=a, q=b
lemma u: (1 a)* = a*
  (1 a)*
  a*   = by unit LR at 0
"""
    assert check_script(text).accepted


def test_conditional_premises():
    hyp = parse_inequation("a b = b a")
    db = DB.extend([Rule("comm", "hypothesis", (hyp,), schematic=False)])
    ctx = Context(facts=[Fact("comm", hyp)], db=db)
    assert check_step(db, E("a* b"), step("b a*", "swap-star"), ctx=ctx) == E("b a*")
    with pytest.raises(UnprovenPremise):
        check_step(DB, E("a* b"), step("b a*", "swap-star"))


def test_le_step_needs_le_relation():
    out = check_step(DB, E("a + 0"), step("a + b", "positivity", relation="<="))
    assert out == E("a + b")
    text = """
alphabet: a b
lemma bad: a = a + b
  a
  a + b   = by positivity LR
"""
    assert not check_script(text).accepted


def test_mixed_chain_rejected():
    text = """
alphabet: a
lemma bad: a <= a
  a
  a + 0   = by plus-zero RL
  a   = by plus-zero LR
"""
    assert check_script(text).accepted
    assert not check_script(text.replace("a <= a", "a <= a a")).accepted


@pytest.mark.parametrize("name", corpus_names())
def test_corpus_accepted(name):
    rep = check_script(corpus_text(name))
    assert rep.accepted, rep.summary()
    assert not rep.warnings


def test_corpus_is_complete():
    names = set(corpus_names())
    assert {"loop_unroll.nka", "loop_boundary.nka", "qsp.nka", "merge_two_loops.nka",
            "laws_from_axioms.nka", "nf_base.nka", "nf_seq.nka", "nf_case.nka", "nf_while.nka"} <= names
    assert {f"pqhl_{r}.nka" for r in ("skip", "abort", "or", "seq", "if", "loop")} <= names


def test_deleting_a_hypothesis_rejects_at_the_citing_step():
    text = corpus_text("loop_unroll")
    lines = text.splitlines()
    cut = "\n".join(l for l in lines if not l.strip().startswith("orth:"))
    rep = check_script(cut)
    assert not rep.accepted
    bad = rep.first_failure
    assert "by orth" in cut.splitlines()[bad.line - 1]


def test_mutants_of_a_small_script_all_rejected():
    text = corpus_text("pqhl_if")
    killed = [not check_script(m).accepted for _, m in mutants(text)]
    assert killed and all(killed)


def test_script_errors():
    with pytest.raises(ScriptError):
        parse_script("alphabet: a\nlemma x a = a\n")
    with pytest.raises(ScriptError):
        parse_script("alphabet: a\nhypotheses:\n  h: a = a\n  h: a = a\n")
    with pytest.raises(ProofError):
        check_script("alphabet: a\nhypotheses:\n  unit: a = a\nlemma x: a = a\n  a\n")


def test_missing_justification_reported():
    rep = check_script("alphabet: a\nlemma x: a = a + 0\n  a\n  a + 0\n")
    assert not rep.accepted and "missing justification" in rep.first_failure.message


def test_report_json():
    rep = check_script(corpus_text("pqhl_skip"))
    js = rep.to_json()
    assert js["accepted"] and js["lemmas"][0]["accepted"]

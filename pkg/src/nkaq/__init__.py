"""Algebraic verification of quantum while-programs with non-idempotent Kleene algebra."""

from .syntax import (
    ACTION, EFFECT, ONE, ZERO, Alphabet, Atom, Expr, HornClause, Inequation, Neg,
    One, ParseError, Prod, Star, Sum, Symbol, UndeclaredSymbol, Zero, atom,
    canonical, mk_prod, mk_sum, parse_expr, parse_inequation, print_expr, substitute,
)
from .series import (
    INF, Counterexample, Distinguished, Equal, ExtNat, ImproperStar, Unsupported,
    WeightedAutomaton, bounded_equiv, coeff, exact_equiv, extnat_eval, glushkov_automaton,
    truncated_series,
)
from .quantum import Effect, DensityOperator, Measurement, Superoperator, choi_distance, loewner_leq
from .pathmodel import ExtOperatorSum, lift_apply, po_equiv, po_leq
from .programs import (
    EncoderSetting, NonConvergent, ProgramError, QProgram, VariableLayout, denote, encode,
    parse_program, print_program,
)
from .interpretation import (
    ConvergencePolicy, InterpretationSetting, check_completeness_claim, check_enc_recovery,
    dual_interpret, interpret,
)
from .proof import CheckReport, ProofError, check_script, parse_script
from .normal_form import NormalFormResult, normalize_program, verify_normal_form
from .hoare import HoareTriple, HoareVerdict, encode_triple, hoare_check, hoare_valid, pqhl_rule_check

__version__ = "0.1.0"

__all__ = [n for n in dir() if not n.startswith("_")]

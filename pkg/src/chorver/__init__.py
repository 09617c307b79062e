"""Choreographies with a Hoare logic: interpreter, wlp and verifier."""

from chorver.backends import BackendError, BoundedEnum, Refuted, SmtSolver, Valid, entailment_valid, theory_valid
from chorver.hoare import (DerivationTree, Verdict, check_adequacy, check_consistency,
                           check_derivation, reconstruct_derivation, verify, wlp)
from chorver.logic import formula_str, loc_subst, localise, satisfies
from chorver.parser import parse_formula, parse_program, parse_spec, parse_state
from chorver.semantics import Config, HeadOnly, FixedIndex, RandomFull, all_steps, explore, head_steps, run
from chorver.state import State, eval_expr

__all__ = [
    "BackendError", "BoundedEnum", "Config", "DerivationTree", "FixedIndex", "HeadOnly",
    "RandomFull", "Refuted", "SmtSolver", "State", "Valid", "Verdict", "all_steps",
    "check_adequacy", "check_consistency", "check_derivation", "entailment_valid", "eval_expr",
    "explore", "formula_str", "head_steps", "loc_subst", "localise", "parse_formula",
    "parse_program", "parse_spec", "parse_state", "reconstruct_derivation", "run",
    "satisfies", "theory_valid", "verify", "wlp",
]

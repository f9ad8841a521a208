"""Declarative pattern rules evaluated over function-scoped token windows.

Each rule binds a vulnerability class to a matcher: a named predicate with
parameters, evaluated independently per function. Rules live in a YAML file
so the shipped set can be extended or re-tuned without code changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import yaml

from solguard.core import Token, TokenKind, VulnerabilityClass
from solguard.errors import RulesetError
from solguard.static_analysis.structure import ContractView, FunctionSpan

_CONDITION_OPENERS = frozenset({"require", "if", "while"})
_ARITHMETIC_OPS = frozenset({"+", "-", "*", "+=", "-=", "*=", "++", "--"})
_ASSIGNMENT_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>="})


@dataclass(frozen=True)
class PatternRule:
    rule_id: str
    vuln_class: VulnerabilityClass
    matcher: dict[str, Any]
    description: str
    default_confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.default_confidence <= 1.0:
            raise RulesetError(f"rule {self.rule_id}: confidence outside [0, 1]")
        mtype = self.matcher.get("type")
        if mtype not in _MATCHERS:
            raise RulesetError(f"rule {self.rule_id}: unknown matcher type {mtype!r}")


@dataclass(frozen=True)
class Match:
    """Where a rule fired inside one function."""

    token_index: int  # index into the function's body tokens


def evaluate_rule(rule: PatternRule, fn: FunctionSpan, view: ContractView) -> Match | None:
    """Deterministically evaluate one rule against one function scope."""
    return _MATCHERS[rule.matcher["type"]](rule.matcher, fn, view)


# --- matcher predicates ----------------------------------------------------


def _condition_indices(body: tuple[Token, ...]) -> set[int]:
    """Token indices lying inside a require(...)/if(...)/while(...) group."""
    inside: set[int] = set()
    stack = [False]
    for idx, tok in enumerate(body):
        if tok.lexeme == ")" and len(stack) > 1:
            stack.pop()
        if stack[-1]:
            inside.add(idx)
        if tok.lexeme == "(":
            opener = body[idx - 1].lexeme if idx > 0 else ""
            stack.append(opener in _CONDITION_OPENERS or stack[-1])
    return inside


def _member_call_sites(body: tuple[Token, ...], members: frozenset[str]) -> list[int]:
    """Indices of member tokens in ``<expr>.member(`` / ``<expr>.member{`` form."""
    sites: list[int] = []
    for k in range(1, len(body) - 1):
        if (
            body[k - 1].lexeme == "."
            and body[k].kind is TokenKind.IDENT
            and body[k].lexeme in members
            and body[k + 1].lexeme in ("(", "{")
        ):
            sites.append(k)
    return sites


def _has_sender_guard(body: tuple[Token, ...]) -> bool:
    """A ``msg.sender ==`` (or ``== msg.sender``) comparison anywhere in the body."""
    for k in range(len(body) - 2):
        if body[k].lexeme == "msg" and body[k + 1].lexeme == "." and body[k + 2].lexeme == "sender":
            before = body[k - 1].lexeme if k > 0 else ""
            after = body[k + 3].lexeme if k + 3 < len(body) else ""
            if before == "==" or after == "==":
                return True
    return False


def _has_allowed_modifier(fn: FunctionSpan, allowed: list[str]) -> bool:
    return any(m in allowed for m in fn.modifiers)


def _statement_start(body: tuple[Token, ...], idx: int) -> int:
    for k in range(idx - 1, -1, -1):
        if body[k].lexeme in (";", "{", "}"):
            return k + 1
    return 0


def _match_external_call_before_state_write(
    spec: dict[str, Any], fn: FunctionSpan, view: ContractView
) -> Match | None:
    members = frozenset(spec.get("call_members", ["call", "send", "transfer"]))
    body = fn.body_tokens
    sites = _member_call_sites(body, members)
    if not sites:
        return None
    first_call = sites[0]
    for idx in range(first_call + 1, len(body)):
        tok = body[idx]
        is_assign = (tok.kind is TokenKind.PUNCT and tok.lexeme in _ASSIGNMENT_OPS) or tok.lexeme in ("++", "--")
        if not is_assign:
            continue
        stmt = body[_statement_start(body, idx) : idx]
        for t in stmt:
            if t.kind is TokenKind.IDENT:
                if t.lexeme in view.state_variables:
                    return Match(first_call)
                break
            if t.kind is TokenKind.KEYWORD or t.lexeme == "(":
                break
    return None


def _match_unguarded_state_mutator(
    spec: dict[str, Any], fn: FunctionSpan, view: ContractView
) -> Match | None:
    if fn.kind == "constructor":
        return None
    externally_callable = fn.visibility in ("public", "external") or fn.kind in ("fallback", "receive")
    if not externally_callable or not fn.mutates_state:
        return None
    if _has_allowed_modifier(fn, spec.get("allowed_modifiers", [])):
        return None
    if _has_sender_guard(fn.body_tokens):
        return None
    return Match(0)


def _match_unchecked_arithmetic(
    spec: dict[str, Any], fn: FunctionSpan, view: ContractView
) -> Match | None:
    major, minor = (int(p) for p in str(spec.get("flag_below", "0.8")).split("."))
    if not view.pragma_below(major, minor):
        return None
    if any(view.has_lexeme(marker) for marker in spec.get("guard_markers", ["SafeMath"])):
        return None
    for idx, tok in enumerate(fn.body_tokens):
        if tok.kind is TokenKind.PUNCT and tok.lexeme in _ARITHMETIC_OPS:
            return Match(idx)
    return None


def _match_token_sequence_in_condition(
    spec: dict[str, Any], fn: FunctionSpan, view: ContractView
) -> Match | None:
    body = fn.body_tokens
    inside = _condition_indices(body)
    for seq in spec["sequences"]:
        m = len(seq)
        for k in range(len(body) - m + 1):
            if all(body[k + o].lexeme == seq[o] for o in range(m)) and k in inside:
                return Match(k)
    return None


def _match_unchecked_call_result(
    spec: dict[str, Any], fn: FunctionSpan, view: ContractView
) -> Match | None:
    members = frozenset(spec.get("call_members", ["call", "delegatecall", "staticcall", "send"]))
    body = fn.body_tokens
    inside = _condition_indices(body)
    for k in _member_call_sites(body, members):
        if k in inside:
            continue  # checked inline, e.g. require(addr.send(x))
        start = _statement_start(body, k)
        stmt_before = body[start:k]
        if any(t.lexeme in _ASSIGNMENT_OPS and t.kind is TokenKind.PUNCT for t in stmt_before):
            continue  # return value captured
        if stmt_before and stmt_before[0].lexeme in ("require", "if", "return", "assert", "while"):
            continue
        return Match(k)
    return None


def _match_unguarded_token(spec: dict[str, Any], fn: FunctionSpan, view: ContractView) -> Match | None:
    if fn.kind == "constructor":
        return None
    wanted = spec["token"]
    for idx, tok in enumerate(fn.body_tokens):
        if tok.lexeme == wanted:
            if _has_allowed_modifier(fn, spec.get("allowed_modifiers", [])):
                return None
            if _has_sender_guard(fn.body_tokens):
                return None
            return Match(idx)
    return None


def _match_member_call_on_parameter(
    spec: dict[str, Any], fn: FunctionSpan, view: ContractView
) -> Match | None:
    member = spec["member"]
    body = fn.body_tokens
    for k in _member_call_sites(body, frozenset({member})):
        if k >= 2 and body[k - 2].kind is TokenKind.IDENT and body[k - 2].lexeme in fn.params:
            return Match(k)
    return None


_MATCHERS: dict[str, Callable[[dict[str, Any], FunctionSpan, ContractView], Match | None]] = {
    "external_call_before_state_write": _match_external_call_before_state_write,
    "unguarded_state_mutator": _match_unguarded_state_mutator,
    "unchecked_arithmetic": _match_unchecked_arithmetic,
    "token_sequence_in_condition": _match_token_sequence_in_condition,
    "unchecked_call_result": _match_unchecked_call_result,
    "unguarded_token": _match_unguarded_token,
    "member_call_on_parameter": _match_member_call_on_parameter,
}


# --- rule file I/O ----------------------------------------------------------


def load_ruleset(path: str | Path) -> list[PatternRule]:
    """Load rules from a YAML file; see data/rules.yaml for the shipped set."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_ruleset(fh.read())


def parse_ruleset(text: str) -> list[PatternRule]:
    try:
        records = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise RulesetError(f"rule file is not valid YAML: {exc}") from exc
    if not isinstance(records, list) or not records:
        raise RulesetError("rule file must contain a non-empty list of rules")
    rules: list[PatternRule] = []
    seen_ids: set[str] = set()
    seen_classes: set[str] = set()
    for rec in records:
        try:
            rule = PatternRule(
                rule_id=rec["rule_id"],
                vuln_class=VulnerabilityClass(name=rec["class"], swc_id=rec.get("swc_id")),
                matcher=rec["matcher"],
                description=rec.get("description", ""),
                default_confidence=float(rec["confidence"]),
            )
        except (KeyError, TypeError) as exc:
            raise RulesetError(f"malformed rule record {rec!r}: {exc}") from exc
        if rule.rule_id in seen_ids:
            raise RulesetError(f"duplicate rule_id {rule.rule_id!r}")
        if rule.vuln_class.name in seen_classes:
            raise RulesetError(f"duplicate vulnerability class {rule.vuln_class.name!r}")
        seen_ids.add(rule.rule_id)
        seen_classes.add(rule.vuln_class.name)
        rules.append(rule)
    return rules


def dump_ruleset(rules: list[PatternRule]) -> str:
    records = [
        {
            "rule_id": r.rule_id,
            "class": r.vuln_class.name,
            "swc_id": r.vuln_class.swc_id,
            "matcher": r.matcher,
            "description": r.description,
            "confidence": r.default_confidence,
        }
        for r in rules
    ]
    return yaml.safe_dump(records, sort_keys=False)


def save_ruleset(rules: list[PatternRule], path: str | Path) -> None:
    Path(path).write_text(dump_ruleset(rules), encoding="utf-8")


def default_ruleset() -> list[PatternRule]:
    """The rule set shipped as package data."""
    text = resources.files("solguard.data").joinpath("rules.yaml").read_text(encoding="utf-8")
    return parse_ruleset(text)

"""Contract loading and the static detection channel."""

from __future__ import annotations

from pathlib import Path

from solguard.core import (
    Channel,
    ChannelResult,
    Finding,
    Location,
    SourceContract,
    Span,
    Verdict,
    merge_findings,
    normalize_text,
)
from solguard.static_analysis.rules import PatternRule, evaluate_rule
from solguard.static_analysis.structure import build_view, parse_pragma
from solguard.static_analysis.tokenizer import tokenize_solidity


def load_source(contract_id: str, text: str) -> SourceContract:
    """Build a contract from raw text: LF-normalize, tokenize, read the pragma."""
    source = normalize_text(text)
    stream = tokenize_solidity(source)
    return SourceContract(
        id=contract_id,
        source=source,
        token_stream=stream.tokens,
        pragma_version=parse_pragma(stream.tokens),
    )


def load_file(path: str | Path, contract_id: str | None = None) -> SourceContract:
    p = Path(path)
    return load_source(contract_id or p.stem, p.read_text(encoding="utf-8"))


def evidence_line(source: str, byte_offset: int) -> str:
    """The trimmed source line containing ``byte_offset``."""
    data = source.encode("utf-8")
    start = data.rfind(b"\n", 0, byte_offset) + 1
    end = data.find(b"\n", byte_offset)
    end = len(data) if end == -1 else end
    return data[start:end].decode("utf-8", errors="replace").strip()[:160]


def scan(contract: SourceContract, ruleset: list[PatternRule]) -> list[Finding]:
    """Evaluate every rule over every function span; one finding per match.

    Results pass through :func:`merge_findings`, so duplicate (class,
    function) hits collapse to the highest-confidence instance.
    """
    if not ruleset:
        raise ValueError("ruleset must not be empty")
    view = build_view(contract.token_stream)
    findings: list[Finding] = []
    for fn in view.functions:
        for rule in ruleset:
            match = evaluate_rule(rule, fn, view)
            if match is None:
                continue
            tok = fn.body_tokens[match.token_index]
            findings.append(
                Finding(
                    contract_id=contract.id,
                    vuln_class=rule.vuln_class,
                    location=Location(span=fn.body_span, function=fn.name),
                    evidence=evidence_line(contract.source, tok.span.start),
                    channel=Channel.STATIC,
                    confidence=rule.default_confidence,
                )
            )
    return merge_findings([findings])


def static_channel(contract: SourceContract, ruleset: list[PatternRule]) -> ChannelResult:
    """Static analysis as a detection channel.

    Vulnerable iff any rule fired; the score is the strongest rule
    confidence among the findings (0 when clean).
    """
    findings = scan(contract, ruleset)
    score = max((f.confidence for f in findings), default=0.0)
    verdict = Verdict.VULNERABLE if findings else Verdict.SAFE
    return ChannelResult(channel=Channel.STATIC, verdict=verdict, score=score, findings=tuple(findings))

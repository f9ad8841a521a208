"""The repair chain: advise, assess, fix, verify."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

from solguard.core import (
    Channel,
    Finding,
    Location,
    Patch,
    RepairSuggestion,
    RiskLevel,
    SourceContract,
    Span,
    VerificationResult,
    VulnerabilityClass,
    byte_length,
    compare_risk,
)
from solguard.errors import ExtractionError, LexicalError, PipelineError
from solguard.llm.prompts import (
    ADVISOR_TEMPLATE,
    ASSESSOR_TEMPLATE,
    FIXER_TEMPLATE,
    NO_REFERENCES_NOTE,
    VERIFIER_TEMPLATE,
)
from solguard.llm.provider import Provider
from solguard.llm.structured import (
    ADVISOR_SCHEMA,
    ASSESSOR_SCHEMA,
    FIXER_SCHEMA,
    VERIFIER_SCHEMA,
)
from solguard.llm.template import render_prompt
from solguard.retrieval.kb import KbIndex, kb_search
from solguard.static_analysis.rules import PatternRule
from solguard.static_analysis.scanner import load_source, scan

from solguard.agents.detect import ask_structured

log = logging.getLogger(__name__)


def _reference_notes(kb_index: KbIndex | None, query: str, k: int) -> str:
    if kb_index is None:
        return NO_REFERENCES_NOTE
    chunks = kb_search(query, kb_index, k)
    if not chunks:
        return NO_REFERENCES_NOTE
    return "\n\n".join(f"[{c.doc_id}#{c.chunk_index}] {c.text}" for c in chunks)


def build_advisor_prompt(
    contract: SourceContract, finding: Finding, kb_index: KbIndex | None, k: int = 5
) -> str:
    notes = _reference_notes(kb_index, f"{finding.vuln_class.name} {finding.evidence}", k)
    return render_prompt(
        ADVISOR_TEMPLATE,
        {
            "vulnerability": finding.vuln_class.name,
            "function": finding.location.function or "(contract level)",
            "evidence": finding.evidence or "(none)",
            "reference_notes": notes,
            "code": contract.source,
        },
    )


def advise(
    contract: SourceContract,
    findings: list[Finding],
    kb_index: KbIndex | None,
    provider: Provider,
    k: int = 5,
) -> list[RepairSuggestion]:
    """One repair suggestion per finding, grounded in retrieved knowledge.

    A suggestion that cannot be extracted even after the repair retry is
    recorded as incomplete; the pipeline carries on.
    """
    if not findings:
        raise PipelineError(f"{contract.id}: advise requires at least one finding")
    suggestions: list[RepairSuggestion] = []
    for finding in findings:
        prompt = build_advisor_prompt(contract, finding, kb_index, k)
        try:
            record = ask_structured(provider, "advisor", prompt, ADVISOR_SCHEMA)
            suggestions.append(
                RepairSuggestion(
                    vulnerability_name=record["vulnerability_name"],
                    cause_analysis=record["cause_analysis"],
                    impact_assessment=record["impact_assessment"],
                    repair_steps=tuple(str(s) for s in record["repair_steps"]),
                    preventive_measures=tuple(str(s) for s in record["preventive_measures"]),
                    finding=finding,
                )
            )
        except ExtractionError as exc:
            log.warning("%s: advisor output unusable for %s: %s", contract.id, finding.vuln_class.name, exc)
            suggestions.append(
                RepairSuggestion(
                    vulnerability_name=finding.vuln_class.name,
                    cause_analysis="",
                    impact_assessment="",
                    repair_steps=(),
                    preventive_measures=(),
                    finding=finding,
                    complete=False,
                )
            )
    return suggestions


@dataclass(frozen=True)
class RiskAssignment:
    finding: Finding
    level: RiskLevel
    defaulted: bool = False  # model answer unusable; level fell back to High

    def to_payload(self) -> dict[str, Any]:
        return {
            "finding": self.finding.to_payload(),
            "level": self.level.value,
            "defaulted": self.defaulted,
        }


def build_assessor_prompt(
    contract: SourceContract,
    finding: Finding,
    suggestion: RepairSuggestion | None,
    kb_index: KbIndex | None,
    k: int = 5,
) -> str:
    summary = "(no suggestion available)"
    if suggestion is not None and suggestion.complete:
        summary = f"{suggestion.cause_analysis} Repair: {'; '.join(suggestion.repair_steps)}"
    notes = _reference_notes(kb_index, f"{finding.vuln_class.name} severity impact", k)
    return render_prompt(
        ASSESSOR_TEMPLATE,
        {
            "vulnerability": finding.vuln_class.name,
            "function": finding.location.function or "(contract level)",
            "evidence": finding.evidence or "(none)",
            "suggestion_summary": summary,
            "reference_notes": notes,
            "code": contract.source,
        },
    )


def assess(
    contract: SourceContract,
    findings: list[Finding],
    suggestions: list[RepairSuggestion],
    kb_index: KbIndex | None,
    provider: Provider,
    k: int = 5,
) -> tuple[list[RiskAssignment], dict[str, int]]:
    """Risk level per finding plus the count-per-level distribution.

    An unusable model answer falls back to High, flagged, erring toward
    caution rather than silence.
    """
    by_finding = {id(s.finding): s for s in suggestions}
    assignments: list[RiskAssignment] = []
    for finding in findings:
        prompt = build_assessor_prompt(contract, finding, by_finding.get(id(finding)), kb_index, k)
        level, defaulted = RiskLevel.HIGH, True
        try:
            record = ask_structured(provider, "assessor", prompt, ASSESSOR_SCHEMA)
            raw = str(record["level"]).strip().title()
            level, defaulted = RiskLevel(raw), False
        except (ExtractionError, ValueError) as exc:
            log.warning("%s: assessor output unusable for %s: %s", contract.id, finding.vuln_class.name, exc)
        assignments.append(RiskAssignment(finding=finding, level=level, defaulted=defaulted))
    distribution = {lvl.value: 0 for lvl in RiskLevel}
    for a in assignments:
        distribution[a.level.value] += 1
    return assignments, distribution


def prioritize(assignments: list[RiskAssignment]) -> list[RiskAssignment]:
    """Repair order: risk descending, then source location ascending."""
    return sorted(
        assignments,
        key=lambda a: (-a.level.severity, a.finding.location.span.start, a.finding.location.span.end),
    )


def build_fixer_prompt(
    contract: SourceContract,
    ordered: list[RiskAssignment],
    suggestions: list[RepairSuggestion],
) -> str:
    by_finding = {id(s.finding): s for s in suggestions}
    lines: list[str] = []
    for i, assignment in enumerate(ordered, start=1):
        finding = assignment.finding
        line = (
            f"{i}. [{assignment.level.value}] {finding.vuln_class.name} in "
            f"{finding.location.function or '(contract level)'}"
        )
        suggestion = by_finding.get(id(finding))
        if suggestion is not None and suggestion.complete:
            line += f": {'; '.join(suggestion.repair_steps)}"
        else:
            line += ": (no complete suggestion; repair from first principles)"
        lines.append(line)
    return render_prompt(
        FIXER_TEMPLATE, {"suggestions": "\n".join(lines), "code": contract.source}
    )


def fix(
    contract: SourceContract,
    suggestions: list[RepairSuggestion],
    assignments: list[RiskAssignment],
    provider: Provider,
) -> Patch:
    """Generate a patch; the repaired source must tokenize cleanly.

    An untokenizable answer earns one repair retry; a second failure raises
    :class:`PipelineError`.
    """
    if not suggestions:
        raise PipelineError(f"{contract.id}: fix requires at least one suggestion")
    ordered = prioritize(assignments)
    prompt = build_fixer_prompt(contract, ordered, suggestions)
    try:
        record = ask_structured(provider, "fixer", prompt, FIXER_SCHEMA)
    except ExtractionError as exc:
        raise PipelineError(f"{contract.id}: fixer output unusable: {exc}") from exc
    repaired = record["repaired_source"]
    try:
        load_source(f"{contract.id}.patched", repaired)
    except LexicalError:
        retry_prompt = (
            f"{prompt}\n\nThe repaired source you returned does not lex as Solidity. "
            "Return the complete corrected source."
        )
        try:
            record = ask_structured(provider, "fixer", retry_prompt, FIXER_SCHEMA)
        except ExtractionError as exc:
            raise PipelineError(f"{contract.id}: fixer output unusable: {exc}") from exc
        repaired = record["repaired_source"]
        try:
            load_source(f"{contract.id}.patched", repaired)
        except LexicalError as exc:
            raise PipelineError(f"{contract.id}: repaired source does not tokenize: {exc}") from exc
    return Patch(
        original=contract.id,
        repaired_source=repaired,
        addressed_findings=tuple(a.finding for a in ordered),
        rationale=record["rationale"],
    )


def build_verifier_prompt(contract: SourceContract, patch: Patch) -> str:
    findings_text = "\n".join(
        f"- {f.vuln_class.name} in {f.location.function or '(contract level)'}"
        for f in patch.addressed_findings
    )
    return render_prompt(
        VERIFIER_TEMPLATE,
        {
            "findings": findings_text,
            "code": contract.source,
            "patched_code": patch.repaired_source,
        },
    )


def verify(
    contract: SourceContract,
    patch: Patch,
    original_findings: list[Finding],
    ruleset: list[PatternRule],
    provider: Provider,
) -> VerificationResult:
    """Independent patch verification: model judgment plus a static re-scan.

    The patched source is re-scanned; static findings absent from the
    original finding set count as new issues, and an addressed finding that
    still fires blocks the pass regardless of the model's opinion.
    """
    prompt = build_verifier_prompt(contract, patch)
    try:
        record = ask_structured(provider, "verifier", prompt, VERIFIER_SCHEMA)
    except ExtractionError as exc:
        raise PipelineError(f"{contract.id}: verifier output unusable: {exc}") from exc
    model_passed = bool(record["passed"])

    patched = load_source(f"{contract.id}.patched", patch.repaired_source)
    rescan = scan(patched, ruleset)
    original_keys = {(f.vuln_class.name, f.location.function) for f in original_findings}
    rescan_keys = {(f.vuln_class.name, f.location.function) for f in rescan}
    new_from_rescan = tuple(
        f for f in rescan if (f.vuln_class.name, f.location.function) not in original_keys
    )
    still_present = {
        (f.vuln_class.name, f.location.function)
        for f in patch.addressed_findings
        if (f.vuln_class.name, f.location.function) in rescan_keys
    }

    whole = Location(span=Span(0, byte_length(patch.repaired_source)), function="")
    model_new = tuple(
        Finding(
            contract_id=contract.id,
            vuln_class=VulnerabilityClass(name=str(item.get("class", "Unspecified"))),
            location=Location(
                span=whole.span, function=str(item.get("function", ""))
            ),
            evidence=str(item.get("evidence", "")),
            channel=Channel.MODEL,
            confidence=0.5,
        )
        for item in record.get("new_issues", [])
        if isinstance(item, dict)
    )

    new_issues = new_from_rescan + model_new
    passed = model_passed and not new_issues and not still_present
    eliminated = tuple(
        f
        for f in patch.addressed_findings
        if (f.vuln_class.name, f.location.function) not in rescan_keys
    )
    return VerificationResult(
        passed=passed,
        eliminated=eliminated,
        new_issues=new_issues,
        verifier_model=f"{provider.config.kind}:{provider.config.model_id}",
    )

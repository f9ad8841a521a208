"""Detection metrics and the variant/ablation harness.

The positive class is "vulnerable" throughout; the false positive rate is
the fraction of safe contracts flagged vulnerable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from solguard.agents.config import FusionWeights, PipelineConfig
from solguard.agents.detect import fuse_channels, run_channels
from solguard.agents.pipeline import PipelineContext
from solguard.core import Channel
from solguard.errors import DatasetError, PipelineError, SolguardError
from solguard.static_analysis.scanner import load_source

log = logging.getLogger(__name__)

VARIANTS = ("weighted", "voting", "enriched", "no-static", "no-rag")

# Accepted spellings for --variants; table-style labels map onto the
# canonical channel-toggle names.
_VARIANT_ALIASES = {
    "weighted": "weighted",
    "w": "weighted",
    "voting": "voting",
    "v": "voting",
    "enriched": "enriched",
    "e": "enriched",
    "no-static": "no-static",
    "w/o static": "no-static",
    "wo static": "no-static",
    "without static": "no-static",
    "no-rag": "no-rag",
    "w/o rag": "no-rag",
    "wo rag": "no-rag",
    "without rag": "no-rag",
}


def normalize_variant(name: str) -> str:
    key = " ".join(name.strip().lower().split())
    if key not in _VARIANT_ALIASES:
        raise DatasetError(
            f"unknown variant {name!r}; valid names: {', '.join(VARIANTS)} "
            "(aliases: W, V, E, 'w/o Static', 'w/o RAG')"
        )
    return _VARIANT_ALIASES[key]


@dataclass(frozen=True)
class DatasetEntry:
    contract_id: str
    source: str
    label: str  # safe | vulnerable
    classes: tuple[str, ...] = ()
    split: str = ""


@dataclass(frozen=True)
class LabeledDataset:
    entries: tuple[DatasetEntry, ...]

    def subset(self, split: str | None) -> "LabeledDataset":
        if not split:
            return self
        return LabeledDataset(tuple(e for e in self.entries if e.split == split))


def load_dataset(path: str | Path) -> LabeledDataset:
    """Read a line-delimited dataset: {id, label, source|source_path, classes?, split?}."""
    p = Path(path)
    entries: list[DatasetEntry] = []
    seen: set[str] = set()
    try:
        lines = p.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {p}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            contract_id = rec["id"]
            label = rec["label"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetError(f"{p}:{lineno}: bad dataset record: {exc}") from exc
        if label not in ("safe", "vulnerable"):
            raise DatasetError(f"{p}:{lineno}: label must be safe|vulnerable, got {label!r}")
        if contract_id in seen:
            raise DatasetError(f"{p}:{lineno}: duplicate contract id {contract_id!r}")
        seen.add(contract_id)
        if "source" in rec:
            source = rec["source"]
        elif "source_path" in rec:
            source = (p.parent / rec["source_path"]).read_text(encoding="utf-8")
        else:
            raise DatasetError(f"{p}:{lineno}: record needs source or source_path")
        entries.append(
            DatasetEntry(
                contract_id=contract_id,
                source=source,
                label=label,
                classes=tuple(rec.get("classes", [])),
                split=rec.get("split", ""),
            )
        )
    if not entries:
        raise DatasetError(f"{p}: dataset is empty")
    return LabeledDataset(tuple(entries))


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(predictions: dict[str, str], gold: dict[str, str]) -> ConfusionMatrix:
    """Count tp/fp/fn/tn over predictions aligned with gold by contract id."""
    if set(predictions) != set(gold):
        missing = set(gold) ^ set(predictions)
        raise DatasetError(f"predictions and gold labels disagree on ids: {sorted(missing)[:5]}")
    tp = fp = fn = tn = 0
    for contract_id, predicted in predictions.items():
        actual = gold[contract_id]
        if predicted == "vulnerable" and actual == "vulnerable":
            tp += 1
        elif predicted == "vulnerable":
            fp += 1
        elif actual == "vulnerable":
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class MetricsReport:
    variant: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    fpr: float
    degenerate: tuple[str, ...] = ()  # metrics whose denominator was zero
    failures: int = 0
    evaluated: int = 0

    def to_payload(self) -> dict[str, Any]:
        return {
            "variant": self.variant,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fpr": self.fpr,
            "degenerate": list(self.degenerate),
            "failures": self.failures,
            "evaluated": self.evaluated,
        }


def metrics(cm: ConfusionMatrix, variant: str = "", failures: int = 0) -> MetricsReport:
    """Standard binary metrics; zero-denominator divisions yield 0, flagged."""
    degenerate: list[str] = []

    def ratio(name: str, numerator: float, denominator: float) -> float:
        if denominator == 0:
            degenerate.append(name)
            return 0.0
        return numerator / denominator

    accuracy = ratio("accuracy", cm.tp + cm.tn, cm.total)
    precision = ratio("precision", cm.tp, cm.tp + cm.fp)
    recall = ratio("recall", cm.tp, cm.tp + cm.fn)
    f1 = ratio("f1", 2 * precision * recall, precision + recall)
    fpr = ratio("fpr", cm.fp, cm.fp + cm.tn)
    return MetricsReport(
        variant=variant,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        fpr=fpr,
        degenerate=tuple(degenerate),
        failures=failures,
        evaluated=cm.total,
    )


def variant_settings(variant: str, config: PipelineConfig) -> tuple[str, FusionWeights, tuple[Channel, ...]]:
    """(detect mode, fusion weights, active channels) for one variant.

    Removing a channel renormalizes the remaining weights proportionally.
    """
    all_channels = (Channel.STATIC, Channel.RETRIEVAL, Channel.MODEL)
    if variant in ("weighted", "voting", "enriched"):
        return variant, config.weights, all_channels
    if variant == "no-static":
        return "weighted", config.weights.without("static"), (Channel.RETRIEVAL, Channel.MODEL)
    if variant == "no-rag":
        return "weighted", config.weights.without("retrieval"), (Channel.STATIC, Channel.MODEL)
    raise DatasetError(f"unknown variant {variant!r}")


def run_variants(
    dataset: LabeledDataset,
    variants: list[str],
    ctx: PipelineContext,
) -> list[MetricsReport]:
    """Evaluate each variant over the dataset with shared channel results.

    Channels run once per contract (twice when an enriched variant is
    requested, since enrichment changes the model prompt); fusion is then
    re-applied per variant, so ablations cannot disturb the surviving
    channels' raw scores. Contracts that fail any stage are excluded from
    every variant and counted.
    """
    names = [normalize_variant(v) for v in variants]
    if len(set(names)) != len(names):
        raise DatasetError(f"duplicate variants requested: {variants}")
    config = ctx.config
    need_enriched = "enriched" in names

    per_contract: dict[str, dict[str, Any]] = {}
    failures = 0
    for entry in dataset.entries:
        try:
            contract = load_source(entry.contract_id, entry.source)
            channels = run_channels(
                contract,
                ctx.ruleset,
                ctx.corpus_index,
                ctx.provider("detector"),
                ctx.retrieval_cfg,
                channel_threshold=config.channel_threshold,
                mode="weighted",
                kb_index=ctx.kb_index,
            )
            enriched_channels = None
            if need_enriched:
                enriched_channels = dict(channels)
                enriched_channels[Channel.MODEL] = run_channels(
                    contract,
                    ctx.ruleset,
                    ctx.corpus_index,
                    ctx.provider("detector"),
                    ctx.retrieval_cfg,
                    channel_threshold=config.channel_threshold,
                    mode="enriched",
                    kb_index=ctx.kb_index,
                )[Channel.MODEL]
            per_contract[entry.contract_id] = {
                "channels": channels,
                "enriched": enriched_channels,
                "label": entry.label,
            }
        except (SolguardError, PipelineError) as exc:
            failures += 1
            log.warning("evaluation: %s failed and is excluded: %s", entry.contract_id, exc)

    gold = {cid: info["label"] for cid, info in per_contract.items()}
    reports: list[MetricsReport] = []
    for name in names:
        mode, weights, active = variant_settings(name, config)
        predictions: dict[str, str] = {}
        for cid, info in per_contract.items():
            channels = info["enriched"] if name == "enriched" else info["channels"]
            subset = {ch: res for ch, res in channels.items() if ch in active}
            fused = fuse_channels(subset, mode, weights, config.threshold)
            predictions[cid] = fused.verdict.value
        reports.append(metrics(confusion(predictions, gold), variant=name, failures=failures))
    return reports


def format_table(reports: list[MetricsReport]) -> str:
    header = f"{'variant':<12} {'F1':>8} {'Recall':>8} {'Precision':>10} {'Accuracy':>9} {'FPR':>7}"
    rows = [header, "-" * len(header)]
    for r in reports:
        rows.append(
            f"{r.variant:<12} {r.f1:>8.4f} {r.recall:>8.4f} {r.precision:>10.4f} "
            f"{r.accuracy:>9.4f} {r.fpr:>7.4f}"
        )
    return "\n".join(rows)


def calibrate_threshold(scores: list[tuple[float, str]]) -> float:
    """Threshold over fused scores maximizing F1 on a validation split.

    Candidates are the distinct observed scores; a contract is predicted
    vulnerable when its score >= threshold. Ties break toward the larger
    threshold. Requires both labels present.
    """
    labels = {label for _, label in scores}
    if labels != {"safe", "vulnerable"}:
        raise DatasetError("calibration needs both safe and vulnerable examples")
    best_threshold = None
    best_f1 = -1.0
    for candidate in sorted({s for s, _ in scores}):
        tp = sum(1 for s, l in scores if s >= candidate and l == "vulnerable")
        fp = sum(1 for s, l in scores if s >= candidate and l == "safe")
        fn = sum(1 for s, l in scores if s < candidate and l == "vulnerable")
        denom = 2 * tp + fp + fn
        f1 = (2 * tp / denom) if denom else 0.0
        if f1 >= best_f1:
            best_f1 = f1
            best_threshold = candidate
    assert best_threshold is not None
    return best_threshold


def fused_scores(dataset: LabeledDataset, ctx: PipelineContext) -> list[tuple[float, str]]:
    """(weighted fused score, gold label) per contract, for calibration."""
    config = ctx.config
    out: list[tuple[float, str]] = []
    for entry in dataset.entries:
        contract = load_source(entry.contract_id, entry.source)
        channels = run_channels(
            contract,
            ctx.ruleset,
            ctx.corpus_index,
            ctx.provider("detector"),
            ctx.retrieval_cfg,
            channel_threshold=config.channel_threshold,
            kb_index=ctx.kb_index,
        )
        fused = fuse_channels(channels, "weighted", config.weights, config.threshold)
        out.append((fused.score, entry.label))
    return out

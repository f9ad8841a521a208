"""Command-line surface: audit, detect, kb, eval, calibrate.

Exit codes: 0 success, 1 processing errors (some contract failed), 2 usage
or configuration errors. A vulnerable verdict alone never fails the exit
code; gate CI with --fail-on-vulnerable instead.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import yaml

from solguard.agents.config import PipelineConfig, apply_overrides, load_config
from solguard.agents.detect import detect as run_detect
from solguard.agents.pipeline import build_context, run_pipeline
from solguard.core import Verdict
from solguard.errors import ConfigError, SolguardError
from solguard.evaluation import (
    calibrate_threshold,
    format_table,
    fused_scores,
    load_dataset,
    normalize_variant,
    run_variants,
)
from solguard.retrieval.kb import HashingEmbedder, build_kb_index, load_kb_documents
from solguard.retrieval.snapshot import CorpusSnapshotStore, KbSnapshotStore
from solguard.retrieval.tfidf import build_corpus_index, load_corpus_file
from solguard.static_analysis.scanner import load_file

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PROCESSING = 1
EXIT_USAGE = 2


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _load_config_or_exit(config_path: str, **overrides) -> PipelineConfig:
    try:
        config = load_config(config_path)
        return apply_overrides(config, **overrides)
    except ConfigError as exc:
        raise SystemExit(_usage_error(str(exc)))


def _usage_error(message: str) -> int:
    click.echo(f"error: {message}", err=True)
    return EXIT_USAGE


def _collect_contract_paths(paths: tuple[str, ...]) -> list[Path]:
    """Expand arguments: files stay, directories recurse over *.sol."""
    collected: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            collected.extend(sorted(p.rglob("*.sol")))
        else:
            collected.append(p)
    return collected


def _contract_ids(paths: list[Path]) -> list[str]:
    """Stable, unique output ids derived from file stems."""
    ids: list[str] = []
    used: set[str] = set()
    for p in paths:
        base = p.stem
        candidate = base
        suffix = 2
        while candidate in used:
            candidate = f"{base}_{suffix}"
            suffix += 1
        used.add(candidate)
        ids.append(candidate)
    return ids


def _parse_weights(raw: str | None) -> tuple[float, float, float] | None:
    if raw is None:
        return None
    parts = raw.split(",")
    if len(parts) != 3:
        raise SystemExit(_usage_error("--weights expects model,static,retrieval"))
    try:
        return tuple(float(x) for x in parts)  # type: ignore[return-value]
    except ValueError:
        raise SystemExit(_usage_error(f"--weights values must be numbers, got {raw!r}"))


@click.group()
@click.version_option(package_name="solguard")
def main() -> None:
    """Smart contract vulnerability management: detect, repair, verify, report."""


@main.command("audit")
@click.argument("paths", nargs=-1, type=click.Path())
@click.option("--config", "-c", "config_path", required=True, type=click.Path(), help="Pipeline configuration file.")
@click.option("--output-dir", "-o", default=None, type=click.Path(), help="Where reports and run records go.")
@click.option("--mode", type=click.Choice(["weighted", "voting", "enriched"]), default=None)
@click.option("--weights", default=None, help="Fusion weights as model,static,retrieval.")
@click.option("--threshold", type=float, default=None)
@click.option("--k", type=int, default=None, help="Neighbors for similarity retrieval.")
@click.option("--jobs", type=int, default=None, help="Parallel contracts (default: logical CPUs).")
@click.option("--fail-on-vulnerable", is_flag=True, help="Exit 1 when any contract is vulnerable.")
@click.option("-v", "--verbose", count=True)
def cmd_audit(paths, config_path, output_dir, mode, weights, threshold, k, jobs, fail_on_vulnerable, verbose):
    """Run the full pipeline over contracts and write reports."""
    _setup_logging(verbose)
    if not paths:
        raise SystemExit(_usage_error("no input files given"))
    config = _load_config_or_exit(
        config_path,
        mode=mode,
        weights=_parse_weights(weights),
        threshold=threshold,
        k=k,
        output_dir=output_dir,
    )
    try:
        ctx = build_context(config)
    except (ConfigError, SolguardError) as exc:
        raise SystemExit(_usage_error(str(exc)))

    files = _collect_contract_paths(paths)
    if not files:
        raise SystemExit(_usage_error("no .sol files found under the given paths"))
    ids = _contract_ids(files)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def process(item: tuple[str, Path]) -> tuple[str, object | None, str | None]:
        contract_id, path = item
        try:
            contract = load_file(path, contract_id)
            run = run_pipeline(contract, ctx)
            report_payload = {
                "sections": [{"title": s.title, "body": s.body} for s in run.report.sections],
                "machine_payload": run.report.machine_payload,
            }
            (out_dir / f"{contract_id}.report.md").write_text(
                run.report.to_markdown(), encoding="utf-8"
            )
            (out_dir / f"{contract_id}.report.json").write_text(
                json.dumps(report_payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
            )
            (out_dir / f"{contract_id}.run.json").write_text(
                json.dumps(run.to_payload(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
            )
            return contract_id, run, None
        except (SolguardError, OSError) as exc:
            log.error("%s: %s", path, exc)
            return contract_id, None, str(exc)

    max_workers = jobs or os.cpu_count() or 1
    if max_workers > 1 and len(files) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(process, zip(ids, files)))
    else:
        results = [process(item) for item in zip(ids, files)]

    failures = [r for r in results if r[2] is not None]
    runs = [run for _, run, error in results if error is None]
    vulnerable = [r for r in runs if r.fused.verdict is Verdict.VULNERABLE]
    patched = [r for r in runs if r.patch is not None]
    verified = [r for r in patched if r.verification is not None and r.verification.passed]
    for contract_id, run, error in results:
        if error is not None:
            click.echo(f"{contract_id}: error: {error}", err=True)
        else:
            click.echo(f"{contract_id}: {run.fused.verdict.value} (report written to {out_dir})")
    click.echo(
        f"processed {len(runs)}/{len(results)} contracts, {len(vulnerable)} vulnerable"
    )
    if patched:
        # both denominators: verified patches over patched contracts and over all processed
        click.echo(
            f"patch verification passed: {len(verified)}/{len(patched)} patched "
            f"({len(verified)}/{len(runs)} of all processed)"
        )
    if failures:
        sys.exit(EXIT_PROCESSING)
    if fail_on_vulnerable and vulnerable:
        sys.exit(EXIT_PROCESSING)
    sys.exit(EXIT_OK)


@main.command("detect")
@click.argument("paths", nargs=-1, type=click.Path())
@click.option("--config", "-c", "config_path", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["weighted", "voting", "enriched"]), default=None)
@click.option("--weights", default=None, help="Fusion weights as model,static,retrieval.")
@click.option("--threshold", type=float, default=None)
@click.option("--k", type=int, default=None)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.option("-v", "--verbose", count=True)
def cmd_detect(paths, config_path, mode, weights, threshold, k, as_json, verbose):
    """Detection only: verdict, fused score, and the per-channel breakdown."""
    _setup_logging(verbose)
    if not paths:
        raise SystemExit(_usage_error("no input files given"))
    config = _load_config_or_exit(
        config_path, mode=mode, weights=_parse_weights(weights), threshold=threshold, k=k
    )
    try:
        ctx = build_context(config, roles=("detector",))
    except (ConfigError, SolguardError) as exc:
        raise SystemExit(_usage_error(str(exc)))

    files = _collect_contract_paths(paths)
    if not files:
        raise SystemExit(_usage_error("no .sol files found under the given paths"))
    ids = _contract_ids(files)
    had_errors = False
    outputs: list[dict] = []
    for contract_id, path in zip(ids, files):
        try:
            contract = load_file(path, contract_id)
            fused = run_detect(
                contract,
                ctx.ruleset,
                ctx.corpus_index,
                ctx.provider("detector"),
                mode=config.mode,
                weights=config.weights,
                threshold=config.threshold,
                retrieval_cfg=ctx.retrieval_cfg,
                channel_threshold=config.channel_threshold,
                kb_index=ctx.kb_index,
            )
        except (SolguardError, OSError) as exc:
            had_errors = True
            click.echo(f"{contract_id}: error: {exc}", err=True)
            continue
        if as_json:
            outputs.append({"contract_id": contract_id, **fused.to_payload()})
        else:
            click.echo(f"{contract_id}: {fused.verdict.value} {fused.score:.2f} (mode {fused.mode})")
            for channel in fused.channel_results:
                click.echo(f"  {channel.channel.value:<10} {channel.verdict.value:<10} {channel.score:.2f}")
    if as_json:
        click.echo(json.dumps(outputs, indent=2, ensure_ascii=False))
    sys.exit(EXIT_PROCESSING if had_errors else EXIT_OK)


@main.group("kb")
def cmd_kb() -> None:
    """Build, update, and inspect the retrieval index snapshots."""


def _build_snapshots(corpus: str | None, docs: str | None, index_root: str) -> tuple[int | None, int | None]:
    corpus_version = kb_version = None
    if corpus:
        store = CorpusSnapshotStore(Path(index_root) / "corpus")
        index = build_corpus_index(load_corpus_file(corpus))
        corpus_version = store.publish(index)
    if docs:
        store_kb = KbSnapshotStore(Path(index_root) / "kb")
        index_kb = build_kb_index(load_kb_documents(docs), HashingEmbedder())
        kb_version = store_kb.publish(index_kb)
    return corpus_version, kb_version


@cmd_kb.command("build")
@click.option("--corpus", type=click.Path(), default=None, help="Labeled contract corpus (JSONL).")
@click.option("--docs", type=click.Path(), default=None, help="Knowledge document directory.")
@click.option("--index-root", required=True, type=click.Path())
@click.option("-v", "--verbose", count=True)
def cmd_kb_build(corpus, docs, index_root, verbose):
    """Create the first snapshot of the corpus and/or knowledge base."""
    _setup_logging(verbose)
    if not corpus and not docs:
        raise SystemExit(_usage_error("kb build needs --corpus and/or --docs"))
    existing = CorpusSnapshotStore(Path(index_root) / "corpus").current_version() or KbSnapshotStore(
        Path(index_root) / "kb"
    ).current_version()
    if existing:
        raise SystemExit(_usage_error(f"index under {index_root} already exists; use 'kb update'"))
    try:
        corpus_version, kb_version = _build_snapshots(corpus, docs, index_root)
    except SolguardError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PROCESSING)
    _echo_versions(corpus_version, kb_version)
    sys.exit(EXIT_OK)


@cmd_kb.command("update")
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--docs", type=click.Path(), default=None)
@click.option("--index-root", required=True, type=click.Path())
@click.option("-v", "--verbose", count=True)
def cmd_kb_update(corpus, docs, index_root, verbose):
    """Publish a new snapshot version and swap the pointer atomically.

    Audits already running keep the snapshot they loaded; a failed build
    leaves the pointer untouched.
    """
    _setup_logging(verbose)
    if not corpus and not docs:
        raise SystemExit(_usage_error("kb update needs --corpus and/or --docs"))
    try:
        corpus_version, kb_version = _build_snapshots(corpus, docs, index_root)
    except SolguardError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PROCESSING)
    _echo_versions(corpus_version, kb_version)
    sys.exit(EXIT_OK)


def _echo_versions(corpus_version: int | None, kb_version: int | None) -> None:
    if corpus_version is not None:
        click.echo(f"corpus: published version {corpus_version}")
    if kb_version is not None:
        click.echo(f"kb: published version {kb_version}")


@cmd_kb.command("status")
@click.option("--index-root", required=True, type=click.Path())
def cmd_kb_status(index_root):
    """Show the live snapshot versions and document counts."""
    corpus_store = CorpusSnapshotStore(Path(index_root) / "corpus")
    kb_store = KbSnapshotStore(Path(index_root) / "kb")
    corpus_version = corpus_store.current_version()
    if corpus_version is None:
        click.echo("corpus: no snapshot published")
    else:
        index = corpus_store.load()
        click.echo(f"corpus: version {corpus_version}, {len(index.documents)} documents")
    kb_version = kb_store.current_version()
    if kb_version is None:
        click.echo("kb: no snapshot published")
    else:
        kb_index = kb_store.load()
        docs = len({c.doc_id for c in kb_index.chunks})
        click.echo(f"kb: version {kb_version}, {docs} documents, {len(kb_index.chunks)} chunks")
    sys.exit(EXIT_OK)


@main.command("eval")
@click.argument("dataset_path", type=click.Path())
@click.option("--config", "-c", "config_path", required=True, type=click.Path())
@click.option("--variants", default="weighted", help="Comma-separated: weighted, voting, enriched, no-static, no-rag (aliases W, V, E, 'w/o Static', 'w/o RAG').")
@click.option("--split", default=None, help="Restrict to entries with this split tag.")
@click.option("--out", type=click.Path(), default=None, help="Structured results file (JSON).")
@click.option("-v", "--verbose", count=True)
def cmd_eval(dataset_path, config_path, variants, split, out, verbose):
    """Score detection variants against a labeled dataset."""
    _setup_logging(verbose)
    config = _load_config_or_exit(config_path)
    try:
        names = [normalize_variant(v) for v in variants.split(",") if v.strip()]
        dataset = load_dataset(dataset_path).subset(split)
        if not dataset.entries:
            raise SystemExit(_usage_error(f"no dataset entries for split {split!r}"))
        ctx = build_context(config, roles=("detector",))
        reports = run_variants(dataset, names, ctx)
    except SolguardError as exc:
        raise SystemExit(_usage_error(str(exc)))
    click.echo(format_table(reports))
    payload = {"dataset": str(dataset_path), "results": [r.to_payload() for r in reports]}
    out_path = Path(out) if out else Path(config.output_dir) / "eval_results.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    click.echo(f"results written to {out_path}")
    sys.exit(EXIT_OK)


@main.command("calibrate")
@click.argument("dataset_path", type=click.Path())
@click.option("--config", "-c", "config_path", required=True, type=click.Path())
@click.option("--split", default="validation", show_default=True)
@click.option("--write", is_flag=True, help="Write the chosen threshold back into the config file.")
@click.option("-v", "--verbose", count=True)
def cmd_calibrate(dataset_path, config_path, split, write, verbose):
    """Sweep fused scores on a validation split and pick the F1-best threshold."""
    _setup_logging(verbose)
    config = _load_config_or_exit(config_path)
    try:
        dataset = load_dataset(dataset_path).subset(split)
        if not dataset.entries:
            raise SystemExit(_usage_error(f"no dataset entries for split {split!r}"))
        ctx = build_context(config, roles=("detector",))
        threshold = calibrate_threshold(fused_scores(dataset, ctx))
    except SolguardError as exc:
        raise SystemExit(_usage_error(str(exc)))
    click.echo(f"calibrated threshold: {threshold}")
    if write:
        path = Path(config_path)
        payload = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        payload["threshold"] = threshold
        path.write_text(yaml.safe_dump(payload, sort_keys=False), encoding="utf-8")
        click.echo(f"threshold written to {path}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()

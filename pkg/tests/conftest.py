from __future__ import annotations

from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from solguard.retrieval.kb import HashingEmbedder, build_kb_index, load_kb_documents
from solguard.retrieval.snapshot import CorpusSnapshotStore, KbSnapshotStore
from solguard.retrieval.tfidf import build_corpus_index, load_corpus_file

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def built_index_root(tmp_path_factory) -> Path:
    """Corpus and KB snapshots built once from the shipped fixtures."""
    root = tmp_path_factory.mktemp("index")
    corpus = build_corpus_index(load_corpus_file(FIXTURES / "corpus.jsonl"))
    CorpusSnapshotStore(root / "corpus").publish(corpus)
    kb = build_kb_index(load_kb_documents(FIXTURES / "kb_docs"), HashingEmbedder())
    KbSnapshotStore(root / "kb").publish(kb)
    return root


def write_pipeline_config(
    path: Path,
    index_root: Path,
    output_dir: Path,
    transcript: Path,
    **overrides,
) -> Path:
    payload = {
        "mode": "weighted",
        "weights": {"model": 0.7, "static": 0.1, "retrieval": 0.2},
        "threshold": 0.5,
        "k": 5,
        "index_root": str(index_root),
        "output_dir": str(output_dir),
        "providers": {
            "detector": {"kind": "mock", "model_id": "detector-sim", "transcript": str(transcript)},
            "base": {"kind": "mock", "model_id": "base-sim", "transcript": str(transcript)},
            "verifier": {"kind": "mock", "model_id": "verifier-sim", "transcript": str(transcript)},
        },
    }
    payload.update(overrides)
    path.write_text(yaml.safe_dump(payload, sort_keys=False), encoding="utf-8")
    return path


@pytest.fixture
def presign_config(tmp_path, built_index_root) -> Path:
    """A ready-to-run pipeline config for the preSign fixture."""
    return write_pipeline_config(
        tmp_path / "config.yaml",
        index_root=built_index_root,
        output_dir=tmp_path / "out",
        transcript=FIXTURES / "presign_transcript.jsonl",
    )


@pytest.fixture(scope="session")
def eval_env(tmp_path_factory) -> dict[str, Path]:
    from eval_fixture import build_eval_fixture

    return build_eval_fixture(tmp_path_factory.mktemp("eval"))


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()

"""Guards that keep the recorded fixtures in sync with the code that
renders the prompts they answer."""

from __future__ import annotations

from pathlib import Path

import presign_fixture

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_shipped_transcript_matches_regeneration():
    """If this fails, prompt templates or fixture contracts changed; run
    tools/regen_fixtures.py to refresh the transcript."""
    shipped = (FIXTURES / "presign_transcript.jsonl").read_text(encoding="utf-8")
    regenerated, run = presign_fixture.build_transcript()
    assert regenerated == shipped
    assert run.verification is not None and run.verification.passed


def test_scripted_presign_pipeline_reaches_every_stage():
    _, run = presign_fixture.build_transcript()
    assert run.stages == ("detect", "advise", "assess", "fix", "verify", "report")

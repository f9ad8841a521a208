from __future__ import annotations

import json
from pathlib import Path

import pytest
import yaml

from solguard.agents.detect import FusedVerdict
from solguard.cli import main
from conftest import write_pipeline_config

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
TRANSCRIPT = FIXTURES / "presign_transcript.jsonl"


class TestAudit:
    def test_presign_audit_writes_report(self, runner, presign_config, tmp_path):
        result = runner.invoke(main, ["audit", str(FIXTURES / "presign.sol"), "-c", str(presign_config)])
        assert result.exit_code == 0, result.output
        report = (tmp_path / "out" / "presign.report.md").read_text(encoding="utf-8")
        assert "Unprotected Function" in report
        assert "## 7. Compliance Disclaimer" in report
        run_record = json.loads((tmp_path / "out" / "presign.run.json").read_text(encoding="utf-8"))
        assert run_record["verdict"]["verdict"] == "vulnerable"
        assert "vulnerable" in result.output

    def test_zero_input_files_is_usage_error(self, runner, presign_config):
        result = runner.invoke(main, ["audit", "-c", str(presign_config)])
        assert result.exit_code == 2

    def test_directory_input_recurses_over_sol_files(self, runner, built_index_root, tmp_path):
        contracts = tmp_path / "contracts" / "nested"
        contracts.mkdir(parents=True)
        (contracts / "one.sol").write_text(
            (FIXTURES / "safe.sol").read_text(encoding="utf-8"), encoding="utf-8"
        )
        (contracts.parent / "two.sol").write_text(
            (FIXTURES / "safe.sol").read_text(encoding="utf-8"), encoding="utf-8"
        )
        config = write_pipeline_config(
            tmp_path / "cfg.yaml",
            index_root=built_index_root,
            output_dir=tmp_path / "out",
            transcript=TRANSCRIPT,
        )
        result = runner.invoke(main, ["audit", str(tmp_path / "contracts"), "-c", str(config)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "one.report.md").exists()
        assert (tmp_path / "out" / "two.report.md").exists()

    def test_fail_on_vulnerable_flag(self, runner, presign_config):
        result = runner.invoke(
            main,
            ["audit", str(FIXTURES / "presign.sol"), "-c", str(presign_config), "--fail-on-vulnerable"],
        )
        assert result.exit_code == 1

    def test_unreadable_file_is_processing_error_but_continues(self, runner, presign_config, tmp_path):
        result = runner.invoke(
            main,
            ["audit", str(tmp_path / "ghost.sol"), str(FIXTURES / "presign.sol"), "-c", str(presign_config)],
        )
        assert result.exit_code == 1
        assert (tmp_path / "out" / "presign.report.md").exists()

    def test_missing_config_file_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(
            main, ["audit", str(FIXTURES / "presign.sol"), "-c", str(tmp_path / "none.yaml")]
        )
        assert result.exit_code == 2


class TestDetect:
    def test_safe_fixture_prints_three_channel_rows(self, runner, presign_config):
        result = runner.invoke(main, ["detect", str(FIXTURES / "safe.sol"), "-c", str(presign_config)])
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert lines[0].startswith("safe: safe 0.0")
        channel_lines = [l for l in lines[1:4]]
        assert [l.split()[0] for l in channel_lines] == ["static", "retrieval", "model"]

    def test_voting_mode_override(self, runner, presign_config):
        result = runner.invoke(
            main,
            ["detect", str(FIXTURES / "presign.sol"), "-c", str(presign_config), "--mode", "voting"],
        )
        assert result.exit_code == 0, result.output
        assert "presign: vulnerable" in result.output
        assert "(mode voting)" in result.output

    def test_json_output_round_trips_schema(self, runner, presign_config):
        result = runner.invoke(
            main, ["detect", str(FIXTURES / "presign.sol"), "-c", str(presign_config), "--json"]
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert len(payload) == 1
        record = dict(payload[0])
        record.pop("contract_id")
        fused = FusedVerdict.from_payload(record)
        assert fused.to_payload() == record
        assert fused.verdict.value == "vulnerable"

    def test_weights_override_validation(self, runner, presign_config):
        result = runner.invoke(
            main,
            ["detect", str(FIXTURES / "presign.sol"), "-c", str(presign_config), "--weights", "0.5,0.1,0.2"],
        )
        assert result.exit_code == 2
        assert "sum to 1" in result.output


class TestKb:
    def test_build_then_status_version_one(self, runner, tmp_path):
        index_root = tmp_path / "idx"
        result = runner.invoke(
            main,
            [
                "kb", "build",
                "--corpus", str(FIXTURES / "corpus.jsonl"),
                "--docs", str(FIXTURES / "kb_docs"),
                "--index-root", str(index_root),
            ],
        )
        assert result.exit_code == 0, result.output
        status = runner.invoke(main, ["kb", "status", "--index-root", str(index_root)])
        assert "corpus: version 1, 15 documents" in status.output
        assert "kb: version 1, 6 documents" in status.output

    def test_update_bumps_version(self, runner, tmp_path):
        index_root = tmp_path / "idx"
        runner.invoke(
            main,
            ["kb", "build", "--corpus", str(FIXTURES / "corpus.jsonl"), "--index-root", str(index_root)],
        )
        result = runner.invoke(
            main,
            ["kb", "update", "--corpus", str(FIXTURES / "corpus.jsonl"), "--index-root", str(index_root)],
        )
        assert result.exit_code == 0, result.output
        status = runner.invoke(main, ["kb", "status", "--index-root", str(index_root)])
        assert "corpus: version 2" in status.output

    def test_build_twice_is_usage_error(self, runner, tmp_path):
        index_root = tmp_path / "idx"
        args = ["kb", "build", "--corpus", str(FIXTURES / "corpus.jsonl"), "--index-root", str(index_root)]
        assert runner.invoke(main, args).exit_code == 0
        result = runner.invoke(main, args)
        assert result.exit_code == 2
        assert "kb update" in result.output

    def test_failed_update_leaves_pointer_untouched(self, runner, tmp_path):
        index_root = tmp_path / "idx"
        runner.invoke(
            main,
            ["kb", "build", "--docs", str(FIXTURES / "kb_docs"), "--index-root", str(index_root)],
        )
        bad_docs = tmp_path / "bad_docs"
        bad_docs.mkdir()
        (bad_docs / "broken.md").write_text("---\nsource: x\nno closing fence", encoding="utf-8")
        result = runner.invoke(
            main, ["kb", "update", "--docs", str(bad_docs), "--index-root", str(index_root)]
        )
        assert result.exit_code == 1
        status = runner.invoke(main, ["kb", "status", "--index-root", str(index_root)])
        assert "kb: version 1" in status.output

    def test_build_without_sources_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["kb", "build", "--index-root", str(tmp_path / "idx")])
        assert result.exit_code == 2


class TestEval:
    def test_all_variants_five_rows(self, runner, eval_env, tmp_path):
        out = tmp_path / "results.json"
        result = runner.invoke(
            main,
            [
                "eval", str(eval_env["dataset"]),
                "-c", str(eval_env["config"]),
                "--variants", "W,V,E,w/o Static,w/o RAG",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        table_rows = [
            l for l in result.output.splitlines()
            if l.split() and l.split()[0] in ("weighted", "voting", "enriched", "no-static", "no-rag")
        ]
        assert len(table_rows) == 5
        payload = json.loads(out.read_text(encoding="utf-8"))
        assert [r["variant"] for r in payload["results"]] == [
            "weighted", "voting", "enriched", "no-static", "no-rag",
        ]

    def test_unknown_variant_usage_error(self, runner, eval_env):
        result = runner.invoke(
            main,
            ["eval", str(eval_env["dataset"]), "-c", str(eval_env["config"]), "--variants", "Q"],
        )
        assert result.exit_code == 2
        assert "valid names" in result.output

    def test_repeated_invocation_identical_results_file(self, runner, eval_env, tmp_path):
        outputs = []
        for name in ("r1.json", "r2.json"):
            out = tmp_path / name
            result = runner.invoke(
                main,
                [
                    "eval", str(eval_env["dataset"]),
                    "-c", str(eval_env["config"]),
                    "--variants", "W,w/o Static",
                    "--out", str(out),
                ],
            )
            assert result.exit_code == 0, result.output
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_dataset_parse_error_nonzero_exit(self, runner, eval_env, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n", encoding="utf-8")
        result = runner.invoke(main, ["eval", str(bad), "-c", str(eval_env["config"])])
        assert result.exit_code == 2


class TestConfigValidationExitCodes:
    def _write_config(self, tmp_path, mutate) -> Path:
        payload = {
            "mode": "weighted",
            "weights": {"model": 0.7, "static": 0.1, "retrieval": 0.2},
            "threshold": 0.5,
            "k": 5,
            "index_root": str(tmp_path / "idx"),
            "output_dir": str(tmp_path / "out"),
            "providers": {
                "detector": {"kind": "mock", "model_id": "a", "transcript": str(TRANSCRIPT)},
                "base": {"kind": "mock", "model_id": "b", "transcript": str(TRANSCRIPT)},
                "fixer": {"kind": "mock", "model_id": "fix", "transcript": str(TRANSCRIPT)},
                "verifier": {"kind": "mock", "model_id": "ver", "transcript": str(TRANSCRIPT)},
            },
        }
        mutate(payload)
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump(payload), encoding="utf-8")
        return path

    def test_verifier_equal_fixer_rejected_exit_2(self, runner, tmp_path):
        def mutate(p):
            p["providers"]["verifier"]["model_id"] = "fix"

        config = self._write_config(tmp_path, mutate)
        result = runner.invoke(main, ["audit", str(FIXTURES / "presign.sol"), "-c", str(config)])
        assert result.exit_code == 2
        assert "different model" in result.output

    def test_weights_not_summing_rejected_exit_2(self, runner, tmp_path):
        def mutate(p):
            p["weights"] = {"model": 0.9, "static": 0.3, "retrieval": 0.2}

        config = self._write_config(tmp_path, mutate)
        result = runner.invoke(main, ["audit", str(FIXTURES / "presign.sol"), "-c", str(config)])
        assert result.exit_code == 2

    def test_zero_k_rejected_exit_2(self, runner, tmp_path):
        def mutate(p):
            p["k"] = 0

        config = self._write_config(tmp_path, mutate)
        result = runner.invoke(main, ["detect", str(FIXTURES / "presign.sol"), "-c", str(config)])
        assert result.exit_code == 2


class TestCalibrate:
    def test_prints_threshold_and_writes_back(self, runner, eval_env, tmp_path):
        config_copy = tmp_path / "config.yaml"
        config_copy.write_text(Path(eval_env["config"]).read_text(encoding="utf-8"), encoding="utf-8")
        result = runner.invoke(
            main, ["calibrate", str(eval_env["dataset"]), "-c", str(config_copy), "--write"]
        )
        assert result.exit_code == 0, result.output
        assert "calibrated threshold:" in result.output
        updated = yaml.safe_load(config_copy.read_text(encoding="utf-8"))
        printed = float(result.output.split("calibrated threshold:")[1].split()[0])
        assert updated["threshold"] == pytest.approx(printed)

    def test_missing_split_is_usage_error(self, runner, eval_env):
        result = runner.invoke(
            main,
            ["calibrate", str(eval_env["dataset"]), "-c", str(eval_env["config"]), "--split", "nope"],
        )
        assert result.exit_code == 2


class TestHelp:
    @pytest.mark.parametrize(
        "args",
        [["--help"], ["audit", "--help"], ["detect", "--help"], ["kb", "--help"], ["eval", "--help"], ["calibrate", "--help"]],
    )
    def test_every_command_supports_help(self, runner, args):
        result = runner.invoke(main, args)
        assert result.exit_code == 0
        assert "Usage" in result.output


def test_audit_sequential_jobs_one(runner, presign_config, tmp_path):
    result = runner.invoke(
        main,
        [
            "audit", str(FIXTURES / "presign.sol"), str(FIXTURES / "safe.sol"),
            "-c", str(presign_config), "--jobs", "1",
        ],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "presign.report.md").exists()
    assert (tmp_path / "out" / "safe.report.md").exists()
    assert "patch verification passed: 1/1 patched (1/2 of all processed)" in result.output

"""End-to-end command-line behavior against the local fixture server."""

import json
import subprocess
import sys

import pytest
import requests

from tessy.cli import main
from tessy.core import EndpointProfile, SynthesisConfig
from tessy.dataset_io import read_records

pytestmark = pytest.mark.usefixtures("procedural_server")


def write_config(path, base_url, *, teacher_model="mock-teacher", **overrides):
    config = SynthesisConfig(
        student=EndpointProfile(base_url=base_url, model_name="mock-student",
                                prompt_template="{context}",
                                vocab_family="fam-s"),
        teacher=EndpointProfile(base_url=base_url, model_name=teacher_model,
                                prompt_template="{context}",
                                vocab_family="fam-t"),
        think_budget_chars=600,
        answer_budget_chars=300,
        **overrides,
    )
    path.write_text(json.dumps(config.to_canonical_dict()), encoding="utf-8")
    return path


def write_prompts(path, count=4):
    lines = [json.dumps({"id": f"p{i}", "question": f"What is {i} plus {i}?"})
             for i in range(count)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def workspace(tmp_path, procedural_server):
    config = write_config(tmp_path / "config.json", procedural_server.base_url)
    prompts = write_prompts(tmp_path / "prompts.jsonl")
    return tmp_path, config, prompts


def synthesize(workspace, out_name="records.jsonl", *extra):
    tmp_path, config, prompts = workspace
    out = tmp_path / out_name
    rc = main(["synthesize", "--strategy", "tessy", "--config", str(config),
               "--prompts", str(prompts), "--out", str(out), *extra])
    return rc, out


class TestSynthesize:
    def test_happy_path(self, workspace, capsys):
        rc, out = synthesize(workspace)
        assert rc == 0
        records = read_records(out)
        assert [r.id for r in records] == ["p0", "p1", "p2", "p3"]
        assert "wrote 4 records" in capsys.readouterr().out

    def test_limit(self, workspace):
        rc, out = synthesize(workspace, "limited.jsonl", "--limit", "2")
        assert rc == 0
        assert len(read_records(out)) == 2

    def test_deterministic_across_runs_and_parallelism(self, workspace):
        _, first = synthesize(workspace, "a.jsonl")
        _, second = synthesize(workspace, "b.jsonl")
        _, third = synthesize(workspace, "c.jsonl", "--parallelism", "8")
        assert first.read_bytes() == second.read_bytes() == third.read_bytes()

    def test_set_overrides_config(self, workspace):
        rc, out = synthesize(workspace, "marked.jsonl",
                             "--set", 'end_of_think_marker="##"',
                             "--set", "think_budget_chars=200")
        assert rc == 0
        records = read_records(out)
        assert records[0].meta["end_of_think_marker"] == "##"
        _, plain = synthesize(workspace, "plain.jsonl")
        assert records[0].config_fingerprint != \
            read_records(plain)[0].config_fingerprint

    def test_bad_set_pair_is_runtime_error(self, workspace, capsys):
        rc, _ = synthesize(workspace, "x.jsonl", "--set", "justakey")
        assert rc == 1
        assert "KEY=VALUE" in capsys.readouterr().err

    def test_invalid_config_value_is_runtime_error(self, workspace, capsys):
        rc, _ = synthesize(workspace, "x.jsonl", "--set", "k_max_tokens=0")
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_strategy_is_usage_error(self, workspace):
        tmp_path, config, prompts = workspace
        with pytest.raises(SystemExit) as info:
            main(["synthesize", "--strategy", "improv", "--config", str(config),
                  "--prompts", str(prompts), "--out", str(tmp_path / "x.jsonl")])
        assert info.value.code == 2

    def test_missing_required_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["synthesize", "--strategy", "tessy"])
        assert info.value.code == 2

    def test_failed_prompts_reported_and_rc_one(self, tmp_path, procedural_server,
                                                capsys):
        config = write_config(tmp_path / "config.json",
                              procedural_server.base_url,
                              teacher_model="ghost-model")
        prompts = write_prompts(tmp_path / "prompts.jsonl", count=2)
        out = tmp_path / "records.jsonl"
        rc = main(["synthesize", "--strategy", "teacher-only",
                   "--config", str(config), "--prompts", str(prompts),
                   "--out", str(out)])
        assert rc == 1
        captured = capsys.readouterr()
        assert "p0 failed" in captured.err and "p1 failed" in captured.err
        assert "2 prompts failed" in captured.out
        assert out.read_text(encoding="utf-8") == ""

    def test_missing_config_is_runtime_error(self, workspace, monkeypatch, capsys):
        tmp_path, _, prompts = workspace
        monkeypatch.delenv("TESSY_CONFIG", raising=False)
        rc = main(["synthesize", "--strategy", "tessy", "--prompts", str(prompts),
                   "--out", str(tmp_path / "x.jsonl")])
        assert rc == 1
        assert "TESSY_CONFIG" in capsys.readouterr().err


class TestValidateExport:
    def test_validate_ok(self, workspace, capsys):
        _, out = synthesize(workspace)
        assert main(["validate", "--records", str(out)]) == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_reports_problems(self, workspace, capsys):
        tmp_path, _, _ = workspace
        _, out = synthesize(workspace)
        lines = out.read_text(encoding="utf-8").splitlines()
        data = json.loads(lines[0])
        data["spans"][0]["origin"] = "teacher"
        bad = tmp_path / "bad.jsonl"
        bad.write_text("\n".join([json.dumps(data), "{oops"] + lines[1:]) + "\n",
                       encoding="utf-8")
        assert main(["validate", "--records", str(bad)]) == 1
        captured = capsys.readouterr()
        assert "line 1" in captured.err and "line 2" in captured.err
        assert "problems" in captured.out

    def test_validate_missing_file_rc_one(self, tmp_path, capsys):
        assert main(["validate", "--records", str(tmp_path / "ghost.jsonl")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_export(self, workspace, capsys):
        tmp_path, _, _ = workspace
        _, records_path = synthesize(workspace)
        out = tmp_path / "sft.jsonl"
        assert main(["export", "--records", str(records_path),
                     "--out", str(out)]) == 0
        rows = [json.loads(line) for line in
                out.read_text(encoding="utf-8").splitlines()]
        assert len(rows) == 4
        for row in rows:
            assert set(row) == {"prompt", "response"}
            assert "</think>" in row["response"]
            assert row["response"].startswith("<think>")


class TestAnalyze:
    def run_analyze(self, tmp_path, record_paths, *extra):
        report_dir = tmp_path / "report"
        rc = main(["analyze", "--records", ",".join(str(p) for p in record_paths),
                   "--report", str(report_dir), *extra])
        return rc, report_dir

    def test_single_corpus_report(self, workspace, capsys):
        tmp_path, _, _ = workspace
        _, records_path = synthesize(workspace)
        rc, report_dir = self.run_analyze(tmp_path, [records_path])
        assert rc == 0
        names = {p.name for p in report_dir.iterdir()}
        assert names == {"report.json", "length_stats.csv",
                         "word_frequencies.csv", "pca.svg"}
        report = json.loads((report_dir / "report.json").read_text("utf-8"))
        assert "tokenizer_note" in report
        corpus = report["corpora"]["records"]
        assert corpus["records"] == 4
        ratio = corpus["origin_ratio_chars"]
        assert ratio["teacher_fraction"] + ratio["student_fraction"] == \
            pytest.approx(1.0)
        assert report["mean_pairwise_similarity"] is None
        assert len(report["pca_explained_variance"]) == 2
        csv = (report_dir / "length_stats.csv").read_text("utf-8")
        assert csv.startswith("label,count,mean,median,p25,p75,p95,min,max\n")

    def test_two_corpora_pairwise_similarity(self, workspace):
        tmp_path, config, prompts = workspace
        _, first = synthesize(workspace, "alpha.jsonl")
        out = tmp_path / "beta.jsonl"
        rc = main(["synthesize", "--strategy", "teacher-only", "--config",
                   str(config), "--prompts", str(prompts), "--out", str(out)])
        assert rc == 0
        rc, report_dir = self.run_analyze(tmp_path, [first, out])
        assert rc == 0
        report = json.loads((report_dir / "report.json").read_text("utf-8"))
        similarity = report["mean_pairwise_similarity"]
        assert similarity is not None and -1.0 <= similarity <= 1.0
        assert set(report["corpora"]) == {"alpha", "beta"}

    def test_label_collision_rejected(self, workspace, capsys):
        tmp_path, _, _ = workspace
        _, records_path = synthesize(workspace)
        rc, _ = self.run_analyze(tmp_path, [records_path, records_path])
        assert rc == 1
        assert "collide" in capsys.readouterr().err

    def test_external_tokenizer(self, workspace):
        tmp_path, _, _ = workspace
        _, records_path = synthesize(workspace)
        script = tmp_path / "tok.py"
        script.write_text(
            "import sys\n"
            "for word in sys.stdin.read().lower().split():\n"
            "    print(word.strip('.,?!'))\n",
            encoding="utf-8")
        rc, report_dir = self.run_analyze(
            tmp_path, [records_path],
            "--tokenizer", f"external:{sys.executable} {script}")
        assert rc == 0
        assert (report_dir / "word_frequencies.csv").exists()

    def test_unknown_tokenizer_spec(self, workspace, capsys):
        tmp_path, _, _ = workspace
        _, records_path = synthesize(workspace)
        rc, _ = self.run_analyze(tmp_path, [records_path],
                                 "--tokenizer", "bert")
        assert rc == 1
        assert "unknown tokenizer" in capsys.readouterr().err


class TestAnnotate:
    def test_corpus_build_over_http(self, workspace, capsys):
        tmp_path, config, _ = workspace
        _, records_path = synthesize(workspace)
        out = tmp_path / "corpus.jsonl"
        rc = main(["annotate", "--config", str(config),
                   "--records", str(records_path), "--out", str(out),
                   "--samples", "12", "--min-chars", "20", "--max-chars", "80",
                   "--seed", "3"])
        assert rc == 0
        assert "wrote 12 of 12" in capsys.readouterr().out
        rows = [json.loads(line) for line in
                out.read_text(encoding="utf-8").splitlines()]
        assert len(rows) == 12
        for row in rows:
            assert set(row) == {"text", "style_spans", "source"}
            assert row["source"] in ("student", "teacher")
            for start, end in row["style_spans"]:
                assert 0 <= start < end <= len(row["text"])

    def test_source_filter(self, workspace):
        tmp_path, config, _ = workspace
        _, records_path = synthesize(workspace)
        out = tmp_path / "corpus.jsonl"
        rc = main(["annotate", "--config", str(config),
                   "--records", str(records_path), "--out", str(out),
                   "--samples", "6", "--min-chars", "20", "--max-chars", "60",
                   "--source", "teacher"])
        assert rc == 0
        rows = [json.loads(line) for line in
                out.read_text(encoding="utf-8").splitlines()]
        assert {row["source"] for row in rows} == {"teacher"}


def test_mock_serve_subprocess():
    proc = subprocess.Popen(
        [sys.executable, "-u", "-m", "tessy.cli", "mock-serve", "--seed", "2"],
        stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True)
    try:
        line = proc.stdout.readline().strip()
        assert line.startswith("listening on http://")
        base_url = line.split()[-1]
        health = requests.get(base_url + "/healthz", timeout=5)
        assert health.json() == {"status": "ok"}
        completion = requests.post(
            base_url + "/v1/completions",
            json={"model": "mock-student", "prompt": "hi"}, timeout=5)
        assert completion.status_code == 200
    finally:
        proc.terminate()
        proc.wait(timeout=10)

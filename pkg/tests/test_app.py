import io
import json

import pandas as pd
import pytest

from app import EXIT_OK, EXIT_RUNTIME, EXIT_TAMPERED, EXIT_USAGE, main
from text_model import word_count


@pytest.fixture
def document(tmp_path, sample_text):
    path = tmp_path / "doc.txt"
    path.write_text(sample_text, encoding="utf-8")
    return path


def run(capsys, *argv):
    code = main([str(arg) for arg in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def embed(capsys, document, registry, author="alice", *extra):
    code, out, _ = run(capsys, "embed", "--input", document, "--author", author, "--registry", registry, *extra)
    assert code == EXIT_OK
    return json.loads(out)


def test_keyword_listing(capsys, document):
    code, out, _ = run(capsys, "keyword", "--input", document)
    assert code == EXIT_OK
    assert out.splitlines()[:2] == ["is 2", "this 2"]
    assert out.splitlines()[2:] == ["a 1", "and 1", "fun 1", "test 1"]


def test_keyword_top(capsys, document):
    code, out, _ = run(capsys, "keyword", "--input", document, "--top", 1)
    assert code == EXIT_OK
    assert out == "is 2\n"


def test_keyword_empty_file(capsys, tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    code, out, _ = run(capsys, "keyword", "--input", empty)
    assert code == EXIT_OK
    assert out == ""


def test_keyword_missing_file(capsys, tmp_path):
    code, out, err = run(capsys, "keyword", "--input", tmp_path / "missing.txt")
    assert code == EXIT_RUNTIME
    assert out == ""
    assert json.loads(err)["error"] == "CommandError"


def test_keyword_from_stdin(capsys, monkeypatch, sample_text):
    monkeypatch.setattr("sys.stdin", io.TextIOWrapper(io.BytesIO(sample_text.encode("utf-8"))))
    code, out, _ = run(capsys, "keyword", "--input", "-", "--top", 2)
    assert code == EXIT_OK
    assert out == "is 2\nthis 2\n"


def test_embed(capsys, document, registry_path):
    record = embed(capsys, document, registry_path, "alice", "--keyword", "is")
    assert record["watermark"]["pairs"] == [[4, 1], [4, 3]]
    assert record["author"] == "alice"
    assert registry_path.exists()


def test_embed_twice(capsys, document, registry_path):
    first = embed(capsys, document, registry_path)
    second = embed(capsys, document, registry_path)
    assert first["id"] != second["id"]
    assert first["text_digest"] == second["text_digest"]


def test_embed_absent_keyword(capsys, document, registry_path):
    code, out, err = run(
        capsys, "embed", "--input", document, "--author", "alice", "--registry", registry_path, "--keyword", "zebra"
    )
    assert code == EXIT_RUNTIME
    assert out == ""
    assert json.loads(err)["error"] == "ExplicitKeywordAbsent"


def test_embed_keyword_without_letters(capsys, document, registry_path):
    code, out, err = run(
        capsys, "embed", "--input", document, "--author", "alice", "--registry", registry_path, "--keyword=--"
    )
    assert code == EXIT_RUNTIME
    assert out == ""
    assert json.loads(err)["error"] == "InvalidKeyword"
    assert not registry_path.exists()


def test_embed_below_min_count(capsys, document, registry_path):
    code, _, err = run(
        capsys, "embed", "--input", document, "--author", "alice", "--registry", registry_path, "--min-count", 3
    )
    assert code == EXIT_RUNTIME
    assert json.loads(err)["error"] == "BelowMinCount"


def test_embed_archives_document(capsys, document, registry_path, tmp_path, sample_text):
    archive = tmp_path / "archive"
    record = embed(capsys, document, registry_path, "alice", "--archive", archive)
    digest = record["text_digest"].split(":", 1)[1]
    assert (archive / f"{digest}.txt").read_text(encoding="utf-8") == sample_text


def test_verify_original(capsys, document, registry_path):
    record = embed(capsys, document, registry_path)
    code, out, _ = run(capsys, "verify", "--input", document, "--registry", registry_path, "--record-id", record["id"])
    assert code == EXIT_OK
    verdict = json.loads(out)
    assert verdict == {"tampered": False, "war": 1.0, "wdr": 0.0, "kw_count_original": 2, "kw_count_observed": 2}


def test_verify_tampered(capsys, document, registry_path, tmp_path):
    record = embed(capsys, document, registry_path)
    attacked = tmp_path / "attacked.txt"
    attacked.write_text("this was a test and this is fun", encoding="utf-8")
    code, out, _ = run(capsys, "verify", "--input", attacked, "--registry", registry_path, "--record-id", record["id"])
    assert code == EXIT_TAMPERED
    verdict = json.loads(out)
    assert verdict["tampered"] is True
    assert verdict["war"] < 1.0


def test_verify_lcs_mode(capsys, document, registry_path, tmp_path):
    record = embed(capsys, document, registry_path)
    attacked = tmp_path / "attacked.txt"
    attacked.write_text("this was a test and this is fun", encoding="utf-8")
    code, out, _ = run(
        capsys, "verify", "--input", attacked, "--registry", registry_path,
        "--record-id", record["id"], "--mode", "lcs_symbol",
    )
    assert code == EXIT_TAMPERED
    assert json.loads(out)["war"] == 0.5


def test_verify_unknown_record(capsys, document, registry_path):
    code, _, err = run(capsys, "verify", "--input", document, "--registry", registry_path, "--record-id", "nope")
    assert code == EXIT_RUNTIME
    assert json.loads(err)["error"] == "RecordNotFound"


def test_verify_with_supplied_watermark(capsys, document, registry_path):
    code, out, _ = run(
        capsys, "verify", "--input", document, "--registry", registry_path,
        "--keyword", "is", "--watermark", "[[4, 1], [4, 3]]",
    )
    assert code == EXIT_OK
    assert json.loads(out)["tampered"] is False


def test_verify_malformed_watermark(capsys, document, registry_path):
    code, _, err = run(
        capsys, "verify", "--input", document, "--registry", registry_path, "--keyword", "is", "--watermark", "[[4,"
    )
    assert code == EXIT_RUNTIME
    assert json.loads(err)["error"] == "MalformedWatermark"


def test_verify_needs_a_reference(capsys, document, registry_path):
    code, _, _ = run(capsys, "verify", "--input", document, "--registry", registry_path)
    assert code == EXIT_USAGE


def test_attack_to_file(capsys, document, tmp_path):
    output = tmp_path / "attacked.txt"
    code, out, _ = run(capsys, "attack", "--input", document, "--insert", 0.25, "--seed", 7, "--output", output)
    assert code == EXIT_OK
    assert word_count(output.read_text(encoding="utf-8")) == 10
    report = json.loads(out)
    assert report["inserted"] == 2
    assert report["wc_after"] == 10


def test_attack_to_stdout(capsys, document):
    code, out, err = run(capsys, "attack", "--input", document, "--preset", "moderate", "--seed", 1)
    assert code == EXIT_OK
    report = json.loads(err)
    assert word_count(out) == report["wc_after"] == 8 + 2 - 2


def test_attack_report_file(capsys, document, tmp_path):
    report_path = tmp_path / "report.json"
    code, out, _ = run(capsys, "attack", "--input", document, "--reorder", 0.5, "--report", report_path)
    assert code == EXIT_OK
    assert json.loads(report_path.read_text())["transpositions"] == 2
    assert word_count(out) == 8


def test_attack_bad_ratio(capsys, document):
    code, _, err = run(capsys, "attack", "--input", document, "--delete", 2)
    assert code == EXIT_RUNTIME
    assert json.loads(err)["error"] == "InvalidAttackSpec"


def test_attack_unknown_flag(capsys, document):
    code, _, _ = run(capsys, "attack", "--input", document, "--shuffle", 1)
    assert code == EXIT_USAGE


def test_corpus_and_evaluate(capsys, tmp_path):
    out_dir = tmp_path / "corpus"
    code, out, _ = run(capsys, "corpus", "--out-dir", out_dir, "--seeds", 1)
    assert code == EXIT_OK
    config_path = out.strip()
    assert len(list((out_dir / "samples").glob("*.txt"))) == 10

    results = tmp_path / "results.csv"
    chart_dir = tmp_path / "charts"
    summary = tmp_path / "summary.csv"
    code, _, _ = run(
        capsys, "evaluate", "--config", config_path, "--output", results,
        "--chart-dir", chart_dir, "--summary", summary, "--workers", 2,
    )
    assert code == EXIT_OK
    frame = pd.read_csv(results)
    assert len(frame) == 30
    assert sorted(p.name for p in chart_dir.iterdir()) == ["wdr_and.csv", "wdr_in.csv", "wdr_of.csv"]
    assert len(pd.read_csv(summary)) == 3


def test_evaluate_bad_config(capsys, tmp_path):
    config = tmp_path / "suite.json"
    config.write_text("{}")
    code, _, err = run(capsys, "evaluate", "--config", config)
    assert code == EXIT_RUNTIME
    assert json.loads(err)["error"] == "InvalidSuiteConfig"


def test_corpus_emulate(capsys):
    code, out, _ = run(capsys, "corpus", "--emulate")
    assert code == EXIT_OK
    rows = json.loads(out)
    assert len(rows) == 10
    assert all(abs(row["deviation"]) <= 0.01 for row in rows)


def test_owner(capsys, document, registry_path):
    alice = embed(capsys, document, registry_path, "alice")
    embed(capsys, document, registry_path, "bob")
    code, out, _ = run(capsys, "owner", "--input", document, "--registry", registry_path)
    assert code == EXIT_OK
    assert json.loads(out)["id"] == alice["id"]

    code, out, _ = run(capsys, "owner", "--digest", alice["text_digest"], "--registry", registry_path)
    assert code == EXIT_OK
    assert json.loads(out)["author"] == "alice"


def test_owner_unregistered(capsys, document, registry_path):
    code, _, err = run(capsys, "owner", "--input", document, "--registry", registry_path)
    assert code == EXIT_RUNTIME
    assert json.loads(err)["error"] == "RecordNotFound"


def test_usage_errors(capsys):
    assert run(capsys)[0] == EXIT_USAGE
    assert run(capsys, "bogus")[0] == EXIT_USAGE
    assert run(capsys, "keyword")[0] == EXIT_USAGE
    assert run(capsys, "keyword", "--input", "x", "--top", -1)[0] == EXIT_USAGE
    assert run(capsys, "verify", "--input", "x", "--record-id", "r", "--mode", "fuzzy")[0] == EXIT_USAGE


def test_help_exits_cleanly(capsys):
    assert run(capsys, "--help")[0] == EXIT_OK


def test_invalid_environment_setting(capsys, monkeypatch, document):
    monkeypatch.setenv("ZWM_LOG_LEVEL", "LOUD")
    code, _, err = run(capsys, "keyword", "--input", document)
    assert code == EXIT_USAGE
    assert "log level" in err


def test_registry_from_environment(capsys, monkeypatch, document, registry_path):
    monkeypatch.setenv("ZWM_REGISTRY_PATH", str(registry_path))
    code, _, _ = run(capsys, "embed", "--input", document, "--author", "alice")
    assert code == EXIT_OK
    assert registry_path.exists()

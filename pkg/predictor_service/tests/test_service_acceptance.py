"""Acceptance gate for the service: parity with the engine's lexicon
predictor on the shared vector file, and learnability of a synthetic rule.
"""

import json
import random
import sys
from contextlib import contextmanager
from pathlib import Path

import pytest

from predictor_service import PredictorServer, ServiceConfig, train

from _service_helpers import post_label

VECTORS = Path(__file__).parent / "data" / "label_vectors.jsonl"

_REPORTER = None


@pytest.fixture(scope="module", autouse=True)
def _acceptance_reporter(request):
    global _REPORTER
    _REPORTER = request.config.pluginmanager.get_plugin("terminalreporter")
    yield
    _REPORTER = None


def _emit(line):
    if _REPORTER is not None:
        _REPORTER.write_line(line)
    else:
        print(line, file=sys.__stdout__, flush=True)


@contextmanager
def criterion(number, name):
    try:
        yield
    except BaseException:
        _emit(f"[acceptance] criterion {number} ({name}): FAIL")
        raise
    _emit(f"[acceptance] criterion {number} ({name}): PASS")


def test_criterion_8_lexicon_parity(lexicon_server):
    with criterion(8, "lexicon-mode parity on shared vectors"):
        cases = [json.loads(line)
                 for line in VECTORS.read_text(encoding="utf-8").splitlines()]
        assert len(cases) == 500
        for index, case in enumerate(cases):
            status, body = post_label(lexicon_server.base_url,
                                      {"text": case["text"],
                                       "target": case["target"]})
            assert status == 200, f"case {index}: status {status}"
            expected = {"keep_prefix_chars": case["keep_prefix_chars"],
                        "units": case["units"]}
            got_bytes = json.dumps(body, sort_keys=True, ensure_ascii=False)
            want_bytes = json.dumps(expected, sort_keys=True, ensure_ascii=False)
            assert got_bytes == want_bytes, f"case {index}: {case['text']!r}"


RULE_WORDS = ("okay", "wait", "hmm", "so", "but", "now", "right", "well")
OTHER_WORDS = ("compute", "gcd", "prime", "array", "modulo", "proof", "sum",
               "loop", "graph", "edge", "factor", "digit")


def _synthetic_corpus(path, rng, rows=800):
    lines = []
    for _ in range(rows):
        text = ""
        spans = []
        for i in range(rng.randint(3, 30)):
            styled = rng.random() < 0.4
            word = rng.choice(RULE_WORDS if styled else OTHER_WORDS)
            if rng.random() < 0.3:
                word = word[0].upper() + word[1:]
            word += rng.choice(("", "", ",", ".", "!"))
            if i:
                text += rng.choice((" ", " ", "  ", "\n"))
            start = len(text)
            text += word
            if styled:
                spans.append([start, start + len(word)])
        lines.append(json.dumps({"text": text, "style_spans": spans,
                                 "source": "student"}))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_criterion_9_synthetic_rule_learnability(tmp_path):
    with criterion(9, "learned predictor reaches 0.99 held-out accuracy"):
        corpus = tmp_path / "corpus.jsonl"
        _synthetic_corpus(corpus, random.Random(20260818))
        model = tmp_path / "model.json"
        report = train(corpus, model, seed=5)
        assert report.held_out_records == 80
        assert report.metrics["char_accuracy"] >= 0.99
        assert report.metrics["precision"] >= 0.99
        assert report.metrics["recall"] >= 0.99

        # Same seed, same split, same metrics.
        rerun = train(corpus, tmp_path / "model2.json", seed=5)
        assert rerun.metrics == report.metrics

        # The fitted artifact serves verdicts that respect the contract.
        config = ServiceConfig(mode="learned", model_path=str(model))
        server = PredictorServer(config).start()
        try:
            text = "Okay, so compute the gcd now"
            status, body = post_label(server.base_url,
                                      {"text": text, "target": "style"})
            assert status == 200
            keep = body["keep_prefix_chars"]
            assert 0 <= keep <= len(text)
            cursor = 0
            for unit in body["units"]:
                assert unit["start"] == cursor
                cursor = unit["end"]
            assert cursor == len(text)
        finally:
            server.close()

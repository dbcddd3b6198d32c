"""Lexicon labeling, keep-prefix verdicts, truncation, and the remote client."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tessy.boundary import (
    DEFAULT_STYLE_WORDS,
    BoundaryTarget,
    BoundaryVerdict,
    LabeledUnit,
    LexiconPredictor,
    RemotePredictor,
    StyleLexicon,
    build_predictor,
    label_units,
    normalize_word,
    predict_boundary,
    trim_partial_word,
    truncate_span,
    verdict_from_units,
)
from tessy.core import PredictorSelector
from tessy.errors import ProtocolError, StructuralError


class TestNormalizeWord:
    @pytest.mark.parametrize("raw,expected", [
        ("Okay,", "okay"),
        ("...Wait!!", "wait"),
        ("let's", "let's"),
        ("f(n)", "f(n"),
        ("42", "42"),
        ("?!", ""),
        ("", ""),
        ("X", "x"),
    ])
    def test_examples(self, raw, expected):
        assert normalize_word(raw) == expected


class TestStyleLexicon:
    def test_default_entries(self):
        assert len(DEFAULT_STYLE_WORDS) == 10
        lex = StyleLexicon.default()
        assert "okay" in lex.singles
        assert ("let", "me") in lex.phrases
        assert ("i", "think") in lex.phrases

    def test_phrases_sorted_longest_first(self):
        lex = StyleLexicon(["a b", "a b c", "x"])
        assert lex.phrases[0] == ("a", "b", "c")

    def test_blank_entries_ignored(self):
        lex = StyleLexicon(["", "  ", "?!", "ok"])
        assert lex.singles == frozenset({"ok"})
        assert lex.phrases == ()


class TestLabelUnits:
    def test_units_tile_text_exactly(self):
        text = "  Okay, compute the gcd now.  "
        units = label_units(text, StyleLexicon.default())
        assert units[0].start == 0
        assert units[-1].end == len(text)
        for before, after in zip(units, units[1:]):
            assert before.end == after.start

    def test_first_unit_absorbs_leading_whitespace(self):
        units = label_units("   okay go", StyleLexicon.default())
        assert units[0] == LabeledUnit(0, 8, BoundaryTarget.STYLE)
        assert units[1] == LabeledUnit(8, 10, BoundaryTarget.CAPABILITY)

    def test_no_word_text_is_single_capability_unit(self):
        for text in ("", "   ", "\n\t"):
            units = label_units(text, StyleLexicon.default())
            assert units == (LabeledUnit(0, len(text), BoundaryTarget.CAPABILITY),)

    def test_phrase_words_merge_into_one_unit(self):
        units = label_units("Let me think about it", StyleLexicon.default())
        assert units[0] == LabeledUnit(0, 7, BoundaryTarget.STYLE)
        assert units[1].label is BoundaryTarget.CAPABILITY

    def test_longest_phrase_wins(self):
        lex = StyleLexicon(["hold on", "hold on tight"])
        units = label_units("hold on tight now", lex)
        assert units[0] == LabeledUnit(0, 14, BoundaryTarget.STYLE)

    def test_punctuation_stripped_before_matching(self):
        units = label_units("Okay, sure", StyleLexicon.default())
        assert units[0].label is BoundaryTarget.STYLE


class TestVerdicts:
    def test_keep_runs_until_first_off_target_unit(self):
        # Style prefix of a student block: keep "Okay, let's " (12 chars).
        verdict = predict_boundary(
            LexiconPredictor(), "Okay, let's compute the gcd.", BoundaryTarget.STYLE)
        assert verdict.keep_prefix_chars == 12

    def test_capability_target_cuts_style_immediately(self):
        verdict = predict_boundary(
            LexiconPredictor(), "Wait, hmm.", BoundaryTarget.CAPABILITY)
        assert verdict.keep_prefix_chars == 0

    def test_uniform_block_kept_whole(self):
        verdict = predict_boundary(
            LexiconPredictor(), "compute the gcd fast", BoundaryTarget.CAPABILITY)
        assert verdict.keep_prefix_chars == 20

    def test_phrase_prefix_kept(self):
        verdict = predict_boundary(
            LexiconPredictor(), "Let me think...", BoundaryTarget.STYLE)
        assert verdict.keep_prefix_chars == 7

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            LexiconPredictor().predict("", BoundaryTarget.STYLE)

    def test_negative_keep_rejected(self):
        with pytest.raises(StructuralError):
            BoundaryVerdict(keep_prefix_chars=-1)


class TestTruncateSpan:
    def test_truncating_cut(self):
        retained, truncated = truncate_span("abcdef", BoundaryVerdict(3))
        assert retained == "abc" and truncated

    def test_full_keep_is_not_truncated(self):
        retained, truncated = truncate_span("abc", BoundaryVerdict(3))
        assert retained == "abc" and not truncated

    def test_keep_zero(self):
        retained, truncated = truncate_span("abc", BoundaryVerdict(0))
        assert retained == "" and truncated

    def test_keep_beyond_length_rejected(self):
        with pytest.raises(StructuralError):
            truncate_span("ab", BoundaryVerdict(5))


class TestTrimPartialWord:
    @pytest.mark.parametrize("before,after", [
        ("compute the gc", "compute the "),
        ("gc", ""),
        ("compute the ", "compute the "),
        ("foo ?!", "foo ?!"),
        ("", ""),
        ("word", ""),
        ("a b\tc2", "a b\t"),
    ])
    def test_examples(self, before, after):
        assert trim_partial_word(before) == after

    @given(st.text(max_size=40))
    def test_idempotent(self, text):
        once = trim_partial_word(text)
        assert trim_partial_word(once) == once

    @given(st.text(max_size=40))
    def test_result_is_prefix(self, text):
        assert text.startswith(trim_partial_word(text))


@settings(max_examples=300)
@given(st.text(max_size=80),
       st.lists(st.sampled_from(list(DEFAULT_STYLE_WORDS) + ["sure thing"]),
                max_size=4))
def test_units_always_tile(text, extra_words):
    lex = StyleLexicon(tuple(DEFAULT_STYLE_WORDS) + tuple(extra_words))
    units = label_units(text, lex)
    assert units[0].start == 0
    assert units[-1].end == len(text)
    for before, after in zip(units, units[1:]):
        assert before.end == after.start
        assert before.end > before.start or len(text) == 0


@settings(max_examples=300)
@given(st.text(min_size=1, max_size=80),
       st.sampled_from([BoundaryTarget.STYLE, BoundaryTarget.CAPABILITY]))
def test_lexicon_verdict_bounds_and_determinism(text, target):
    predictor = LexiconPredictor()
    verdict = predictor.predict(text, target)
    assert 0 <= verdict.keep_prefix_chars <= len(text)
    assert verdict == predictor.predict(text, target)
    # A keep cut always lands on a unit edge.
    edges = {u.start for u in verdict.units} | {len(text)}
    assert verdict.keep_prefix_chars in edges


class _StubGateway:
    """post_json returns queued payloads verbatim."""

    def __init__(self, *payloads):
        self.payloads = list(payloads)
        self.calls = []

    def post_json(self, url, payload):
        self.calls.append((url, payload))
        return self.payloads.pop(0)


class TestRemotePredictor:
    def test_request_shape_and_plain_verdict(self):
        stub = _StubGateway({"keep_prefix_chars": 3})
        predictor = RemotePredictor(stub, "http://svc/")
        verdict = predictor.predict("abcdef", BoundaryTarget.STYLE)
        assert verdict.keep_prefix_chars == 3 and verdict.units is None
        url, payload = stub.calls[0]
        assert url == "http://svc/v1/label"
        assert payload == {"text": "abcdef", "target": "style"}

    def test_units_accepted_when_consistent(self):
        stub = _StubGateway({
            "keep_prefix_chars": 2,
            "units": [
                {"start": 0, "end": 2, "label": "style"},
                {"start": 2, "end": 4, "label": "capability"},
            ],
        })
        verdict = RemotePredictor(stub, "http://svc").predict(
            "ab cd"[:4], BoundaryTarget.STYLE)
        assert verdict.keep_prefix_chars == 2
        assert len(verdict.units) == 2

    @pytest.mark.parametrize("payload", [
        {},
        {"keep_prefix_chars": "3"},
        {"keep_prefix_chars": True},
        {"keep_prefix_chars": -1},
        {"keep_prefix_chars": 99},
    ])
    def test_bad_keep_rejected(self, payload):
        stub = _StubGateway(payload)
        with pytest.raises(ProtocolError):
            RemotePredictor(stub, "http://svc").predict("abcdef", BoundaryTarget.STYLE)

    def test_units_must_tile(self):
        stub = _StubGateway({
            "keep_prefix_chars": 1,
            "units": [{"start": 0, "end": 1, "label": "style"},
                      {"start": 2, "end": 6, "label": "capability"}],
        })
        with pytest.raises(ProtocolError, match="tile"):
            RemotePredictor(stub, "http://svc").predict("abcdef", BoundaryTarget.STYLE)

    def test_units_must_cover_whole_text(self):
        stub = _StubGateway({
            "keep_prefix_chars": 1,
            "units": [{"start": 0, "end": 1, "label": "capability"}],
        })
        with pytest.raises(ProtocolError, match="cover"):
            RemotePredictor(stub, "http://svc").predict("abcdef", BoundaryTarget.STYLE)

    def test_units_must_agree_with_keep(self):
        stub = _StubGateway({
            "keep_prefix_chars": 5,
            "units": [{"start": 0, "end": 6, "label": "capability"}],
        })
        with pytest.raises(ProtocolError, match="inconsistent"):
            RemotePredictor(stub, "http://svc").predict("abcdef", BoundaryTarget.STYLE)

    def test_bad_unit_label_rejected(self):
        stub = _StubGateway({
            "keep_prefix_chars": 0,
            "units": [{"start": 0, "end": 6, "label": "mystery"}],
        })
        with pytest.raises(ProtocolError):
            RemotePredictor(stub, "http://svc").predict("abcdef", BoundaryTarget.STYLE)

    def test_empty_text_rejected_before_any_request(self):
        stub = _StubGateway()
        with pytest.raises(ValueError):
            RemotePredictor(stub, "http://svc").predict("", BoundaryTarget.STYLE)
        assert stub.calls == []


class TestBuildPredictor:
    def test_lexicon_default(self):
        predictor = build_predictor(PredictorSelector())
        assert isinstance(predictor, LexiconPredictor)
        assert "okay" in predictor.lexicon.singles

    def test_lexicon_with_custom_words(self):
        predictor = build_predictor(
            PredictorSelector(style_words=("zap", "zing zong")))
        assert predictor.lexicon.singles == frozenset({"zap"})
        assert predictor.lexicon.phrases == (("zing", "zong"),)

    def test_remote_requires_gateway(self):
        selector = PredictorSelector(kind="remote", url="http://svc")
        with pytest.raises(ValueError):
            build_predictor(selector)
        stub = _StubGateway()
        assert isinstance(build_predictor(selector, stub), RemotePredictor)


def test_remote_predictor_matches_lexicon_over_http(procedural_server):
    """Wire parity: the fixture server's /v1/label equals the local lexicon."""
    from tessy.gateway import HttpGateway

    remote = RemotePredictor(HttpGateway(retries=0), procedural_server.base_url)
    local = LexiconPredictor()
    samples = [
        "Okay, let's compute the gcd of 12 and 18.",
        "Wait, hmm.",
        "compute compute compute",
        "   \n  ",
        "Let me think... the answer is 4.",
    ]
    for text in samples:
        for target in (BoundaryTarget.STYLE, BoundaryTarget.CAPABILITY):
            assert (remote.predict(text, target).keep_prefix_chars
                    == local.predict(text, target).keep_prefix_chars)

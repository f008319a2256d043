import sys
from pathlib import Path

import pytest

from ctfair.counterfactual import generate_all
from ctfair.lexicon import find_mentions
from ctfair.ngram import train_ngram
from ctfair.scoring import (
    ExternalScorer,
    NgramScorer,
    ScoreCache,
    ScorerError,
    score_set,
    text_key,
)

from conftest import make_doc

FAKE_SCORER = Path(__file__).with_name("fake_scorer.py")


def fake_cmd(*flags: str) -> str:
    return " ".join([sys.executable, str(FAKE_SCORER), *flags])


class CountingScorer:
    """Deterministic scorer that records how many requests it served."""

    def __init__(self):
        self.calls = 0

    def score_many(self, requests):
        self.calls += len(requests)
        return {rid: -float(len(text.split(" "))) for rid, text in requests}


def cfset_for(text, lexicon):
    doc = make_doc("doc1", text)
    mentions = find_mentions(doc.tokens, lexicon)
    assert len(mentions) == 1
    return generate_all(doc, mentions[0], lexicon)


class TestScoreCache:
    def test_miss_then_hit(self, tmp_path):
        cache = ScoreCache(tmp_path / "cache.tsv")
        assert cache.get(("a", "b")) is None
        cache.put(("a", "b"), -1.25)
        assert cache.get(("a", "b")) == -1.25
        cache.close()

    def test_persistence_exact(self, tmp_path):
        path = tmp_path / "cache.tsv"
        values = {("a",): -0.1, ("a", "b"): -3.141592653589793, ("x", "y", "z"): -123.456e-7}
        with ScoreCache(path) as cache:
            for tokens, value in values.items():
                cache.put(tokens, value)
        with ScoreCache(path) as cache:
            for tokens, value in values.items():
                assert cache.get(tokens) == value  # repr round-trip is exact

    def test_memory_only(self):
        cache = ScoreCache(None)
        cache.put(("a",), -1.0)
        assert cache.get(("a",)) == -1.0

    def test_later_rows_win(self, tmp_path):
        path = tmp_path / "cache.tsv"
        with ScoreCache(path) as cache:
            cache.put(("a",), -1.0)
            cache.put(("a",), -2.0)
        with ScoreCache(path) as cache:
            assert cache.get(("a",)) == -2.0


class TestScoreSet:
    def test_cold_cache_counts(self, tiny_lexicon, tmp_path):
        scorer = CountingScorer()
        cache = ScoreCache(tmp_path / "c.tsv")
        cfset = cfset_for("i hate muslims", tiny_lexicon)
        scored = score_set(scorer, cfset, cache)
        assert scorer.calls == 1 + len(cfset.variants) == 4
        assert len(cache) == 4
        assert scored.original_ll == -3.0
        cache.close()

    def test_warm_cache_no_calls(self, tiny_lexicon, tmp_path):
        cache = ScoreCache(tmp_path / "c.tsv")
        cfset = cfset_for("i hate muslims", tiny_lexicon)
        first = score_set(CountingScorer(), cfset, cache)
        warm_scorer = CountingScorer()
        second = score_set(warm_scorer, cfset, cache)
        assert warm_scorer.calls == 0
        assert second == first
        cache.close()

    def test_warm_equals_cold_with_ngram_scorer(self, tiny_lexicon, tmp_path):
        docs = [make_doc(f"t{i}", t) for i, t in enumerate(["muslims pray", "jews pray", "asians cook"])]
        scorer = NgramScorer(train_ngram(docs, order=2, discount=0.5, min_count=1))
        cfset = cfset_for("i hate muslims", tiny_lexicon)
        cold = score_set(scorer, cfset, None)
        cache = ScoreCache(tmp_path / "c.tsv")
        first = score_set(scorer, cfset, cache)
        warm = score_set(scorer, cfset, cache)
        assert cold == first == warm
        cache.close()

    def test_no_cache(self, tiny_lexicon):
        scored = score_set(CountingScorer(), cfset_for("i hate muslims", tiny_lexicon), None)
        assert len(scored.variant_lls) == 3


class TestExternalScorer:
    def test_basic_protocol(self):
        with ExternalScorer(fake_cmd()) as scorer:
            got = scorer.score_many([("a", "one two three"), ("b", "one")])
            assert got == {"a": -3.0, "b": -1.0}

    def test_out_of_order_responses(self):
        with ExternalScorer(fake_cmd("--reverse")) as scorer:
            got = scorer.score_many([(f"r{i}", " ".join(["x"] * (i + 1))) for i in range(6)])
            assert got == {f"r{i}": -float(i + 1) for i in range(6)}

    def test_reused_across_batches(self):
        with ExternalScorer(fake_cmd()) as scorer:
            assert scorer.score_many([("a", "x")]) == {"a": -1.0}
            assert scorer.score_many([("b", "x y")]) == {"b": -2.0}

    def test_error_response_names_request(self, tiny_lexicon):
        cfset = cfset_for("i hate muslims", tiny_lexicon)
        with ExternalScorer(fake_cmd("--error-word", "jews")) as scorer:
            with pytest.raises(ScorerError) as err:
                score_set(scorer, cfset, None)
            # the jew entry is id 1 in the tiny lexicon
            assert "doc1/v1" in str(err.value)

    def test_early_exit_detected(self):
        with ExternalScorer(fake_cmd("--die-after", "1")) as scorer:
            with pytest.raises(ScorerError, match="exited"):
                scorer.score_many([("a", "x"), ("b", "y"), ("c", "z")])

    def test_launch_failure(self):
        scorer = ExternalScorer("/nonexistent/binary-xyz")
        with pytest.raises(ScorerError, match="launch"):
            scorer.score_many([("a", "x")])

    def test_large_batch_no_deadlock(self):
        with ExternalScorer(fake_cmd()) as scorer:
            requests = [(f"r{i}", " ".join(["word"] * 50)) for i in range(2000)]
            got = scorer.score_many(requests)
            assert len(got) == 2000
            assert all(v == -50.0 for v in got.values())

    def test_partial_failure_emits_nothing(self, tiny_lexicon, tmp_path):
        # a failing set must not leave partial results in the cache
        cfset = cfset_for("i hate muslims", tiny_lexicon)
        cache = ScoreCache(tmp_path / "c.tsv")
        with ExternalScorer(fake_cmd("--error-word", "jews")) as scorer:
            with pytest.raises(ScorerError):
                score_set(scorer, cfset, cache)
        assert len(cache) == 0
        cache.close()


class TestTextKey:
    def test_round_trip_tokens(self):
        tokens = ("a", "b-c", "d'e")
        assert tuple(text_key(tokens).split(" ")) == tokens

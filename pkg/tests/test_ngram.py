import math
import random
from fractions import Fraction

import pytest

from ctfair.data import ValidationError
from ctfair.ngram import BOS, EOS, UNK, NgramModel, load_model, prob, save_model, score_sequence, train_ngram

from conftest import make_doc


def corpus(*texts):
    return [make_doc(f"d{i}", t) for i, t in enumerate(texts)]


THREE_SENTENCES = ("a b", "a b", "a c")

# Pinned constants, hand-evaluated with exact rational arithmetic on the
# three-sentence corpus (order 2, discount 1/2, min_count 1):
#   P(b|a)     = max(2-1/2,0)/3 + (1/2 * 2/3) * P1(b),  P1(b) = 19/90
#              = 77/135
#   P(a|bos)   = 479/540,  P(eos|b) = 299/360
#   score(a b) = ln(479/540) + ln(77/135) + ln(299/360)
P_B_GIVEN_A = 77 / 135  # 0.5703703703703704
P_A_GIVEN_BOS = 479 / 540
P_EOS_GIVEN_B = 299 / 360
SCORE_AB = -0.8669983567916195


def oracle_prob(model: NgramModel, ctx: tuple[str, ...], word: str) -> Fraction:
    """Independent direct evaluation of the smoothing recursion, in exact rationals."""
    lower = oracle_prob(model, ctx[1:], word) if ctx else Fraction(1, len(model.vocab))
    node = model.counts.get(ctx)
    if node is None:
        return lower
    total = Fraction(sum(node.values()))
    distinct = len(node)
    d = Fraction(model.discount).limit_denominator(10**6)
    kept = max(Fraction(node.get(word, 0)) - d, Fraction(0))
    return kept / total + (d * distinct / total) * lower


def oracle_score(model: NgramModel, tokens) -> float:
    width = model.order - 1
    ctx = (BOS,) * width
    total = 0.0
    for tok in tuple(tokens) + (EOS,):
        w = tok if tok in model.vocab else UNK
        total += math.log(oracle_prob(model, ctx, w))
        if width:
            ctx = (ctx + (w,))[-width:]
    return total


class TestTrain:
    def test_counts_example(self):
        m = train_ngram(corpus(*THREE_SENTENCES), order=2, discount=0.5, min_count=1)
        assert m.vocab == frozenset({"a", "b", "c", UNK, EOS})
        assert m.counts[("a",)] == {"b": 2, "c": 1}
        assert m.counts[(BOS,)] == {"a": 3}

    def test_min_count_collapses_to_unk(self):
        m = train_ngram(corpus(*THREE_SENTENCES), order=2, discount=0.5, min_count=3)
        assert m.vocab == frozenset({"a", UNK, EOS})
        assert m.counts[("a",)] == {UNK: 3}

    def test_order_one_single_empty_context(self):
        m = train_ngram(corpus(*THREE_SENTENCES), order=1, discount=0.5, min_count=1)
        assert set(m.counts) == {()}
        assert m.counts[()] == {"a": 3, "b": 2, "c": 1, EOS: 3}

    def test_validation(self):
        with pytest.raises(ValidationError):
            train_ngram([], order=2, discount=0.5, min_count=1)
        with pytest.raises(ValidationError):
            train_ngram(corpus("a"), order=0, discount=0.5, min_count=1)
        with pytest.raises(ValidationError):
            train_ngram(corpus("a"), order=2, discount=1.0, min_count=1)
        with pytest.raises(ValidationError):
            train_ngram(corpus("a"), order=2, discount=0.5, min_count=0)

    def test_determinism(self, tmp_path):
        a = train_ngram(corpus(*THREE_SENTENCES), order=3, discount=0.75, min_count=1)
        b = train_ngram(corpus(*THREE_SENTENCES), order=3, discount=0.75, min_count=1)
        assert a.counts == b.counts and a.vocab == b.vocab
        tokens = ("a", "b", "zzz")
        assert score_sequence(a, tokens) == score_sequence(b, tokens)
        # serialized form is byte-identical too
        save_model(a, tmp_path / "a.json")
        save_model(b, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


class TestProb:
    def test_pinned_hand_values(self):
        m = train_ngram(corpus(*THREE_SENTENCES), order=2, discount=0.5, min_count=1)
        assert prob(m, ("a",), "b") == pytest.approx(P_B_GIVEN_A, abs=1e-15)
        assert prob(m, (BOS,), "a") == pytest.approx(P_A_GIVEN_BOS, abs=1e-15)
        assert prob(m, ("b",), EOS) == pytest.approx(P_EOS_GIVEN_B, abs=1e-15)

    def test_untrained_uniform(self):
        m = NgramModel(order=2, discount=0.5, vocab=frozenset({"a", "b", UNK, EOS}), counts={})
        assert prob(m, ("a",), "b") == 0.25
        assert prob(m, (), "a") == 0.25
        assert prob(m, ("zzz",), "qqq") == 0.25

    def test_observed_contexts_normalize(self):
        m = train_ngram(corpus(*THREE_SENTENCES), order=2, discount=0.5, min_count=1)
        for ctx in m.counts:
            total = sum(prob(m, ctx, w) for w in m.vocab)
            assert total == pytest.approx(1.0, abs=1e-12), ctx

    def test_oov_context_truncation(self):
        m = train_ngram(corpus(*THREE_SENTENCES), order=2, discount=0.5, min_count=1)
        # context longer than order-1 uses only the tail; OOV context maps to UNK
        assert prob(m, ("x", "y", "a"), "b") == prob(m, ("a",), "b")
        assert prob(m, ("zzz",), "b") == prob(m, (UNK,), "b")

    def test_matches_fraction_oracle(self):
        rng = random.Random(7)
        words = ["w%d" % i for i in range(6)]
        for trial in range(20):
            texts = [
                " ".join(rng.choice(words) for _ in range(rng.randint(1, 6)))
                for _ in range(rng.randint(1, 10))
            ]
            order = rng.choice([1, 2])
            m = train_ngram(corpus(*texts), order=order, discount=0.5, min_count=1)
            for _ in range(10):
                ctx = tuple(rng.choice(words) for _ in range(order - 1))
                w = rng.choice(words + [EOS])
                got = prob(m, ctx, w)
                mapped_ctx = tuple(t if t in m.vocab else UNK for t in ctx)
                want = float(oracle_prob(m, mapped_ctx, w if w in m.vocab else UNK))
                assert got == pytest.approx(want, abs=1e-12)


class TestScoreSequence:
    def test_uniform_model(self):
        m = NgramModel(order=2, discount=0.5, vocab=frozenset({"a", "b", UNK, EOS}), counts={})
        assert score_sequence(m, ("a", "b")) == pytest.approx(3 * math.log(0.25), abs=1e-12)

    def test_pinned_trained_value(self):
        m = train_ngram(corpus(*THREE_SENTENCES), order=2, discount=0.5, min_count=1)
        assert score_sequence(m, ("a", "b")) == pytest.approx(SCORE_AB, abs=1e-12)

    def test_equals_per_token_sum(self):
        m = train_ngram(corpus(*THREE_SENTENCES), order=2, discount=0.5, min_count=1)
        expected = (
            math.log(prob(m, (BOS,), "a"))
            + math.log(prob(m, ("a",), "b"))
            + math.log(prob(m, ("b",), EOS))
        )
        assert score_sequence(m, ("a", "b")) == pytest.approx(expected, abs=1e-15)

    def test_prefix_sums_strictly_decrease(self):
        # each appended token contributes ln p < 0, so the pre-EOS partial sums
        # strictly decrease; the EOS term makes the full score smaller still.
        # (Full scores of x and x.w are not comparable in general: the EOS
        # context changes.)
        m = train_ngram(
            corpus("a b c", "a b", "b c a", "c c"), order=3, discount=0.75, min_count=1
        )

        def prefix_ll(tokens):
            width = m.order - 1
            ctx = (BOS,) * width
            total = 0.0
            for tok in tokens:
                w = m.map_token(tok)
                total += math.log(prob(m, ctx, w))
                ctx = (ctx + (w,))[-width:]
            return total

        rng = random.Random(3)
        for _ in range(20):
            tokens = tuple(rng.choice(["a", "b", "c", "zzz"]) for _ in range(rng.randint(1, 6)))
            for cut in range(1, len(tokens)):
                assert prefix_ll(tokens[: cut + 1]) < prefix_ll(tokens[:cut])
            assert score_sequence(m, tokens) < prefix_ll(tokens)

    def test_empty_rejected(self):
        m = train_ngram(corpus("a"), order=2, discount=0.5, min_count=1)
        with pytest.raises(ValidationError):
            score_sequence(m, ())

    def test_oov_tokens_scored_as_unk(self):
        m = train_ngram(corpus(*THREE_SENTENCES), order=2, discount=0.5, min_count=1)
        assert score_sequence(m, ("a", "zzz")) == score_sequence(m, ("a", UNK))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        m = train_ngram(corpus(*THREE_SENTENCES), order=3, discount=0.75, min_count=1)
        path = tmp_path / "model.json"
        save_model(m, path)
        back = load_model(path)
        assert back.order == m.order and back.discount == m.discount
        assert back.vocab == m.vocab and back.counts == m.counts
        assert score_sequence(back, ("a", "b", "c")) == score_sequence(m, ("a", "b", "c"))

    def test_empty_context_key_round_trip(self, tmp_path):
        m = train_ngram(corpus("a b"), order=1, discount=0.5, min_count=1)
        path = tmp_path / "model.json"
        save_model(m, path)
        assert load_model(path).counts[()] == m.counts[()]

    def test_bad_version(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"format_version": 99}')
        with pytest.raises(ValidationError, match="format_version"):
            load_model(path)

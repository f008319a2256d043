import math

import pytest

from ctfair.data import ValidationError
from ctfair.lexicon import filter_single_mention, find_mentions
from ctfair.synth import (
    NEUTRAL_TEMPLATES,
    SGT_SLOT,
    SynthConfig,
    generate_corpus,
    stereo_markers,
)


def config_for(lexicon, **overrides):
    base = dict(
        lexicon=lexicon,
        n_docs=500,
        stereotyped_fraction=0.3,
        hate_rate_stereotyped=0.6,
        hate_rate_neutral=0.1,
        seed=4,
    )
    base.update(overrides)
    return SynthConfig(**base)


class TestGeneration:
    def test_deterministic(self, lexicon):
        a_docs, a_truth = generate_corpus(config_for(lexicon))
        b_docs, b_truth = generate_corpus(config_for(lexicon))
        assert a_docs == b_docs
        assert a_truth == b_truth

    def test_seed_changes_output(self, lexicon):
        a_docs, _ = generate_corpus(config_for(lexicon, seed=1))
        b_docs, _ = generate_corpus(config_for(lexicon, seed=2))
        assert a_docs != b_docs

    def test_every_doc_single_mention(self, lexicon):
        docs, truth = generate_corpus(config_for(lexicon))
        kept = filter_single_mention(docs, lexicon)
        assert len(kept) == len(docs)
        by_id = {t.doc_id: t for t in truth}
        for doc, mention in kept:
            assert lexicon.entry(mention.entry_id).term == by_id[doc.id].sgt

    def test_labels_consistent_with_truth(self, lexicon):
        docs, truth = generate_corpus(config_for(lexicon))
        for doc, record in zip(docs, truth):
            assert doc.id == record.doc_id
            assert doc.label == record.label

    def test_stereotyped_fraction_zero(self, lexicon):
        docs, truth = generate_corpus(config_for(lexicon, stereotyped_fraction=0.0))
        assert all(not t.stereotyped for t in truth)
        assert all(t.template_id.startswith("ne") for t in truth)

    def test_stereotyped_fraction_one_contexts_identify_sgt(self, lexicon):
        docs, truth = generate_corpus(config_for(lexicon, stereotyped_fraction=1.0))
        assert all(t.stereotyped for t in truth)
        # the marker pair determines the SGT: one template per entry
        by_id = {t.doc_id: t for t in truth}
        term_to_entry = {e.term: e.id for e in lexicon.entries}
        for doc in docs:
            entry_id = term_to_entry[by_id[doc.id].sgt]
            ma, mb = stereo_markers(entry_id)
            assert ma in doc.tokens and mb in doc.tokens

    def test_hate_rates_converge(self, lexicon):
        config = config_for(lexicon, n_docs=2000, seed=42)
        _, truth = generate_corpus(config)
        for stereotyped, expected in ((True, 0.6), (False, 0.1)):
            group = [t for t in truth if t.stereotyped == stereotyped]
            rate = sum(t.label for t in group) / len(group)
            # binomial 99% interval
            half_width = 2.576 * math.sqrt(expected * (1 - expected) / len(group))
            assert abs(rate - expected) <= half_width, (stereotyped, rate, expected)

    def test_stereotyped_fraction_converges(self, lexicon):
        config = config_for(lexicon, n_docs=2000, seed=9)
        _, truth = generate_corpus(config)
        frac = sum(t.stereotyped for t in truth) / len(truth)
        assert abs(frac - 0.3) <= 2.576 * math.sqrt(0.3 * 0.7 / len(truth))

    def test_sgt_skew_respected(self, lexicon):
        skew = {e.id: 0.0 for e in lexicon.entries}
        skew[3] = 1.0
        skew[5] = 3.0
        _, truth = generate_corpus(config_for(lexicon, n_docs=1000, sgt_skew=skew))
        terms = {lexicon.entry(3).term, lexicon.entry(5).term}
        assert {t.sgt for t in truth} == terms
        share_5 = sum(t.sgt == lexicon.entry(5).term for t in truth) / len(truth)
        assert 0.65 <= share_5 <= 0.85  # expected 0.75

    def test_config_validation(self, lexicon):
        with pytest.raises(ValidationError):
            config_for(lexicon, n_docs=0)
        with pytest.raises(ValidationError):
            config_for(lexicon, stereotyped_fraction=1.5)
        with pytest.raises(ValidationError):
            config_for(lexicon, sgt_skew={0: -1.0})
        with pytest.raises(ValidationError):
            config_for(lexicon, sgt_skew={0: 0.0})


class TestGeneratingDistributionOracle:
    def test_stereotyped_variants_outside_support(self, lexicon):
        """Under the generating distribution a stereotyped counterfactual has
        probability zero: its pre-marker is never paired with any other SGT
        anywhere in the corpus, so the original strictly maximizes likelihood.
        """
        from ctfair.counterfactual import generate_all

        docs, truth = generate_corpus(config_for(lexicon, n_docs=800, seed=17))
        by_id = {t.doc_id: t for t in truth}
        term_to_entry = {e.term: e.id for e in lexicon.entries}

        # corpus support: every (pre-marker, following token) adjacency observed
        support = set()
        for doc in docs:
            for a, b in zip(doc.tokens, doc.tokens[1:]):
                support.add((a, b))

        checked = 0
        for doc in docs:
            record = by_id[doc.id]
            if not record.stereotyped:
                continue
            entry_id = term_to_entry[record.sgt]
            ma, _ = stereo_markers(entry_id)
            mentions = find_mentions(doc.tokens, lexicon)
            cfset = generate_all(doc, mentions[0], lexicon)
            for variant in cfset.variants[:10]:
                i = variant.tokens.index(ma)
                adjacency = (ma, variant.tokens[i + 1])
                assert adjacency not in support, (doc.id, adjacency)
            checked += 1
            if checked >= 25:
                break
        assert checked == 25

    def test_neutral_variants_stay_inside_shared_context(self, lexicon):
        """Neutral contexts are SGT-independent by construction: a variant
        differs from its original only inside the mention span, and the shared
        core words appear in every neutral template.
        """
        docs, truth = generate_corpus(config_for(lexicon, n_docs=300, seed=23))
        neutral_ids = {t.doc_id for t in truth if not t.stereotyped}
        for template in NEUTRAL_TEMPLATES:
            slot = template.index(SGT_SLOT)
            assert template[slot - 2 : slot] == ("near", "the")
            assert template[slot + 1 : slot + 3] == ("around", "town")
        for doc in docs:
            if doc.id not in neutral_ids:
                continue
            i = doc.tokens.index("near")
            assert doc.tokens[i + 1] == "the"
            mention = find_mentions(doc.tokens, lexicon)[0]
            assert mention.start == i + 2
            after = mention.start + mention.length
            assert doc.tokens[after : after + 2] == ("around", "town")

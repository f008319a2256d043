"""Seeded synthetic corpora with planted stereotype contexts and label bias.

Every generated document mentions exactly one SGT. Stereotyped documents use
a context template assigned one-to-one to their SGT: two marker words unique
to that SGT flank the mention, so under the generating distribution no other
SGT can appear between them, and a modest-order n-gram model trained on the
corpus recovers the association. Neutral documents draw a shared template and
an SGT independently, so their context carries no information about the group
mentioned. Word pools for the two strata are disjoint.

The ground-truth log is emitted next to the corpus and is never consumed by
the pipeline itself; tests use it as the verification oracle.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .data import Document, ValidationError
from .lexicon import SgtLexicon, find_mentions

SGT_SLOT = "{sgt}"
FILLER_SLOT = "{filler}"

# Stereotyped-stratum filler pool; disjoint from every neutral-template word.
STEREO_FILLERS = (
    "grim", "vile", "dark", "cold", "harsh", "bitter",
    "cruel", "savage", "twisted", "rotten", "foul", "bleak",
)

# Shapes cycle per entry; each has one SGT slot and 2-4 filler slots.
_STEREO_SHAPES = (
    (FILLER_SLOT, "{ma}", SGT_SLOT, "{mb}", FILLER_SLOT),
    (FILLER_SLOT, FILLER_SLOT, "{ma}", SGT_SLOT, "{mb}", FILLER_SLOT),
    (FILLER_SLOT, "{ma}", SGT_SLOT, "{mb}", FILLER_SLOT, FILLER_SLOT, FILLER_SLOT),
)

NEUTRAL_FILLERS = (
    "sunny", "quiet", "plain", "busy", "calm", "bright",
    "early", "late", "warm", "cool", "happy", "tired",
)

# Every neutral template shares the two tokens on each side of the SGT slot.
# An n-gram scorer of order <= 3 therefore sees identical context cells for
# all neutral documents, pooling the counts per SGT: the context carries no
# group information beyond sampling noise, which is what "neutral" means here.
# Template variety (and the 2-4 filler slots) lives outside that window.
_CORE = ("near", "the", SGT_SLOT, "around", "town")

NEUTRAL_TEMPLATES = (
    (FILLER_SLOT, "folks") + _CORE + ("today", FILLER_SLOT),
    (FILLER_SLOT, FILLER_SLOT) + _CORE + ("yesterday",),
    ("stories", "spread", FILLER_SLOT) + _CORE + (FILLER_SLOT,),
    (FILLER_SLOT,) + _CORE + (FILLER_SLOT, FILLER_SLOT),
    ("everyone", FILLER_SLOT) + _CORE + (FILLER_SLOT,),
    (FILLER_SLOT, "gathered") + _CORE + (FILLER_SLOT, FILLER_SLOT),
    ("news", "travels", FILLER_SLOT) + _CORE + (FILLER_SLOT,),
    (FILLER_SLOT, FILLER_SLOT, "quietly") + _CORE + (FILLER_SLOT, FILLER_SLOT),
)


def stereo_markers(entry_id: int) -> tuple[str, str]:
    """The marker pair uniquely paired with one SGT in stereotyped documents."""
    return f"marka{entry_id}", f"markb{entry_id}"


@dataclass(frozen=True)
class SynthConfig:
    lexicon: SgtLexicon
    n_docs: int
    stereotyped_fraction: float
    hate_rate_stereotyped: float
    hate_rate_neutral: float
    seed: int
    sgt_skew: dict[int, float] | None = None  # entry id -> weight; None = uniform

    def __post_init__(self) -> None:
        if self.n_docs < 1:
            raise ValidationError(f"n_docs must be >= 1, got {self.n_docs}")
        for name in ("stereotyped_fraction", "hate_rate_stereotyped", "hate_rate_neutral"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {value}")
        if self.sgt_skew is not None:
            if any(w < 0 for w in self.sgt_skew.values()):
                raise ValidationError("sgt_skew weights must be >= 0")
            if sum(self.sgt_skew.values()) <= 0:
                raise ValidationError("sgt_skew weights must have a positive sum")
            unknown = set(self.sgt_skew) - {e.id for e in self.lexicon.entries}
            if unknown:
                raise ValidationError(f"sgt_skew names unknown entries: {sorted(unknown)}")


@dataclass(frozen=True)
class TruthRecord:
    doc_id: str
    stereotyped: bool
    sgt: str  # canonical term of the generating entry
    template_id: str
    label: int


def _weights(config: SynthConfig) -> list[float]:
    if config.sgt_skew is None:
        return [1.0] * len(config.lexicon)
    return [config.sgt_skew.get(e.id, 0.0) for e in config.lexicon.entries]


def generate_corpus(config: SynthConfig) -> tuple[list[Document], list[TruthRecord]]:
    """Deterministic corpus + ground truth for the given config."""
    rng = random.Random(config.seed)
    weights = _weights(config)
    docs: list[Document] = []
    truth: list[TruthRecord] = []
    for j in range(config.n_docs):
        stereotyped = rng.random() < config.stereotyped_fraction
        entry = rng.choices(config.lexicon.entries, weights=weights, k=1)[0]
        plural = rng.random() < 0.5
        surface = entry.plural_surface() if plural else entry.term
        sgt_tokens = tuple(surface.split())

        if stereotyped:
            shape = _STEREO_SHAPES[entry.id % len(_STEREO_SHAPES)]
            ma, mb = stereo_markers(entry.id)
            template_id = f"st{entry.id}"
            pool = STEREO_FILLERS
            hate_rate = config.hate_rate_stereotyped
        else:
            t_idx = rng.randrange(len(NEUTRAL_TEMPLATES))
            shape = NEUTRAL_TEMPLATES[t_idx]
            ma = mb = ""
            template_id = f"ne{t_idx}"
            pool = NEUTRAL_FILLERS
            hate_rate = config.hate_rate_neutral

        tokens: list[str] = []
        for slot in shape:
            if slot == SGT_SLOT:
                tokens.extend(sgt_tokens)
            elif slot == FILLER_SLOT:
                tokens.append(rng.choice(pool))
            elif slot == "{ma}":
                tokens.append(ma)
            elif slot == "{mb}":
                tokens.append(mb)
            else:
                tokens.append(slot)
        label = 1 if rng.random() < hate_rate else 0
        doc = Document(
            id=f"d{j:05d}", tokens=tuple(tokens), raw_text=" ".join(tokens), label=label
        )
        mentions = find_mentions(doc.tokens, lexicon=config.lexicon)
        if len(mentions) != 1 or mentions[0].entry_id != entry.id:
            # only reachable when a custom lexicon collides with template words
            raise ValidationError(
                f"lexicon surfaces collide with template vocabulary in {doc.raw_text!r}"
            )
        docs.append(doc)
        truth.append(
            TruthRecord(
                doc_id=doc.id,
                stereotyped=stereotyped,
                sgt=entry.term,
                template_id=template_id,
                label=label,
            )
        )
    return docs, truth


def truth_rows(truth: list[TruthRecord]) -> list[dict]:
    return [
        {
            "id": t.doc_id,
            "stereotyped": t.stereotyped,
            "sgt": t.sgt,
            "template_id": t.template_id,
            "label": t.label,
        }
        for t in truth
    ]

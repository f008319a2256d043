"""Symmetric/asymmetric counterfactual partitioning and pairing-target policies.

A counterfactual is symmetric when its likelihood is at least the original's
(ties included): the substitution did not break the sentence's meaning, so a
fair classifier should treat the pair alike. Policies select which variants a
document gets paired with during training:

  ALL  every variant, unfiltered
  NEG  every variant for non-hate documents, none for hate documents
  SC   variants sharing the mentioned SGT's social category
  ASY  the symmetric subset (asymmetric counterfactuals excluded)
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .data import Document, ValidationError
from .lexicon import SgtLexicon
from .scoring import ScoredSet


class PairingPolicy(enum.Enum):
    ALL = "all"
    NEG = "neg"
    SC = "sc"
    ASY = "asy"

    @classmethod
    def parse(cls, label: str) -> "PairingPolicy":
        try:
            return cls(label.lower())
        except ValueError:
            raise ValidationError(
                f"unknown pairing policy {label!r}; expected one of "
                f"{[p.value for p in cls]}"
            ) from None


@dataclass(frozen=True)
class SymmetricSet:
    doc_id: str
    kept: tuple[int, ...]  # indices into the ScoredSet's variant list
    policy: PairingPolicy


def symmetric_subset(scored: ScoredSet) -> SymmetricSet:
    """Variants whose log-likelihood is >= the original's (ties kept)."""
    kept = tuple(
        i for i, ll in enumerate(scored.variant_lls) if ll >= scored.original_ll
    )
    return SymmetricSet(doc_id=scored.cfset.original.id, kept=kept, policy=PairingPolicy.ASY)


def select_pairing_targets(
    doc: Document,
    scored: ScoredSet,
    lexicon: SgtLexicon,
    policy: PairingPolicy,
) -> SymmetricSet:
    """Variant indices the document is paired with under the given policy."""
    if scored.cfset.original.id != doc.id:
        raise ValidationError(
            f"scored set belongs to {scored.cfset.original.id!r}, not {doc.id!r}"
        )
    variants = scored.cfset.variants
    if policy is PairingPolicy.ALL:
        kept = tuple(range(len(variants)))
    elif policy is PairingPolicy.NEG:
        if doc.label is None:
            raise ValidationError(f"document {doc.id!r} has no label; NEG pairing needs one")
        kept = tuple(range(len(variants))) if doc.label == 0 else ()
    elif policy is PairingPolicy.SC:
        category = lexicon.entry(scored.cfset.mention.entry_id).category
        kept = tuple(
            i for i, v in enumerate(variants) if lexicon.entry(v.entry_id).category == category
        )
    else:
        return symmetric_subset(scored)
    return SymmetricSet(doc_id=doc.id, kept=kept, policy=policy)

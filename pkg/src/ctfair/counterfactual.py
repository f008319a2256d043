"""Counterfactual generation by social-group-token substitution."""
from __future__ import annotations

from dataclasses import dataclass

from .data import Document, ValidationError, tokenize
from .lexicon import Mention, SgtEntry, SgtLexicon


@dataclass(frozen=True)
class CounterfactualVariant:
    entry_id: int
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class CounterfactualSet:
    """A document plus its SGT-substituted variants, in lexicon order."""

    original: Document
    mention: Mention
    variants: tuple[CounterfactualVariant, ...]


def substitute(doc: Document, mention: Mention, target: SgtEntry) -> CounterfactualVariant:
    """Replace the mention span with the target SGT, matching grammatical number.

    A plural mention takes the target's plural surface (first variant, or the
    term plus "s" when the entry lists none); a singular mention takes the
    base term. No article correction is attempted.
    """
    if mention.start < 0 or mention.length < 1 or mention.start + mention.length > len(doc.tokens):
        raise ValidationError(
            f"mention span [{mention.start}, {mention.start + mention.length}) is invalid "
            f"for document {doc.id!r} of length {len(doc.tokens)}"
        )
    if target.id == mention.entry_id:
        raise ValidationError(f"target entry {target.id} is the mentioned entry itself")
    surface = target.plural_surface() if mention.plural else target.term
    replacement = tokenize(surface)
    tokens = doc.tokens[: mention.start] + replacement + doc.tokens[mention.start + mention.length :]
    return CounterfactualVariant(entry_id=target.id, tokens=tokens)


def generate_all(doc: Document, mention: Mention, lexicon: SgtLexicon) -> CounterfactualSet:
    """One variant per lexicon entry other than the mentioned one."""
    variants = tuple(
        substitute(doc, mention, entry) for entry in lexicon.entries if entry.id != mention.entry_id
    )
    return CounterfactualSet(original=doc, mention=mention, variants=variants)


def restrict_same_category(cfset: CounterfactualSet, lexicon: SgtLexicon) -> CounterfactualSet:
    """Keep only variants whose SGT shares the mentioned entry's category."""
    category = lexicon.entry(cfset.mention.entry_id).category
    kept = tuple(v for v in cfset.variants if lexicon.entry(v.entry_id).category == category)
    return CounterfactualSet(original=cfset.original, mention=cfset.mention, variants=kept)

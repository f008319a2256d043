"""Social group token (SGT) lexicon: loading, validation, and mention detection.

An entry owns one canonical lowercase term plus surface variants. By
convention the first variant, when present, is the plural form; later
variants are alternate spellings treated as singular. Matching is greedy
longest-match-first over whitespace tokens, so multi-word terms such as
"african american" win over their single-word prefixes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .data import Document, ValidationError

_DEFAULT_LEXICON_RESOURCE = "sgt_lexicon.json"


@dataclass(frozen=True)
class SgtEntry:
    id: int
    term: str
    category: str
    variants: tuple[str, ...] = ()

    def surfaces(self) -> tuple[str, ...]:
        return (self.term,) + self.variants

    def plural_surface(self) -> str:
        """The surface emitted when substituting into a plural slot."""
        return self.variants[0] if self.variants else self.term + "s"

    def is_plural_surface(self, surface: str) -> bool:
        return bool(self.variants) and surface == self.variants[0]


@dataclass(frozen=True)
class Mention:
    """One SGT occurrence in a token sequence: [start, start+length)."""

    entry_id: int
    start: int
    length: int
    surface: str
    plural: bool = False


@dataclass(frozen=True)
class SgtLexicon:
    entries: tuple[SgtEntry, ...]
    surface_index: dict[str, tuple[int, int]]
    # token-tuple -> (entry id, surface); built once, read-only afterwards
    _token_index: dict[tuple[str, ...], tuple[int, str]] = field(repr=False, default_factory=dict)
    _match_lengths: tuple[int, ...] = field(repr=False, default=())

    @classmethod
    def build(cls, entries: list[SgtEntry]) -> "SgtLexicon":
        if not entries:
            raise ValidationError("lexicon has no entries")
        surface_index: dict[str, tuple[int, int]] = {}
        token_index: dict[tuple[str, ...], tuple[int, str]] = {}
        for entry in entries:
            for form_id, surface in enumerate(entry.surfaces()):
                if surface in surface_index:
                    other = entries[surface_index[surface][0]]
                    raise ValidationError(
                        f"surface {surface!r} appears in both entry {other.id} ({other.term!r}) "
                        f"and entry {entry.id} ({entry.term!r})"
                    )
                surface_index[surface] = (entry.id, form_id)
                token_index[tuple(surface.split())] = (entry.id, surface)
        lengths = tuple(sorted({len(key) for key in token_index}, reverse=True))
        return cls(
            entries=tuple(entries),
            surface_index=surface_index,
            _token_index=token_index,
            _match_lengths=lengths,
        )

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, entry_id: int) -> SgtEntry:
        return self.entries[entry_id]

    def categories(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for entry in self.entries:
            out.setdefault(entry.category, []).append(entry.id)
        return out


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def load_lexicon(source: str) -> SgtLexicon:
    """Parse and validate lexicon-file content (a JSON array of entries)."""
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"lexicon is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise ValidationError("lexicon must be a JSON array of entry objects")
    entries: list[SgtEntry] = []
    for idx, row in enumerate(raw):
        if not isinstance(row, dict):
            raise ValidationError(f"lexicon entry {idx}: expected an object")
        term = _normalize(str(row.get("term", "")))
        category = _normalize(str(row.get("category", "")))
        if not term:
            raise ValidationError(f"lexicon entry {idx}: empty term")
        if not category:
            raise ValidationError(f"lexicon entry {idx}: empty category")
        variants = tuple(_normalize(str(v)) for v in row.get("variants", []) or [])
        if any(not v for v in variants):
            raise ValidationError(f"lexicon entry {idx}: empty variant string")
        entries.append(SgtEntry(id=idx, term=term, category=category, variants=variants))
    return SgtLexicon.build(entries)


def load_lexicon_file(path: str | Path) -> SgtLexicon:
    path = Path(path)
    try:
        return load_lexicon(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read lexicon {path}: {exc}") from exc


def default_lexicon() -> SgtLexicon:
    """The bundled 77-term lexicon (see resources/sgt_lexicon.json)."""
    text = resources.files("ctfair.resources").joinpath(_DEFAULT_LEXICON_RESOURCE).read_text("utf-8")
    return load_lexicon(text)


def find_mentions(tokens: tuple[str, ...], lexicon: SgtLexicon) -> list[Mention]:
    """All non-overlapping SGT matches, longest-first at each position."""
    mentions: list[Mention] = []
    n = len(tokens)
    i = 0
    while i < n:
        hit = None
        for length in lexicon._match_lengths:
            if i + length > n:
                continue
            key = tuple(tokens[i : i + length])
            found = lexicon._token_index.get(key)
            if found is not None:
                entry_id, surface = found
                hit = Mention(
                    entry_id=entry_id,
                    start=i,
                    length=length,
                    surface=surface,
                    plural=lexicon.entry(entry_id).is_plural_surface(surface),
                )
                break
        if hit is not None:
            mentions.append(hit)
            i += hit.length
        else:
            i += 1
    return mentions


def filter_single_mention(
    corpus: list[Document], lexicon: SgtLexicon
) -> list[tuple[Document, Mention]]:
    """Documents that mention exactly one SGT, paired with that mention."""
    out = []
    for doc in corpus:
        mentions = find_mentions(doc.tokens, lexicon)
        if len(mentions) == 1:
            out.append((doc, mentions[0]))
    return out

"""Dataset primitives: documents, tokenization, and JSONL input/output."""
from __future__ import annotations

import json
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable


class ValidationError(ValueError):
    """An input file, argument, or precondition violates the toolkit's contracts."""


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase, split on whitespace, strip ASCII punctuation from token edges.

    Intra-word hyphens and apostrophes survive ("non-binary", "don't"); tokens
    that are nothing but punctuation are dropped.
    """
    out = []
    for piece in text.lower().split():
        tok = piece.strip(string.punctuation)
        if tok:
            out.append(tok)
    return tuple(out)


@dataclass(frozen=True)
class Document:
    """One text instance; label is 1 for hate, 0 for non-hate, None if unlabeled."""

    id: str
    tokens: tuple[str, ...]
    raw_text: str
    label: int | None = None

    def __post_init__(self) -> None:
        if self.label is not None and self.label not in (0, 1):
            raise ValidationError(f"document {self.id!r}: label must be 0 or 1, got {self.label!r}")

    @classmethod
    def from_text(cls, doc_id: str, text: str, label: int | None = None) -> "Document":
        return cls(id=doc_id, tokens=tokenize(text), raw_text=text, label=label)


def read_dataset(path: str | Path, require_labels: bool = False) -> list[Document]:
    """Read a JSONL dataset of {"id", "text", "label"?} rows.

    Ids must be unique; labels, when present, must be 0 or 1.
    """
    path = Path(path)
    docs: list[Document] = []
    seen: set[str] = set()
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read dataset {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(row, dict) or "id" not in row or "text" not in row:
            raise ValidationError(f'{path}:{lineno}: expected {{"id", "text", ...}} object')
        doc_id = str(row["id"])
        if doc_id in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
        seen.add(doc_id)
        label = row.get("label")
        if label is None and require_labels:
            raise ValidationError(f"{path}:{lineno}: document {doc_id!r} is missing a label")
        if label is not None:
            if label not in (0, 1):
                raise ValidationError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            label = int(label)
        docs.append(Document.from_text(doc_id, str(row["text"]), label))
    if not docs:
        raise ValidationError(f"{path}: dataset is empty")
    return docs


def write_dataset(docs: Iterable[Document], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            row: dict = {"id": doc.id, "text": doc.raw_text}
            if doc.label is not None:
                row["label"] = doc.label
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return rows

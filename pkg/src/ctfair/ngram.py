"""Trainable n-gram language model with interpolated absolute discounting.

Sentence likelihood is the desk-scale stand-in for a large generative model:
what matters downstream is the relative likelihood of a sentence against its
SGT-substituted counterfactuals, and a smoothed n-gram model trained on the
corpus under audit preserves exactly the co-occurrence structure those
comparisons probe.

Smoothing: P(w | c) = max(count(c, w) - d, 0) / N(c) + (d * T(c) / N(c)) * P(w | c')
where N(c) is the total count of context c, T(c) the number of distinct
continuations, and c' drops the oldest context token. Unseen contexts fall
through to the lower order; the recursion bottoms out at the uniform
distribution over the predictable vocabulary (which includes UNK and EOS but
never BOS). Probabilities therefore sum to one exactly for every context.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .data import Document, ValidationError

UNK = "<unk>"
BOS = "<bos>"
EOS = "<eos>"

_CTX_SEP = "\x1f"
MODEL_FORMAT_VERSION = 1


@dataclass
class NgramModel:
    """Immutable after training; the memo caches are derived state only."""

    order: int
    discount: float
    vocab: frozenset[str]  # predictable tokens incl. UNK and EOS; BOS is context-only
    counts: dict[tuple[str, ...], dict[str, int]]
    _totals: dict[tuple[str, ...], tuple[int, int]] = field(
        default_factory=dict, repr=False, compare=False
    )
    _prob_memo: dict[tuple[tuple[str, ...], str], float] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValidationError(f"order must be >= 1, got {self.order}")
        if not 0.0 < self.discount < 1.0:
            raise ValidationError(f"discount must lie strictly in (0, 1), got {self.discount}")
        if UNK not in self.vocab or EOS not in self.vocab:
            raise ValidationError("vocab must contain the reserved UNK and EOS tokens")
        if BOS in self.vocab:
            raise ValidationError("BOS is context-only and must not be predictable")

    def _context_total(self, ctx: tuple[str, ...]) -> tuple[int, int]:
        cached = self._totals.get(ctx)
        if cached is None:
            node = self.counts[ctx]
            cached = (sum(node.values()), len(node))
            self._totals[ctx] = cached
        return cached

    def map_token(self, token: str) -> str:
        return token if token in self.vocab else UNK


def train_ngram(
    corpus: Iterable[Document],
    order: int = 3,
    discount: float = 0.75,
    min_count: int = 2,
) -> NgramModel:
    """Count n-grams of every length up to `order` over BOS-padded sentences.

    Tokens below `min_count` corpus frequency collapse to UNK before counting,
    so the stored counts are exactly what the smoothing recursion consumes.
    """
    docs = list(corpus)
    if not docs:
        raise ValidationError("training corpus is empty")
    if not 1 <= order <= 5:
        raise ValidationError(f"order must be in [1, 5], got {order}")
    if not 0.0 < discount < 1.0:
        raise ValidationError(f"discount must lie strictly in (0, 1), got {discount}")
    if min_count < 1:
        raise ValidationError(f"min_count must be >= 1, got {min_count}")

    freq: dict[str, int] = {}
    for doc in docs:
        for tok in doc.tokens:
            freq[tok] = freq.get(tok, 0) + 1
    vocab = frozenset(t for t, n in freq.items() if n >= min_count) | {UNK, EOS}

    counts: dict[tuple[str, ...], dict[str, int]] = {}
    pad = (BOS,) * (order - 1)
    for doc in docs:
        mapped = tuple(t if t in vocab else UNK for t in doc.tokens) + (EOS,)
        padded = pad + mapped
        for i in range(order - 1, len(padded)):
            target = padded[i]
            for k in range(order):
                ctx = padded[i - k : i]
                node = counts.setdefault(ctx, {})
                node[target] = node.get(target, 0) + 1
    return NgramModel(order=order, discount=discount, vocab=vocab, counts=counts)


def _interp(model: NgramModel, ctx: tuple[str, ...], word: str) -> float:
    memo_key = (ctx, word)
    cached = model._prob_memo.get(memo_key)
    if cached is not None:
        return cached
    if ctx:
        lower = _interp(model, ctx[1:], word)
    else:
        lower = 1.0 / len(model.vocab)
    node = model.counts.get(ctx)
    if node is None:
        value = lower  # unseen context: fall through to the lower order
    else:
        total, distinct = model._context_total(ctx)
        d = model.discount
        value = max(node.get(word, 0) - d, 0.0) / total + (d * distinct / total) * lower
    model._prob_memo[memo_key] = value
    return value


def prob(model: NgramModel, context: Sequence[str], word: str) -> float:
    """Smoothed next-token probability; OOV tokens map to UNK on both sides."""
    w = model.map_token(word)
    if model.order == 1:
        ctx: tuple[str, ...] = ()
    else:
        tail = tuple(context)[-(model.order - 1) :]
        ctx = tuple(t if t == BOS else model.map_token(t) for t in tail)
    return _interp(model, ctx, w)


def score_sequence(model: NgramModel, tokens: Sequence[str]) -> float:
    """Natural-log likelihood of the sequence plus its terminating EOS."""
    if not tokens:
        raise ValidationError("cannot score an empty token sequence")
    width = model.order - 1
    ctx = (BOS,) * width
    total = 0.0
    for tok in tuple(tokens) + (EOS,):
        w = model.map_token(tok)
        total += math.log(_interp(model, ctx, w))
        if width:
            ctx = (ctx + (w,))[-width:]
    return total


def save_model(model: NgramModel, path: str | Path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "order": model.order,
        "discount": model.discount,
        "vocab": sorted(model.vocab),
        "counts": {
            _CTX_SEP.join(ctx): dict(sorted(node.items()))
            for ctx, node in sorted(model.counts.items())
        },
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_model(path: str | Path) -> NgramModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read model {path}: {exc}") from exc
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValidationError(
            f"{path}: unsupported model format_version {payload.get('format_version')!r}"
        )
    counts = {
        tuple(key.split(_CTX_SEP)) if key else (): {t: int(n) for t, n in node.items()}
        for key, node in payload["counts"].items()
    }
    return NgramModel(
        order=int(payload["order"]),
        discount=float(payload["discount"]),
        vocab=frozenset(payload["vocab"]),
        counts=counts,
    )

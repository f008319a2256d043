"""Fairness and classification metrics, plus the symmetric template set.

CTF (counterfactual token fairness) is the mean absolute difference of
predicted probabilities over (sentence, counterfactual) pairs: zero means the
classifier ignores which social group is mentioned. Equality of odds compares
group-conditional true-positive and true-negative rates across SGTs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .classifier import TrainedModel, mask_tokens, predict, predict_tokens
from .counterfactual import CounterfactualVariant
from .data import Document, ValidationError
from .lexicon import SgtLexicon, find_mentions

_DEFAULT_ADJECTIVES_RESOURCE = "adjectives.json"

SYM_TEMPLATES = (
    ("you", "are", "a", "{adj}", "{sgt}"),
    ("being", "{sgt}", "is", "{adj}"),
)


@dataclass(frozen=True)
class CtfScore:
    mean_abs_diff: float
    n_pairs: int


@dataclass(frozen=True)
class GroupRates:
    tp_rate: float | None
    tn_rate: float | None
    n_pos: int
    n_neg: int


@dataclass(frozen=True)
class OddsReport:
    per_sgt: dict[int, GroupRates]
    tp_mean: float | None
    tp_sd: float | None
    tn_mean: float | None
    tn_sd: float | None


@dataclass(frozen=True)
class PrfReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int


def _model_prob(model: TrainedModel, tokens: tuple[str, ...], lexicon: SgtLexicon | None,
                memo: dict[tuple[str, ...], float]) -> float:
    cached = memo.get(tokens)
    if cached is None:
        eval_tokens = mask_tokens(tokens, lexicon) if (model.masked and lexicon) else tokens
        cached = predict_tokens(model, eval_tokens).prob
        memo[tokens] = cached
    return cached


def ctf(
    model: TrainedModel,
    pairs: Sequence[tuple[Document, CounterfactualVariant]],
    lexicon: SgtLexicon | None = None,
) -> CtfScore:
    """Mean |prob(x) - prob(x')| over the given counterfactual pairs."""
    if not pairs:
        raise ValidationError("CTF needs at least one counterfactual pair")
    if model.masked and lexicon is None:
        raise ValidationError("masked model: ctf needs the lexicon to mask inputs")
    memo: dict[tuple[str, ...], float] = {}
    total = 0.0
    for doc, variant in pairs:
        p_orig = _model_prob(model, doc.tokens, lexicon, memo)
        p_var = _model_prob(model, variant.tokens, lexicon, memo)
        total += abs(p_orig - p_var)
    return CtfScore(mean_abs_diff=total / len(pairs), n_pairs=len(pairs))


def _mean_sd(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    mean = sum(values) / len(values)
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    return mean, sd


def equality_of_odds(
    model: TrainedModel,
    test: Sequence[Document],
    lexicon: SgtLexicon,
    threshold: float = 0.5,
) -> OddsReport:
    """Per-SGT TP/TN rates with mean and population sd across SGT groups.

    Every test document must mention exactly one SGT; a group's rate is absent
    when it has no documents of the corresponding label.
    """
    if not 0.0 < threshold < 1.0:
        raise ValidationError(f"threshold must lie in (0, 1), got {threshold}")
    tallies: dict[int, list[int]] = {}  # entry -> [tp, fn, tn, fp]
    for doc in test:
        if doc.label not in (0, 1):
            raise ValidationError(f"document {doc.id!r} needs a binary label")
        mentions = find_mentions(doc.tokens, lexicon)
        if len(mentions) != 1:
            raise ValidationError(
                f"document {doc.id!r} mentions {len(mentions)} SGTs; equality of odds "
                "requires exactly one"
            )
        entry = mentions[0].entry_id
        positive = predict(model, doc, lexicon).prob >= threshold
        cell = tallies.setdefault(entry, [0, 0, 0, 0])
        if doc.label == 1:
            cell[0 if positive else 1] += 1
        else:
            cell[3 if positive else 2] += 1

    per_sgt: dict[int, GroupRates] = {}
    tp_rates: list[float] = []
    tn_rates: list[float] = []
    for entry in sorted(tallies):
        tp, fn, tn, fp = tallies[entry]
        n_pos, n_neg = tp + fn, tn + fp
        tp_rate = tp / n_pos if n_pos else None
        tn_rate = tn / n_neg if n_neg else None
        if tp_rate is not None:
            tp_rates.append(tp_rate)
        if tn_rate is not None:
            tn_rates.append(tn_rate)
        per_sgt[entry] = GroupRates(tp_rate=tp_rate, tn_rate=tn_rate, n_pos=n_pos, n_neg=n_neg)
    tp_mean, tp_sd = _mean_sd(tp_rates)
    tn_mean, tn_sd = _mean_sd(tn_rates)
    return OddsReport(per_sgt=per_sgt, tp_mean=tp_mean, tp_sd=tp_sd, tn_mean=tn_mean, tn_sd=tn_sd)


def classification_report(
    model: TrainedModel,
    test: Sequence[Document],
    threshold: float = 0.5,
    lexicon: SgtLexicon | None = None,
) -> PrfReport:
    """Accuracy/precision/recall/F1 with hate as the positive class."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError(f"threshold must lie in (0, 1), got {threshold}")
    tp = fp = tn = fn = 0
    for doc in test:
        if doc.label not in (0, 1):
            raise ValidationError(f"document {doc.id!r} needs a binary label")
        positive = predict(model, doc, lexicon).prob >= threshold
        if doc.label == 1:
            tp, fn = (tp + 1, fn) if positive else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if positive else (fp, tn + 1)
    n = tp + fp + tn + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PrfReport(
        accuracy=(tp + tn) / n if n else 0.0,
        precision=precision,
        recall=recall,
        f1=f1,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def load_default_adjectives() -> list[tuple[str, str]]:
    """The bundled (adjective, polarity) list: 10 positive, 10 negative."""
    text = resources.files("ctfair.resources").joinpath(_DEFAULT_ADJECTIVES_RESOURCE).read_text("utf-8")
    return [(row["adjective"], row["polarity"]) for row in json.loads(text)]


def load_adjectives_file(path: str | Path) -> list[tuple[str, str]]:
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    return [(row["adjective"], row["polarity"]) for row in rows]


def generate_sym_templates(
    lexicon: SgtLexicon,
    adjectives: Sequence[tuple[str, str]] | None = None,
) -> list[tuple[Document, CounterfactualVariant]]:
    """Template-instantiated pairs where context and SGT are independent.

    For each template x adjective x SGT the original is emitted against every
    other SGT, so all pairs are symmetric by construction and a fair model
    should score near-zero CTF on them.
    """
    if len(lexicon) < 2:
        raise ValidationError("symmetric templates need at least two lexicon entries")
    adjectives = list(adjectives) if adjectives is not None else load_default_adjectives()
    if not adjectives:
        raise ValidationError("adjective list is empty")
    pairs: list[tuple[Document, CounterfactualVariant]] = []
    for t_idx, template in enumerate(SYM_TEMPLATES):
        for adj, _polarity in adjectives:
            for entry in lexicon.entries:
                tokens: list[str] = []
                sgt_start = -1
                for slot in template:
                    if slot == "{adj}":
                        tokens.append(adj)
                    elif slot == "{sgt}":
                        sgt_start = len(tokens)
                        tokens.extend(entry.term.split())
                    else:
                        tokens.append(slot)
                doc = Document(
                    id=f"sym:t{t_idx}:{adj}:{entry.term}",
                    tokens=tuple(tokens),
                    raw_text=" ".join(tokens),
                )
                for other in lexicon.entries:
                    if other.id == entry.id:
                        continue
                    var_tokens = (
                        doc.tokens[:sgt_start]
                        + tuple(other.term.split())
                        + doc.tokens[sgt_start + len(entry.term.split()) :]
                    )
                    pairs.append((doc, CounterfactualVariant(entry_id=other.id, tokens=var_tokens)))
    return pairs

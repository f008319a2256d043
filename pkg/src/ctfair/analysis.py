"""Likelihood-rank analysis: how predictable is the mentioned SGT from context?

A document whose original SGT outranks most substitutions carries stereotyped
context; neutral context yields ranks spread uniformly over the candidates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .data import ValidationError
from .lexicon import SgtLexicon
from .scoring import ScoredSet


@dataclass(frozen=True)
class RankResult:
    doc_id: str
    mentioned_entry: int
    rank: int  # 1 = original scores highest; ties favor the original
    total: int  # candidates considered: original + variants
    better_ranked_entries: tuple[int, ...]  # sorted by descending score


@dataclass(frozen=True)
class RankAggregate:
    n_docs: int
    pct_rank_one: float
    pct_top_decile: float
    same_cat_given_rank2: float | None
    same_cat_in_better_given_top_decile: float | None
    same_cat_in_better_given_top_decile_macro: float | None
    per_sgt_median_rank: dict[int, float]
    per_sgt_count: dict[int, int]
    sd_of_per_sgt_mean_rank: float


def rank_original(scored: ScoredSet) -> RankResult:
    """Rank of the original among all candidates; a tie never beats it."""
    better = [
        (ll, variant.entry_id)
        for variant, ll in zip(scored.cfset.variants, scored.variant_lls)
        if ll > scored.original_ll
    ]
    better.sort(key=lambda pair: (-pair[0], pair[1]))
    return RankResult(
        doc_id=scored.cfset.original.id,
        mentioned_entry=scored.cfset.mention.entry_id,
        rank=1 + len(better),
        total=1 + len(scored.cfset.variants),
        better_ranked_entries=tuple(entry for _, entry in better),
    )


def _median(values: list[int]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def _population_sd(values: list[float]) -> float:
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def aggregate_ranks(results: list[RankResult], lexicon: SgtLexicon) -> RankAggregate:
    """Corpus-level rank statistics.

    Top decile means rank <= ceil(total / 10), so rank-one documents are
    counted inside it. The same-category share over better-ranked entries is
    reported both micro-averaged (pooling entries across documents) and
    macro-averaged (per-document fractions averaged).
    """
    if not results:
        raise ValidationError("no rank results to aggregate")
    totals = {r.total for r in results}
    if len(totals) > 1:
        raise ValidationError(f"mixed candidate totals in rank results: {sorted(totals)}")
    total = totals.pop()
    n = len(results)
    decile = math.ceil(total / 10)

    n_rank_one = sum(1 for r in results if r.rank == 1)
    n_top_decile = sum(1 for r in results if r.rank <= decile)

    rank2 = [r for r in results if r.rank == 2]
    same_cat_rank2 = None
    if rank2:
        hits = sum(
            1
            for r in rank2
            if lexicon.entry(r.better_ranked_entries[0]).category
            == lexicon.entry(r.mentioned_entry).category
        )
        same_cat_rank2 = 100.0 * hits / len(rank2)

    in_decile_beaten = [r for r in results if 2 <= r.rank <= decile]
    micro = macro = None
    if in_decile_beaten:
        pooled_hits = 0
        pooled_total = 0
        fractions = []
        for r in in_decile_beaten:
            category = lexicon.entry(r.mentioned_entry).category
            hits = sum(
                1 for e in r.better_ranked_entries if lexicon.entry(e).category == category
            )
            pooled_hits += hits
            pooled_total += len(r.better_ranked_entries)
            fractions.append(hits / len(r.better_ranked_entries))
        micro = 100.0 * pooled_hits / pooled_total
        macro = 100.0 * sum(fractions) / len(fractions)

    by_entry: dict[int, list[int]] = {}
    for r in results:
        by_entry.setdefault(r.mentioned_entry, []).append(r.rank)
    medians = {entry: _median(ranks) for entry, ranks in sorted(by_entry.items())}
    counts = {entry: len(ranks) for entry, ranks in sorted(by_entry.items())}
    means = [sum(ranks) / len(ranks) for _, ranks in sorted(by_entry.items())]

    return RankAggregate(
        n_docs=n,
        pct_rank_one=100.0 * n_rank_one / n,
        pct_top_decile=100.0 * n_top_decile / n,
        same_cat_given_rank2=same_cat_rank2,
        same_cat_in_better_given_top_decile=micro,
        same_cat_in_better_given_top_decile_macro=macro,
        per_sgt_median_rank=medians,
        per_sgt_count=counts,
        sd_of_per_sgt_mean_rank=_population_sd(means),
    )

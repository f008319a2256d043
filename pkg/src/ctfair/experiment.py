"""End-to-end experiment: cross-validated training of the model variants and
a combined fairness/performance report.

The held-out test split (seeded shuffle) is fixed before folding; every
fold-model of every variant is evaluated on it, and the CSV emits cross-fold
means per variant so reruns on other datasets stay column-compatible.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
import random
from typing import Sequence

from . import classifier, metrics
from .classifier import FeatureConfig, TrainHyper, TrainedModel
from .counterfactual import generate_all
from .data import Document, ValidationError, read_dataset
from .filtering import PairingPolicy, symmetric_subset
from .lexicon import SgtLexicon, default_lexicon, filter_single_mention, load_lexicon_file
from .ngram import load_model as load_ngram_model
from .scoring import ExternalScorer, NgramScorer, ScoreCache, Scorer, ScoredSet, score_set

log = logging.getLogger(__name__)

VARIANTS: dict[str, tuple[PairingPolicy, bool]] = {
    # name -> (pairing policy, masked); vanilla and mask train with lambda 0
    "vanilla": (PairingPolicy.ALL, False),
    "mask": (PairingPolicy.ALL, True),
    "clp_neg": (PairingPolicy.NEG, False),
    "clp_sc": (PairingPolicy.SC, False),
    "clp_asy": (PairingPolicy.ASY, False),
}

CSV_COLUMNS = (
    "model", "acc", "precision", "recall", "f1",
    "tp_mean", "tp_sd", "tn_mean", "tn_sd", "ctf_asym", "ctf_sym",
)

METRIC_KEYS = (
    "accuracy", "precision", "recall", "f1",
    "tp_mean", "tp_sd", "tn_mean", "tn_sd", "ctf_asym", "ctf_sym",
)


@dataclass(frozen=True)
class RunConfig:
    dataset: Path
    lexicon: Path | None
    scorer_model: Path | None
    scorer_command: str | None
    policies: tuple[str, ...]
    folds: int
    test_fraction: float
    seed: int
    out_dir: Path
    hyper: TrainHyper
    threshold: float = 0.5
    adjectives: Path | None = None
    use_cache: bool = True

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValidationError(f"folds must be >= 2, got {self.folds}")
        if not 0.0 < self.test_fraction <= 0.5:
            raise ValidationError(f"test_fraction must lie in (0, 0.5], got {self.test_fraction}")
        unknown = [p for p in self.policies if p not in VARIANTS]
        if unknown:
            raise ValidationError(f"unknown model variants: {unknown}; expected {list(VARIANTS)}")
        if not self.policies:
            raise ValidationError("no model variants requested")

    @classmethod
    def from_json_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read run config {path}: {exc}") from exc
        scorer = raw.get("scorer") or {}
        hyper_raw = raw.get("hyper") or {}
        feature = FeatureConfig(
            dim=int(hyper_raw.get("feature_dim", FeatureConfig().dim)),
            ngram_orders=tuple(hyper_raw.get("ngram_orders", (1, 2))),
            hash_seed=int(hyper_raw.get("hash_seed", 0)),
        )
        hyper = TrainHyper(
            lam=float(hyper_raw.get("lambda", 1.0)),
            epochs=int(hyper_raw.get("epochs", 20)),
            learning_rate=float(hyper_raw.get("learning_rate", 0.5)),
            batch_size=int(hyper_raw.get("batch_size", 32)),
            seed=int(raw.get("seed", 0)),
            feature=feature,
            pair_cap=int(hyper_raw.get("pair_cap", 5)),
        )
        try:
            return cls(
                dataset=Path(raw["dataset"]),
                lexicon=Path(raw["lexicon"]) if raw.get("lexicon") else None,
                scorer_model=Path(scorer["model"]) if scorer.get("model") else None,
                scorer_command=scorer.get("external"),
                policies=tuple(raw.get("policies", list(VARIANTS))),
                folds=int(raw.get("folds", 5)),
                test_fraction=float(raw.get("test_fraction", 0.2)),
                seed=int(raw.get("seed", 0)),
                out_dir=Path(raw.get("out_dir", "experiment_out")),
                hyper=hyper,
                threshold=float(raw.get("threshold", 0.5)),
                adjectives=Path(raw["adjectives"]) if raw.get("adjectives") else None,
                use_cache=bool(raw.get("cache", True)),
            )
        except KeyError as exc:
            raise ValidationError(f"run config {path} is missing required key {exc}") from exc


@dataclass
class VariantResult:
    folds: list[dict]
    mean: dict


@dataclass
class ExperimentReport:
    variants: dict[str, VariantResult]
    n_docs: int
    n_test: int
    n_excluded_from_pairing: int
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "n_docs": self.n_docs,
            "n_test": self.n_test,
            "n_excluded_from_pairing": self.n_excluded_from_pairing,
            "seed": self.seed,
            "variants": {
                name: {"folds": r.folds, "mean": r.mean} for name, r in self.variants.items()
            },
        }


def split_dataset(
    docs: Sequence[Document], folds: int, test_fraction: float, seed: int
) -> tuple[list[Document], list[list[Document]]]:
    """Seeded-shuffle split into a held-out test set and exact-size folds."""
    ids = list(range(len(docs)))
    random.Random(seed).shuffle(ids)
    n_test = max(1, round(len(docs) * test_fraction))
    if len(docs) - n_test < folds:
        raise ValidationError(
            f"{len(docs)} documents cannot support {folds} folds after a "
            f"{test_fraction:.0%} test split"
        )
    test = [docs[i] for i in ids[:n_test]]
    rest = ids[n_test:]
    fold_docs = [[docs[i] for i in rest[f::folds]] for f in range(folds)]
    return test, fold_docs


def build_scorer(config: RunConfig) -> Scorer | None:
    if config.scorer_model is not None:
        return NgramScorer(load_ngram_model(config.scorer_model))
    if config.scorer_command:
        return ExternalScorer(config.scorer_command)
    return None


def _mean_or_none(values: list) -> float | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return sum(present) / len(present)


def run_experiment(config: RunConfig) -> ExperimentReport:
    docs = read_dataset(config.dataset, require_labels=True)
    lexicon = load_lexicon_file(config.lexicon) if config.lexicon else default_lexicon()
    adjectives = (
        metrics.load_adjectives_file(config.adjectives) if config.adjectives else None
    )
    config.out_dir.mkdir(parents=True, exist_ok=True)

    single = filter_single_mention(docs, lexicon)
    single_ids = {doc.id for doc, _ in single}
    excluded = len(docs) - len(single)
    if excluded:
        log.info(
            "%d document(s) without exactly one SGT mention kept for classification "
            "but excluded from pairing and odds grouping",
            excluded,
        )

    test, fold_docs = split_dataset(docs, config.folds, config.test_fraction, config.seed)
    test_ids = {d.id for d in test}
    assert not test_ids & {d.id for fold in fold_docs for d in fold}

    scorer = build_scorer(config)
    if scorer is None and "clp_asy" in config.policies:
        raise ValidationError("clp_asy requires a scorer (internal model or external command)")

    cache = None
    if config.use_cache:
        cache = ScoreCache(config.out_dir / "cache" / "scores.tsv")

    # Score every single-mention document once; training folds and the test-set
    # asymmetric pair extraction all reuse these.
    scored_sets: dict[str, ScoredSet] = {}
    if scorer is not None:
        for doc, mention in single:
            scored_sets[doc.id] = score_set(scorer, generate_all(doc, mention, lexicon), cache)

    sym_pairs = metrics.generate_sym_templates(lexicon, adjectives)
    asym_pairs = []
    for doc in test:
        scored = scored_sets.get(doc.id)
        if scored is None:
            continue
        symmetric = set(symmetric_subset(scored).kept)
        asym_pairs += [
            (doc, scored.cfset.variants[i])
            for i in range(len(scored.cfset.variants))
            if i not in symmetric
        ]

    test_single = [doc for doc in test if doc.id in single_ids]
    report = ExperimentReport(
        variants={}, n_docs=len(docs), n_test=len(test),
        n_excluded_from_pairing=excluded, seed=config.seed,
    )
    for name in config.policies:
        policy, masked = VARIANTS[name]
        lam = config.hyper.lam if name.startswith("clp") else 0.0
        fold_rows: list[dict] = []
        for f in range(config.folds):
            train_docs = [d for g in range(config.folds) if g != f for d in fold_docs[g]]
            hyper = TrainHyper(
                lam=lam,
                epochs=config.hyper.epochs,
                learning_rate=config.hyper.learning_rate,
                batch_size=config.hyper.batch_size,
                seed=config.seed + 7919 * f,
                feature=config.hyper.feature,
                masked=masked,
                pair_cap=config.hyper.pair_cap,
            )
            model = classifier.train(
                train_docs, lexicon, scorer, policy, hyper, cache=cache,
                scored_sets=scored_sets or None,
            )
            fold_rows.append(
                evaluate_model(
                    model, test, test_single, lexicon, sym_pairs, asym_pairs, config.threshold,
                    extra={"fold": f},
                )
            )
        mean_row = {key: _mean_or_none([row[key] for row in fold_rows]) for key in METRIC_KEYS}
        report.variants[name] = VariantResult(folds=fold_rows, mean=mean_row)
        log.info("variant %s: mean accuracy %.4f, ctf_sym %s", name,
                 mean_row["accuracy"] or float("nan"), mean_row["ctf_sym"])

    if cache is not None:
        cache.close()
    if isinstance(scorer, ExternalScorer):
        scorer.close()
    write_report(report, config.out_dir)
    return report


def evaluate_model(
    model: TrainedModel,
    test: Sequence[Document],
    test_single: Sequence[Document],
    lexicon: SgtLexicon,
    sym_pairs,
    asym_pairs,
    threshold: float,
    extra: dict | None = None,
) -> dict:
    prf = metrics.classification_report(model, test, threshold, lexicon)
    row = dict(extra or {})
    row.update(
        accuracy=prf.accuracy, precision=prf.precision, recall=prf.recall, f1=prf.f1,
        tp_mean=None, tp_sd=None, tn_mean=None, tn_sd=None, ctf_asym=None, ctf_sym=None,
    )
    if test_single:
        odds = metrics.equality_of_odds(model, test_single, lexicon, threshold)
        row.update(tp_mean=odds.tp_mean, tp_sd=odds.tp_sd, tn_mean=odds.tn_mean, tn_sd=odds.tn_sd)
    if sym_pairs:
        row["ctf_sym"] = metrics.ctf(model, sym_pairs, lexicon).mean_abs_diff
    if asym_pairs:
        row["ctf_asym"] = metrics.ctf(model, asym_pairs, lexicon).mean_abs_diff
    return row


def write_report(report: ExperimentReport, out_dir: Path) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    json_path.write_text(
        json.dumps(report.to_json_dict(), indent=2, ensure_ascii=False), encoding="utf-8"
    )
    csv_path = out_dir / "report.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for name, result in report.variants.items():
            mean = result.mean
            writer.writerow(
                [name]
                + [
                    "" if mean[key] is None else f"{mean[key]:.6f}"
                    for key in METRIC_KEYS
                ]
            )
    return json_path, csv_path

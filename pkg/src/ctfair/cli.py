"""Command-line interface.

Exit codes: 0 success, 1 validation error (bad files, bad arguments),
2 runtime or scorer failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import classifier, metrics, ngram, synth
from .analysis import aggregate_ranks, rank_original
from .counterfactual import CounterfactualVariant, generate_all
from .data import Document, ValidationError, read_dataset, read_jsonl, write_dataset, write_jsonl
from .experiment import RunConfig, run_experiment, write_report
from .filtering import PairingPolicy, select_pairing_targets
from .lexicon import SgtLexicon, default_lexicon, filter_single_mention, load_lexicon_file
from .scoring import ExternalScorer, NgramScorer, ScoreCache, ScoredSet, ScorerError, score_set

log = logging.getLogger("ctfair")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise ValidationError(message)


def _load_lexicon(path: str | None) -> SgtLexicon:
    return load_lexicon_file(path) if path else default_lexicon()


def _build_scorer(model_path: str | None, external: str | None):
    if model_path and external:
        raise ValidationError("give either --model/--scorer-model or --external, not both")
    if model_path:
        return NgramScorer(ngram.load_model(model_path))
    if external:
        return ExternalScorer(external)
    return None


# ---------------------------------------------------------------- subcommands


def _cmd_lexicon_check(args) -> int:
    lexicon = load_lexicon_file(args.path)
    categories = lexicon.categories()
    print(f"entries: {len(lexicon)}")
    print(f"surfaces: {len(lexicon.surface_index)}")
    print(f"categories: {len(categories)}")
    for name, members in sorted(categories.items()):
        print(f"  {name}: {len(members)}")
    return 0


def _cmd_synth(args) -> int:
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    lexicon = _load_lexicon(raw.get("lexicon"))
    skew = None
    if raw.get("sgt_skew"):
        by_term = {e.term: e.id for e in lexicon.entries}
        try:
            skew = {by_term[term]: float(w) for term, w in raw["sgt_skew"].items()}
        except KeyError as exc:
            raise ValidationError(f"sgt_skew names unknown term {exc}") from exc
    config = synth.SynthConfig(
        lexicon=lexicon,
        n_docs=int(raw["n_docs"]),
        stereotyped_fraction=float(raw["stereotyped_fraction"]),
        hate_rate_stereotyped=float(raw["hate_rate_stereotyped"]),
        hate_rate_neutral=float(raw["hate_rate_neutral"]),
        seed=int(raw["seed"]),
        sgt_skew=skew,
    )
    docs, truth = synth.generate_corpus(config)
    write_dataset(docs, args.out)
    write_jsonl(synth.truth_rows(truth), args.truth)
    print(f"wrote {len(docs)} documents to {args.out} and ground truth to {args.truth}")
    return 0


def _cmd_lm_train(args) -> int:
    docs = read_dataset(args.data)
    model = ngram.train_ngram(docs, order=args.order, discount=args.discount,
                              min_count=args.min_count)
    ngram.save_model(model, args.out)
    print(f"trained order-{model.order} model: vocab {len(model.vocab)}, "
          f"contexts {len(model.counts)} -> {args.out}")
    return 0


def _write_scored_sets(path: Path, scored_sets: list[ScoredSet], lexicon: SgtLexicon) -> None:
    rows = []
    for scored in scored_sets:
        rows.append(
            {
                "id": scored.cfset.original.id,
                "text": scored.cfset.original.raw_text,
                "sgt": lexicon.entry(scored.cfset.mention.entry_id).term,
                "original_ll": scored.original_ll,
                "variants": [
                    {"sgt": lexicon.entry(v.entry_id).term, "ll": ll}
                    for v, ll in zip(scored.cfset.variants, scored.variant_lls)
                ],
            }
        )
    write_jsonl(rows, path)


def read_scored_sets(scores_dir: str | Path, lexicon: SgtLexicon) -> list[ScoredSet]:
    """Rebuild ScoredSets from a scores directory written by `lm score`."""
    scores_dir = Path(scores_dir)
    files = sorted(scores_dir.glob("*.jsonl"))
    if not files:
        raise ValidationError(f"no .jsonl score files found in {scores_dir}")
    by_term = {e.term: e.id for e in lexicon.entries}
    out: list[ScoredSet] = []
    for file in files:
        for row in read_jsonl(file):
            doc = Document.from_text(str(row["id"]), str(row["text"]))
            pairs = filter_single_mention([doc], lexicon)
            if len(pairs) != 1:
                raise ValidationError(
                    f"{file}: document {doc.id!r} does not mention exactly one SGT "
                    "under this lexicon"
                )
            _, mention = pairs[0]
            if lexicon.entry(mention.entry_id).term != row["sgt"]:
                raise ValidationError(
                    f"{file}: document {doc.id!r} records SGT {row['sgt']!r} but mentions "
                    f"{lexicon.entry(mention.entry_id).term!r}"
                )
            cfset = generate_all(doc, mention, lexicon)
            lls_by_entry = {}
            for var in row["variants"]:
                entry_id = by_term.get(var["sgt"])
                if entry_id is None:
                    raise ValidationError(f"{file}: unknown variant SGT {var['sgt']!r}")
                lls_by_entry[entry_id] = float(var["ll"])
            if set(lls_by_entry) != {v.entry_id for v in cfset.variants}:
                raise ValidationError(
                    f"{file}: variant set for {doc.id!r} does not cover the lexicon"
                )
            out.append(
                ScoredSet(
                    cfset=cfset,
                    original_ll=float(row["original_ll"]),
                    variant_lls=tuple(lls_by_entry[v.entry_id] for v in cfset.variants),
                )
            )
    return out


def _cmd_lm_score(args) -> int:
    scorer = _build_scorer(args.model, args.external)
    if scorer is None:
        raise ValidationError("lm score needs --model or --external")
    docs = read_dataset(args.data)
    cache = ScoreCache(args.cache) if args.cache else None
    try:
        if args.sets_dir:
            lexicon = _load_lexicon(args.lexicon)
            sets_dir = Path(args.sets_dir)
            sets_dir.mkdir(parents=True, exist_ok=True)
            scored_sets = [
                score_set(scorer, generate_all(doc, mention, lexicon), cache)
                for doc, mention in filter_single_mention(docs, lexicon)
            ]
            _write_scored_sets(sets_dir / "scores.jsonl", scored_sets, lexicon)
            print(f"scored {len(scored_sets)} counterfactual sets -> {sets_dir / 'scores.jsonl'}")
        if args.out:
            requests, cached = [], {}
            for doc in docs:
                hit = cache.get(doc.tokens) if cache else None
                if hit is None:
                    requests.append((doc.id, " ".join(doc.tokens)))
                else:
                    cached[doc.id] = hit
            scored = scorer.score_many(requests) if requests else {}
            if cache:
                for doc in docs:
                    if doc.id in scored:
                        cache.put(doc.tokens, scored[doc.id])
            with Path(args.out).open("w", encoding="utf-8") as fh:
                for doc in docs:
                    value = scored.get(doc.id, cached.get(doc.id))
                    fh.write(f"{doc.id}\t{value!r}\n")
            print(f"scored {len(docs)} documents -> {args.out}")
        if not args.out and not args.sets_dir:
            raise ValidationError("lm score needs --out and/or --sets-dir")
    finally:
        if cache:
            cache.close()
        if isinstance(scorer, ExternalScorer):
            scorer.close()
    return 0


def _cmd_cf_generate(args) -> int:
    lexicon = _load_lexicon(args.lexicon)
    docs = read_dataset(args.data)
    rows = []
    for doc, mention in filter_single_mention(docs, lexicon):
        cfset = generate_all(doc, mention, lexicon)
        for variant in cfset.variants:
            rows.append(
                {
                    "id": doc.id,
                    "variant_sgt": lexicon.entry(variant.entry_id).term,
                    "text": " ".join(variant.tokens),
                }
            )
    write_jsonl(rows, args.out)
    print(f"wrote {len(rows)} counterfactual variants -> {args.out}")
    return 0


def _cmd_analyze_rank(args) -> int:
    lexicon = _load_lexicon(args.lexicon)
    scored_sets = read_scored_sets(args.scores, lexicon)
    results = [rank_original(s) for s in scored_sets]
    agg = aggregate_ranks(results, lexicon)
    report = {
        "n_docs": agg.n_docs,
        "pct_rank_one": agg.pct_rank_one,
        "pct_top_decile": agg.pct_top_decile,
        "same_cat_given_rank2": agg.same_cat_given_rank2,
        "same_cat_in_better_given_top_decile": agg.same_cat_in_better_given_top_decile,
        "same_cat_in_better_given_top_decile_macro": agg.same_cat_in_better_given_top_decile_macro,
        "sd_of_per_sgt_mean_rank": agg.sd_of_per_sgt_mean_rank,
        "per_sgt_median_rank": {
            lexicon.entry(e).term: m for e, m in agg.per_sgt_median_rank.items()
        },
    }
    Path(args.out).write_text(json.dumps(report, indent=2), encoding="utf-8")
    csv_path = Path(args.csv) if args.csv else Path(args.out).with_suffix(".csv")
    with csv_path.open("w", encoding="utf-8") as fh:
        fh.write("entry,median_rank,n\n")
        for entry_id, median in agg.per_sgt_median_rank.items():
            fh.write(f"{lexicon.entry(entry_id).term},{median},{agg.per_sgt_count[entry_id]}\n")
    print(f"rank report -> {args.out}; per-SGT medians -> {csv_path}")
    return 0


def _cmd_filter(args) -> int:
    lexicon = _load_lexicon(args.lexicon)
    policy = PairingPolicy.parse(args.policy)
    scored_sets = read_scored_sets(args.scores, lexicon)
    labels: dict[str, int | None] = {}
    if args.data:
        labels = {d.id: d.label for d in read_dataset(args.data)}
    rows = []
    for scored in scored_sets:
        doc = scored.cfset.original
        if policy is PairingPolicy.NEG:
            if doc.id not in labels or labels[doc.id] is None:
                raise ValidationError(
                    f"policy neg needs labels; none found for {doc.id!r} (pass --data)"
                )
            doc = Document(doc.id, doc.tokens, doc.raw_text, labels[doc.id])
        kept = select_pairing_targets(doc, scored, lexicon, policy).kept
        rows.append(
            {
                "id": doc.id,
                "kept_sgts": [
                    lexicon.entry(scored.cfset.variants[i].entry_id).term for i in kept
                ],
            }
        )
    write_jsonl(rows, args.out)
    print(f"wrote pairing targets for {len(rows)} documents -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    lexicon = _load_lexicon(args.lexicon)
    docs = read_dataset(args.data, require_labels=True)
    policy = PairingPolicy.parse(args.policy)
    scorer = _build_scorer(args.scorer_model, args.external)
    hyper = classifier.TrainHyper(
        lam=args.lam,
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        feature=classifier.FeatureConfig(dim=args.dim, hash_seed=args.hash_seed),
        masked=args.mask,
        pair_cap=args.pair_cap,
    )
    cache = ScoreCache(args.cache) if args.cache else None
    try:
        model = classifier.train(docs, lexicon, scorer, policy, hyper, cache=cache)
    finally:
        if cache:
            cache.close()
        if isinstance(scorer, ExternalScorer):
            scorer.close()
    classifier.save_model(model, args.out)
    print(f"trained {policy.value} model (lambda={args.lam}, masked={args.mask}) -> {args.out}")
    return 0


def _read_eval_pairs(path: str, lexicon: SgtLexicon) -> list[tuple[Document, CounterfactualVariant]]:
    by_term = {e.term: e.id for e in lexicon.entries}
    pairs = []
    for i, row in enumerate(read_jsonl(path)):
        if "text" not in row or "variant_text" not in row:
            raise ValidationError(f"{path}: pair row {i} needs 'text' and 'variant_text'")
        doc = Document.from_text(str(row.get("id", f"pair{i}")), str(row["text"]))
        entry_id = by_term.get(row.get("variant_sgt", ""), -1)
        variant = CounterfactualVariant(
            entry_id=entry_id, tokens=Document.from_text("v", str(row["variant_text"])).tokens
        )
        pairs.append((doc, variant))
    return pairs


def _cmd_eval(args) -> int:
    lexicon = _load_lexicon(args.lexicon)
    model = classifier.load_model(args.model)
    report: dict[str, object] = {
        "accuracy": None, "precision": None, "recall": None, "f1": None,
        "tp_mean": None, "tp_sd": None, "tn_mean": None, "tn_sd": None,
        "ctf_sym": None, "ctf_asym": None,
    }
    if args.data:
        docs = read_dataset(args.data, require_labels=True)
        prf = metrics.classification_report(model, docs, args.threshold, lexicon)
        report.update(
            accuracy=prf.accuracy, precision=prf.precision, recall=prf.recall, f1=prf.f1
        )
        single = [d for d, _ in filter_single_mention(docs, lexicon)]
        if single:
            odds = metrics.equality_of_odds(model, single, lexicon, args.threshold)
            report.update(
                tp_mean=odds.tp_mean, tp_sd=odds.tp_sd,
                tn_mean=odds.tn_mean, tn_sd=odds.tn_sd,
            )
    if args.sym:
        adjectives = metrics.load_adjectives_file(args.adjectives) if args.adjectives else None
        pairs = metrics.generate_sym_templates(lexicon, adjectives)
        report["ctf_sym"] = metrics.ctf(model, pairs, lexicon).mean_abs_diff
    if args.pairs:
        pairs = _read_eval_pairs(args.pairs, lexicon)
        report["ctf_asym"] = metrics.ctf(model, pairs, lexicon).mean_abs_diff
    Path(args.out).write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(f"evaluation report -> {args.out}")
    return 0


def _cmd_experiment_run(args) -> int:
    config = RunConfig.from_json_file(args.config)
    if args.no_cache:
        config = dataclasses.replace(config, use_cache=False)
    report = run_experiment(config)
    json_path, csv_path = write_report(report, config.out_dir)
    print(f"experiment report -> {json_path} and {csv_path}")
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ctfair", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_lex = sub.add_parser("lexicon", help="lexicon utilities")
    lex_sub = p_lex.add_subparsers(dest="subcommand", required=True)
    p_check = lex_sub.add_parser("check", help="validate a lexicon file")
    p_check.add_argument("path")
    p_check.set_defaults(func=_cmd_lexicon_check)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--config", required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--truth", required=True)
    p_synth.set_defaults(func=_cmd_synth)

    p_lm = sub.add_parser("lm", help="language model commands")
    lm_sub = p_lm.add_subparsers(dest="subcommand", required=True)
    p_lm_train = lm_sub.add_parser("train", help="train the n-gram model")
    p_lm_train.add_argument("--data", required=True)
    p_lm_train.add_argument("--order", type=int, default=3)
    p_lm_train.add_argument("--discount", type=float, default=0.75)
    p_lm_train.add_argument("--min-count", type=int, default=2)
    p_lm_train.add_argument("--out", required=True)
    p_lm_train.set_defaults(func=_cmd_lm_train)
    p_lm_score = lm_sub.add_parser("score", help="score texts and counterfactual sets")
    p_lm_score.add_argument("--model")
    p_lm_score.add_argument("--external")
    p_lm_score.add_argument("--data", required=True)
    p_lm_score.add_argument("--cache")
    p_lm_score.add_argument("--out")
    p_lm_score.add_argument("--lexicon")
    p_lm_score.add_argument("--sets-dir", help="also score counterfactual sets into this directory")
    p_lm_score.set_defaults(func=_cmd_lm_score)

    p_cf = sub.add_parser("cf", help="counterfactual generation")
    cf_sub = p_cf.add_subparsers(dest="subcommand", required=True)
    p_cf_gen = cf_sub.add_parser("generate", help="emit all SGT-substituted variants")
    p_cf_gen.add_argument("--data", required=True)
    p_cf_gen.add_argument("--lexicon")
    p_cf_gen.add_argument("--out", required=True)
    p_cf_gen.set_defaults(func=_cmd_cf_generate)

    p_an = sub.add_parser("analyze", help="likelihood-rank analysis")
    an_sub = p_an.add_subparsers(dest="subcommand", required=True)
    p_rank = an_sub.add_parser("rank", help="rank originals among their counterfactuals")
    p_rank.add_argument("--scores", required=True)
    p_rank.add_argument("--lexicon")
    p_rank.add_argument("--out", required=True)
    p_rank.add_argument("--csv")
    p_rank.set_defaults(func=_cmd_analyze_rank)

    p_filter = sub.add_parser("filter", help="select pairing targets per policy")
    p_filter.add_argument("--scores", required=True)
    p_filter.add_argument("--policy", required=True)
    p_filter.add_argument("--lexicon")
    p_filter.add_argument("--data", help="dataset JSONL providing labels (needed for neg)")
    p_filter.add_argument("--out", required=True)
    p_filter.set_defaults(func=_cmd_filter)

    p_train = sub.add_parser("train", help="train the hate classifier")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--lexicon")
    p_train.add_argument("--policy", default="all")
    p_train.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p_train.add_argument("--epochs", type=int, default=20)
    p_train.add_argument("--lr", type=float, default=0.5)
    p_train.add_argument("--batch-size", type=int, default=32)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--mask", action="store_true")
    p_train.add_argument("--dim", type=int, default=classifier.FeatureConfig().dim)
    p_train.add_argument("--hash-seed", type=int, default=0)
    p_train.add_argument("--pair-cap", type=int, default=5)
    p_train.add_argument("--scorer-model")
    p_train.add_argument("--external")
    p_train.add_argument("--cache")
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a trained classifier")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data")
    p_eval.add_argument("--lexicon")
    p_eval.add_argument("--sym", action="store_true", help="CTF on the symmetric template set")
    p_eval.add_argument("--pairs", help="CTF on a user-supplied pair JSONL (reported as ctf_asym)")
    p_eval.add_argument("--adjectives")
    p_eval.add_argument("--threshold", type=float, default=0.5)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=_cmd_eval)

    p_exp = sub.add_parser("experiment", help="cross-validated experiment")
    exp_sub = p_exp.add_subparsers(dest="subcommand", required=True)
    p_run = exp_sub.add_parser("run", help="run all requested model variants")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--no-cache", action="store_true")
    p_run.set_defaults(func=_cmd_experiment_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        # unreadable or malformed inputs are validation failures
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ScorerError as exc:
        print(f"scorer error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

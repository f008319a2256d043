"""Binary hate classifier over hashed n-gram features, with logit pairing.

The model is linear: logit(x) = <w, phi(x)> + b with phi counting unigrams
and bigrams hashed into a power-of-two feature space. The training objective
is mean binary cross-entropy plus lambda times the mean absolute logit gap
over counterfactual pairs selected by the active pairing policy. A linear
model keeps every gradient exact and every run reproducible; the pairing
machinery never looks inside the encoder, so a richer one can be swapped in
behind `featurize`/`predict`.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .counterfactual import CounterfactualVariant, generate_all
from .data import Document, ValidationError
from .filtering import PairingPolicy, select_pairing_targets
from .lexicon import SgtLexicon, find_mentions, filter_single_mention
from .scoring import ScoreCache, Scorer, ScoredSet, score_set

MASK_TOKEN = "⟨SGT⟩"  # single reserved token replacing every mention span

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureConfig:
    dim: int = 2**16
    ngram_orders: tuple[int, ...] = (1, 2)
    hash_seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 2 or self.dim & (self.dim - 1):
            raise ValidationError(f"feature dim must be a power of two >= 2, got {self.dim}")
        if not self.ngram_orders or any(n not in (1, 2) for n in self.ngram_orders):
            raise ValidationError(f"ngram_orders must be a nonempty subset of (1, 2)")


def _hash_index(key: str, seed: int, dim: int) -> int:
    digest = hashlib.blake2b(
        key.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little", signed=True)
    ).digest()
    return int.from_bytes(digest, "little") & (dim - 1)


def featurize(tokens: Sequence[str], config: FeatureConfig) -> dict[int, int]:
    """Hashed n-gram counts; deterministic for a given config."""
    if not tokens:
        raise ValidationError("cannot featurize an empty token sequence")
    counts: dict[int, int] = {}
    if 1 in config.ngram_orders:
        for tok in tokens:
            idx = _hash_index(tok, config.hash_seed, config.dim)
            counts[idx] = counts.get(idx, 0) + 1
    if 2 in config.ngram_orders:
        for a, b in zip(tokens, tokens[1:]):
            idx = _hash_index(a + "\x1f" + b, config.hash_seed, config.dim)
            counts[idx] = counts.get(idx, 0) + 1
    return counts


def mask_tokens(tokens: tuple[str, ...], lexicon: SgtLexicon) -> tuple[str, ...]:
    mentions = find_mentions(tokens, lexicon)
    if not mentions:
        return tokens
    out: list[str] = []
    pos = 0
    for m in mentions:
        out.extend(tokens[pos : m.start])
        out.append(MASK_TOKEN)
        pos = m.start + m.length
    out.extend(tokens[pos:])
    return tuple(out)


def mask_sgts(doc: Document, lexicon: SgtLexicon) -> Document:
    """Replace every SGT mention span with the reserved mask token."""
    tokens = mask_tokens(doc.tokens, lexicon)
    if tokens == doc.tokens:
        return doc
    return Document(id=doc.id, tokens=tokens, raw_text=" ".join(tokens), label=doc.label)


@dataclass
class TrainedModel:
    config: FeatureConfig
    weights: np.ndarray
    bias: float
    provenance: dict

    @property
    def masked(self) -> bool:
        return bool(self.provenance.get("masked", False))


@dataclass(frozen=True)
class Prediction:
    logit: float
    prob: float


@dataclass(frozen=True)
class LossBreakdown:
    bce: float
    clp: float
    total: float


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@dataclass(frozen=True)
class _Feats:
    idx: np.ndarray
    cnt: np.ndarray


def _to_arrays(fv: dict[int, int]) -> _Feats:
    items = sorted(fv.items())
    return _Feats(
        idx=np.array([i for i, _ in items], dtype=np.int64),
        cnt=np.array([c for _, c in items], dtype=np.float64),
    )


def _feats(tokens: Sequence[str], config: FeatureConfig) -> _Feats:
    return _to_arrays(featurize(tokens, config))


def _logit(weights: np.ndarray, bias: float, f: _Feats) -> float:
    return float(weights[f.idx] @ f.cnt + bias)


def _maybe_mask(model: TrainedModel, doc: Document, lexicon: SgtLexicon | None) -> Document:
    if not model.masked:
        return doc
    if lexicon is None:
        raise ValidationError(
            "model was trained with SGT masking; predict needs the lexicon to mask inputs"
        )
    return mask_sgts(doc, lexicon)


def predict(model: TrainedModel, doc: Document, lexicon: SgtLexicon | None = None) -> Prediction:
    doc = _maybe_mask(model, doc, lexicon)
    z = _logit(model.weights, model.bias, _feats(doc.tokens, model.config))
    return Prediction(logit=z, prob=sigmoid(z))


def predict_tokens(model: TrainedModel, tokens: Sequence[str]) -> Prediction:
    """Prediction for a bare (already masked, if applicable) token sequence."""
    z = _logit(model.weights, model.bias, _feats(tokens, model.config))
    return Prediction(logit=z, prob=sigmoid(z))


def _bce_from_logit(z: float, y: int) -> float:
    # max(z, 0) - z*y + log(1 + exp(-|z|)): stable for large |z|
    return max(z, 0.0) - z * y + math.log1p(math.exp(-abs(z)))


def clp_loss(
    model: TrainedModel,
    batch: Sequence[tuple[Document, int]],
    pairs: Sequence[tuple[Document, CounterfactualVariant]],
    lam: float,
    lexicon: SgtLexicon | None = None,
) -> LossBreakdown:
    """Mean BCE over the batch plus lambda times the mean |logit gap| over pairs.

    A masked model masks its inputs first (lexicon required), which collapses
    every pair and makes the pairing term exactly zero.
    """
    if model.masked:
        if lexicon is None:
            raise ValidationError("masked model: clp_loss needs the lexicon to mask inputs")
        batch = [(mask_sgts(d, lexicon), y) for d, y in batch]
        pairs = [
            (
                mask_sgts(d, lexicon),
                CounterfactualVariant(v.entry_id, mask_tokens(v.tokens, lexicon)),
            )
            for d, v in pairs
        ]
    breakdown, _, _ = clp_loss_and_gradient(
        model.weights, model.bias, model.config, batch, pairs, lam
    )
    return breakdown


def clp_loss_and_gradient(
    weights: np.ndarray,
    bias: float,
    config: FeatureConfig,
    batch: Sequence[tuple[Document, int]],
    pairs: Sequence[tuple[Document, CounterfactualVariant]],
    lam: float,
) -> tuple[LossBreakdown, np.ndarray, float]:
    """Loss plus its exact gradient in (weights, bias).

    The pairing term uses the subgradient sign(delta), taken as 0 at
    delta = 0; the bias cancels inside every logit gap, so pairs never move it.
    """
    if lam < 0:
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    grad_w = np.zeros_like(weights)
    grad_b = 0.0
    bce = 0.0
    if batch:
        for doc, label in batch:
            if label not in (0, 1):
                raise ValidationError(f"document {doc.id!r}: label must be 0 or 1")
            f = _feats(doc.tokens, config)
            z = _logit(weights, bias, f)
            bce += _bce_from_logit(z, label)
            err = (sigmoid(z) - label) / len(batch)
            np.add.at(grad_w, f.idx, err * f.cnt)
            grad_b += err
        bce /= len(batch)
    clp = 0.0
    if pairs:
        scale = lam / len(pairs)
        for doc, variant in pairs:
            fx = _feats(doc.tokens, config)
            fv = _feats(variant.tokens, config)
            delta = _logit(weights, bias, fx) - _logit(weights, bias, fv)
            clp += abs(delta)
            sign = (delta > 0) - (delta < 0)
            if sign:
                np.add.at(grad_w, fx.idx, scale * sign * fx.cnt)
                np.add.at(grad_w, fv.idx, -scale * sign * fv.cnt)
        clp /= len(pairs)
    total = bce + lam * clp
    return LossBreakdown(bce=bce, clp=clp, total=total), grad_w, grad_b


@dataclass(frozen=True)
class TrainHyper:
    lam: float = 0.0
    epochs: int = 20
    learning_rate: float = 0.5
    batch_size: int = 32
    seed: int = 0
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    masked: bool = False
    pair_cap: int = 5  # counterfactual pairs sampled per example per epoch

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        if self.epochs < 1 or self.batch_size < 1 or self.pair_cap < 1:
            raise ValidationError("epochs, batch_size, and pair_cap must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")


def _pairing_features(
    dataset: Sequence[Document],
    lexicon: SgtLexicon,
    scorer: Scorer | None,
    policy: PairingPolicy,
    hyper: TrainHyper,
    cache: ScoreCache | None,
    scored_sets: dict[str, ScoredSet] | None,
) -> dict[str, list[_Feats]]:
    """Kept-variant feature arrays per document id, policy already applied."""
    needs_scores = policy is PairingPolicy.ASY
    if needs_scores and scorer is None and not scored_sets:
        raise ValidationError("ASY pairing needs a scorer (or precomputed scored sets)")
    out: dict[str, list[_Feats]] = {}
    for doc, mention in filter_single_mention(list(dataset), lexicon):
        scored = scored_sets.get(doc.id) if scored_sets else None
        if scored is None:
            cfset = generate_all(doc, mention, lexicon)
            if needs_scores:
                scored = score_set(scorer, cfset, cache)
            else:
                # NEG/SC/ALL selection never reads the likelihoods
                scored = ScoredSet(
                    cfset=cfset, original_ll=0.0, variant_lls=(0.0,) * len(cfset.variants)
                )
        kept = select_pairing_targets(doc, scored, lexicon, policy).kept
        if kept:
            out[doc.id] = [
                _feats(scored.cfset.variants[i].tokens, hyper.feature) for i in kept
            ]
    return out


def train(
    dataset: Sequence[Document],
    lexicon: SgtLexicon,
    scorer: Scorer | None,
    policy: PairingPolicy,
    hyper: TrainHyper,
    cache: ScoreCache | None = None,
    scored_sets: dict[str, ScoredSet] | None = None,
) -> TrainedModel:
    """Mini-batch gradient descent on the paired loss; bit-reproducible by seed.

    Update order per batch: accumulate (sigmoid(z_i) - y_i)/B onto the hashed
    feature indices and the bias, then, when lambda > 0 and the batch owns
    pairs, add lambda/P * sign(delta) times the feature difference of each
    pair; finally step by the learning rate. Example order is reshuffled each
    epoch from one rng stream, pair subsampling draws from a second stream, so
    lambda = 0 runs are bit-identical to plain logistic training.
    """
    docs = list(dataset)
    if not docs:
        raise ValidationError("training dataset is empty")
    for doc in docs:
        if doc.label not in (0, 1):
            raise ValidationError(f"document {doc.id!r} needs a binary label for training")

    if hyper.masked:
        docs = [mask_sgts(d, lexicon) for d in docs]

    use_pairs = hyper.lam > 0 and not hyper.masked
    pair_feats: dict[str, list[_Feats]] = {}
    if use_pairs:
        pair_feats = _pairing_features(
            docs, lexicon, scorer, policy, hyper, cache, scored_sets
        )

    feats = [_feats(d.tokens, hyper.feature) for d in docs]
    labels = [int(d.label) for d in docs]

    weights = np.zeros(hyper.feature.dim, dtype=np.float64)
    bias = 0.0
    shuffle_rng = random.Random(hyper.seed)
    pair_rng = random.Random(hyper.seed + 1_000_003)
    n = len(docs)

    for _epoch in range(hyper.epochs):
        order = list(range(n))
        shuffle_rng.shuffle(order)
        epoch_pairs: dict[int, list[_Feats]] = {}
        if use_pairs:
            for i in range(n):
                owned = pair_feats.get(docs[i].id)
                if owned:
                    if len(owned) > hyper.pair_cap:
                        epoch_pairs[i] = pair_rng.sample(owned, hyper.pair_cap)
                    else:
                        epoch_pairs[i] = owned
        for start in range(0, n, hyper.batch_size):
            batch = order[start : start + hyper.batch_size]
            grad_w = np.zeros(hyper.feature.dim, dtype=np.float64)
            grad_b = 0.0
            for i in batch:
                f = feats[i]
                z = _logit(weights, bias, f)
                err = (sigmoid(z) - labels[i]) / len(batch)
                np.add.at(grad_w, f.idx, err * f.cnt)
                grad_b += err
            if use_pairs:
                batch_pairs = [
                    (feats[i], fv) for i in batch for fv in epoch_pairs.get(i, ())
                ]
                if batch_pairs:
                    scale = hyper.lam / len(batch_pairs)
                    for fx, fv in batch_pairs:
                        delta = _logit(weights, bias, fx) - _logit(weights, bias, fv)
                        sign = (delta > 0) - (delta < 0)
                        if sign:
                            np.add.at(grad_w, fx.idx, scale * sign * fx.cnt)
                            np.add.at(grad_w, fv.idx, -scale * sign * fv.cnt)
            weights -= hyper.learning_rate * grad_w
            bias -= hyper.learning_rate * grad_b

    if not (np.all(np.isfinite(weights)) and math.isfinite(bias)):
        raise RuntimeError("training diverged to non-finite parameters")
    provenance = {
        "policy": policy.value,
        "lambda": hyper.lam,
        "epochs": hyper.epochs,
        "learning_rate": hyper.learning_rate,
        "batch_size": hyper.batch_size,
        "seed": hyper.seed,
        "masked": hyper.masked,
        "pair_cap": hyper.pair_cap,
    }
    return TrainedModel(config=hyper.feature, weights=weights, bias=bias, provenance=provenance)


def pairs_from_scored(
    scored: ScoredSet, kept: Sequence[int]
) -> list[tuple[Document, CounterfactualVariant]]:
    """Materialize (document, variant) pairs for the kept variant indices."""
    return [(scored.cfset.original, scored.cfset.variants[i]) for i in kept]


def save_model(model: TrainedModel, path: str | Path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "feature_dim": model.config.dim,
        "hash_seed": model.config.hash_seed,
        "ngram_orders": list(model.config.ngram_orders),
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "provenance": model.provenance,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read model {path}: {exc}") from exc
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValidationError(
            f"{path}: unsupported model format_version {payload.get('format_version')!r}"
        )
    config = FeatureConfig(
        dim=int(payload["feature_dim"]),
        ngram_orders=tuple(payload["ngram_orders"]),
        hash_seed=int(payload["hash_seed"]),
    )
    weights = np.asarray(payload["weights"], dtype=np.float64)
    if weights.shape != (config.dim,):
        raise ValidationError(f"{path}: weight vector length {weights.shape} != dim {config.dim}")
    return TrainedModel(
        config=config,
        weights=weights,
        bias=float(payload["bias"]),
        provenance=dict(payload["provenance"]),
    )

"""ctfair: audit and mitigate social-group bias in text classifiers.

Pipeline: detect social group token (SGT) mentions, generate counterfactuals
by substitution, score them with a generative language model, filter
asymmetric counterfactuals by likelihood, train classifiers with
counterfactual logit pairing, and report counterfactual-token-fairness and
equality-of-odds metrics.
"""
from .data import Document, ValidationError, tokenize
from .lexicon import (
    Mention,
    SgtEntry,
    SgtLexicon,
    default_lexicon,
    filter_single_mention,
    find_mentions,
    load_lexicon,
    load_lexicon_file,
)
from .counterfactual import (
    CounterfactualSet,
    CounterfactualVariant,
    generate_all,
    restrict_same_category,
    substitute,
)
from .ngram import NgramModel, prob, score_sequence, train_ngram
from .scoring import (
    ExternalScorer,
    NgramScorer,
    ScoreCache,
    ScoredSet,
    ScorerError,
    score_set,
)
from .analysis import RankAggregate, RankResult, aggregate_ranks, rank_original
from .filtering import PairingPolicy, SymmetricSet, select_pairing_targets, symmetric_subset
from .classifier import (
    FeatureConfig,
    LossBreakdown,
    Prediction,
    TrainHyper,
    TrainedModel,
    clp_loss,
    featurize,
    mask_sgts,
    predict,
    train,
)
from .metrics import (
    CtfScore,
    OddsReport,
    PrfReport,
    classification_report,
    ctf,
    equality_of_odds,
    generate_sym_templates,
)
from .synth import SynthConfig, generate_corpus

__version__ = "0.1.0"

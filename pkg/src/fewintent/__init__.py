"""Few-shot intent classification toolkit.

Pieces: corpus loading/sampling, a hashed n-gram reference encoder with
contrastive fine-tuning and a logistic head, prompt construction with cost
accounting, an in-context-learning runner with record/replay, F1 scoring,
and a curation service for expert example selection.
"""

from .corpus import (
    CuratedProvenance,
    Dataset,
    FewShotSample,
    LabelSpace,
    RandomProvenance,
    Split,
    Utterance,
    compute_stats,
    label_distribution,
    load_csv,
    sample_few_shot,
    split_validation,
)
from .encoder import (
    EncoderParams,
    NgramConfig,
    ReferenceEncoder,
    SentenceEncoder,
    encode,
    encode_batch,
    featurize,
    init_params,
)
from .contrastive import (
    Head,
    Pair,
    PairBatch,
    TrainConfig,
    TrainReport,
    contrastive_grad,
    contrastive_loss,
    fit_head,
    generate_pairs,
    predict,
    predict_batch,
    train_encoder,
    train_pipeline,
)
from .prompting import (
    ChatMessage,
    CostEstimate,
    PromptBundle,
    PromptStyle,
    build_prompt,
    check_budget,
    estimate_cost,
    estimate_tokens,
    load_price_table,
)
from .icl import (
    BackendInfo,
    ChatBackend,
    Outcome,
    ParseRoute,
    Prediction,
    RunRecord,
    TranscriptBackend,
    classify_one,
    parse_response,
    run_batch,
)
from .evalkit import EvalReport, ResultRow, render_table, score
from .errors import (
    BudgetExceededError,
    DataFormatError,
    DivergenceError,
    DomainError,
    FewIntentError,
    TransportError,
)
from .seeding import derive_seed

__all__ = [
    "BackendInfo",
    "BudgetExceededError",
    "ChatBackend",
    "ChatMessage",
    "CostEstimate",
    "CuratedProvenance",
    "DataFormatError",
    "Dataset",
    "DivergenceError",
    "DomainError",
    "EncoderParams",
    "EvalReport",
    "FewIntentError",
    "FewShotSample",
    "Head",
    "LabelSpace",
    "NgramConfig",
    "Outcome",
    "Pair",
    "PairBatch",
    "ParseRoute",
    "Prediction",
    "PromptBundle",
    "PromptStyle",
    "RandomProvenance",
    "ReferenceEncoder",
    "ResultRow",
    "RunRecord",
    "SentenceEncoder",
    "Split",
    "TrainConfig",
    "TrainReport",
    "TranscriptBackend",
    "TransportError",
    "Utterance",
    "build_prompt",
    "check_budget",
    "classify_one",
    "compute_stats",
    "contrastive_grad",
    "contrastive_loss",
    "derive_seed",
    "encode",
    "encode_batch",
    "estimate_cost",
    "estimate_tokens",
    "featurize",
    "fit_head",
    "generate_pairs",
    "init_params",
    "label_distribution",
    "load_csv",
    "load_price_table",
    "parse_response",
    "predict",
    "predict_batch",
    "render_table",
    "run_batch",
    "sample_few_shot",
    "score",
    "split_validation",
    "train_encoder",
    "train_pipeline",
]

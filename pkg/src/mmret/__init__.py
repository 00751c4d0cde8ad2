"""Multi-modal retrieval toolkit.

Generates weak-supervision (question, image, answer, positive, negative)
training tuples from a passage corpus and captioned images, trains a small
dense retriever on them contrastively, and evaluates lexical and dense
retrieval with answer-based relevance judgments.
"""

__version__ = "0.1.0"

from .adapters import (
    AdapterError,
    AnnotatedToken,
    CandidatePhrase,
    ModelAdapters,
    RemoteAdapters,
    StubAdapters,
    check_adapter_contract,
    make_adapters,
)
from .bm25 import (
    DEFAULT_B_GRID,
    DEFAULT_K1_GRID,
    BM25Params,
    InvertedIndex,
    bm25_score,
    build_index,
    grid_search,
    load_index,
    save_index,
    search,
    tune_params,
)
from .corpus import (
    CorpusFormatError,
    ImageRecord,
    Passage,
    PassageStore,
    contains_answer,
    load_images,
    load_passages,
    tokenize,
)
from .dense import (
    DenseIndex,
    EmbeddingProvider,
    StubProvider,
    build_dense_index,
    dense_search,
    hashed_vector,
    load_dense_index,
    save_dense_index,
    score,
)
from .evaluation import (
    EvalResult,
    Judgment,
    TTestResult,
    evaluate,
    judge,
    load_judgments,
    load_run,
    mrr_at_k,
    p_at_k,
    paired_ttest,
    regularized_incomplete_beta,
    save_run,
    student_t_two_sided_p,
)
from .pipeline import (
    AuditRecord,
    GeneratedExample,
    PipelineConfig,
    PipelineReport,
    PipelineResult,
    filter_question,
    generate_question,
    load_dataset,
    match_passages,
    run_pipeline,
    sample_negative,
    select_answer_phrases,
    write_audit,
    write_dataset,
)
from .ranking import RankedList
from .rouge import OverlapScore, rouge1
from .trainer import (
    ToyEmbedder,
    TrainingBatch,
    batch_loss_and_grad,
    contrastive_loss,
    featurize_passage,
    featurize_query,
    in_batch_expand,
    save_embedder,
    train_toy,
)

__all__ = [
    "__version__",
    "AdapterError",
    "AnnotatedToken",
    "AuditRecord",
    "BM25Params",
    "CandidatePhrase",
    "CorpusFormatError",
    "DEFAULT_B_GRID",
    "DEFAULT_K1_GRID",
    "DenseIndex",
    "EmbeddingProvider",
    "EvalResult",
    "GeneratedExample",
    "ImageRecord",
    "InvertedIndex",
    "Judgment",
    "ModelAdapters",
    "OverlapScore",
    "Passage",
    "PassageStore",
    "PipelineConfig",
    "PipelineReport",
    "PipelineResult",
    "RankedList",
    "RemoteAdapters",
    "StubAdapters",
    "StubProvider",
    "TTestResult",
    "ToyEmbedder",
    "TrainingBatch",
    "batch_loss_and_grad",
    "bm25_score",
    "build_dense_index",
    "build_index",
    "check_adapter_contract",
    "contains_answer",
    "contrastive_loss",
    "dense_search",
    "evaluate",
    "featurize_passage",
    "featurize_query",
    "filter_question",
    "generate_question",
    "grid_search",
    "hashed_vector",
    "in_batch_expand",
    "judge",
    "load_dataset",
    "load_dense_index",
    "load_images",
    "load_index",
    "load_judgments",
    "load_passages",
    "load_run",
    "make_adapters",
    "match_passages",
    "mrr_at_k",
    "p_at_k",
    "regularized_incomplete_beta",
    "paired_ttest",
    "rouge1",
    "run_pipeline",
    "sample_negative",
    "save_dense_index",
    "save_embedder",
    "save_index",
    "save_run",
    "student_t_two_sided_p",
    "score",
    "search",
    "select_answer_phrases",
    "tokenize",
    "train_toy",
    "tune_params",
    "write_audit",
    "write_dataset",
]

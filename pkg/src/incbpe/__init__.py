"""Incremental byte-pair encoding.

Nested merge tables that can be grown online, a loss-driven schedule that
decides when to grow them, initializers for the embeddings of new subwords,
and the metrics used to study the result.
"""

from .bpe import (
    MARKER,
    BPELearner,
    MergeOp,
    MergeTable,
    SegmentedWord,
    Segmenter,
    apply_to_corpus,
    count_pairs,
    detokenize,
    diff_inventory,
    extend_merges,
    learn_merges,
    read_merges,
    segment_word,
    symbol_inventory,
    word_frequencies,
    write_merges,
)
from .embeddings import (
    AE,
    AEConfig,
    AutoencoderParams,
    Avg,
    EmbeddingMatrix,
    OutputLayerParams,
    Rand,
    extend_matrix,
    extend_output_params,
    init_ae,
    init_avg,
    init_random,
    train_autoencoder,
)
from .errors import (
    ConfigurationError,
    IncBPEError,
    InconsistentMergesError,
    InvalidInputError,
    MalformedInputError,
    MissingComponentError,
    NumericError,
    ScheduleStateError,
)
from .kernels import BACKEND
from .metrics import (
    UnigramF1Report,
    inventory_usage,
    length_norm_score,
    new_vocab_f1,
    rare_word_f1,
    subwords_per_word,
    unigram_f1,
)
from .schedule import (
    Continue,
    Increment,
    ScheduleConfig,
    ScheduleState,
    Stop,
    new_schedule,
    observe_epoch,
    replay,
)

__version__ = "0.1.0"

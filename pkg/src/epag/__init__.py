"""Move recognition for Chinese scientific abstracts.

Pipeline: corpus cleaning and segmentation, dependency-rule complex-sentence
splitting, unigram subword tokenization, a relative-position transformer
encoder with segment-recurrence memory, and an attention-pooled BiGRU
classifier over the five rhetorical move labels.
"""

from .corpus import (
    CorpusStats,
    LabeledRecord,
    MoveLabel,
    clean_text,
    corpus_stats,
    load_dataset,
    save_dataset,
    segment_sentences,
    split_train_test,
)
from .encoder import EncoderConfig, MemoryState, encode_segment, encode_sequence
from .evaluation import ConfusionMatrix, MetricsReport, confusion, evaluate, metrics
from .model import MoveModel
from .splitter import (
    DepParse,
    DepToken,
    find_split_points,
    parse_conllu,
    split_complex,
    split_corpus,
)
from .tokenizer import (
    SubwordVocab,
    TokenSequence,
    decode,
    encode,
    load_vocab,
    save_vocab,
    train_unigram,
)
from .training import (
    Example,
    TrainConfig,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

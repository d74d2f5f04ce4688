"""Sequence-to-sequence machinery shared by the neural engines."""

from d2t.neural.bpe import BPEModel, bpe_decode, bpe_encode, bpe_train
from d2t.neural.decoding import VocabularyMismatchError, beam_decode, ensemble_decode, greedy_decode
from d2t.neural.engine import Translator, train_translator
from d2t.neural.seq2seq import GRUSeq2Seq, Seq2SeqModel, TransformerSeq2Seq, build_model
from d2t.neural.training import TrainingConfig, TrainingDivergedError, seq2seq_train, train_runs
from d2t.neural.vocab import Vocab

__all__ = [
    "BPEModel",
    "GRUSeq2Seq",
    "Seq2SeqModel",
    "TrainingConfig",
    "TrainingDivergedError",
    "TransformerSeq2Seq",
    "Translator",
    "Vocab",
    "VocabularyMismatchError",
    "beam_decode",
    "bpe_decode",
    "bpe_encode",
    "bpe_train",
    "build_model",
    "ensemble_decode",
    "greedy_decode",
    "seq2seq_train",
    "train_runs",
    "train_translator",
]

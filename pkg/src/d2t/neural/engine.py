from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import torch
from loguru import logger

from d2t.neural.bpe import BPEModel, bpe_train
from d2t.neural.decoding import check_compatible, ensemble_decode, greedy_decode
from d2t.neural.seq2seq import Seq2SeqModel
from d2t.neural.training import Pair, TrainingConfig, TrainResult, train_runs
from d2t.neural.vocab import Vocab


@dataclass
class Translator:
    """Token-level adapter over one model or an ensemble.

    Sources are BPE-segmented when a BPE model is attached; outputs are
    merged back into word tokens.
    """

    models: List[Seq2SeqModel]
    vocab: Vocab
    bpe: Optional[BPEModel] = None
    beam: int = 5
    max_len: int = 100

    def __post_init__(self) -> None:
        check_compatible(self.models)

    def encode_source(self, tokens: Sequence[str]) -> torch.Tensor:
        if not tokens:
            raise ValueError("cannot translate an empty source")
        pieces = self.bpe.encode(tokens) if self.bpe is not None else list(tokens)
        return torch.tensor([self.vocab.encode(pieces, add_eos=True)], dtype=torch.long)

    def _to_tokens(self, ids: Sequence[int]) -> List[str]:
        pieces = self.vocab.decode(ids)
        return self.bpe.decode(pieces) if self.bpe is not None else pieces

    def nbest(self, tokens: Sequence[str]) -> List[Tuple[List[str], float]]:
        hyps = ensemble_decode(
            self.models, self.encode_source(tokens), self.beam, self.max_len, self.vocab.bos_id, self.vocab.eos_id
        )
        return [(self._to_tokens(h.ids), h.normalized) for h in hyps]

    def translate(self, tokens: Sequence[str]) -> List[str]:
        return self.nbest(tokens)[0][0]

    def greedy(self, tokens: Sequence[str]) -> List[str]:
        hyp = greedy_decode(self.models[0], self.encode_source(tokens), self.max_len, self.vocab.bos_id, self.vocab.eos_id)
        return self._to_tokens(hyp.ids)


def sequence_accuracy(translator: Translator, pairs: Sequence[Tuple[Sequence[str], Sequence[str]]]) -> float:
    """Share of sources whose top hypothesis equals the target exactly."""
    if not pairs:
        raise ValueError("no pairs to score")
    hits = sum(translator.translate(src) == list(tgt) for src, tgt in pairs)
    return hits / len(pairs)


def train_translator(
    pairs: Sequence[Pair],
    cfg: TrainingConfig,
    seeds: Optional[Sequence[int]] = None,
    dev_pairs: Optional[Sequence[Pair]] = None,
    use_bpe: bool = False,
) -> Tuple[Translator, List[TrainResult]]:
    """Train ``cfg.runs`` models and wrap them as one ensemble.

    With ``use_bpe`` (and ``cfg.bpe_merges > 0``) merges are learned on both
    sides of the training pairs and every non-tag token is segmented.
    """
    bpe: Optional[BPEModel] = None
    if use_bpe and cfg.bpe_merges > 0:
        bpe = bpe_train([side for pair in pairs for side in pair], cfg.bpe_merges, cfg.bpe_threshold)
        logger.info(f"Learned {len(bpe.merges)} BPE merges")
        pairs = [(bpe.encode(src), bpe.encode(tgt)) for src, tgt in pairs]
        if dev_pairs:
            dev_pairs = [(bpe.encode(src), bpe.encode(tgt)) for src, tgt in dev_pairs]
    results = train_runs(pairs, cfg, seeds=seeds, dev_pairs=dev_pairs)
    translator = Translator(
        models=[r.model for r in results],
        vocab=results[0].vocab,
        bpe=bpe,
        beam=cfg.beam,
        max_len=cfg.max_decode_len,
    )
    return translator, results

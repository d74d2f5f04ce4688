"""Beam search, ensembling and greedy decoding over the incremental model API."""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import torch
from loguru import logger
from torch import Tensor

from d2t.neural.seq2seq import Seq2SeqModel


class VocabularyMismatchError(ValueError):
    """Ensemble members were trained over different vocabularies."""


@dataclass(frozen=True)
class Hypothesis:
    ids: Tuple[int, ...]
    score: float
    finished: bool = True

    @property
    def normalized(self) -> float:
        """Log probability divided by length (``</s>`` included)."""
        return self.score / max(len(self.ids), 1)

    def tokens(self, eos_id: int) -> Tuple[int, ...]:
        return self.ids[:-1] if self.ids and self.ids[-1] == eos_id else self.ids


def check_compatible(models: Sequence[Seq2SeqModel]) -> None:
    if not models:
        raise ValueError("need at least one model")
    first = models[0]
    for other in models[1:]:
        if other.vocab_size != first.vocab_size or other.vocab_signature != first.vocab_signature:
            raise VocabularyMismatchError(
                f"vocabulary mismatch: {first.vocab_signature} ({first.vocab_size}) vs "
                f"{other.vocab_signature} ({other.vocab_size})"
            )
        if other.arch != first.arch:
            raise ValueError(f"cannot ensemble {first.arch} with {other.arch}")


def _check_source(source: object) -> None:
    if isinstance(source, Tensor) and source.numel() == 0:
        raise ValueError("cannot decode an empty source")


def _averaged_log_probs(log_probs: List[Tensor]) -> Tensor:
    if len(log_probs) == 1:
        return log_probs[0]
    stacked = torch.stack(log_probs)
    return torch.logsumexp(stacked, dim=0) - math.log(len(log_probs))


def ensemble_decode(
    models: Sequence[Seq2SeqModel],
    source: object,
    beam: int,
    max_len: int,
    bos_id: int,
    eos_id: int,
) -> List[Hypothesis]:
    """Beam search with per-step distributions averaged in probability space.

    Args:
        models: Members sharing one vocabulary and architecture family.
        source: Model input for a single example (``(1, S)`` ids for
            seq2seq models).
        beam: Beam width, at least 1.
        max_len: Output length bound, ``</s>`` excluded.
        bos_id: Start symbol id.
        eos_id: End symbol id.

    Returns:
        List[Hypothesis]: Hypotheses sorted by length-normalized score.

    Raises:
        ValueError: For an empty source or a beam below 1.
        VocabularyMismatchError: If members disagree on the vocabulary.
    """
    if beam < 1:
        raise ValueError(f"beam must be at least 1, got {beam}")
    _check_source(source)
    check_compatible(models)

    finished: List[Hypothesis] = []
    live = [Hypothesis((), 0.0, finished=False)]
    with torch.no_grad():
        for m in models:
            m.eval()
        states = [m.start(source) for m in models]
        prev = torch.tensor([bos_id], dtype=torch.long)
        for _ in range(max_len + 1):
            stepped = [m.step(state, prev) for m, state in zip(models, states)]
            states = [state for _, state in stepped]
            log_probs = _averaged_log_probs([lp for lp, _ in stepped])
            scores = torch.tensor([h.score for h in live], dtype=log_probs.dtype).unsqueeze(1) + log_probs
            vocab_size = scores.size(1)
            k = min(beam, scores.numel())
            top_scores, top_index = scores.view(-1).topk(k)

            survivors: List[Hypothesis] = []
            parents: List[int] = []
            for score, index in zip(top_scores.tolist(), top_index.tolist()):
                parent, token = divmod(index, vocab_size)
                ids = live[parent].ids + (token,)
                if token == eos_id:
                    finished.append(Hypothesis(ids, score))
                elif len(ids) >= max_len:
                    finished.append(Hypothesis(ids, score, finished=False))
                else:
                    survivors.append(Hypothesis(ids, score, finished=False))
                    parents.append(parent)
            if len(finished) >= beam or not survivors:
                break
            index_tensor = torch.tensor(parents, dtype=torch.long)
            states = [m.reorder(state, index_tensor) for m, state in zip(models, states)]
            prev = torch.tensor([h.ids[-1] for h in survivors], dtype=torch.long)
            live = survivors

    if not finished:
        logger.warning(f"No hypothesis finished within {max_len} tokens")
        finished = live
    return sorted(finished, key=lambda h: (-h.normalized, h.ids))


def beam_decode(
    m: Seq2SeqModel, source: object, beam: int, max_len: int, bos_id: int, eos_id: int
) -> List[Hypothesis]:
    return ensemble_decode([m], source, beam, max_len, bos_id, eos_id)


def greedy_decode(m: Seq2SeqModel, source: object, max_len: int, bos_id: int, eos_id: int) -> Hypothesis:
    """Argmax decoding, one token at a time."""
    _check_source(source)
    ids: List[int] = []
    score = 0.0
    with torch.no_grad():
        m.eval()
        state = m.start(source)
        prev = torch.tensor([bos_id], dtype=torch.long)
        while len(ids) < max_len:
            log_probs, state = m.step(state, prev)
            best = int(log_probs[0].argmax())
            score += float(log_probs[0, best])
            ids.append(best)
            if best == eos_id:
                return Hypothesis(tuple(ids), score)
            prev = torch.tensor([best], dtype=torch.long)
    return Hypothesis(tuple(ids), score, finished=False)

"""NeuralREG with concatenative attention.

The pre- and post-context of a slot are encoded by two bidirectional LSTMs.
Each decoder step attends over both encodings and feeds the two context
vectors, together with the entity embedding, into an LSTM cell.
"""

import copy
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Set, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from loguru import logger
from torch import Tensor
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from d2t.neural.decoding import beam_decode
from d2t.neural.seq2seq import AdditiveAttention, State, reorder_state
from d2t.neural.training import TrainingConfig, TrainingDivergedError
from d2t.neural.vocab import BOS, EOS, SPECIALS, Vocab
from d2t.utils.config import seed_everything

RegExample = Tuple[Sequence[str], Sequence[str], str, Sequence[str]]


class UntrainedModelError(RuntimeError):
    """Generation was requested from a model that never trained."""


class UnknownEntityError(KeyError):
    """The entity has no row in the embedding table."""


class REGModel(nn.Module):
    arch = "neuralreg"

    def __init__(self, n_entities: int, n_context: int, n_target: int, pad_id: int, cfg: TrainingConfig) -> None:
        super().__init__()
        emb, hidden = cfg.emb_dim, cfg.hidden_dim
        self.pad_id = pad_id
        self.vocab_size = n_target
        self.vocab_signature: Optional[str] = None
        self.entity_embedding = nn.Embedding(n_entities, emb)
        self.context_embedding = nn.Embedding(n_context, emb, padding_idx=pad_id)
        self.target_embedding = nn.Embedding(n_target, emb, padding_idx=pad_id)
        self.pre_encoder = nn.LSTM(emb, hidden, batch_first=True, bidirectional=True)
        self.post_encoder = nn.LSTM(emb, hidden, batch_first=True, bidirectional=True)
        self.pre_attention = AdditiveAttention(hidden, 2 * hidden, hidden)
        self.post_attention = AdditiveAttention(hidden, 2 * hidden, hidden)
        self.decoder = nn.LSTMCell(emb + 4 * hidden + emb, hidden)
        self.readout = nn.Linear(hidden + 4 * hidden + emb, emb)
        self.output = nn.Linear(emb, n_target)
        self.dropout = nn.Dropout(cfg.dropout_hidden)

    def _encode(self, encoder: nn.LSTM, ids: Tensor) -> Tuple[Tensor, Tensor]:
        mask = ids != self.pad_id
        lengths = mask.sum(dim=1).clamp(min=1).cpu()
        packed = pack_padded_sequence(
            self.dropout(self.context_embedding(ids)), lengths, batch_first=True, enforce_sorted=False
        )
        outputs, _ = encoder(packed)
        outputs, _ = pad_packed_sequence(outputs, batch_first=True, total_length=ids.size(1))
        return outputs, mask

    def start(self, source: Tuple[Tensor, Tensor, Tensor]) -> State:
        pre, post, entity = source
        pre_out, pre_mask = self._encode(self.pre_encoder, pre)
        post_out, post_mask = self._encode(self.post_encoder, post)
        batch = entity.size(0)
        zeros = pre_out.new_zeros(batch, self.decoder.hidden_size)
        return {
            "pre": pre_out,
            "pre_keys": self.pre_attention.project_keys(pre_out),
            "pre_mask": pre_mask,
            "post": post_out,
            "post_keys": self.post_attention.project_keys(post_out),
            "post_mask": post_mask,
            "entity": self.entity_embedding(entity),
            "h": zeros,
            "c": zeros,
        }

    def _step_logits(self, state: State, prev: Tensor) -> Tuple[Tensor, State]:
        h: Tensor = state["h"]  # type: ignore[assignment]
        pre_ctx = self.pre_attention(h, state["pre_keys"], state["pre"], state["pre_mask"])
        post_ctx = self.post_attention(h, state["post_keys"], state["post"], state["post_mask"])
        embedded = self.dropout(self.target_embedding(prev))
        entity: Tensor = state["entity"]  # type: ignore[assignment]
        h, c = self.decoder(torch.cat([embedded, pre_ctx, post_ctx, entity], dim=-1), (h, state["c"]))
        out = self.dropout(torch.tanh(self.readout(torch.cat([h, pre_ctx, post_ctx, entity], dim=-1))))
        return self.output(out), {**state, "h": h, "c": c}

    def step(self, state: State, prev: Tensor) -> Tuple[Tensor, State]:
        logits, state = self._step_logits(state, prev)
        return F.log_softmax(logits, dim=-1), state

    def reorder(self, state: State, index: Tensor) -> State:
        return reorder_state(state, index)

    def forward(self, source: Tuple[Tensor, Tensor, Tensor], tgt_in: Tensor) -> Tensor:
        state = self.start(source)
        logits = []
        for t in range(tgt_in.size(1)):
            step_logits, state = self._step_logits(state, tgt_in[:, t])
            logits.append(step_logits)
        return torch.stack(logits, dim=1)


@dataclass
class NeuralREG:
    """A REG model with its three vocabularies."""

    config: TrainingConfig
    entity_vocab: Vocab
    context_vocab: Vocab
    target_vocab: Vocab
    model: Optional[REGModel] = None
    history: List[Tuple[int, float, float]] = field(default_factory=list)

    @property
    def trained(self) -> bool:
        return self.model is not None

    @property
    def entities(self) -> Set[str]:
        return set(self.entity_vocab.itos[len(SPECIALS) :])

    def encode(self, pre: Sequence[str], post: Sequence[str], entity: str) -> Tuple[Tensor, Tensor, Tensor]:
        pre_ids = self.context_vocab.encode([BOS, *pre, EOS])
        post_ids = self.context_vocab.encode([BOS, *post, EOS])
        return (
            torch.tensor([pre_ids], dtype=torch.long),
            torch.tensor([post_ids], dtype=torch.long),
            torch.tensor([self.entity_vocab.stoi[entity]], dtype=torch.long),
        )

    def generate(self, pre: Sequence[str], post: Sequence[str], entity: str) -> List[str]:
        """Beam-decode a referring expression for ``entity`` in context.

        Raises:
            UntrainedModelError: If the model never trained.
            UnknownEntityError: If ``entity`` has no embedding.
        """
        if self.model is None:
            raise UntrainedModelError("NeuralREG model has not been trained")
        if entity not in self.entity_vocab.stoi or entity in SPECIALS:
            raise UnknownEntityError(entity)
        hyps = beam_decode(
            self.model,
            self.encode(pre, post, entity),
            self.config.beam,
            self.config.max_decode_len,
            self.target_vocab.bos_id,
            self.target_vocab.eos_id,
        )
        return self.target_vocab.decode(hyps[0].ids)


def _pad(rows: Sequence[Sequence[int]], pad_id: int) -> Tensor:
    width = max(len(r) for r in rows)
    return torch.tensor([list(r) + [pad_id] * (width - len(r)) for r in rows], dtype=torch.long)


def _batch_loss(wrapper: NeuralREG, batch: Sequence[Tuple[List[int], List[int], int, List[int]]]) -> Tensor:
    assert wrapper.model is not None
    pad = wrapper.target_vocab.pad_id
    source = (
        _pad([b[0] for b in batch], pad),
        _pad([b[1] for b in batch], pad),
        torch.tensor([b[2] for b in batch], dtype=torch.long),
    )
    tgt = _pad([b[3] for b in batch], pad)
    logits = wrapper.model(source, tgt[:, :-1])
    return F.cross_entropy(logits.reshape(-1, logits.size(-1)), tgt[:, 1:].reshape(-1), ignore_index=pad)


def _mean_loss(wrapper: NeuralREG, encoded: Sequence, batch_size: int) -> float:
    assert wrapper.model is not None
    wrapper.model.eval()
    total, n = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(encoded), batch_size):
            batch = encoded[i : i + batch_size]
            total += _batch_loss(wrapper, batch).item() * len(batch)
            n += len(batch)
    return total / max(n, 1)


def train_neuralreg(
    examples: Sequence[RegExample],
    cfg: TrainingConfig,
    seed: int = 0,
    dev_examples: Optional[Sequence[RegExample]] = None,
) -> NeuralREG:
    """Train on (pre-context, post-context, entity, referring expression) examples.

    One evaluation per epoch; the best-dev parameters are kept and training
    stops after ``cfg.patience`` epochs without improvement. With zero
    epochs the returned wrapper is untrained.

    Raises:
        ValueError: If ``examples`` is empty.
        TrainingDivergedError: If the loss becomes non-finite.
    """
    if not examples:
        raise ValueError("cannot train NeuralREG on an empty dataset")
    seed_everything(seed)
    entity_vocab = Vocab.build([[entity] for _, _, entity, _ in examples])
    context_vocab = Vocab.build([list(pre) + list(post) for pre, post, _, _ in examples])
    target_vocab = Vocab.build([refex for _, _, _, refex in examples])
    wrapper = NeuralREG(cfg, entity_vocab, context_vocab, target_vocab)
    epochs = cfg.epochs if cfg.epochs is not None else 60
    if epochs == 0:
        logger.warning("NeuralREG epoch budget is zero; returning an untrained model")
        return wrapper

    def encode(data: Sequence[RegExample]) -> List[Tuple[List[int], List[int], int, List[int]]]:
        return [
            (
                context_vocab.encode([BOS, *pre, EOS]),
                context_vocab.encode([BOS, *post, EOS]),
                entity_vocab.stoi.get(entity, entity_vocab.unk_id),
                target_vocab.encode(refex, add_bos=True, add_eos=True),
            )
            for pre, post, entity, refex in data
        ]

    train = encode(examples)
    dev = encode(dev_examples) if dev_examples else train
    model = REGModel(len(entity_vocab), len(context_vocab), len(target_vocab), target_vocab.pad_id, cfg)
    model.vocab_signature = target_vocab.signature()
    wrapper.model = model
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps)
    generator = torch.Generator().manual_seed(seed)
    best, best_state, bad = math.inf, None, 0
    updates = 0
    logger.info(f"Training NeuralREG on {len(train)} references ({len(entity_vocab)} entities, {epochs} epochs)")
    for epoch in range(1, epochs + 1):
        model.train()
        order = torch.randperm(len(train), generator=generator).tolist()
        for start in range(0, len(order), cfg.batch_size):
            loss = _batch_loss(wrapper, [train[i] for i in order[start : start + cfg.batch_size]])
            if not torch.isfinite(loss):
                logger.error(f"Non-finite NeuralREG loss in epoch {epoch}")
                raise TrainingDivergedError(updates, loss.item())
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
            optimizer.step()
            updates += 1
        train_loss = _mean_loss(wrapper, train, cfg.batch_size)
        dev_loss = _mean_loss(wrapper, dev, cfg.batch_size)
        wrapper.history.append((epoch, train_loss, dev_loss))
        logger.debug(f"epoch {epoch}: train {train_loss:.4f} dev {dev_loss:.4f}")
        if dev_loss < best:
            best, best_state, bad = dev_loss, copy.deepcopy(model.state_dict()), 0
        else:
            bad += 1
            if bad >= cfg.patience:
                logger.info(f"NeuralREG early stop after epoch {epoch}")
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return wrapper

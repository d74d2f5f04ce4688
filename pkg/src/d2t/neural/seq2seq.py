"""GRU-with-attention and Transformer encoder-decoders.

Both models expose the same incremental decoding interface used by beam
search and ensembling:

- ``start(src)`` encodes a padded ``(B, S)`` batch and returns a state dict,
- ``step(state, prev)`` consumes the previous target ids ``(B,)`` and returns
  next-token log probabilities ``(B, V)`` with the updated state,
- ``reorder(state, index)`` selects / duplicates batch rows.

``forward(src, tgt_in)`` returns teacher-forced logits ``(B, T, V)``.
"""

import math
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

if TYPE_CHECKING:
    from d2t.neural.training import TrainingConfig

State = Dict[str, object]


def _reorder_value(value: object, index: Tensor) -> object:
    if isinstance(value, Tensor):
        return value.index_select(0, index)
    if isinstance(value, list):
        return [_reorder_value(v, index) for v in value]
    if isinstance(value, tuple):
        return tuple(_reorder_value(v, index) for v in value)
    return value


def reorder_state(state: State, index: Tensor) -> State:
    return {key: _reorder_value(value, index) for key, value in state.items()}


class AdditiveAttention(nn.Module):
    """Concatenative (Bahdanau) attention: ``v^T tanh(W q + U k)``."""

    def __init__(self, query_dim: int, key_dim: int, attn_dim: int) -> None:
        super().__init__()
        self.query_proj = nn.Linear(query_dim, attn_dim, bias=False)
        self.key_proj = nn.Linear(key_dim, attn_dim)
        self.v = nn.Linear(attn_dim, 1, bias=False)

    def project_keys(self, keys: Tensor) -> Tensor:
        return self.key_proj(keys)

    def forward(self, query: Tensor, projected_keys: Tensor, values: Tensor, mask: Tensor) -> Tensor:
        """
        Args:
            query: ``(B, Q)`` decoder state.
            projected_keys: ``(B, S, A)`` from :meth:`project_keys`.
            values: ``(B, S, D)`` encoder outputs.
            mask: ``(B, S)`` True on real positions.

        Returns:
            Tensor: ``(B, D)`` context vector.
        """
        scores = self.v(torch.tanh(self.query_proj(query).unsqueeze(1) + projected_keys)).squeeze(-1)
        scores = scores.masked_fill(~mask, float("-inf"))
        weights = F.softmax(scores, dim=-1)
        return torch.bmm(weights.unsqueeze(1), values).squeeze(1)


class PositionalEncoding(nn.Module):
    """Sinusoidal position encodings added to ``(B, T, E)`` inputs."""

    def __init__(self, num_features: int, max_len: int = 512, dropout: float = 0.0) -> None:
        super().__init__()
        position = torch.arange(0, max_len).unsqueeze(1).float()
        div_term = torch.exp(torch.arange(0, num_features, 2).float() * (-math.log(10000.0) / num_features))
        encoding = torch.zeros(max_len, num_features)
        encoding[:, 0::2] = torch.sin(position * div_term)
        encoding[:, 1::2] = torch.cos(position * div_term[: num_features // 2])
        self.register_buffer("encoding", encoding.unsqueeze(0))
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: Tensor) -> Tensor:
        if x.size(1) > self.encoding.size(1):
            raise ValueError(f"sequence of length {x.size(1)} exceeds position table {self.encoding.size(1)}")
        return self.dropout(x + self.encoding[:, : x.size(1)])


class Seq2SeqModel(nn.Module):
    """Shared embedding / output projection plumbing.

    With ``tied_embeddings`` one matrix serves as encoder input, decoder
    input and output projection.
    """

    arch = "base"

    def __init__(self, vocab_size: int, pad_id: int, emb_dim: int, tied: bool) -> None:
        super().__init__()
        self.vocab_size = vocab_size
        self.pad_id = pad_id
        self.tied = tied
        self.vocab_signature: Optional[str] = None
        self.embedding = nn.Embedding(vocab_size, emb_dim, padding_idx=pad_id)
        if tied:
            self.target_embedding: Optional[nn.Embedding] = None
            self.output: Optional[nn.Linear] = None
        else:
            self.target_embedding = nn.Embedding(vocab_size, emb_dim, padding_idx=pad_id)
            self.output = nn.Linear(emb_dim, vocab_size, bias=False)
        self.output_bias = nn.Parameter(torch.zeros(vocab_size))

    def embed_source(self, ids: Tensor) -> Tensor:
        return self.embedding(ids)

    def embed_target(self, ids: Tensor) -> Tensor:
        return self.embedding(ids) if self.target_embedding is None else self.target_embedding(ids)

    def project(self, hidden: Tensor) -> Tensor:
        weight = self.embedding.weight if self.output is None else self.output.weight
        return F.linear(hidden, weight, self.output_bias)

    def start(self, src: Tensor) -> State:
        raise NotImplementedError

    def step(self, state: State, prev: Tensor) -> Tuple[Tensor, State]:
        raise NotImplementedError

    def reorder(self, state: State, index: Tensor) -> State:
        return reorder_state(state, index)

    def forward(self, src: Tensor, tgt_in: Tensor) -> Tensor:
        state = self.start(src)
        logits: List[Tensor] = []
        for t in range(tgt_in.size(1)):
            step_logits, state = self._step_logits(state, tgt_in[:, t])
            logits.append(step_logits)
        return torch.stack(logits, dim=1)

    def _step_logits(self, state: State, prev: Tensor) -> Tuple[Tensor, State]:
        raise NotImplementedError


class GRUSeq2Seq(Seq2SeqModel):
    """Bidirectional GRU encoder, attentional stacked-GRU decoder with layer norm."""

    arch = "gru"

    def __init__(self, vocab_size: int, pad_id: int, cfg: "TrainingConfig") -> None:
        super().__init__(vocab_size, pad_id, cfg.emb_dim, cfg.tied_embeddings)
        emb, hidden, layers = cfg.emb_dim, cfg.hidden_dim, cfg.layers
        self.emb_dropout = nn.Dropout(cfg.dropout_embeddings)
        self.hidden_dropout = nn.Dropout(cfg.dropout_hidden)
        self.encoder = nn.GRU(
            emb,
            hidden,
            num_layers=layers,
            batch_first=True,
            bidirectional=True,
            dropout=cfg.dropout_hidden if layers > 1 else 0.0,
        )
        self.encoder_norm = nn.LayerNorm(2 * hidden)
        self.bridge = nn.Linear(2 * hidden, hidden)
        self.attention = AdditiveAttention(hidden, 2 * hidden, hidden)
        self.cells = nn.ModuleList(
            [nn.GRUCell(emb + 2 * hidden if i == 0 else hidden, hidden) for i in range(layers)]
        )
        self.decoder_norm = nn.LayerNorm(hidden)
        self.readout = nn.Linear(hidden + 2 * hidden + emb, emb)

    def start(self, src: Tensor) -> State:
        mask = src != self.pad_id
        lengths = mask.sum(dim=1).clamp(min=1).cpu()
        embedded = self.emb_dropout(self.embed_source(src))
        packed = pack_padded_sequence(embedded, lengths, batch_first=True, enforce_sorted=False)
        outputs, _ = self.encoder(packed)
        outputs, _ = pad_packed_sequence(outputs, batch_first=True, total_length=src.size(1))
        outputs = self.encoder_norm(outputs)
        denom = mask.sum(dim=1, keepdim=True).clamp(min=1).to(outputs.dtype)
        mean = (outputs * mask.unsqueeze(-1).to(outputs.dtype)).sum(dim=1) / denom
        init = torch.tanh(self.bridge(mean))
        return {
            "memory": outputs,
            "keys": self.attention.project_keys(outputs),
            "mask": mask,
            "hidden": [init for _ in self.cells],
        }

    def _step_logits(self, state: State, prev: Tensor) -> Tuple[Tensor, State]:
        hidden: List[Tensor] = state["hidden"]  # type: ignore[assignment]
        memory: Tensor = state["memory"]  # type: ignore[assignment]
        embedded = self.emb_dropout(self.embed_target(prev))
        context = self.attention(hidden[-1], state["keys"], memory, state["mask"])
        x = torch.cat([embedded, context], dim=-1)
        new_hidden = []
        for cell, h in zip(self.cells, hidden):
            h = cell(x, h)
            new_hidden.append(h)
            x = self.hidden_dropout(h)
        top = self.decoder_norm(new_hidden[-1])
        out = self.hidden_dropout(torch.tanh(self.readout(torch.cat([top, context, embedded], dim=-1))))
        return self.project(out), {**state, "hidden": new_hidden}

    def step(self, state: State, prev: Tensor) -> Tuple[Tensor, State]:
        logits, state = self._step_logits(state, prev)
        return F.log_softmax(logits, dim=-1), state


def causal_mask(size: int, device: torch.device) -> Tensor:
    """True above the diagonal: positions a decoder step may not attend to."""
    return torch.triu(torch.ones(size, size, dtype=torch.bool, device=device), diagonal=1)


class TransformerSeq2Seq(Seq2SeqModel):
    """Encoder-decoder Transformer with sinusoidal positions.

    Embeddings use ``hidden_dim`` as model width so they can be tied to the
    output projection.
    """

    arch = "transformer"

    def __init__(self, vocab_size: int, pad_id: int, cfg: "TrainingConfig") -> None:
        d_model = cfg.hidden_dim
        super().__init__(vocab_size, pad_id, d_model, cfg.tied_embeddings)
        self.scale = math.sqrt(d_model)
        self.positions = PositionalEncoding(d_model, max_len=max(512, cfg.max_decode_len + 2), dropout=cfg.dropout)
        encoder_layer = nn.TransformerEncoderLayer(
            d_model, cfg.heads, cfg.ff_dim, dropout=cfg.dropout, batch_first=True
        )
        decoder_layer = nn.TransformerDecoderLayer(
            d_model, cfg.heads, cfg.ff_dim, dropout=cfg.dropout, batch_first=True
        )
        self.encoder = nn.TransformerEncoder(encoder_layer, cfg.layers, enable_nested_tensor=False)
        self.decoder = nn.TransformerDecoder(decoder_layer, cfg.layers)

    def encode(self, src: Tensor) -> Tuple[Tensor, Tensor]:
        padding = src == self.pad_id
        memory = self.encoder(self.positions(self.embed_source(src) * self.scale), src_key_padding_mask=padding)
        return memory, padding

    def decode(self, tgt_in: Tensor, memory: Tensor, memory_padding: Tensor) -> Tensor:
        tgt_padding = tgt_in == self.pad_id
        out = self.decoder(
            self.positions(self.embed_target(tgt_in) * self.scale),
            memory,
            tgt_mask=causal_mask(tgt_in.size(1), tgt_in.device),
            tgt_key_padding_mask=tgt_padding,
            memory_key_padding_mask=memory_padding,
        )
        return self.project(out)

    def forward(self, src: Tensor, tgt_in: Tensor) -> Tensor:
        memory, padding = self.encode(src)
        return self.decode(tgt_in, memory, padding)

    def start(self, src: Tensor) -> State:
        memory, padding = self.encode(src)
        return {
            "memory": memory,
            "padding": padding,
            "prefix": torch.empty(src.size(0), 0, dtype=torch.long, device=src.device),
        }

    def step(self, state: State, prev: Tensor) -> Tuple[Tensor, State]:
        prefix = torch.cat([state["prefix"], prev.unsqueeze(1)], dim=1)  # type: ignore[list-item]
        logits = self.decode(prefix, state["memory"], state["padding"])  # type: ignore[arg-type]
        return F.log_softmax(logits[:, -1], dim=-1), {**state, "prefix": prefix}


ARCHITECTURES = {"gru": GRUSeq2Seq, "transformer": TransformerSeq2Seq}


def build_model(arch: str, vocab_size: int, pad_id: int, cfg: "TrainingConfig") -> Seq2SeqModel:
    try:
        model_cls = ARCHITECTURES[arch]
    except KeyError:
        raise ValueError(f"Unknown architecture {arch!r}; expected one of {sorted(ARCHITECTURES)}") from None
    return model_cls(vocab_size, pad_id, cfg)

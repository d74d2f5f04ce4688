"""Training configuration and the seq2seq training loop."""

import copy
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from d2t.neural.seq2seq import Seq2SeqModel, build_model
from d2t.neural.vocab import Vocab
from d2t.utils.config import seed_everything

Pair = Tuple[Sequence[str], Sequence[str]]
Profile = Literal["desk", "paper"]
Arch = Literal["gru", "transformer"]


class TrainingDivergedError(RuntimeError):
    """Loss or gradient norm became non-finite."""

    def __init__(self, update: int, loss: float, grad_norm: Optional[float] = None) -> None:
        self.update = update
        self.loss = loss
        self.grad_norm = grad_norm
        super().__init__(f"Training diverged at update {update}: loss={loss}, grad_norm={grad_norm}")


class TrainingConfig(BaseModel):
    """Optimizer, schedule, architecture and decoding settings."""

    model_config = ConfigDict(frozen=True)

    arch: Arch = Field("gru", description="Architecture family")
    emb_dim: int = Field(300, gt=0)
    hidden_dim: int = Field(512, gt=0)
    ff_dim: int = Field(2048, gt=0, description="Transformer feed-forward width")
    layers: int = Field(1, gt=0)
    heads: int = Field(8, gt=0)
    dropout: float = Field(0.1, ge=0.0, lt=1.0, description="Transformer dropout")
    dropout_embeddings: float = Field(0.1, ge=0.0, lt=1.0)
    dropout_hidden: float = Field(0.2, ge=0.0, lt=1.0)
    tied_embeddings: bool = True

    learning_rate: float = Field(1e-4, ge=0.0)
    beta1: float = Field(0.9, gt=0.0, lt=1.0)
    beta2: float = Field(0.98, gt=0.0, lt=1.0)
    eps: float = Field(1e-9, gt=0.0)
    clip_norm: float = Field(1.0, gt=0.0)
    batch_size: int = Field(80, gt=0)
    max_updates: int = Field(200_000, gt=0)
    eval_every: int = Field(5_000, gt=0)
    patience: int = Field(30, ge=1)
    epochs: Optional[int] = Field(None, ge=0, description="Epoch budget, used by NeuralREG")
    warmup_steps: int = Field(0, ge=0)
    label_smoothing: float = Field(0.0, ge=0.0, lt=1.0)

    beam: int = Field(5, ge=1)
    max_decode_len: int = Field(100, gt=0)
    bpe_merges: int = Field(20_000, ge=0, description="0 disables subword segmentation")
    bpe_threshold: int = Field(50, gt=0)
    runs: int = Field(1, ge=1, description="Independent training runs (seeds)")

    @model_validator(mode="after")
    def _check_heads(self) -> "TrainingConfig":
        if self.arch == "transformer" and self.hidden_dim % self.heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by heads {self.heads}")
        return self

    @classmethod
    def for_profile(cls, profile: Profile = "desk", arch: Arch = "gru", **overrides: object) -> "TrainingConfig":
        """Settings for a named profile.

        ``paper`` carries the full-size published settings; ``desk`` shrinks
        dimensions and budgets so training fits a laptop and the test suite.
        """
        if profile == "paper":
            values = dict(arch=arch, learning_rate=1e-4, runs=3)
            if arch == "transformer":
                values.update(
                    emb_dim=512, hidden_dim=512, ff_dim=2048, layers=6, heads=8,
                    dropout=0.1, warmup_steps=8000, label_smoothing=0.1,
                )
            else:
                values.update(emb_dim=300, hidden_dim=512, layers=1, dropout_embeddings=0.1, dropout_hidden=0.2)
        elif profile == "desk":
            values = dict(
                arch=arch, emb_dim=64, hidden_dim=128, ff_dim=256, layers=2, heads=2,
                learning_rate=1e-3, batch_size=32, max_updates=2000, eval_every=100,
                patience=5, bpe_merges=2000, bpe_threshold=5, runs=1,
            )
            if arch == "transformer":
                values.update(emb_dim=128, warmup_steps=100, label_smoothing=0.1)
        else:
            raise ValueError(f"Unknown profile {profile!r}")
        values.update(overrides)
        return cls(**values)

    @classmethod
    def for_reg(cls, profile: Profile = "desk", **overrides: object) -> "TrainingConfig":
        """NeuralREG settings: 60 epochs, batch 80, dropout 0.2, beam 5, patience 10."""
        values = dict(
            arch="gru", epochs=60, batch_size=80, dropout_embeddings=0.2, dropout_hidden=0.2,
            beam=5, patience=10, learning_rate=1e-3, max_decode_len=30, tied_embeddings=False,
        )
        if profile == "paper":
            values.update(emb_dim=300, hidden_dim=512)
        elif profile == "desk":
            values.update(emb_dim=64, hidden_dim=128)
        else:
            raise ValueError(f"Unknown profile {profile!r}")
        values.update(overrides)
        return cls(**values)


@dataclass
class EvalPoint:
    update: int
    train_loss: float
    dev_loss: float


@dataclass
class TrainResult:
    model: Seq2SeqModel
    vocab: Vocab
    config: TrainingConfig
    seed: int
    best_dev_loss: float = math.inf
    updates: int = 0
    stopped_early: bool = False
    history: List[EvalPoint] = field(default_factory=list)


def build_vocab(pairs: Iterable[Pair]) -> Vocab:
    """Joint source/target vocabulary."""
    sequences: List[Sequence[str]] = []
    for src, tgt in pairs:
        sequences.append(src)
        sequences.append(tgt)
    return Vocab.build(sequences)


def encode_pairs(pairs: Iterable[Pair], vocab: Vocab) -> List[Tuple[List[int], List[int]]]:
    return [
        (vocab.encode(src, add_eos=True), vocab.encode(tgt, add_bos=True, add_eos=True)) for src, tgt in pairs
    ]


def pad_batch(sequences: Sequence[Sequence[int]], pad_id: int) -> torch.Tensor:
    width = max(len(s) for s in sequences)
    return torch.tensor([list(s) + [pad_id] * (width - len(s)) for s in sequences], dtype=torch.long)


def batch_loss(
    model: Seq2SeqModel,
    batch: Sequence[Tuple[List[int], List[int]]],
    pad_id: int,
    label_smoothing: float = 0.0,
) -> Tuple[torch.Tensor, int]:
    """Mean token cross-entropy of a batch and its target token count."""
    src = pad_batch([s for s, _ in batch], pad_id)
    tgt = pad_batch([t for _, t in batch], pad_id)
    logits = model(src, tgt[:, :-1])
    gold = tgt[:, 1:]
    loss = F.cross_entropy(
        logits.reshape(-1, logits.size(-1)),
        gold.reshape(-1),
        ignore_index=pad_id,
        label_smoothing=label_smoothing,
    )
    return loss, int((gold != pad_id).sum())


def evaluate_loss(
    model: Seq2SeqModel, encoded: Sequence[Tuple[List[int], List[int]]], pad_id: int, batch_size: int
) -> float:
    """Token-averaged cross-entropy without label smoothing, in eval mode."""
    model.eval()
    total, tokens = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(encoded), batch_size):
            loss, n = batch_loss(model, encoded[i : i + batch_size], pad_id)
            total += loss.item() * n
            tokens += n
    return total / max(tokens, 1)


def noam_factor(warmup: int):
    """Linear warmup then inverse square-root decay, peaking at the base rate."""

    def factor(step: int) -> float:
        step = max(step, 1)
        return min(step / warmup, math.sqrt(warmup / step))

    return factor


def seq2seq_train(
    pairs: Sequence[Pair],
    cfg: TrainingConfig,
    arch: Optional[Arch] = None,
    seed: int = 0,
    dev_pairs: Optional[Sequence[Pair]] = None,
    vocab: Optional[Vocab] = None,
) -> TrainResult:
    """Train one encoder-decoder and keep its best-dev parameters.

    Args:
        pairs: (source tokens, target tokens) training pairs.
        cfg: Training settings.
        arch: Overrides ``cfg.arch`` when given.
        seed: Seeds parameter init, dropout and batch order.
        dev_pairs: Held-out pairs for early stopping; training pairs if None.
        vocab: Pre-built vocabulary, so runs can be ensembled.

    Returns:
        TrainResult: Best-dev model, vocabulary and evaluation history.

    Raises:
        ValueError: If ``pairs`` is empty.
        TrainingDivergedError: If loss or gradient norm becomes non-finite.
    """
    if not pairs:
        raise ValueError("cannot train on an empty dataset")
    arch = arch or cfg.arch
    seed_everything(seed)
    vocab = vocab or build_vocab(pairs)
    model = build_model(arch, len(vocab), vocab.pad_id, cfg)
    model.vocab_signature = vocab.signature()

    train = encode_pairs(pairs, vocab)
    dev = encode_pairs(dev_pairs, vocab) if dev_pairs else train
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps
    )
    scheduler = (
        torch.optim.lr_scheduler.LambdaLR(optimizer, noam_factor(cfg.warmup_steps)) if cfg.warmup_steps else None
    )
    generator = torch.Generator().manual_seed(seed)
    result = TrainResult(model=model, vocab=vocab, config=cfg, seed=seed)
    best_state = None
    bad_evals = 0
    running, running_n = 0.0, 0

    logger.info(
        f"Training {arch} on {len(train)} pairs (vocab {len(vocab)}, seed {seed}, "
        f"max_updates {cfg.max_updates}, eval_every {cfg.eval_every})"
    )
    done = False
    while not done:
        order = torch.randperm(len(train), generator=generator).tolist()
        for start in range(0, len(order), cfg.batch_size):
            model.train()
            batch = [train[i] for i in order[start : start + cfg.batch_size]]
            loss, _ = batch_loss(model, batch, vocab.pad_id, cfg.label_smoothing)
            if not torch.isfinite(loss):
                logger.error(f"Non-finite loss at update {result.updates}")
                raise TrainingDivergedError(result.updates, loss.item())
            optimizer.zero_grad()
            loss.backward()
            grad_norm = torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
            if not torch.isfinite(grad_norm):
                logger.error(f"Non-finite gradient norm at update {result.updates}")
                raise TrainingDivergedError(result.updates, loss.item(), grad_norm.item())
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
            result.updates += 1
            running += loss.item()
            running_n += 1

            if result.updates % cfg.eval_every == 0:
                dev_loss = evaluate_loss(model, dev, vocab.pad_id, cfg.batch_size)
                result.history.append(EvalPoint(result.updates, running / running_n, dev_loss))
                logger.debug(f"update {result.updates}: train {running / running_n:.4f} dev {dev_loss:.4f}")
                running, running_n = 0.0, 0
                if dev_loss < result.best_dev_loss:
                    result.best_dev_loss = dev_loss
                    best_state = copy.deepcopy(model.state_dict())
                    bad_evals = 0
                else:
                    bad_evals += 1
                    if bad_evals >= cfg.patience:
                        logger.info(f"Early stop at update {result.updates} (patience {cfg.patience})")
                        result.stopped_early = True
                        done = True
                        break
            if result.updates >= cfg.max_updates:
                done = True
                break

    if best_state is None:
        result.best_dev_loss = evaluate_loss(model, dev, vocab.pad_id, cfg.batch_size)
    else:
        model.load_state_dict(best_state)
    model.eval()
    logger.info(f"Finished after {result.updates} updates, best dev loss {result.best_dev_loss:.4f}")
    return result


def train_runs(
    pairs: Sequence[Pair],
    cfg: TrainingConfig,
    arch: Optional[Arch] = None,
    seeds: Optional[Sequence[int]] = None,
    dev_pairs: Optional[Sequence[Pair]] = None,
) -> List[TrainResult]:
    """Independent runs over one shared vocabulary, sorted by best dev loss."""
    seeds = list(seeds) if seeds is not None else list(range(cfg.runs))
    vocab = build_vocab(pairs)
    results = [seq2seq_train(pairs, cfg, arch, seed, dev_pairs, vocab) for seed in seeds]
    return sorted(results, key=lambda r: r.best_dev_loss)

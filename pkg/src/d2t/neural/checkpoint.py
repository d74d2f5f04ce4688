"""Self-describing model checkpoints.

A checkpoint is a ``torch.save`` container with a header (format, version,
kind, task, architecture), the training config, vocabularies, optional BPE
merges and the parameters. ``load_checkpoint`` rebuilds any kind.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import torch
from loguru import logger

from d2t.neural.bpe import BPEModel
from d2t.neural.engine import Translator
from d2t.neural.neuralreg import NeuralREG, REGModel
from d2t.neural.seq2seq import Seq2SeqModel, build_model
from d2t.neural.training import TrainingConfig
from d2t.neural.vocab import Vocab

FORMAT = "d2t-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    kind: str
    task: str
    config: TrainingConfig
    model: Optional[Union[Seq2SeqModel, REGModel]]
    vocab: Optional[Vocab] = None
    bpe: Optional[BPEModel] = None
    reg: Optional[NeuralREG] = None


def save_seq2seq(
    path: Union[str, Path],
    model: Seq2SeqModel,
    vocab: Vocab,
    config: TrainingConfig,
    task: str,
    bpe: Optional[BPEModel] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format": FORMAT,
            "version": VERSION,
            "kind": "seq2seq",
            "task": task,
            "arch": model.arch,
            "config": config.model_dump(),
            "vocab": vocab.to_dict(),
            "bpe": bpe.to_dict() if bpe is not None else None,
            "state_dict": model.state_dict(),
        },
        path,
    )
    logger.info(f"Saved {model.arch} {task} checkpoint to {path}")
    return path


def save_neuralreg(path: Union[str, Path], reg: NeuralREG) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format": FORMAT,
            "version": VERSION,
            "kind": "neuralreg",
            "task": "reg",
            "arch": REGModel.arch,
            "config": reg.config.model_dump(),
            "vocabs": {
                "entity": reg.entity_vocab.to_dict(),
                "context": reg.context_vocab.to_dict(),
                "target": reg.target_vocab.to_dict(),
            },
            "state_dict": reg.model.state_dict() if reg.model is not None else None,
        },
        path,
    )
    logger.info(f"Saved NeuralREG checkpoint to {path}")
    return path


def _read(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        data = torch.load(Path(path), map_location="cpu", weights_only=False)
    except (OSError, RuntimeError) as e:
        logger.error(f"Cannot read checkpoint {path}: {e}")
        raise
    if not isinstance(data, dict) or data.get("format") != FORMAT:
        raise ValueError(f"{path} is not a d2t checkpoint")
    if data.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {data.get('version')}")
    return data


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Rebuild the model stored at ``path``, whatever its kind.

    Raises:
        ValueError: If the file is not a d2t checkpoint or its kind is unknown.
    """
    data = _read(path)
    config = TrainingConfig(**data["config"])
    kind = data["kind"]
    if kind == "seq2seq":
        vocab = Vocab.from_dict(data["vocab"])
        model = build_model(data["arch"], len(vocab), vocab.pad_id, config)
        model.load_state_dict(data["state_dict"])
        model.vocab_signature = vocab.signature()
        model.eval()
        bpe = BPEModel.from_dict(data["bpe"]) if data.get("bpe") else None
        return Checkpoint(kind, data["task"], config, model, vocab=vocab, bpe=bpe)
    if kind == "neuralreg":
        vocabs = {name: Vocab.from_dict(v) for name, v in data["vocabs"].items()}
        reg = NeuralREG(config, vocabs["entity"], vocabs["context"], vocabs["target"])
        if data.get("state_dict") is not None:
            reg_model = REGModel(
                len(reg.entity_vocab), len(reg.context_vocab), len(reg.target_vocab), reg.target_vocab.pad_id, config
            )
            reg_model.load_state_dict(data["state_dict"])
            reg_model.vocab_signature = reg.target_vocab.signature()
            reg_model.eval()
            reg.model = reg_model
        return Checkpoint(kind, "reg", config, reg.model, reg=reg)
    raise ValueError(f"{path}: unknown checkpoint kind {kind!r}")


def load_translator(
    paths: Sequence[Union[str, Path]], beam: Optional[int] = None, max_len: Optional[int] = None
) -> Translator:
    """Load one or more seq2seq checkpoints of the same task as an ensemble."""
    if not paths:
        raise ValueError("no checkpoints given")
    loaded: List[Checkpoint] = [load_checkpoint(p) for p in paths]
    for ckpt, path in zip(loaded, paths):
        if ckpt.kind != "seq2seq":
            raise ValueError(f"{path} holds a {ckpt.kind} model, expected seq2seq")
    first = loaded[0]
    assert first.vocab is not None
    return Translator(
        models=[c.model for c in loaded],  # type: ignore[misc]
        vocab=first.vocab,
        bpe=first.bpe,
        beam=beam or first.config.beam,
        max_len=max_len or first.config.max_decode_len,
    )


def load_neuralreg(path: Union[str, Path]) -> NeuralREG:
    ckpt = load_checkpoint(path)
    if ckpt.reg is None:
        raise ValueError(f"{path} holds a {ckpt.kind} model, expected neuralreg")
    return ckpt.reg

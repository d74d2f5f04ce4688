"""Tests for model checkpoints."""
import pytest
import torch

from d2t.neural.bpe import bpe_train
from d2t.neural.checkpoint import (
    load_checkpoint,
    load_neuralreg,
    load_translator,
    save_neuralreg,
    save_seq2seq,
)
from d2t.neural.engine import Translator
from d2t.neural.seq2seq import build_model
from d2t.neural.training import TrainingConfig, build_vocab
from d2t.reg import reg_train

PAIRS = [(["<TRIPLE>", "a", "club", "b", "</TRIPLE>"], ["club"]), (["<TRIPLE>", "a", "manager", "b", "</TRIPLE>"], ["manager"])]


@pytest.mark.parametrize("arch", ["gru", "transformer"])
def test_seq2seq_checkpoint_decodes_identically(tmp_path, arch):
    torch.manual_seed(0)
    cfg = TrainingConfig.for_profile("desk", arch, emb_dim=8, hidden_dim=8, ff_dim=16, layers=1, heads=2, max_decode_len=5)
    vocab = build_vocab(PAIRS)
    model = build_model(arch, len(vocab), vocab.pad_id, cfg)
    model.vocab_signature = vocab.signature()
    model.eval()
    bpe = bpe_train([p[1] for p in PAIRS], merges=2, threshold=1)
    path = save_seq2seq(tmp_path / "ordering.pt", model, vocab, cfg, "ordering", bpe)

    ckpt = load_checkpoint(path)
    assert (ckpt.kind, ckpt.task) == ("seq2seq", "ordering")
    assert ckpt.config == cfg
    assert ckpt.bpe is not None and ckpt.bpe.merges == bpe.merges

    loaded = load_translator([path, path], beam=2)
    assert len(loaded.models) == 2
    assert loaded.translate(PAIRS[0][0]) == Translator([model], vocab, bpe, beam=2, max_len=5).translate(PAIRS[0][0])
    assert loaded.vocab.signature() == vocab.signature()


def test_neuralreg_checkpoint(tmp_path, datasets):
    cfg = TrainingConfig.for_reg("desk", epochs=1, emb_dim=8, hidden_dim=8, batch_size=16, beam=2)
    reg = reg_train(datasets["reg"][0], cfg, seed=0)
    path = save_neuralreg(tmp_path / "reg.pt", reg)
    loaded = load_neuralreg(path)
    assert loaded.trained
    assert loaded.entities == reg.entities
    pre, post = ("<s>",), ("play", "for")
    assert loaded.generate(pre, post, "Massimo_Drago") == reg.generate(pre, post, "Massimo_Drago")

    untrained = reg_train(datasets["reg"][0], cfg.model_copy(update={"epochs": 0}))
    assert not load_neuralreg(save_neuralreg(tmp_path / "untrained.pt", untrained)).trained


def test_checkpoint_kinds_are_checked(tmp_path, datasets):
    stray = tmp_path / "stray.pt"
    torch.save({"weights": [1, 2, 3]}, stray)
    with pytest.raises(ValueError, match="not a d2t checkpoint"):
        load_checkpoint(stray)

    reg = reg_train(datasets["reg"][0], TrainingConfig.for_reg("desk", epochs=0))
    reg_path = save_neuralreg(tmp_path / "reg.pt", reg)
    with pytest.raises(ValueError):
        load_translator([reg_path])
    with pytest.raises(ValueError):
        load_translator([])

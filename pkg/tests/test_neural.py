"""Tests for subword segmentation, the seq2seq models, decoding and training."""
import numpy as np
import pytest
import torch
import torch.nn.functional as F
from loguru import logger
from pydantic import ValidationError

from d2t.neural.bpe import bpe_train
from d2t.neural.decoding import VocabularyMismatchError, beam_decode, ensemble_decode, greedy_decode
from d2t.neural.engine import Translator, sequence_accuracy, train_translator
from d2t.neural.gradcheck import attention_grad_check, check_function, grad_check, relative_error
from d2t.neural.seq2seq import build_model
from d2t.neural.training import TrainingConfig, TrainingDivergedError, build_vocab, seq2seq_train, train_runs
from d2t.neural.vocab import SPECIALS, Vocab

PAIRS = [
    (["<TRIPLE>", "a", "club", "b", "</TRIPLE>"], ["club"]),
    (["<TRIPLE>", "a", "manager", "b", "</TRIPLE>"], ["manager"]),
    (["<TRIPLE>", "b", "club", "c", "</TRIPLE>", "<TRIPLE>", "c", "manager", "a", "</TRIPLE>"], ["club", "manager"]),
]


def _config(arch="gru", **overrides):
    values = dict(emb_dim=8, hidden_dim=8, ff_dim=16, layers=1, heads=2, max_decode_len=6, beam=3)
    values.update(overrides)
    return TrainingConfig.for_profile("desk", arch, **values)


def _tiny(arch="gru", seed=0, **overrides):
    torch.manual_seed(seed)
    vocab = build_vocab(PAIRS)
    model = build_model(arch, len(vocab), vocab.pad_id, _config(arch, **overrides))
    model.vocab_signature = vocab.signature()
    model.eval()
    return model, vocab


def _source(vocab, tokens):
    return torch.tensor([vocab.encode(tokens, add_eos=True)], dtype=torch.long)


# ---------------------------------------------------------------------------
# Subwords and vocabulary
# ---------------------------------------------------------------------------


def test_bpe_merges_and_segmentation():
    """Ties between equally frequent pairs go to the smaller pair."""
    model = bpe_train(["low low lower"], merges=2, threshold=1)
    assert model.merges == [("l", "o"), ("lo", "w")]
    assert model.encode(["lower"]) == ["low@@", "e@@", "r"]
    assert model.encode(["low"]) == ["low"]
    assert model.decode(model.encode(["lower", "low"])) == ["lower", "low"]


def test_bpe_protects_tags_and_respects_threshold():
    model = bpe_train(["ENTITY-1 serves ENTITY-2", "ENTITY-1 serves"], merges=50, threshold=2)
    tokens = ["ENTITY-1", "VP[aspect=simple,tense=past]", "<SNT>", "serves"]
    assert model.encode(tokens) == tokens
    assert not any("ENTITY" in a + b for a, b in model.merges)
    with pytest.raises(ValueError):
        bpe_train(["a b"], merges=0, threshold=1)
    with pytest.raises(ValueError):
        bpe_train(["ENTITY-1"], merges=5, threshold=1)


def test_vocab():
    vocab = Vocab.build([["b", "a", "a"], ["c"]])
    assert vocab.itos[: len(SPECIALS)] == list(SPECIALS)
    assert vocab.itos[4] == "a"
    assert vocab.encode(["a", "zzz"], add_bos=True, add_eos=True) == [2, 4, 1, 3]
    assert vocab.decode([2, 4, 0, 5, 3, 6]) == ["a", "b"]
    assert Vocab.from_dict(vocab.to_dict()).signature() == vocab.signature()
    with pytest.raises(ValueError):
        Vocab(["a", "b"])


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("arch", ["gru", "transformer"])
def test_beam_of_one_is_greedy(arch):
    model, vocab = _tiny(arch)
    source = _source(vocab, PAIRS[2][0])
    beam = beam_decode(model, source, 1, 6, vocab.bos_id, vocab.eos_id)
    greedy = greedy_decode(model, source, 6, vocab.bos_id, vocab.eos_id)
    assert beam[0].ids == greedy.ids


def test_beam_hypotheses_are_sorted():
    model, vocab = _tiny("gru")
    hyps = beam_decode(model, _source(vocab, PAIRS[0][0]), 4, 6, vocab.bos_id, vocab.eos_id)
    scores = [h.normalized for h in hyps]
    assert scores == sorted(scores, reverse=True)
    assert all(len(h.ids) <= 6 for h in hyps)
    with pytest.raises(ValueError):
        beam_decode(model, _source(vocab, PAIRS[0][0]), 0, 6, vocab.bos_id, vocab.eos_id)
    with pytest.raises(ValueError):
        beam_decode(model, torch.empty((1, 0), dtype=torch.long), 2, 6, vocab.bos_id, vocab.eos_id)


def test_ensemble_of_identical_members_matches_single_model():
    model, vocab = _tiny("gru")
    source = _source(vocab, PAIRS[1][0])
    single = beam_decode(model, source, 3, 6, vocab.bos_id, vocab.eos_id)
    double = ensemble_decode([model, model], source, 3, 6, vocab.bos_id, vocab.eos_id)
    assert [h.ids for h in single] == [h.ids for h in double]
    assert single[0].score == pytest.approx(double[0].score)


def test_ensemble_rejects_mismatched_vocabularies():
    first, _ = _tiny("gru")
    second, _ = _tiny("gru", seed=1)
    second.vocab_signature = "other"
    with pytest.raises(VocabularyMismatchError):
        ensemble_decode([first, second], torch.tensor([[4, 3]]), 2, 4, 2, 3)
    transformer, _ = _tiny("transformer")
    with pytest.raises(ValueError):
        ensemble_decode([first, transformer], torch.tensor([[4, 3]]), 2, 4, 2, 3)


def test_transformer_steps_match_teacher_forcing():
    """Incremental decoding sees the same causal context as the full pass."""
    model, vocab = _tiny("transformer")
    src = _source(vocab, PAIRS[2][0])
    tgt_in = torch.tensor([vocab.encode(PAIRS[2][1], add_bos=True)], dtype=torch.long)
    with torch.no_grad():
        full = F.log_softmax(model(src, tgt_in), dim=-1)
        state = model.start(src)
        for t in range(tgt_in.size(1)):
            step, state = model.step(state, tgt_in[:, t])
            assert torch.allclose(step, full[:, t], atol=1e-5)


def test_translator():
    model, vocab = _tiny("gru")
    translator = Translator([model], vocab, beam=2, max_len=6)
    out = translator.translate(PAIRS[0][0])
    assert isinstance(out, list)
    assert len(translator.nbest(PAIRS[0][0])) >= 1
    assert len(translator.greedy(PAIRS[0][0])) <= 6
    with pytest.raises(ValueError):
        translator.translate([])


# ---------------------------------------------------------------------------
# Gradient checks
# ---------------------------------------------------------------------------


def test_relative_error():
    assert relative_error(1.0, 1.0) == 0.0
    assert relative_error(1.0, -1.0) == 1.0
    assert relative_error(0.0, 1e-9) < 1e-3


def test_check_function_skips_steps_across_a_kink():
    x = torch.nn.Parameter(torch.zeros(1, dtype=torch.float64))
    assert check_function(lambda: F.relu(x).sum(), [("x", x)], n_params=1) == 0.0
    y = torch.nn.Parameter(torch.tensor([0.5], dtype=torch.float64))
    assert check_function(lambda: (y**3).sum(), [("y", y)], n_params=1) < 1e-8


def _grad_batch(vocab, long=2, short=0):
    """A padded batch of two pairs, the longer one first."""
    src = [vocab.encode(PAIRS[long][0], add_eos=True), vocab.encode(PAIRS[short][0], add_eos=True)]
    tgt = [vocab.encode(PAIRS[long][1], add_bos=True, add_eos=True), vocab.encode(PAIRS[short][1], add_bos=True, add_eos=True)]
    src[1] += [vocab.pad_id] * (len(src[0]) - len(src[1]))
    tgt[1] += [vocab.pad_id] * (len(tgt[0]) - len(tgt[1]))
    return torch.tensor(src), torch.tensor(tgt)


def test_gru_gradients_match_finite_differences():
    model, vocab = _tiny("gru")
    model.double()
    worst = grad_check(model, _grad_batch(vocab), n_params=40)
    logger.info(f"gru max relative error {worst:.3e}")
    assert worst < 1e-4


@pytest.mark.parametrize("long, short, seed", [(2, 0, 0), (2, 1, 1), (0, 1, 2)])
def test_transformer_gradients_match_finite_differences(long, short, seed):
    model, vocab = _tiny("transformer", seed=seed)
    model.double()
    worst = grad_check(model, _grad_batch(vocab, long, short), n_params=40, seed=seed)
    logger.info(f"transformer max relative error {worst:.3e}")
    assert worst < 1e-4


def test_attention_gradients_match_finite_differences():
    assert attention_grad_check(d_model=8, heads=2, length=4) < 1e-4


def test_grad_check_needs_double_precision():
    model, vocab = _tiny("gru")
    with pytest.raises(ValueError):
        grad_check(model, _grad_batch(vocab))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def test_training_config_profiles():
    paper = TrainingConfig.for_profile("paper", "transformer")
    assert (paper.layers, paper.hidden_dim, paper.warmup_steps) == (6, 512, 8000)
    assert TrainingConfig.for_reg("paper").hidden_dim == 512
    assert TrainingConfig.for_profile("desk").hidden_dim == 128
    assert TrainingConfig.for_reg("desk").epochs == 60
    with pytest.raises(ValueError):
        TrainingConfig.for_profile("huge")
    with pytest.raises(ValidationError):
        TrainingConfig(arch="transformer", hidden_dim=10, heads=4)


def test_patience_stops_a_stalled_run():
    """With a zero learning rate the dev loss never improves after the first evaluation."""
    cfg = _config(learning_rate=0.0, eval_every=2, patience=1, batch_size=2, max_updates=100)
    result = seq2seq_train(PAIRS, cfg, seed=0)
    assert result.stopped_early
    assert len(result.history) == 2
    assert result.updates == 4


def test_update_budget_ends_training():
    cfg = _config(eval_every=100, max_updates=3, batch_size=2)
    result = seq2seq_train(PAIRS, cfg, seed=0)
    assert result.updates == 3
    assert not result.stopped_early
    assert result.history == []
    assert result.best_dev_loss < float("inf")
    with pytest.raises(ValueError):
        seq2seq_train([], cfg)


def test_runs_share_one_vocabulary():
    cfg = _config(eval_every=2, max_updates=4, batch_size=2)
    results = train_runs(PAIRS, cfg, seeds=[0, 1])
    assert len(results) == 2
    assert results[0].vocab.signature() == results[1].vocab.signature()
    assert results[0].best_dev_loss <= results[1].best_dev_loss


def test_tied_embeddings_share_one_matrix():
    model, _ = _tiny("gru")
    assert model.target_embedding is None and model.output is None
    ids = torch.tensor([[4, 5]])
    hidden = torch.zeros(1, model.embedding.embedding_dim)
    hidden[0, 0] = 1.0
    before = model.project(hidden)[0, 4].item()
    with torch.no_grad():
        model.embedding.weight[4, 0] += 1.0
    assert torch.equal(model.embed_source(ids), model.embed_target(ids))
    assert model.project(hidden)[0, 4].item() == pytest.approx(before + 1.0)

    untied, _ = _tiny("gru", tied_embeddings=False)
    assert untied.target_embedding is not None


def test_non_finite_loss_aborts_training(mocker):
    nan = torch.tensor(float("nan"), requires_grad=True)
    mocker.patch("d2t.neural.training.batch_loss", return_value=(nan, 1))
    with pytest.raises(TrainingDivergedError) as excinfo:
        seq2seq_train(PAIRS, _config(max_updates=5, batch_size=2), seed=0)
    assert excinfo.value.update == 0


def test_training_is_reproducible_under_a_seed():
    cfg = _config(eval_every=2, max_updates=4, batch_size=2)
    first = seq2seq_train(PAIRS, cfg, seed=3)
    second = seq2seq_train(PAIRS, cfg, seed=3)
    assert first.best_dev_loss == second.best_dev_loss
    for (name, a), (_, b) in zip(first.model.state_dict().items(), second.model.state_dict().items()):
        assert torch.equal(a, b), name


@pytest.mark.slow
@pytest.mark.parametrize("arch", ["gru", "transformer"])
def test_models_learn_to_copy(arch):
    """Both architectures memorise a copy task of 250 distinct sequences."""
    rng = np.random.default_rng(0)
    tokens = [f"w{i}" for i in range(10)]
    sequences = set()
    while len(sequences) < 250:
        sequences.add(tuple(rng.choice(tokens, size=int(rng.integers(4, 7)))))
    pairs = [(list(s), list(s)) for s in sorted(sequences)]
    cfg = TrainingConfig.for_profile(
        "desk", arch, emb_dim=64, hidden_dim=64, ff_dim=128, layers=2, heads=4,
        learning_rate=1e-3 if arch == "transformer" else 3e-3, batch_size=25, max_updates=4000, eval_every=200, patience=100,
        dropout=0.0, dropout_embeddings=0.0, dropout_hidden=0.0, warmup_steps=0, label_smoothing=0.0,
        max_decode_len=10, beam=2,
    )
    translator, results = train_translator(pairs, cfg, seeds=[0])
    accuracy = sequence_accuracy(translator, pairs)
    logger.info(f"{arch} copy accuracy {accuracy:.2f} after {results[0].updates} updates")
    assert accuracy >= 0.99
    history = results[0].history
    assert history[-1].train_loss < history[0].train_loss


@pytest.mark.slow
def test_bpe_translator_merges_output_words():
    pairs = [(["lower", "lowest"], ["lowest", "lower"]), (["lowest", "lower"], ["lower", "lowest"])]
    cfg = _config(
        emb_dim=32, hidden_dim=32, learning_rate=5e-3, batch_size=2, max_updates=400, eval_every=50,
        patience=100, dropout_embeddings=0.0, dropout_hidden=0.0, bpe_merges=3, bpe_threshold=1, max_decode_len=10,
    )
    translator, _ = train_translator(pairs, cfg, seeds=[0], use_bpe=True)
    assert translator.bpe is not None
    assert sequence_accuracy(translator, pairs) == 1.0

"""Tests for accuracy, BLEU and the bucketed reports."""
import math
from collections import Counter

import pytest
from loguru import logger

from d2t.corpus import KNOWN_DOMAINS
from d2t.evaluation import (
    NOT_COMPUTED,
    BucketScore,
    accuracy,
    accuracy_score,
    bleu,
    corpus_bleu,
    format_domains,
    format_report,
    format_seed_row,
    mean_std,
)


def _t(text):
    return text.split()


def test_accuracy_score():
    preds = [_t("club club manager"), _t("country location")]
    golds = [[_t("manager club club"), _t("club club manager")], [_t("location country")]]
    assert accuracy_score(preds, golds) == 0.5
    assert accuracy_score([_t("Club")], [[_t("club")]]) == 1.0
    with pytest.raises(ValueError):
        accuracy_score(preds, golds[:1])
    with pytest.raises(ValueError):
        accuracy_score([_t("a")], [[]])


def test_bleu_extremes():
    assert corpus_bleu([_t("the the the")], [[_t("the cat")]]) == 0.0
    sentence = _t("the cat sat on the mat .")
    assert corpus_bleu([sentence], [[sentence]]) == pytest.approx(100.0)
    assert corpus_bleu([_t("The Cat sat on the mat .")], [[sentence]]) == pytest.approx(100.0)


def test_bleu_multi_reference_by_hand():
    """Clipping takes the maximum count over references."""
    hyp = _t("the cat is on the mat")
    refs = [_t("the cat sat on the mat"), _t("the cat is on a mat")]
    # precisions 6/6, 5/5, 3/4, 1/3 with no brevity penalty
    expected = 100 * (1.0 * 1.0 * 0.75 * (1 / 3)) ** 0.25
    assert corpus_bleu([hyp], [refs]) == pytest.approx(expected)
    assert corpus_bleu([hyp], [refs[:1]]) == 0.0


def test_bleu_brevity_and_short_outputs():
    """A hypothesis too short to hold a 4-gram scores 0; a shorter correct one is penalized for brevity."""
    assert corpus_bleu([_t("the cat")], [[_t("the cat sat on")]]) == 0.0
    assert corpus_bleu([_t("the cat sat")], [[_t("the cat sat")]]) == 0.0
    score = corpus_bleu([_t("the cat sat on")], [[_t("the cat sat on the mat")]])
    assert score == pytest.approx(100 * math.exp(-0.5))
    mixed = corpus_bleu([_t("the cat"), _t("a dog ran off home")], [[_t("the cat")], [_t("a dog ran off home")]])
    assert mixed == pytest.approx(100.0)


def test_bleu_errors():
    with pytest.raises(ValueError):
        corpus_bleu([], [])
    with pytest.raises(ValueError):
        corpus_bleu([_t("a")], [])
    with pytest.raises(ValueError):
        corpus_bleu([_t("a")], [[]])


def test_bleu_matches_sacrebleu():
    sacrebleu = pytest.importorskip("sacrebleu")
    hyps = ["the cat is on the mat", "Alan Bean was born in Wheeler , Texas ."]
    refs = [
        ["the cat sat on the mat", "Alan Bean was born in Wheeler , Texas ."],
        ["the cat is on a mat", "Alan Bean is from Wheeler , Texas ."],
    ]
    ours = corpus_bleu([_t(h) for h in hyps], [[_t(r[i]) for r in refs] for i in range(len(hyps))])
    theirs = sacrebleu.corpus_bleu(hyps, refs, smooth_method="none", tokenize="none", lowercase=True, force=True)
    logger.info(f"ours={ours:.4f} sacrebleu={theirs.score:.4f}")
    assert ours == pytest.approx(theirs.score, abs=1e-4)


def test_breakdown_buckets_and_unknown_domains():
    preds = [_t("a b"), _t("c d"), _t("e f")]
    golds = [[_t("a b")], [_t("c d")], [_t("x y")]]
    report = accuracy(preds, golds, ["Airport", "Artist", "Martian"], [True, False, False], KNOWN_DOMAINS)
    assert report.all.score == pytest.approx(2 / 3)
    assert report.all.count == 3
    assert report.seen.score == 1.0
    assert report.unseen == BucketScore(score=0.5, count=2)
    assert report.unknown_domains == ("Martian",)
    assert list(report.domains) == ["Airport", "Artist", "Martian"]
    assert "Martian" in format_domains(report) and "(unknown)" in format_domains(report)

    only_seen = bleu([_t("a b")], [[_t("a b")]])
    assert only_seen.unseen.score is None
    assert only_seen.unseen.format() == "n/a"
    with pytest.raises(ValueError):
        accuracy(preds, golds, ["Airport"], [True, True, True])


def test_report_formatting():
    report = bleu([_t("a b c d e")], [[_t("a b c d e")]])
    table = format_report([("majority", report)], include_meteor=True)
    logger.info(f"\n{table}")
    assert "100.00" in table
    assert NOT_COMPUTED in table
    assert NOT_COMPUTED not in format_report([("majority", report)])

    assert mean_std([1.0, 3.0]) == (2.0, 1.0)
    with pytest.raises(ValueError):
        mean_std([])
    assert format_seed_row("gru", "bleu", {"all": [1.0, 3.0]}) == "gru  bleu  2.00±1.00  n/a  n/a"


def _brute_force_bleu(hyps, refs):
    """Corpus BLEU by direct n-gram enumeration, no shared code."""
    def grams(tokens, n):
        return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))

    hyps = [[t.lower() for t in h] for h in hyps]
    refs = [[[t.lower() for t in r] for r in rs] for rs in refs]
    log_sum, orders = 0.0, 0
    for n in range(1, 5):
        matched = total = 0
        for h, rs in zip(hyps, refs):
            best = Counter()
            for r in rs:
                best |= grams(r, n)
            matched += sum(min(c, best[g]) for g, c in grams(h, n).items())
            total += max(len(h) - n + 1, 0)
        if total == 0 or matched == 0:
            return 0.0
        log_sum += math.log(matched / total)
        orders += 1
    hyp_len = sum(len(h) for h in hyps)
    ref_len = sum(min((abs(len(r) - len(h)), len(r)) for r in rs)[1] for h, rs in zip(hyps, refs))
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    return 100 * bp * math.exp(log_sum / orders)


def test_bleu_matches_brute_force_counting():
    """Permutation invariance and monotonicity in the references come along."""
    pairs = [
        ("Alan Bean was born in Wheeler , Texas .", ["Alan Bean was born in Wheeler , Texas .", "Alan Bean is from Texas ."]),
        ("Ace Wilder is a solo singer .", ["Ace Wilder performs as a solo singer ."]),
        ("Massimo Drago played for Calcio Catania .", ["Massimo Drago played for the club Calcio Catania ."]),
        ("Aarhus airport serves the city of Aarhus .", ["The city of Aarhus is served by Aarhus airport ."]),
        ("the cat is on the mat", ["the cat sat on the mat", "there is a cat on the mat"]),
    ]
    hyps = [_t(h) for h, _ in pairs]
    refs = [[_t(r) for r in rs] for _, rs in pairs]
    ours = corpus_bleu(hyps, refs)
    logger.info(f"bleu={ours:.4f}")
    assert ours == pytest.approx(_brute_force_bleu(hyps, refs))
    assert corpus_bleu(hyps[::-1], refs[::-1]) == pytest.approx(ours)

    extra = [rs + [_t("Aarhus airport serves the city of Aarhus .")] if i == 3 else rs for i, rs in enumerate(refs)]
    assert corpus_bleu(hyps, extra) >= ours

"""Accuracy, corpus BLEU and all/seen/unseen/per-domain breakdowns.

All metrics compare uncased tokens.
"""

import math
from collections import Counter
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from d2t.utils.text_utils import lower_tokens

Tokens = Sequence[str]
MAX_ORDER = 4
NOT_COMPUTED = "n/a (not computed)"


class BucketScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    score: Optional[float] = Field(None, description="None for an empty bucket")
    count: int = 0

    def format(self, width: int = 2) -> str:
        return "n/a" if self.score is None else f"{self.score:.{width}f}"


class EvalReport(BaseModel):
    """One metric over the all / seen / unseen buckets and each domain."""

    model_config = ConfigDict(frozen=True)

    metric: str
    all: BucketScore
    seen: BucketScore
    unseen: BucketScore
    domains: Dict[str, BucketScore] = Field(default_factory=dict)
    unknown_domains: Tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _check_lengths(preds: Sequence, golds: Sequence) -> None:
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions but {len(golds)} gold entries")


def accuracy_score(preds: Sequence[Tokens], golds: Sequence[Sequence[Tokens]]) -> float:
    """Share of predictions that equal any member of their gold set.

    Raises:
        ValueError: On a length mismatch or an empty gold set.
    """
    _check_lengths(preds, golds)
    if not preds:
        raise ValueError("no predictions to score")
    correct = 0
    for pred, gold_set in zip(preds, golds):
        if not gold_set:
            raise ValueError("every gold set needs at least one member")
        wanted = lower_tokens(pred)
        correct += any(lower_tokens(g) == wanted for g in gold_set)
    return correct / len(preds)


def extract_ngrams(tokens: Sequence[str], max_order: int = MAX_ORDER) -> Counter:
    ngrams: Counter = Counter()
    for n in range(1, max_order + 1):
        for i in range(len(tokens) - n + 1):
            ngrams[tuple(tokens[i : i + n])] += 1
    return ngrams


def _ref_stats(hyp_len: int, refs: Sequence[Tokens]) -> Tuple[Counter, int]:
    """Max reference count per n-gram and the closest reference length (shorter on ties)."""
    max_counts: Counter = Counter()
    closest: Optional[int] = None
    for ref in refs:
        ref_len = len(ref)
        if closest is None or abs(ref_len - hyp_len) < abs(closest - hyp_len) or (
            abs(ref_len - hyp_len) == abs(closest - hyp_len) and ref_len < closest
        ):
            closest = ref_len
        for ngram, count in extract_ngrams(ref).items():
            max_counts[ngram] = max(max_counts[ngram], count)
    return max_counts, closest or 0


def corpus_bleu(hyps: Sequence[Tokens], refs: Sequence[Sequence[Tokens]]) -> float:
    """Corpus-level BLEU (0-100) with multi-reference clipping and no smoothing.

    Every order from unigrams to 4-grams enters the geometric mean, so a zero
    precision gives 0, as does an order with no hypothesis n-grams at all (a
    corpus whose outputs are all shorter than four tokens).

    Raises:
        ValueError: For an empty hypothesis list, a length mismatch or an
            empty reference set.
    """
    if not hyps:
        raise ValueError("cannot compute BLEU of an empty hypothesis list")
    _check_lengths(hyps, refs)
    correct = [0] * MAX_ORDER
    total = [0] * MAX_ORDER
    sys_len = ref_len = 0
    for hyp, ref_set in zip(hyps, refs):
        if not ref_set:
            raise ValueError("every hypothesis needs at least one reference")
        hyp_tokens = lower_tokens(hyp)
        ref_tokens = [lower_tokens(r) for r in ref_set]
        max_counts, closest = _ref_stats(len(hyp_tokens), ref_tokens)
        sys_len += len(hyp_tokens)
        ref_len += closest
        for ngram, count in extract_ngrams(hyp_tokens).items():
            n = len(ngram) - 1
            total[n] += count
            correct[n] += min(count, max_counts.get(ngram, 0))
    if sys_len == 0 or any(t == 0 or c == 0 for c, t in zip(correct, total)):
        return 0.0
    log_precision = sum(math.log(c / t) for c, t in zip(correct, total)) / MAX_ORDER
    brevity = 1.0 if sys_len > ref_len else math.exp(1 - ref_len / sys_len)
    return 100.0 * brevity * math.exp(log_precision)


# ---------------------------------------------------------------------------
# Breakdowns
# ---------------------------------------------------------------------------


def breakdown(
    metric: str,
    score_fn: Callable[[Sequence, Sequence], float],
    preds: Sequence,
    golds: Sequence,
    domains: Sequence[str],
    seen: Sequence[bool],
    known_domains: Optional[Iterable[str]] = None,
) -> EvalReport:
    """Recompute ``score_fn`` on the all, seen, unseen and per-domain buckets.

    Instances whose domain is not in ``known_domains`` still count towards
    the all/seen/unseen buckets and their own domain row, and are flagged.
    """
    _check_lengths(preds, golds)
    if len(domains) != len(preds) or len(seen) != len(preds):
        raise ValueError("domain labels and seen flags must align with predictions")

    def bucket(indices: List[int]) -> BucketScore:
        if not indices:
            return BucketScore(score=None, count=0)
        return BucketScore(score=score_fn([preds[i] for i in indices], [golds[i] for i in indices]), count=len(indices))

    everything = list(range(len(preds)))
    per_domain: Dict[str, List[int]] = {}
    for i, domain in enumerate(domains):
        per_domain.setdefault(domain, []).append(i)
    unknown: Tuple[str, ...] = ()
    if known_domains is not None:
        known = set(known_domains)
        unknown = tuple(sorted(d for d in per_domain if d not in known))
        if unknown:
            logger.warning(f"Unknown domain labels in {metric} evaluation: {', '.join(unknown)}")
    return EvalReport(
        metric=metric,
        all=bucket(everything),
        seen=bucket([i for i in everything if seen[i]]),
        unseen=bucket([i for i in everything if not seen[i]]),
        domains={d: bucket(idx) for d, idx in sorted(per_domain.items())},
        unknown_domains=unknown,
    )


def accuracy(
    preds: Sequence[Tokens],
    golds: Sequence[Sequence[Tokens]],
    domains: Optional[Sequence[str]] = None,
    seen: Optional[Sequence[bool]] = None,
    known_domains: Optional[Iterable[str]] = None,
) -> EvalReport:
    _check_lengths(preds, golds)
    return breakdown(
        "accuracy",
        accuracy_score,
        preds,
        golds,
        domains if domains is not None else ["all"] * len(preds),
        seen if seen is not None else [True] * len(preds),
        known_domains,
    )


def bleu(
    hyps: Sequence[Tokens],
    refs: Sequence[Sequence[Tokens]],
    domains: Optional[Sequence[str]] = None,
    seen: Optional[Sequence[bool]] = None,
    known_domains: Optional[Iterable[str]] = None,
) -> EvalReport:
    _check_lengths(hyps, refs)
    return breakdown(
        "bleu",
        corpus_bleu,
        hyps,
        refs,
        domains if domains is not None else ["all"] * len(hyps),
        seen if seen is not None else [True] * len(hyps),
        known_domains,
    )


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and population standard deviation of per-seed scores."""
    if not values:
        raise ValueError("no values to summarize")
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def format_report(rows: Sequence[Tuple[str, EvalReport]], include_meteor: bool = False) -> str:
    """Plain-text table with one row per (system name, report)."""
    width = max([len(name) for name, _ in rows] + [len("system")])
    lines = [f"{'system':<{width}}  {'metric':<8}  {'all':>7}  {'seen':>7}  {'unseen':>7}"]
    for name, report in rows:
        lines.append(
            f"{name:<{width}}  {report.metric:<8}  {report.all.format():>7}  "
            f"{report.seen.format():>7}  {report.unseen.format():>7}"
        )
        if include_meteor and report.metric == "bleu":
            lines.append(f"{name:<{width}}  {'meteor':<8}  {NOT_COMPUTED}")
    return "\n".join(lines)


def format_seed_row(name: str, metric: str, scores: Dict[str, Sequence[float]]) -> str:
    """``name metric mean±std`` for each of the all / seen / unseen buckets."""
    cells = []
    for bucket in ("all", "seen", "unseen"):
        values = [v for v in scores.get(bucket, []) if v is not None]
        if values:
            mean, std = mean_std(values)
            cells.append(f"{mean:.2f}±{std:.2f}")
        else:
            cells.append("n/a")
    return f"{name}  {metric}  " + "  ".join(cells)


def format_domains(report: EvalReport) -> str:
    lines = [f"{report.metric} per domain"]
    for domain, score in report.domains.items():
        flag = " (unknown)" if domain in report.unknown_domains else ""
        lines.append(f"  {domain:<24} {score.format():>7}  n={score.count}{flag}")
    return "\n".join(lines)

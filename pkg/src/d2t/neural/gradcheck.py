"""Analytic-vs-finite-difference gradient checks."""

from typing import Callable, List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from loguru import logger
from torch import Tensor

from d2t.neural.seq2seq import Seq2SeqModel


def relative_error(analytic: float, numeric: float, floor: float = 1e-5) -> float:
    """``|a - n| / max(|a| + |n|, floor)``; the floor absorbs vanishing gradients."""
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), floor)


def _sample_entries(
    params: List[Tuple[str, nn.Parameter]], n: int, generator: torch.Generator, skip_row: Optional[int]
) -> List[Tuple[nn.Parameter, int]]:
    sizes = torch.tensor([p.numel() for _, p in params], dtype=torch.double)
    picked: List[Tuple[nn.Parameter, int]] = []
    attempts = 0
    while len(picked) < n and attempts < 100 * n:
        attempts += 1
        which = int(torch.multinomial(sizes, 1, generator=generator))
        name, param = params[which]
        flat = int(torch.randint(param.numel(), (1,), generator=generator))
        if skip_row is not None and name.endswith("embedding.weight") and flat // param.size(1) == skip_row:
            continue
        picked.append((param, flat))
    return picked


def check_function(
    loss_fn: Callable[[], Tensor],
    params: List[Tuple[str, nn.Parameter]],
    epsilon: float = 1e-5,
    n_params: int = 50,
    seed: int = 0,
    skip_row: Optional[int] = None,
) -> float:
    """Max relative error over a random subsample of parameter entries.

    An entry whose step crosses a kink (ReLU, max) is recognised by a
    one-sided difference agreeing with the analytic gradient better than the
    central difference does; such entries are left out of the maximum.

    Args:
        loss_fn: Recomputes a scalar loss from the current parameters.
        params: Named parameters to sample from.
        epsilon: Central-difference step.
        n_params: Number of scalar entries to check.
        seed: Sampling seed.
        skip_row: Embedding row excluded from sampling (the padding row).
    """
    for _, p in params:
        p.grad = None
    loss_fn().backward()
    generator = torch.Generator().manual_seed(seed)
    worst = 0.0
    kinks = 0
    center = float(loss_fn())
    for param, flat in _sample_entries(params, n_params, generator, skip_row):
        analytic = float(param.grad.view(-1)[flat]) if param.grad is not None else 0.0
        view = param.data.view(-1)
        original = float(view[flat])
        view[flat] = original + epsilon
        plus = float(loss_fn())
        view[flat] = original - epsilon
        minus = float(loss_fn())
        view[flat] = original
        numeric = (plus - minus) / (2 * epsilon)
        error = relative_error(analytic, numeric)
        one_sided = min(
            relative_error(analytic, (plus - center) / epsilon), relative_error(analytic, (center - minus) / epsilon)
        )
        if one_sided * 10 < error:
            kinks += 1
            logger.debug(f"Skipping entry {flat}: step crosses a kink (central {error:.2e}, one-sided {one_sided:.2e})")
            continue
        worst = max(worst, error)
    if kinks:
        logger.info(f"{kinks} of {n_params} sampled entries straddled a kink")
    return worst


def grad_check(
    model: Seq2SeqModel,
    batch: Tuple[Tensor, Tensor],
    epsilon: float = 1e-5,
    n_params: int = 50,
    seed: int = 0,
) -> float:
    """Check a seq2seq model's backpropagation on one batch.

    Args:
        model: Model already converted with ``model.double()``.
        batch: ``(src, tgt)`` id tensors; ``tgt`` starts with ``<s>``.
        epsilon: Central-difference step.
        n_params: Number of scalar parameter entries to check.
        seed: Sampling seed.

    Returns:
        float: Maximum relative error.

    Raises:
        ValueError: If the model is not in double precision.
    """
    if next(model.parameters()).dtype != torch.float64:
        raise ValueError("gradient checking needs a double-precision model; call model.double()")
    model.eval()
    src, tgt = batch

    def loss_fn() -> Tensor:
        logits = model(src, tgt[:, :-1])
        return F.cross_entropy(
            logits.reshape(-1, logits.size(-1)), tgt[:, 1:].reshape(-1), ignore_index=model.pad_id
        )

    params = [(name, p) for name, p in model.named_parameters() if p.requires_grad]
    worst = check_function(loss_fn, params, epsilon, n_params, seed, skip_row=model.pad_id)
    logger.info(f"{model.arch} gradient check: max relative error {worst:.3e} over {n_params} entries")
    return worst


def attention_grad_check(
    d_model: int = 16, heads: int = 2, length: int = 5, epsilon: float = 1e-5, n_params: int = 50, seed: int = 0
) -> float:
    """Check a multi-head attention sublayer in isolation."""
    torch.manual_seed(seed)
    attention = nn.MultiheadAttention(d_model, heads, batch_first=True).double()
    generator = torch.Generator().manual_seed(seed)
    query = torch.randn(2, length, d_model, dtype=torch.float64, generator=generator)
    weights = torch.randn(2, length, d_model, dtype=torch.float64, generator=generator)

    def loss_fn() -> Tensor:
        out, _ = attention(query, query, query, need_weights=False)
        return (out * weights).sum()

    params = list(attention.named_parameters())
    worst = check_function(loss_fn, params, epsilon, n_params, seed)
    logger.info(f"attention gradient check: max relative error {worst:.3e}")
    return worst

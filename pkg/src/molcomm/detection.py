"""Soft detection under ISI, diversity combining and the hard-threshold baseline.

LLR convention: positive values favour coded bit 0.
"""
from __future__ import annotations

import math

import numpy as np

from ._backend import kernels
from .channel import RxFrame
from .diffusion import ChannelResponse
from .errors import ContractError, ParameterError
from .interleaver import Permutation, deinterleave_llr, interleave

LLR_CLAMP = 30.0

__all__ = [
    "LLR_CLAMP", "Permutation", "combine_llrs", "compute_llrs", "deinterleave_llr",
    "hard_detect", "hypothesis_tables", "interleave", "variance_floor",
]


def variance_floor(mm: float, p1: float) -> float:
    """Smallest variance a hypothesis may have: ``max(1, 1e-3 * mm * P1)``."""
    return max(1.0, 1e-3 * mm * p1)


def hypothesis_tables(mm: float, p: np.ndarray, history: int, anti_ratio: float = 0.0):
    """Means and variances of the received count for every hypothesis.

    Row ``h`` of each table encodes the previous ``history`` bits: bit ``l - 1``
    of ``h`` is the bit sent ``l`` slots ago.  Returns
    ``(mu0, var0, mu1, var1)`` for current bit 0 and 1.

    With ``anti_ratio > 0`` the observation is the pre-equalized difference
    A - B, where B carries the complemented bits at ``anti_ratio * mm``.
    """
    p = np.asarray(p, dtype=np.float64)
    pv = p * (1.0 - p)
    past = ((np.arange(1 << history)[:, None] >> np.arange(history)) & 1).astype(np.float64)
    isi_mean = past @ p[1:history + 1]
    isi_var = past @ pv[1:history + 1]
    floor = variance_floor(mm, p[0])
    tables = []
    for bit in (0, 1):
        mean = mm * (bit * p[0] + isi_mean)
        var = mm * (bit * pv[0] + isi_var)
        if anti_ratio:
            anti = anti_ratio * mm
            anti_past = (1.0 - past)
            mean = mean - anti * ((1 - bit) * p[0] + anti_past @ p[1:history + 1])
            var = var + anti * ((1 - bit) * pv[0] + anti_past @ pv[1:history + 1])
        tables += [mean, np.maximum(var, floor)]
    return tuple(tables)


def _kernel_tables(tables):
    mu0, var0, mu1, var1 = tables
    half_log_2pi = 0.5 * math.log(2.0 * math.pi)
    return (mu0, 0.5 / var0, -half_log_2pi - 0.5 * np.log(var0),
            mu1, 0.5 / var1, -half_log_2pi - 0.5 * np.log(var1))


def compute_llrs(rx: RxFrame, mm: float, response: ChannelResponse, *,
                 history: int | None = None, anti_ratio: float = 0.0,
                 clamp: float = LLR_CLAMP, backend=None) -> np.ndarray:
    """Per-bit LLRs from received counts, marginalizing over unknown past bits.

    For slot ``i`` every pattern of the previous ``min(history, i)`` bits is
    equally likely; the likelihood of each current-bit value is the uniform
    mixture of Gaussians over those patterns.  ``history`` defaults to the
    channel memory; ``history = memory - 1`` gives the ``2**(L-1)``-term
    variant.  ``anti_ratio`` selects the pre-equalized observation model.

    Returns all zeros when ``mm == 0`` since the counts carry no information.
    """
    counts = np.ascontiguousarray(getattr(rx, "counts", rx), dtype=np.float64)
    if counts.ndim != 1 or counts.size == 0:
        raise ContractError("received frame must be a non-empty vector")
    if not mm >= 0:
        raise ParameterError("mm must be >= 0")
    if history is None:
        history = response.memory
    if not 0 <= history <= response.memory:
        raise ParameterError(f"history must lie in [0, {response.memory}]")
    if mm == 0:
        return np.zeros(counts.size)
    k = backend or kernels
    p = response.p
    if not anti_ratio:
        tables = _kernel_tables(hypothesis_tables(mm, p, history))
        return k.mixture_llr(counts, *tables, history, clamp, 0)
    # Slots that precede the frame carry neither A nor B molecules, so the
    # anti stream's complement terms only exist for real past slots.
    out = np.empty(counts.size)
    head = min(history, counts.size)
    for i in range(head):
        tables = _kernel_tables(hypothesis_tables(mm, p, i, anti_ratio))
        out[i:i + 1] = k.mixture_llr(counts[i:i + 1], *tables, i, clamp, i)
    if counts.size > head:
        tables = _kernel_tables(hypothesis_tables(mm, p, history, anti_ratio))
        out[head:] = k.mixture_llr(np.ascontiguousarray(counts[head:]), *tables, history, clamp,
                                   head)
    return out


def combine_llrs(llr_a, llr_b, clamp: float = LLR_CLAMP) -> np.ndarray:
    """Equal-weight average of two LLR vectors in codeword order."""
    a = np.asarray(llr_a, dtype=np.float64)
    b = np.asarray(llr_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"length mismatch: {a.shape} vs {b.shape}")
    return np.clip((a + b) / 2.0, -clamp, clamp)


def hard_detect(rx: RxFrame, threshold: float) -> np.ndarray:
    """Fixed-threshold detector: bit 1 iff the count reaches ``threshold``."""
    if not threshold >= 0:
        raise ParameterError("threshold must be >= 0")
    counts = np.asarray(getattr(rx, "counts", rx), dtype=np.float64)
    return (counts >= threshold).astype(np.uint8)

"""Statistical synthesis of received molecule counts under ISI.

Each bit-1 released in slot ``i - l`` contributes a Gaussian amount with mean
``M * P[l]`` and variance ``M * P[l] * (1 - P[l])`` to the count observed in
slot ``i`` (``l = 0`` is the current slot).  Every (slot, tap) term gets its own
independent draw.  Frames start with an empty channel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _random
from .diffusion import ChannelResponse
from .errors import ConfigurationError, ContractError, ParameterError
from .interleaver import Permutation, interleave


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size == 0:
        raise ContractError("bit vector must be one-dimensional and non-empty")
    if not np.all((arr == 0) | (arr == 1)):
        raise ContractError("bit vector entries must be 0 or 1")
    return arr.astype(np.uint8)


@dataclass(frozen=True, eq=False)
class TxFrame:
    """On-off keyed codeword: bit-1 releases ``molecules_per_one`` molecules."""

    bits: np.ndarray
    molecules_per_one: float

    def __post_init__(self):
        object.__setattr__(self, "bits", _as_bits(self.bits))
        if not self.molecules_per_one >= 0:
            raise ParameterError("molecules_per_one must be >= 0")


@dataclass(frozen=True, eq=False)
class RxFrame:
    """Received counts, one real value per slot (may be negative)."""

    counts: np.ndarray
    molecule_type: str = "A"

    def __len__(self):
        return self.counts.size


def _shifted(bits: np.ndarray, lag: int) -> np.ndarray:
    out = np.zeros(bits.size, dtype=np.float64)
    if lag < bits.size:
        out[lag:] = bits[: bits.size - lag]
    return out


def transmit_frame(frame: TxFrame, response: ChannelResponse, seed: int, *,
                   noiseless: bool = False, molecule_type: str = "A") -> RxFrame:
    """Received counts for one frame.

    ``noiseless=True`` replaces every Gaussian term by its mean.
    """
    taps = response.taps
    if taps.size != response.memory + 1:
        raise ConfigurationError("channel response too short for its memory")
    mm = float(frame.molecules_per_one)
    means = mm * taps
    stds = np.sqrt(mm * taps * (1.0 - taps))
    bits = frame.bits
    z = np.random.default_rng(seed).standard_normal((bits.size, taps.size))
    counts = np.zeros(bits.size)
    for lag in range(taps.size):
        gate = _shifted(bits, lag)
        term = means[lag] if noiseless else means[lag] + stds[lag] * z[:, lag]
        counts += gate * term
    return RxFrame(counts, molecule_type)


def transmit_diversity(codeword, permutation: Permutation, mm_total: float,
                       response: ChannelResponse, seed: int, *,
                       noiseless: bool = False) -> tuple[RxFrame, RxFrame]:
    """Send ``codeword`` on molecule A and its interleaved copy on molecule B.

    The budget is split evenly, ``mm_total / 2`` per bit-1 on each type, and
    the two channels are independent.
    """
    bits = _as_bits(codeword)
    if bits.size != len(permutation):
        raise ContractError(f"codeword length {bits.size} != permutation length {len(permutation)}")
    if not mm_total >= 0:
        raise ParameterError("mm_total must be >= 0")
    half = mm_total / 2.0
    rx_a = transmit_frame(TxFrame(bits, half), response, seed,
                          noiseless=noiseless, molecule_type="A")
    rx_b = transmit_frame(TxFrame(interleave(bits, permutation), half), response,
                          _random.derive_seed(seed, "B"), noiseless=noiseless, molecule_type="B")
    return rx_a, rx_b


def transmit_preequalized(codeword, mm: float, beta: float, response: ChannelResponse,
                          seed: int, *, noiseless: bool = False) -> RxFrame:
    """Simplified pre-equalization baseline.

    Molecule A carries the codeword at ``mm`` per bit-1; molecule B carries the
    complement at ``beta * mm`` per bit-0.  The receiver observes A minus B.
    The A stream uses ``seed`` itself, so ``beta = 0`` reproduces
    :func:`transmit_frame` exactly.
    """
    if not 0.0 <= beta <= 1.0:
        raise ParameterError("beta must lie in [0, 1]")
    bits = _as_bits(codeword)
    rx_a = transmit_frame(TxFrame(bits, mm), response, seed, noiseless=noiseless)
    rx_b = transmit_frame(TxFrame(1 - bits, beta * mm), response,
                          _random.derive_seed(seed, "anti"), noiseless=noiseless, molecule_type="B")
    return RxFrame(rx_a.counts - rx_b.counts, "A")

"""Random bit interleaver shared by the transmitter and the receiver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _random
from .errors import ContractError


@dataclass(frozen=True, eq=False)
class Permutation:
    """Bijection on ``0..n-1``; ``mapping[j]`` is where bit ``j`` is sent."""

    mapping: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        mapping = np.asarray(self.mapping, dtype=np.intp).copy()
        if mapping.ndim != 1 or not np.array_equal(np.sort(mapping), np.arange(mapping.size)):
            raise ContractError("permutation mapping must be a bijection on 0..n-1")
        mapping.setflags(write=False)
        object.__setattr__(self, "mapping", mapping)

    def __len__(self):
        return self.mapping.size

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.mapping)
        inv[self.mapping] = np.arange(self.mapping.size)
        return inv

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, seed: int) -> "Permutation":
        """Uniformly random permutation drawn from ``seed``."""
        return cls(_random.rng_for(seed, "interleaver", n).permutation(n), seed)


def _check(values: np.ndarray, perm: Permutation):
    if values.ndim != 1 or values.size != len(perm):
        raise ContractError(f"length mismatch: vector {values.size}, permutation {len(perm)}")


def interleave(bits, perm: Permutation) -> np.ndarray:
    """``out[perm(j)] = bits[j]``."""
    bits = np.asarray(bits)
    _check(bits, perm)
    out = np.empty_like(bits)
    out[perm.mapping] = bits
    return out


def deinterleave_llr(llr, perm: Permutation) -> np.ndarray:
    """Undo :func:`interleave`: ``out[j] = llr[perm(j)]``."""
    llr = np.asarray(llr, dtype=np.float64)
    _check(llr, perm)
    return llr[perm.mapping]

"""Seed derivation and the counter-based normal stream shared by both backends.

Every random quantity in the package is drawn from a seed obtained by hashing
a tuple of labels (master seed, scheme, molecule budget, frame index, ...).
Distinct label tuples give unrelated streams, so results never depend on the
order in which work is scheduled.

The particle simulation needs one independent stream per particle.  Those use
splitmix64 in counter mode: draw ``c`` of a stream with key ``s`` is
``mix(s + (c + 1) * GAMMA)``.  Normals come from a 128-layer ziggurat
(Doornik's ZIGNOR variant).  The compiled kernel and the numpy fallback
consume the stream identically.
"""
from __future__ import annotations

import hashlib
import math

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
PARTICLE_MULT = 0xD1B54A32D192ED03

ZIG_LAYERS = 128
ZIG_R = 3.442619855899
ZIG_V = 9.91256303526217e-3


def derive_seed(*labels) -> int:
    """Hash an arbitrary tuple of labels into a 64-bit seed.

    Floats are hashed through ``repr`` so ``1000`` and ``1000.0`` map to the
    same stream.
    """
    parts = []
    for label in labels:
        if isinstance(label, bool):
            parts.append(f"b:{int(label)}")
        elif isinstance(label, (int, np.integer)):
            parts.append(f"i:{int(label)}")
        elif isinstance(label, (float, np.floating)):
            value = float(label)
            parts.append(f"i:{int(value)}" if value.is_integer() else f"f:{value!r}")
        else:
            parts.append(f"s:{label}")
    digest = hashlib.blake2b("|".join(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(*labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*labels))


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def particle_key(base_key: int, particle_index: int) -> int:
    """Initial splitmix state of one particle's stream."""
    return mix64(base_key ^ ((particle_index * PARTICLE_MULT) & MASK64))


def _ziggurat_tables() -> tuple[np.ndarray, np.ndarray]:
    x = np.zeros(ZIG_LAYERS + 1)
    f = math.exp(-0.5 * ZIG_R * ZIG_R)
    x[0] = ZIG_V / f
    x[1] = ZIG_R
    for i in range(2, ZIG_LAYERS):
        x[i] = math.sqrt(-2.0 * math.log(ZIG_V / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    ratio = x[1:] / x[:-1]
    return x, ratio


ZIG_X, ZIG_RATIO = _ziggurat_tables()

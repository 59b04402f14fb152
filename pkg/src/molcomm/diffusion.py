"""Point transmitter / absorbing spherical receiver link.

The receiver is a sphere of radius ``receiver_radius`` centred at the origin;
the transmitter sits at ``(0, 0, tx_distance)``.  Released molecules diffuse
freely and are removed the first time they reach the receiver.  The channel
response is the fraction of released molecules absorbed during each symbol
slot.

Two routes produce it:

* :func:`simulate_channel_response` - particle-level Brownian simulation.
* :func:`analytic_channel_response` - closed-form first-passage probability
  for a point source and a perfectly absorbing sphere.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc

from . import _random
from ._backend import kernels
from .errors import ContractError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_MEMORY_DURATION = 1.4


def _integer_ratio(num: float, den: float, what: str) -> int:
    ratio = num / den
    nearest = round(ratio)
    if nearest < 1 or abs(ratio - nearest) > 1e-9 * max(1.0, ratio):
        raise ParameterError(f"{what} must be a positive integer multiple (got ratio {ratio!r})")
    return int(nearest)


@dataclass(frozen=True)
class ChannelParams:
    """Physical constants of the diffusion link.

    Units follow the micron convention: seconds, µm²/s and µm.  The defaults
    are the reference operating point (Ts = 150 ms slots over a 2.1 s window).
    """

    total_time: float = 2.1
    diffusion_coeff: float = 79.4
    tx_distance: float = 10.0
    receiver_radius: float = 5.0
    n_particles: int = 1_000_000
    sim_step: float = 1e-4
    slot_width: float = 0.15

    def __post_init__(self):
        if not self.total_time > 0:
            raise ParameterError("total_time must be > 0")
        if not self.diffusion_coeff >= 0:
            raise ParameterError("diffusion_coeff must be >= 0")
        if not self.sim_step > 0:
            raise ParameterError("sim_step must be > 0")
        if not self.slot_width > 0:
            raise ParameterError("slot_width must be > 0")
        if int(self.n_particles) != self.n_particles or self.n_particles < 0:
            raise ParameterError("n_particles must be a non-negative integer")
        if not self.receiver_radius > 0:
            raise ParameterError("receiver_radius must be > 0")
        if not self.tx_distance > self.receiver_radius:
            raise ParameterError("tx_distance must exceed receiver_radius")
        _integer_ratio(self.slot_width, self.sim_step, "slot_width / sim_step")
        _integer_ratio(self.total_time, self.slot_width, "total_time / slot_width")

    @property
    def steps_per_slot(self) -> int:
        return _integer_ratio(self.slot_width, self.sim_step, "slot_width / sim_step")

    @property
    def n_slots(self) -> int:
        return _integer_ratio(self.total_time, self.slot_width, "total_time / slot_width")

    @property
    def step_sigma(self) -> float:
        """Per-coordinate displacement standard deviation, sqrt(2 D dt)."""
        return math.sqrt(2.0 * self.diffusion_coeff * self.sim_step)


def default_memory(slot_width: float, n_taps: int,
                   memory_duration: float = DEFAULT_MEMORY_DURATION) -> int:
    """ISI memory in slots: ``round(memory_duration / slot_width)``, kept within the response."""
    return int(min(max(1, round(memory_duration / slot_width)), n_taps - 1))


@dataclass(frozen=True, eq=False)
class ChannelResponse:
    """Per-slot hit probabilities ``p[0] = P1, p[1] = P2, ...``.

    ``memory`` is the number of past slots whose taps the channel model keeps;
    the current slot uses ``p[0]`` so ``memory + 1`` taps are in use.
    """

    p: np.ndarray
    slot_width: float
    memory: int
    n_particles: int | None = field(default=None)

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        if p.ndim != 1 or p.size < 2:
            raise ParameterError("channel response needs at least two slots")
        if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise ParameterError("hit probabilities must lie in [0, 1]")
        if p.sum() > 1 + 1e-12:
            raise ParameterError("hit probabilities sum above 1")
        if not self.slot_width > 0:
            raise ParameterError("slot_width must be > 0")
        if not 1 <= self.memory <= p.size - 1:
            raise ParameterError(f"memory must be within [1, {p.size - 1}], got {self.memory}")

    @property
    def taps(self) -> np.ndarray:
        """The ``memory + 1`` taps used by the ISI model."""
        return self.p[: self.memory + 1]

    def with_memory(self, memory: int) -> "ChannelResponse":
        return ChannelResponse(self.p, self.slot_width, memory, self.n_particles)

    def __eq__(self, other):
        if not isinstance(other, ChannelResponse):
            return NotImplemented
        return (np.array_equal(self.p, other.p) and self.slot_width == other.slot_width
                and self.memory == other.memory)

    def __hash__(self):
        return hash((self.p.tobytes(), self.slot_width, self.memory))


def analytical_hitting_cdf(params: ChannelParams, t):
    """Probability that a molecule has hit the receiver by time ``t``.

    ``F(t) = (rr / r0) * erfc((r0 - rr) / (2 sqrt(D t)))``; accepts scalars or
    arrays of times.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ParameterError("time must be >= 0")
    rr, r0, d = params.receiver_radius, params.tx_distance, params.diffusion_coeff
    with np.errstate(divide="ignore"):
        arg = (r0 - rr) / (2.0 * np.sqrt(d * t_arr))
    out = np.where(t_arr * d > 0, (rr / r0) * erfc(arg), 0.0)
    return float(out) if out.ndim == 0 else out


def cumulative_to_slots(cdf_values, slot_width: float) -> np.ndarray:
    """Per-slot increments of a CDF sampled at ``slot_width, 2*slot_width, ...``."""
    if not slot_width > 0:
        raise ParameterError("slot_width must be > 0")
    cdf = np.asarray(cdf_values, dtype=np.float64)
    if cdf.ndim != 1:
        raise ContractError("cdf_values must be one-dimensional")
    if np.any(cdf < 0) or np.any(cdf > 1):
        raise ContractError("cdf values must lie in [0, 1]")
    slots = np.diff(cdf, prepend=0.0)
    if np.any(slots < 0):
        raise ContractError("cdf values must be non-decreasing")
    return slots


def analytic_channel_response(params: ChannelParams, memory: int | None = None,
                              memory_duration: float = DEFAULT_MEMORY_DURATION) -> ChannelResponse:
    times = params.slot_width * np.arange(1, params.n_slots + 1)
    p = cumulative_to_slots(analytical_hitting_cdf(params, times), params.slot_width)
    if memory is None:
        memory = default_memory(params.slot_width, p.size, memory_duration)
    return ChannelResponse(p, params.slot_width, memory)


def _split(total: int, parts: int) -> list[tuple[int, int]]:
    bounds = np.linspace(0, total, parts + 1).round().astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def simulate_channel_response(params: ChannelParams, seed: int = 0, *, memory: int | None = None,
                              memory_duration: float = DEFAULT_MEMORY_DURATION,
                              workers: int = 1, bridge_correction: bool = True,
                              backend=None) -> ChannelResponse:
    """Estimate the channel response by simulating ``params.n_particles`` molecules.

    Every particle advances by an independent N(0, 2 D dt) displacement per
    coordinate and is absorbed once its end-of-step position lies inside the
    receiver.  With ``bridge_correction`` a particle that ends a step outside
    is also absorbed with the Brownian-bridge probability of having touched
    the surface during the step, ``exp(-2 d0 d1 / (2 D dt))`` for surface
    distances ``d0``, ``d1`` at the step ends; this removes the discretization
    bias of checking positions only at step ends.

    Each particle's randomness depends only on ``(seed, particle index)``, so
    the result is identical for any ``workers``.
    """
    if params.n_particles <= 0:
        raise ParameterError("n_particles must be positive to normalize the response")
    k = backend or kernels
    base_key = _random.derive_seed(seed, "brownian")
    n_steps = params.n_slots * params.steps_per_slot
    args = (n_steps, params.steps_per_slot, params.n_slots, params.step_sigma,
            float(params.tx_distance), float(params.receiver_radius), bool(bridge_correction),
            _random.ZIG_X, _random.ZIG_RATIO)
    chunks = _split(int(params.n_particles), max(1, int(workers)))
    logger.info("simulating %d particles over %d steps (%d chunks)", params.n_particles,
                n_steps, len(chunks))
    if len(chunks) == 1:
        counts = [k.brownian_slot_counts(base_key, *chunks[0], *args)]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            counts = list(pool.map(lambda c: k.brownian_slot_counts(base_key, *c, *args), chunks))
    total = np.sum(counts, axis=0)
    p = total / float(params.n_particles)
    if memory is None:
        memory = default_memory(params.slot_width, p.size, memory_duration)
    return ChannelResponse(p, params.slot_width, memory, int(params.n_particles))


def write_channel_file(path, response: ChannelResponse) -> None:
    """Write the P-vector cache: ``Ts=``, ``N=``, then one ``P<l>=`` line per slot."""
    lines = [f"Ts={response.slot_width!r}", f"N={response.n_particles or 0}"]
    lines += [f"P{i}={value!r}" for i, value in enumerate(response.p.tolist(), start=1)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_channel_file(path, memory: int | None = None,
                      memory_duration: float = DEFAULT_MEMORY_DURATION) -> ChannelResponse:
    entries = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParameterError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        entries[key.strip()] = value.strip()
    try:
        slot_width = float(entries.pop("Ts"))
        n_particles = int(entries.pop("N"))
        p = [float(entries[f"P{i}"]) for i in range(1, len(entries) + 1)]
    except (KeyError, ValueError) as exc:
        raise ParameterError(f"{path}: malformed channel file ({exc})") from None
    if memory is None:
        memory = default_memory(slot_width, len(p), memory_duration)
    return ChannelResponse(np.array(p), slot_width, memory, n_particles or None)

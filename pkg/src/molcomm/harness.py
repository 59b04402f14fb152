"""Monte-Carlo BER/FER estimation.

Each frame draws a random message, encodes it, pushes it through the chosen
transmission scheme, computes LLRs, runs BP and counts message-bit errors.
A BER point keeps adding frames (in index order) until the target number of
frame errors is reached or ``max_frames`` is hit.

Every frame's randomness is derived from ``(master_seed, scheme, mm,
frame_index)``, so a point is a pure function of the configuration no matter
how many worker processes evaluate frames.
"""
from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _random
from ._backend import BACKEND
from .channel import TxFrame, transmit_diversity, transmit_frame, transmit_preequalized
from .detection import (LLR_CLAMP, combine_llrs, compute_llrs, deinterleave_llr,
                        hard_detect)
from .diffusion import (ChannelParams, ChannelResponse, analytic_channel_response,
                        default_memory, read_channel_file, simulate_channel_response)
from .errors import ConfigurationError, MolcommError
from .interleaver import Permutation
from .ldpc import LdpcCode, build_regular_code, decode_bp, encode, load_code

logger = logging.getLogger(__name__)

SCHEMES = ("single", "diversity", "preequalized", "hard_threshold")
DEFAULT_MM_SWEEP = tuple(float(v) for v in np.logspace(2, 6, 9))
CHANNEL_FIELDS = ("total_time", "diffusion_coeff", "tx_distance", "receiver_radius",
                  "n_particles", "sim_step", "slot_width")


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a simulation result.

    Physical fields use seconds, µm and µm²/s.  ``channel_file`` and
    ``code_file`` override the generated channel response and code.
    """

    scheme: str = "single"
    # channel (SISO link)
    total_time: float = 2.1
    diffusion_coeff: float = 79.4
    tx_distance: float = 10.0
    receiver_radius: float = 5.0
    n_particles: int = 1_000_000
    sim_step: float = 1e-4
    slot_width: float = 0.15
    channel_seed: int = 0
    bridge_correction: bool = True
    analytic_channel: bool = False
    channel_file: str | None = None
    # code
    n: int = 200
    k: int = 100
    code_seed: int = 0
    code_file: str | None = None
    # receiver and protocol
    memory_duration: float = 1.4
    hypothesis_bits: int | None = None
    mm_sweep: tuple = DEFAULT_MM_SWEEP
    max_iter: int = 10
    target_frame_errors: int = 1020
    max_frames: int = 1_000_000
    master_seed: int = 0
    beta: float = 1.0
    threshold: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mm_sweep", tuple(float(v) for v in self.mm_sweep))

        def bad(name, why):
            raise ConfigurationError(f"{name}: {why}")

        if self.scheme not in SCHEMES:
            bad("scheme", f"must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.mm_sweep:
            bad("mm_sweep", "must not be empty")
        if any(v < 0 or not np.isfinite(v) for v in self.mm_sweep):
            bad("mm_sweep", "values must be finite and >= 0")
        if any(b <= a for a, b in zip(self.mm_sweep, self.mm_sweep[1:])):
            bad("mm_sweep", "must be strictly ascending")
        for name in ("n", "k", "max_iter", "target_frame_errors", "max_frames", "n_particles"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < (0 if name == "n_particles" else 1):
                bad(name, f"must be a positive integer, got {value!r}")
        if self.k >= self.n:
            bad("k", "must be smaller than n")
        if not self.memory_duration > 0:
            bad("memory_duration", "must be > 0")
        if self.hypothesis_bits is not None and self.hypothesis_bits < 0:
            bad("hypothesis_bits", "must be >= 0")
        if not 0.0 <= self.beta <= 1.0:
            bad("beta", "must lie in [0, 1]")
        if self.threshold is not None and not self.threshold >= 0:
            bad("threshold", "must be >= 0")
        try:
            self.channel_params
        except MolcommError as exc:
            raise ConfigurationError(f"channel: {exc}") from None

    @property
    def channel_params(self) -> ChannelParams:
        return ChannelParams(**{name: getattr(self, name) for name in CHANNEL_FIELDS})

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["mm_sweep"] = list(self.mm_sweep)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigurationError(f"{unknown[0]}: unknown configuration field")
        return cls(**data)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def digest(self) -> str:
        """Stable hash of every simulation-affecting field."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class BerPoint:
    mm: float
    frames: int
    bit_errors: int
    frame_errors: int
    k: int
    stopped_by: str
    raw_bit_errors: int | None = None

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.k) if self.frames else float("nan")

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else float("nan")

    @property
    def raw_ber(self) -> float | None:
        if self.raw_bit_errors is None or not self.frames:
            return None
        return self.raw_bit_errors / (self.frames * self.k)


@dataclass
class BerCurve:
    scheme: str
    config_digest: str
    points: list[BerPoint]
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class SimContext:
    """Resolved, read-only simulation ingredients shared by all frames."""

    response: ChannelResponse
    code: LdpcCode
    permutation: Permutation


class FrameResult(NamedTuple):
    bit_errors: int
    frame_error: bool


class FrameDetail(NamedTuple):
    bit_errors: int
    frame_error: bool
    raw_bit_errors: int | None
    iterations: int
    converged: bool


@functools.lru_cache(maxsize=8)
def _simulated_channel(params: ChannelParams, seed: int, bridge: bool) -> np.ndarray:
    return simulate_channel_response(params, seed, bridge_correction=bridge).p


def resolve_channel(config: SimConfig) -> ChannelResponse:
    """Channel response for ``config``: file, closed form, or particle simulation.

    Particle simulations are memoized per process.
    """
    params = config.channel_params
    if config.channel_file:
        try:
            response = read_channel_file(config.channel_file,
                                         memory_duration=config.memory_duration)
        except MolcommError as exc:
            raise ConfigurationError(f"channel_file: {exc}") from None
        if not np.isclose(response.slot_width, params.slot_width):
            raise ConfigurationError(
                f"channel_file: slot width {response.slot_width} != slot_width {params.slot_width}")
        return response
    if config.analytic_channel:
        return analytic_channel_response(params, memory_duration=config.memory_duration)
    p = _simulated_channel(params, config.channel_seed, config.bridge_correction)
    memory = default_memory(params.slot_width, p.size, config.memory_duration)
    return ChannelResponse(p, params.slot_width, memory, params.n_particles)


def resolve_code(config: SimConfig) -> LdpcCode:
    if config.code_file:
        code = load_code(config.code_file)
        if (code.n, code.k) != (config.n, config.k):
            raise ConfigurationError(
                f"code_file: file gives (n={code.n}, k={code.k}), config says "
                f"(n={config.n}, k={config.k})")
        return code
    return build_regular_code(config.n, config.k, config.code_seed)


def prepare(config: SimConfig) -> SimContext:
    response = resolve_channel(config)
    if config.hypothesis_bits is not None and config.hypothesis_bits > response.memory:
        raise ConfigurationError(
            f"hypothesis_bits: {config.hypothesis_bits} exceeds channel memory {response.memory}")
    code = resolve_code(config)
    return SimContext(response, code, Permutation.random(code.n, config.master_seed))


_CONTEXTS: dict[str, SimContext] = {}


def _context(config: SimConfig, context: SimContext | None) -> SimContext:
    if context is not None:
        return context
    key = config.digest
    if key not in _CONTEXTS:
        _CONTEXTS[key] = prepare(config)
    return _CONTEXTS[key]


def frame_seed(config: SimConfig, mm: float, frame_index: int) -> int:
    return _random.derive_seed(config.master_seed, config.scheme, float(mm), int(frame_index))


def simulate_frame(config: SimConfig, mm: float, frame_index: int,
                   context: SimContext | None = None) -> FrameDetail:
    ctx = _context(config, context)
    code, response = ctx.code, ctx.response
    seed = frame_seed(config, mm, frame_index)
    message = _random.rng_for(seed, "message").integers(0, 2, code.k, dtype=np.uint8)
    codeword = encode(code, message)
    noise_seed = _random.derive_seed(seed, "channel")
    history = config.hypothesis_bits
    raw_errors = None

    if config.scheme == "single":
        rx = transmit_frame(TxFrame(codeword, mm), response, noise_seed)
        llr = compute_llrs(rx, mm, response, history=history)
    elif config.scheme == "diversity":
        rx_a, rx_b = transmit_diversity(codeword, ctx.permutation, mm, response, noise_seed)
        llr_a = compute_llrs(rx_a, mm / 2.0, response, history=history)
        llr_b = deinterleave_llr(compute_llrs(rx_b, mm / 2.0, response, history=history),
                                 ctx.permutation)
        llr = combine_llrs(llr_a, llr_b)
    elif config.scheme == "preequalized":
        rx = transmit_preequalized(codeword, mm, config.beta, response, noise_seed)
        llr = compute_llrs(rx, mm, response, history=history, anti_ratio=config.beta)
    elif config.scheme == "hard_threshold":
        rx = transmit_frame(TxFrame(codeword, mm), response, noise_seed)
        threshold = config.threshold if config.threshold is not None else mm * response.p[0] / 2
        hard = hard_detect(rx, threshold)
        raw_errors = int(np.count_nonzero(code.message_bits(hard) != message))
        llr = np.where(hard == 1, -LLR_CLAMP, LLR_CLAMP)
    else:
        raise ConfigurationError(f"scheme: unsupported {config.scheme!r}")

    result = decode_bp(code, llr, config.max_iter)
    errors = int(np.count_nonzero(code.message_bits(result.decoded) != message))
    return FrameDetail(errors, errors > 0, raw_errors, result.iterations, result.converged)


def run_frame(config: SimConfig, mm: float, frame_index: int,
              context: SimContext | None = None) -> FrameResult:
    """Message-bit errors of one frame and whether the frame failed."""
    detail = simulate_frame(config, mm, frame_index, context)
    return FrameResult(detail.bit_errors, detail.frame_error)


_WORKER: dict = {}


def _install_worker(config: SimConfig, context: SimContext) -> None:
    _WORKER["config"] = config
    _WORKER["context"] = context


def _worker_frame(job: tuple[float, int]) -> FrameDetail:
    mm, index = job
    return simulate_frame(_WORKER["config"], mm, index, _WORKER["context"])


class _Tally:
    def __init__(self, config: SimConfig):
        self.config = config
        self.frames = self.bit_errors = self.frame_errors = self.raw = 0

    def add(self, detail: FrameDetail) -> bool:
        """Fold in the next frame; returns True once the point is complete."""
        self.frames += 1
        self.bit_errors += detail.bit_errors
        self.frame_errors += int(detail.frame_error)
        if detail.raw_bit_errors is not None:
            self.raw += detail.raw_bit_errors
        return self.done

    @property
    def done(self) -> bool:
        return (self.frame_errors >= self.config.target_frame_errors
                or self.frames >= self.config.max_frames)

    def point(self, mm: float, k: int) -> BerPoint:
        stopped = ("frame_errors" if self.frame_errors >= self.config.target_frame_errors
                   else "max_frames")
        raw = self.raw if self.config.scheme == "hard_threshold" else None
        return BerPoint(float(mm), self.frames, self.bit_errors, self.frame_errors, k, stopped, raw)


def run_ber_point(config: SimConfig, mm: float, *, workers: int = 1,
                  context: SimContext | None = None, batch: int = 32) -> BerPoint:
    """Run frames in index order until the stopping rule fires.

    With ``workers > 1`` frames are evaluated speculatively in batches by a
    process pool; results past the stopping index are discarded, so the
    tallies equal the sequential ones exactly.
    """
    ctx = _context(config, context)
    tally = _Tally(config)
    if workers <= 1:
        index = 0
        while not tally.add(simulate_frame(config, mm, index, ctx)):
            index += 1
        return tally.point(mm, ctx.code.k)
    with ProcessPoolExecutor(max_workers=workers, initializer=_install_worker,
                             initargs=(config, ctx)) as pool:
        _drain(pool, tally, config, mm, workers, batch)
    return tally.point(mm, ctx.code.k)


def _drain(pool, tally: _Tally, config: SimConfig, mm: float, workers: int, batch: int) -> None:
    start = 0
    step = workers * batch
    while True:
        stop = min(start + step, config.max_frames)
        jobs = [(mm, i) for i in range(start, stop)]
        for detail in pool.map(_worker_frame, jobs, chunksize=batch):
            if tally.add(detail):
                return
        start = stop


def run_sweep(config: SimConfig, *, workers: int = 1,
              context: SimContext | None = None) -> BerCurve:
    """One :class:`BerPoint` per molecule budget in ``config.mm_sweep``."""
    ctx = _context(config, context)
    points = []
    for mm in config.mm_sweep:
        point = run_ber_point(config, mm, workers=workers, context=ctx)
        logger.info("%s mm=%g frames=%d ber=%.3g fer=%.3g (%s)", config.scheme, mm, point.frames,
                    point.ber, point.fer, point.stopped_by)
        points.append(point)
    return BerCurve(config.scheme, config.digest, points, curve_metadata(config, ctx))


def curve_metadata(config: SimConfig, ctx: SimContext) -> dict:
    meta = {
        "backend": BACKEND,
        "memory": ctx.response.memory,
        "hypothesis_bits": (config.hypothesis_bits if config.hypothesis_bits is not None
                            else ctx.response.memory),
        "code_four_cycles": ctx.code.metadata.get("four_cycles"),
        "channel_source": ("file" if config.channel_file else
                           "analytic" if config.analytic_channel else "particle"),
    }
    if config.scheme == "preequalized":
        meta["note"] = ("simplified pre-equalization baseline: complement anti-stream at "
                        f"beta={config.beta}, LDPC-coded")
    if config.scheme == "hard_threshold":
        meta["note"] = "fixed-threshold hard detection mapped to +-30 LLRs before BP"
    return meta

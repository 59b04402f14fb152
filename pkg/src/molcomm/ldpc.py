"""Regular LDPC codes: construction, systematic encoding and sum-product decoding."""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _random
from ._backend import kernels
from .errors import ConstructionError, ContractError, ParameterError

logger = logging.getLogger(__name__)

LLR_CLAMP = 30.0
CONSTRUCTION_RETRIES = 100
SWAP_BUDGET = 20_000
SWAP_STALL = 500


def gf2_rref(matrix: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) and the pivot column of each row."""
    a = (np.asarray(matrix) & 1).astype(np.uint8)
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.flatnonzero(a[r:, c]) + r
        if hits.size == 0:
            continue
        if hits[0] != r:
            a[[r, hits[0]]] = a[[hits[0], r]]
        others = np.flatnonzero(a[:, c])
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def gf2_rank(matrix: np.ndarray) -> int:
    return len(gf2_rref(matrix)[1])


def count_four_cycles(H: np.ndarray) -> int:
    """Number of length-4 cycles in the Tanner graph of ``H``."""
    overlap = H.astype(np.int64) @ H.T.astype(np.int64)
    iu = np.triu_indices(H.shape[0], k=1)
    o = overlap[iu]
    return int((o * (o - 1) // 2).sum())


class DecodeResult(NamedTuple):
    decoded: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Binary linear code given by a parity-check matrix.

    ``G`` is systematic on ``info_positions``: the message bits appear
    unchanged at those codeword positions.  ``column_order`` lists
    ``info_positions`` followed by the parity positions, so
    ``G[:, column_order] == [I | P]``.
    """

    H: np.ndarray
    G: np.ndarray
    info_positions: np.ndarray
    column_order: np.ndarray
    dv: int | None = None
    dc: int | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return self.G.shape[0]

    @functools.cached_property
    def graph(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Check-major edge arrays ``(edge_var, chk_ptr, var_ptr, var_edges)``."""
        chk, var = np.nonzero(self.H)
        edge_var = var.astype(np.int32)
        chk_ptr = np.zeros(self.H.shape[0] + 1, dtype=np.int32)
        np.cumsum(np.bincount(chk, minlength=self.H.shape[0]), out=chk_ptr[1:])
        var_edges = np.argsort(edge_var, kind="stable").astype(np.int32)
        var_ptr = np.zeros(self.n + 1, dtype=np.int32)
        np.cumsum(np.bincount(edge_var, minlength=self.n), out=var_ptr[1:])
        return edge_var, chk_ptr, var_ptr, var_edges

    def message_bits(self, codeword) -> np.ndarray:
        return np.asarray(codeword)[self.info_positions]


def code_from_parity_check(H, *, dv: int | None = None, dc: int | None = None,
                           metadata: dict | None = None) -> LdpcCode:
    """Derive the systematic generator of ``H``; ``k = n - rank(H)``."""
    H = (np.asarray(H) & 1).astype(np.uint8)
    if H.ndim != 2:
        raise ContractError("parity-check matrix must be two-dimensional")
    if np.any(H.sum(axis=1) == 0):
        raise ContractError("parity-check matrix has an empty row")
    m, n = H.shape
    R, pivots = gf2_rref(H)
    free = np.setdiff1d(np.arange(n), pivots)
    G = np.zeros((free.size, n), dtype=np.uint8)
    G[:, free] = np.eye(free.size, dtype=np.uint8)
    G[:, pivots] = R[:, free].T
    H.setflags(write=False)
    G.setflags(write=False)
    col_degrees = H.sum(axis=0)
    row_degrees = H.sum(axis=1)
    if dv is None and np.all(col_degrees == col_degrees[0]):
        dv = int(col_degrees[0])
    if dc is None and np.all(row_degrees == row_degrees[0]):
        dc = int(row_degrees[0])
    meta = {"four_cycles": count_four_cycles(H), "rank": len(pivots)}
    meta.update(metadata or {})
    return LdpcCode(H, G, free, np.concatenate([free, pivots]).astype(np.intp), dv, dc, meta)


def _progressive_edges(n: int, m: int, dv: int, dc: int, rng: np.random.Generator) -> np.ndarray:
    """Column-by-column placement favouring the emptiest checks and avoiding 4-cycles."""
    H = np.zeros((m, n), dtype=np.uint8)
    room = np.full(m, dc)
    for v in rng.permutation(n):
        for _ in range(dv):
            open_checks = np.flatnonzero((room > 0) & (H[:, v] == 0))
            if open_checks.size == 0:
                return None
            mine = np.flatnonzero(H[:, v])
            if mine.size:
                # a check that already shares a variable with one of v's checks closes a 4-cycle
                neighbours = np.flatnonzero(H[mine].any(axis=0))
                clash = H[:, neighbours].any(axis=1)
                safe = open_checks[~clash[open_checks]]
                if safe.size:
                    open_checks = safe
            best = open_checks[room[open_checks] == room[open_checks].max()]
            c = rng.choice(best)
            H[c, v] = 1
            room[c] -= 1
    return H


def _pair_cost(overlap_row: np.ndarray) -> int:
    return int((overlap_row * (overlap_row - 1) // 2).sum())


def _remove_four_cycles(H: np.ndarray, rng: np.random.Generator, budget: int) -> np.ndarray:
    """Degree-preserving edge swaps that never increase the 4-cycle count."""
    H = H.astype(np.int64)
    m, _ = H.shape
    best, stalled = None, 0
    for _ in range(budget):
        overlap = H @ H.T
        np.fill_diagonal(overlap, 0)
        bad = np.argwhere(np.triu(overlap) >= 2)
        if bad.size == 0:
            break
        total = _pair_cost(np.triu(overlap))
        if best is None or total < best:
            best, stalled = total, 0
        else:
            stalled += 1
            if stalled > SWAP_STALL:
                break
        c1, c2 = bad[rng.integers(len(bad))]
        v1 = rng.choice(np.flatnonzero(H[c1] & H[c2]))
        c3 = rng.integers(m)
        candidates = np.flatnonzero(H[c3] & (1 - H[c1]))
        if c3 == c1 or H[c3, v1] or candidates.size == 0:
            continue
        v2 = rng.choice(candidates)

        def local_cost():
            o1 = H @ H[c1]
            o3 = H @ H[c3]
            o1[c1] = 0
            o3[c3] = 0
            shared = o1[c3]
            return _pair_cost(o1) + _pair_cost(o3) - shared * (shared - 1) // 2

        before = local_cost()
        H[c1, v1], H[c3, v1], H[c3, v2], H[c1, v2] = 0, 1, 0, 1
        if local_cost() > before:
            H[c1, v1], H[c3, v1], H[c3, v2], H[c1, v2] = 1, 0, 1, 0
    return H.astype(np.uint8)


def build_regular_code(n: int = 200, k: int = 100, seed: int = 0, *, dv: int = 3,
                       dc: int = 6) -> LdpcCode:
    """Random ``(dv, dc)``-regular code of length ``n`` with ``rank(H) = n - k``.

    Checks are filled progressively (emptiest first, avoiding 4-cycles when
    possible), then edge swaps remove any remaining 4-cycles.  Matrices that
    are rank deficient are discarded and redrawn.  The residual 4-cycle count
    is recorded in ``metadata["four_cycles"]``.
    """
    m = n - k
    if n <= 0 or k <= 0 or m <= 0:
        raise ParameterError("need 0 < k < n")
    if n * dv != m * dc:
        raise ParameterError(f"(n={n}, k={k}) is incompatible with ({dv},{dc})-regularity")
    if dv > m or dc > n:
        raise ParameterError("degrees exceed matrix dimensions")
    for attempt in range(CONSTRUCTION_RETRIES):
        rng = _random.rng_for(seed, "ldpc", n, k, dv, dc, attempt)
        H = _progressive_edges(n, m, dv, dc, rng)
        if H is None:
            continue
        if count_four_cycles(H):
            H = _remove_four_cycles(H, rng, SWAP_BUDGET)
        if gf2_rank(H) != m:
            continue
        code = code_from_parity_check(H, dv=dv, dc=dc,
                                      metadata={"seed": seed, "attempt": attempt})
        logger.debug("built (%d,%d) code after %d attempts, %d four-cycles", n, k, attempt + 1,
                     code.metadata["four_cycles"])
        return code
    raise ConstructionError(
        f"no full-rank ({dv},{dc})-regular H for n={n}, k={k} within "
        f"{CONSTRUCTION_RETRIES} attempts (seed={seed})"
    )


def _bits(word, length: int, what: str) -> np.ndarray:
    arr = np.asarray(word)
    if arr.ndim != 1 or arr.size != length:
        raise ContractError(f"{what} must have length {length}, got shape {arr.shape}")
    return arr.astype(np.uint8) & 1


def encode(code: LdpcCode, u) -> np.ndarray:
    """Codeword ``u G`` over GF(2)."""
    u = _bits(u, code.k, "message")
    return ((u.astype(np.int64) @ code.G) & 1).astype(np.uint8)


def syndrome(code: LdpcCode, word) -> np.ndarray:
    word = _bits(word, code.n, "word")
    return ((code.H.astype(np.int64) @ word) & 1).astype(np.uint8)


def decode_bp(code: LdpcCode, llr, max_iter: int = 10, *, clamp: float = LLR_CLAMP,
              backend=None) -> DecodeResult:
    """Log-domain sum-product decoding with flooding schedule.

    Inputs are clamped to ``+-clamp``.  After every iteration the posterior
    sign gives a hard decision (ties decide 0); decoding stops as soon as the
    syndrome vanishes.
    """
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.ndim != 1 or llr.size != code.n:
        raise ContractError(f"llr must have length {code.n}")
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")
    if not np.all(np.isfinite(llr)):
        llr = np.nan_to_num(llr, nan=0.0, posinf=clamp, neginf=-clamp)
    k = backend or kernels
    decoded, iterations, converged = k.bp_decode(*code.graph, llr, int(max_iter), float(clamp))
    return DecodeResult(np.asarray(decoded, dtype=np.uint8), int(iterations), bool(converged))


def write_alist(path, H) -> None:
    """Write ``H`` in MacKay's alist format (1-based indices, zero padded)."""
    H = np.asarray(H)
    m, n = H.shape
    cols = [np.flatnonzero(H[:, j]) + 1 for j in range(n)]
    rows = [np.flatnonzero(H[i]) + 1 for i in range(m)]
    max_col = max(len(c) for c in cols)
    max_row = max(len(r) for r in rows)

    def padded(idx, width):
        return " ".join(str(int(v)) for v in list(idx) + [0] * (width - len(idx)))

    lines = [f"{n} {m}", f"{max_col} {max_row}",
             " ".join(str(len(c)) for c in cols), " ".join(str(len(r)) for r in rows)]
    lines += [padded(c, max_col) for c in cols]
    lines += [padded(r, max_row) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    try:
        values = [int(t) for t in tokens]
        n, m, max_col, max_row = values[:4]
        pos = 4 + n + m
        if len(values) != pos + n * max_col + m * max_row:
            raise ValueError(f"expected {pos + n * max_col + m * max_row} integers, "
                             f"found {len(values)}")
        H = np.zeros((m, n), dtype=np.uint8)
        for j in range(n):
            for i in values[pos:pos + max_col]:
                if i:
                    H[i - 1, j] = 1
            pos += max_col
        for i in range(m):
            for j in values[pos:pos + max_row]:
                if j and not H[i, j - 1]:
                    raise ValueError(f"row list of check {i + 1} disagrees with column lists")
            pos += max_row
    except (ValueError, IndexError) as exc:
        raise ParameterError(f"{path}: malformed alist file ({exc})") from None
    return H


def load_code(path) -> LdpcCode:
    return code_from_parity_check(read_alist(path), metadata={"source": str(path)})

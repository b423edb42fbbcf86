"""Euler-Maruyama paths on nested Brownian grids.

A path with stream index ``i`` is driven by the fine increments
``standard_normals(seed, i, k)``; coarse increments are obtained by
repeatedly adding adjacent pairs (a dyadic tree), so coarsening 4 -> 2 -> 1
and 4 -> 1 give bit-identical sums. Batches of paths are processed in fixed
blocks; the block layout never depends on the number of workers.
"""
from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._stats import ErrorEstimate, mean_and_se
from .coefficients import SdeProblem
from .rng import BRIDGE, INCREMENTS, TIMES, standard_normals, uniforms

__all__ = [
    "BrownianGrid",
    "EmPath",
    "CoupledErrors",
    "coarsen_increments",
    "sample_grid",
    "em_path",
    "path_sup_distance",
    "terminal_values",
    "coupled_errors",
    "modulus_stat",
    "class_a_increment_stat",
    "dump_paths",
    "load_paths",
    "worker_count",
]

DEFAULT_BLOCK = 4096
DEFAULT_CHUNK = 1024
THREADS_ENV = "IRREGULAR_EM_THREADS"


def _is_pow2(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


def worker_count(workers: int | None = None) -> int:
    """Explicit argument, else $IRREGULAR_EM_THREADS, else 1."""
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, int(workers))


def _map_blocks(fn, paths: int, block_size: int, workers: int | None):
    starts = list(range(0, paths, block_size))
    spans = [(s, min(s + block_size, paths)) for s in starts]
    w = worker_count(workers)
    if w == 1 or len(spans) == 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))


# ---------------------------------------------------------------------------
# grids and single paths


@dataclass(frozen=True, eq=False)
class BrownianGrid:
    t_horizon: float
    n_fine: int
    increments: np.ndarray
    seed: int
    stream: int

    def coarse(self, n: int) -> np.ndarray:
        """Increments over the n-step grid."""
        if n <= 0 or self.n_fine % n or not _is_pow2(self.n_fine // n):
            raise ValueError(f"n = {n} must equal n_fine / 2^j (n_fine = {self.n_fine})")
        return coarsen_increments(self.increments, self.n_fine // n)


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum adjacent groups of ``factor`` increments along the last axis.

    ``factor`` must be a power of two; sums are formed pairwise level by
    level.
    """
    if not _is_pow2(factor):
        raise ValueError(f"coarsening factor must be a power of two, got {factor}")
    out = np.asarray(increments, dtype=float)
    if out.shape[-1] % factor:
        raise ValueError("increment count is not divisible by the factor")
    while factor > 1:
        out = out[..., 0::2] + out[..., 1::2]
        factor //= 2
    return out


def sample_grid(T: float, n_fine: int, seed: int, stream: int = 0,
                base: int | None = None) -> BrownianGrid:
    """Fine Brownian increments N(0, T/n_fine) for one stream.

    If ``base`` is given, ``n_fine`` must be ``base * 2^L``.
    """
    if T <= 0.0:
        raise ValueError("T must be positive")
    if int(n_fine) != n_fine or n_fine < 1:
        raise ValueError(f"n_fine must be a positive integer, got {n_fine}")
    n_fine = int(n_fine)
    if base is not None and (n_fine % base or not _is_pow2(n_fine // base)):
        raise ValueError(f"n_fine = {n_fine} is not {base} * 2^L")
    z = standard_normals(seed, [stream], 0, n_fine, INCREMENTS)[0]
    return BrownianGrid(float(T), n_fine, z * math.sqrt(T / n_fine), int(seed), int(stream))


@dataclass(frozen=True, eq=False)
class EmPath:
    n: int
    values: np.ndarray
    horizon: float
    clamp_count: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n + 1)


def _stepper(problem: SdeProblem):
    drift, diff = problem.drift, problem.diffusion
    sig = diff.constant

    if sig is not None:
        def step(x, dt, dw):
            return x + drift(x) * dt + sig * dw
    else:
        def step(x, dt, dw):
            return x + drift(x) * dt + diff(x) * dw
    return step


def em_path(problem: SdeProblem, grid: BrownianGrid, n: int) -> EmPath:
    """n-step Euler-Maruyama path driven by the grid's coarsened increments."""
    if abs(grid.t_horizon - problem.horizon) > 0.0:
        raise ValueError("grid horizon differs from the problem horizon")
    incs = grid.coarse(n)
    step = _stepper(problem)
    dt = problem.horizon / n
    x = np.array([problem.x0])
    vals = np.empty(n + 1)
    vals[0] = problem.x0
    for k in range(n):
        x = step(x, dt, incs[k:k + 1])
        vals[k + 1] = x[0]
    return EmPath(n, vals, problem.horizon)


def path_sup_distance(a: EmPath, b: EmPath) -> float:
    """Max |a - b| over the coarser path's grid times."""
    if a.horizon != b.horizon:
        raise ValueError("paths live on different horizons")
    coarse, fine = (a, b) if a.n <= b.n else (b, a)
    if fine.n % coarse.n:
        raise ValueError(f"grids are not nested: n = {a.n} and n = {b.n}")
    r = fine.n // coarse.n
    return float(np.max(np.abs(fine.values[::r] - coarse.values)))


# ---------------------------------------------------------------------------
# batched simulation


def _chunk_for(n: int, chunk: int) -> int:
    c = 1
    while c * 2 <= chunk and n % (c * 2) == 0:
        c *= 2
    return c


def _terminal_block(problem, seed, n, chunk, a, b):
    streams = np.arange(a, b, dtype=np.uint64)
    step = _stepper(problem)
    dt = problem.horizon / n
    sq = math.sqrt(dt)
    x = np.full(b - a, problem.x0)
    C = _chunk_for(n, chunk)
    for c0 in range(0, n, C):
        dw = standard_normals(seed, streams, c0, C, INCREMENTS) * sq
        for j in range(C):
            x = step(x, dt, dw[:, j])
    return x


def terminal_values(problem: SdeProblem, n: int, paths: int, seed: int,
                    block_size: int = DEFAULT_BLOCK, chunk: int = DEFAULT_CHUNK,
                    workers: int | None = None) -> np.ndarray:
    """X_T of the n-step scheme for streams 0 .. paths-1, in stream order."""
    parts = _map_blocks(lambda a, b: _terminal_block(problem, seed, n, chunk, a, b),
                        paths, block_size, workers)
    return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class CoupledErrors:
    """Per-path pathwise errors of each level against the reference.

    Arrays have shape ``(len(levels), paths)``: |dX_T|, max over the level's
    grid times of |dX|, and |dX_tau| at the stopping rule.
    """

    levels: tuple
    n_ref: int
    terminal: np.ndarray
    sup: np.ndarray
    stopping: np.ndarray
    stop_level: float


def _coupled_block(problem, seed, levels, n_ref, stop_level, chunk, a, b):
    P = b - a
    streams = np.arange(a, b, dtype=np.uint64)
    step = _stepper(problem)
    T = problem.horizon
    dt_ref = T / n_ref
    ratios = [n_ref // n for n in levels]
    r_min = min(ratios)
    r_max = max(ratios)
    C = _chunk_for(n_ref, chunk)
    L = len(levels)
    x0 = problem.x0
    upward = x0 < stop_level

    def crossed(v):
        return v >= stop_level if upward else v <= stop_level

    x_ref = np.full(P, x0)
    xs = [np.full(P, x0) for _ in levels]
    dts = [T / n for n in levels]
    sup = np.zeros((L, P))
    stop_err = np.zeros((L, P))
    start_hit = bool(crossed(np.asarray(x0)))
    stopped = np.full((L, P), start_hit)

    def observe(l, ref_val):
        d = np.abs(ref_val - xs[l])
        np.maximum(sup[l], d, out=sup[l])
        hit = ~stopped[l] & crossed(ref_val)
        if np.any(hit):
            stop_err[l, hit] = d[hit]
            stopped[l] |= hit

    pending = {}
    sq = math.sqrt(dt_ref)
    rec_cols = max(C // r_min, 1)
    for c0 in range(0, n_ref, C):
        dw = standard_normals(seed, streams, c0, C, INCREMENTS) * sq
        rec = np.empty((P, rec_cols))
        for j in range(C):
            x_ref = step(x_ref, dt_ref, dw[:, j])
            if (j + 1) % r_min == 0:
                rec[:, (j + 1) // r_min - 1] = x_ref
        tree = {1: dw}
        s, r = dw, 1
        while r < C:
            s = s[:, 0::2] + s[:, 1::2]
            r *= 2
            tree[r] = s
        for l, rl in enumerate(ratios):
            if rl > C:
                continue
            incs = tree[rl]
            per = rl // r_min
            for k in range(C // rl):
                xs[l] = step(xs[l], dts[l], incs[:, k])
                observe(l, rec[:, (k + 1) * per - 1])
        if r_max <= C:
            continue
        node, size = tree[C][:, 0], C
        while True:
            for l, rl in enumerate(ratios):
                if rl == size:
                    xs[l] = step(xs[l], dts[l], node)
                    observe(l, x_ref)
            if size >= r_max:
                break
            left = pending.pop(size, None)
            if left is None:
                pending[size] = node
                break
            node, size = left + node, size * 2

    terminal = np.stack([np.abs(x_ref - xl) for xl in xs])
    stop_err = np.where(stopped, stop_err, terminal)
    return terminal, sup, stop_err


def coupled_errors(problem: SdeProblem, levels, n_ref: int, paths: int, seed: int,
                   stop_level: float | None = None, block_size: int = DEFAULT_BLOCK,
                   chunk: int = DEFAULT_CHUNK, workers: int | None = None) -> CoupledErrors:
    """Simulate the reference and every level on one Brownian path per stream.

    Each ``n`` in ``levels`` must satisfy ``n_ref = n * 2^j``. The stopping
    rule is tau = first grid time (of the level) at which the reference path
    reaches ``stop_level`` (default x0 + 1/2), or T.
    """
    levels = tuple(int(n) for n in levels)
    for n in levels:
        if n < 1 or n_ref % n or not _is_pow2(n_ref // n):
            raise ValueError(f"level n = {n} does not divide n_ref = {n_ref} by a power of two")
    if paths < 2:
        raise ValueError("need at least 2 paths")
    if stop_level is None:
        stop_level = problem.x0 + 0.5
    parts = _map_blocks(
        lambda a, b: _coupled_block(problem, seed, levels, n_ref, stop_level, chunk, a, b),
        paths, block_size, workers)
    terminal = np.concatenate([p[0] for p in parts], axis=1)
    sup = np.concatenate([p[1] for p in parts], axis=1)
    stop = np.concatenate([p[2] for p in parts], axis=1)
    return CoupledErrors(levels, n_ref, terminal, sup, stop, float(stop_level))


# ---------------------------------------------------------------------------
# intra-step statistics


def _require_elliptic(problem: SdeProblem):
    xs = np.linspace(-50.0, 50.0, 20001)
    s2 = problem.diffusion(xs) ** 2
    k = problem.diffusion.k_sigma
    if np.min(s2) < 1.0 / (k * k) - 1e-9:
        raise ValueError("diffusion is not uniformly elliptic (sigma^2 < 1/K_sigma^2 somewhere)")


def _intra_block(problem, seed, n, chunk, midpoint, value_fn, a, b):
    """Sum over steps of value_fn(X_k, X_s) with s inside step k."""
    streams = np.arange(a, b, dtype=np.uint64)
    drift, diff = problem.drift, problem.diffusion
    step = _stepper(problem)
    h = problem.horizon / n
    sq = math.sqrt(h)
    x = np.full(b - a, problem.x0)
    acc = np.zeros(b - a)
    C = _chunk_for(n, chunk)
    for c0 in range(0, n, C):
        dw = standard_normals(seed, streams, c0, C, INCREMENTS) * sq
        xi = standard_normals(seed, streams, c0, C, BRIDGE)
        u = np.full((b - a, C), 0.5) if midpoint else uniforms(seed, streams, c0, C, TIMES)
        for j in range(C):
            uj = u[:, j]
            w_part = uj * dw[:, j] + np.sqrt(uj * (1.0 - uj) * h) * xi[:, j]
            xs = x + drift(x) * (uj * h) + diff(x) * w_part
            acc += value_fn(x, xs)
            x = step(x, h, dw[:, j])
    return acc


def _intra_stat(problem, n, paths, seed, midpoint, value_fn, norm, block_size, chunk, workers,
                scale):
    if paths < 2:
        raise ValueError("need at least 2 paths")
    _require_elliptic(problem)
    parts = _map_blocks(
        lambda a, b: _intra_block(problem, seed, n, chunk, midpoint, value_fn, a, b),
        paths, block_size, workers)
    vals = np.concatenate(parts) * scale
    m, se = mean_and_se(vals)
    return ErrorEstimate(n, norm, float(m), float(se), paths)


def modulus_stat(problem: SdeProblem, n: int, q: float, paths: int, seed: int,
                 block_size: int = DEFAULT_BLOCK, chunk: int = DEFAULT_CHUNK,
                 workers: int | None = None) -> ErrorEstimate:
    """Time average over steps of E|X_{t_k + h/2} - X_{t_k}|^q.

    The mid-step value uses the Brownian bridge between grid points. For
    b = 0, sigma = 1 and q = 2 the expectation is T / (2n).
    """
    if not q > 0.0:
        raise ValueError("q must be positive")
    fn = lambda x, xs: np.abs(xs - x) ** q  # noqa: E731
    return _intra_stat(problem, n, paths, seed, True, fn, "modulus", block_size, chunk,
                       workers, 1.0 / n)


def class_a_increment_stat(problem: SdeProblem, zeta, n: int, q: float, paths: int, seed: int,
                           block_size: int = DEFAULT_BLOCK, chunk: int = DEFAULT_CHUNK,
                           workers: int | None = None) -> ErrorEstimate:
    """Estimate int_0^T E|zeta(X_s) - zeta(X_eta(s))|^q ds.

    One uniform time per step and path; unbiased for the time integral.
    """
    if not q >= 1.0:
        raise ValueError("q must be >= 1")
    fn = lambda x, xs: np.abs(zeta(xs) - zeta(x)) ** q  # noqa: E731
    return _intra_stat(problem, n, paths, seed, False, fn, "class_a_increment", block_size,
                       chunk, workers, problem.horizon / n)


# ---------------------------------------------------------------------------
# binary dump

_HEADER = struct.Struct("<dQQ")


def dump_paths(fh_or_path, values, horizon: float) -> None:
    """Little-endian layout: float64 T, uint64 n, uint64 count, then
    ``count * (n + 1)`` float64 values, path after path."""
    if isinstance(values, EmPath):
        values = [values]
    if len(values) and isinstance(values[0], EmPath):
        values = np.stack([p.values for p in values])
    arr = np.ascontiguousarray(np.atleast_2d(np.asarray(values, dtype="<f8")))
    count, width = arr.shape
    payload = _HEADER.pack(float(horizon), width - 1, count) + arr.tobytes()
    if hasattr(fh_or_path, "write"):
        fh_or_path.write(payload)
    else:
        with open(fh_or_path, "wb") as fh:
            fh.write(payload)


def load_paths(fh_or_path):
    """Inverse of dump_paths: returns ``(horizon, values)``."""
    if hasattr(fh_or_path, "read"):
        data = fh_or_path.read()
    else:
        with open(fh_or_path, "rb") as fh:
            data = fh.read()
    T, n, count = _HEADER.unpack_from(data, 0)
    vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size, count=count * (n + 1))
    return T, vals.reshape(count, n + 1).astype(float)

"""Monte-Carlo oracle for the cumulative information density random walk.

Paths are grouped in fixed blocks of ``BLOCK`` paths. Block ``b`` draws from its
own stream ``SeedSequence(seed, spawn_key=(b,))``, one vector of standard
normals per channel use, so a path's increments do not depend on how many
steps are simulated, on the shard count, or on thread scheduling. Blocks
report integer counts that are summed in block order, which makes every
estimate bit-for-bit reproducible.
"""

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .channel import ChannelModel, info_density_from_noise

logger = logging.getLogger(__name__)

BLOCK = 1 << 15
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    samples: int
    seed: int

    def within(self, other: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.value - other) <= k * self.stderr + slack


def default_shards() -> int:
    return max(1, int(os.environ.get("VLSF_THREADS", "1")))


def _estimate(total: int, total_sq: int, samples: int, seed: int, scale: float = 1.0) -> McEstimate:
    mean = total / samples
    var = max(total_sq - total * total / samples, 0.0) / (samples - 1)
    return McEstimate(mean * scale, math.sqrt(var / samples) * scale, samples, seed)


def _block_crossings(seed: int, block: int, size: int, checkpoints: np.ndarray, gamma: float, snr: float) -> np.ndarray:
    """Boolean (size, len(checkpoints)) matrix of S_{n_i} >= gamma."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))
    out = np.empty((size, checkpoints.size), dtype=bool)
    s = np.zeros(size)
    j = 0
    for step in range(1, int(checkpoints[-1]) + 1):
        s += info_density_from_noise(rng.standard_normal(size), snr)
        while j < checkpoints.size and checkpoints[j] == step:
            out[:, j] = s >= gamma
            j += 1
    return out


def _run_blocks(samples, seed, shards, fn):
    nblocks = -(-samples // BLOCK)
    sizes = [min(BLOCK, samples - b * BLOCK) for b in range(nblocks)]
    if shards <= 1:
        return [fn(b, sizes[b]) for b in range(nblocks)]
    with ThreadPoolExecutor(max_workers=shards) as ex:
        return list(ex.map(lambda b: fn(b, sizes[b]), range(nblocks)))


def _check(samples, seed):
    if samples < MIN_SAMPLES:
        raise ValueError(f"samples must be >= {MIN_SAMPLES}")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")


def mc_tail_curve(ns: Sequence[int], gamma: float, channel: ChannelModel, samples: int = 1_000_000,
                  seed: int = 0, shards: int = 1) -> List[McEstimate]:
    """Estimates of P[S_n >= gamma] for every n in ``ns`` from one set of paths."""
    _check(samples, seed)
    ns_arr = np.asarray(ns)
    if ns_arr.size == 0 or np.any(ns_arr < 1) or np.any(ns_arr != np.round(ns_arr)):
        raise ValueError("ns must be positive integers")
    uniq = np.unique(ns_arr.astype(int))

    def work(b, size):
        return _block_crossings(seed, b, size, uniq, gamma, channel.snr).sum(axis=0, dtype=np.int64)

    counts = np.sum(_run_blocks(samples, seed, shards, work), axis=0)
    by_n = {int(n): int(c) for n, c in zip(uniq, counts)}
    return [_estimate(by_n[int(n)], by_n[int(n)], samples, seed) for n in ns_arr]


def mc_tail(n: int, gamma: float, channel: ChannelModel, samples: int = 1_000_000, seed: int = 0,
            shards: int = 1) -> McEstimate:
    """Fraction of simulated paths with S_n >= gamma."""
    return mc_tail_curve([n], gamma, channel, samples, seed, shards)[0]


def mc_stopping(times, gamma: float, channel: ChannelModel, samples: int = 1_000_000, seed: int = 0,
                shards: int = 1) -> Tuple[McEstimate, McEstimate]:
    """Expected stopping time of a schedule, true rule and marginal bound.

    Returns
    -------
    (E_tau_true, E_tau_marginal)
        The first is the mean of the genuine stopping time (first n_i with
        S_{n_i} >= gamma, else n_m). The second averages the per-path quantity
        n_1 + sum_i (n_{i+1} - n_i) 1{S_{n_i} < gamma}, whose mean is the
        marginal-probability objective; it dominates the true time path by path.
    """
    _check(samples, seed)
    t = np.asarray(times, dtype=float)
    if t.size == 0:
        raise ValueError("schedule is empty")
    ti = np.round(t)
    if np.any(ti != t):
        warnings.warn("real-valued schedule rounded to integers", RuntimeWarning)
    ti = ti.astype(np.int64)
    if ti[0] < 1 or np.any(np.diff(ti) <= 0):
        raise ValueError("schedule must be strictly increasing positive integers after rounding")
    gaps = np.diff(ti)

    def work(b, size):
        above = _block_crossings(seed, b, size, ti, gamma, channel.snr)
        hit = above.any(axis=1)
        first = np.where(hit, above.argmax(axis=1), ti.size - 1)
        tau = ti[first]
        marg = ti[0] + (~above[:, :-1]).astype(np.int64) @ gaps
        return np.array([tau.sum(), (tau * tau).sum(), marg.sum(), (marg * marg).sum()], dtype=np.int64)

    tot = np.sum(_run_blocks(samples, seed, shards, work), axis=0)
    true = _estimate(int(tot[0]), int(tot[1]), samples, seed)
    marg = _estimate(int(tot[2]), int(tot[3]), samples, seed)
    return true, marg

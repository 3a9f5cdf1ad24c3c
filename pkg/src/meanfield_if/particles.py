"""Finite-N network: Euler-Maruyama diffusion, threshold resets and cascades of alpha/N kicks.

Randomness comes from fixed blocks of ``BLOCK`` particles, each with its own
stream spawned from the run seed. Block boundaries do not depend on the number
of worker threads, so traces are bitwise identical for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import ModelConfig

BLOCK = 16384
DELTA_BLOW = 0.05
ROUND_CAP = 1000
_KINDS = {"zero": 0, "linear": 1, "tabulated": 2}


@njit(cache=True)
def _diffuse(X, normals, uniforms, dt, sq, kind, lam, bx, bv, bridge):
    """Euler-Maruyama move; with ``bridge`` a path that crossed 1 inside the step is put at 1."""
    N = X.shape[0]
    if kind == 2:
        b = np.interp(X, bx, bv)
    else:
        b = np.empty(0)
    if bridge:
        for i in range(N):
            x0 = X[i]
            if kind == 0:
                x = x0 + sq * normals[i]
            elif kind == 1:
                x = x0 - lam * x0 * dt + sq * normals[i]
            else:
                x = x0 + b[i] * dt + sq * normals[i]
            if x < 1.0 and uniforms[i] < math.exp(-2.0 * (1.0 - x0) * (1.0 - x) / dt):
                x = 1.0
            X[i] = x
    elif kind == 0:
        for i in range(N):
            X[i] += sq * normals[i]
    elif kind == 1:
        for i in range(N):
            X[i] += -lam * X[i] * dt + sq * normals[i]
    else:
        for i in range(N):
            X[i] += b[i] * dt + sq * normals[i]


@njit(cache=True)
def _cascade_sync(X, count, mark, stamp, kick_unit, round_cap):
    """Synchronous rounds; returns (spikes, rounds, distinct, capped)."""
    N = X.shape[0]
    spikes = 0
    rounds = 0
    distinct = 0
    capped = False
    while True:
        k = 0
        for i in range(N):
            if X[i] >= 1.0:
                k += 1
        if k == 0:
            break
        if rounds >= round_cap:
            capped = True
            for i in range(N):
                if X[i] >= 1.0:
                    X[i] = 0.0
                    count[i] += 1
                    spikes += 1
                    if mark[i] != stamp:
                        mark[i] = stamp
                        distinct += 1
            break
        rounds += 1
        kick = kick_unit * k
        for i in range(N):
            if X[i] >= 1.0:
                X[i] = 0.0
                count[i] += 1
                if mark[i] != stamp:
                    mark[i] = stamp
                    distinct += 1
            else:
                X[i] += kick
        spikes += k
    return spikes, rounds, distinct, capped


@njit(cache=True)
def _cascade_seq(X, count, mark, stamp, kick_unit, event_cap):
    """One reset at a time, lowest index first among particles at or above 1.

    Each reset kicks every other particle, including ones reset earlier in the
    same cascade. Returns (spikes, events, distinct, capped).
    """
    N = X.shape[0]
    order = np.argsort(-X)
    offset = 0.0
    ptr = 0
    heap = [np.int64(0)]
    heap.pop()
    fifo = np.empty(N + event_cap + 1, np.int64)
    head = 0
    tail = 0
    spikes = 0
    distinct = 0
    capped = False
    while ptr < N and X[order[ptr]] >= 1.0:
        _heappush(heap, np.int64(order[ptr]))
        ptr += 1
    while len(heap) > 0:
        if spikes >= event_cap:
            capped = True
            break
        i = _heappop(heap)
        X[i] = -(offset + kick_unit)
        offset += kick_unit
        count[i] += 1
        spikes += 1
        if mark[i] != stamp:
            mark[i] = stamp
            distinct += 1
        fifo[tail] = i
        tail += 1
        while ptr < N and X[order[ptr]] + offset >= 1.0:
            if mark[order[ptr]] != stamp:
                _heappush(heap, np.int64(order[ptr]))
            ptr += 1
        while head < tail and X[fifo[head]] + offset >= 1.0:
            _heappush(heap, fifo[head])
            head += 1
    for i in range(N):
        X[i] += offset
        if X[i] >= 1.0:
            X[i] = 0.0
            count[i] += 1
            spikes += 1
    return spikes, spikes, distinct, capped


@njit(cache=True)
def _heappush(h, v):
    h.append(v)
    i = len(h) - 1
    while i > 0:
        parent = (i - 1) // 2
        if h[parent] <= h[i]:
            break
        h[parent], h[i] = h[i], h[parent]
        i = parent


@njit(cache=True)
def _heappop(h):
    top = h[0]
    last = h.pop()
    n = len(h)
    if n > 0:
        h[0] = last
        i = 0
        while True:
            lft = 2 * i + 1
            rgt = lft + 1
            small = i
            if lft < n and h[lft] < h[small]:
                small = lft
            if rgt < n and h[rgt] < h[small]:
                small = rgt
            if small == i:
                break
            h[i], h[small] = h[small], h[i]
            i = small
    return top


@njit(cache=True)
def _update_supz(X, count, supz):
    for i in range(X.shape[0]):
        z = X[i] + count[i]
        if z > supz[i]:
            supz[i] = z


def cascade_resolve(positions, alpha: float, N: int | None = None, round_cap: int = ROUND_CAP,
                    mode: str = "synchronous"):
    """Resolve the chain reaction of resets triggered by positions >= 1.

    Returns (positions, spikes, rounds, capped). In synchronous mode every
    round resets all particles at or above 1 and gives each other particle
    alpha * (resets in the round) / N.
    """
    X = np.array(positions, dtype=float)
    N = X.size if N is None else N
    count = np.zeros(X.size, np.int64)
    mark = np.zeros(X.size, np.int64)
    if mode == "synchronous":
        s, r, _, c = _cascade_sync(X, count, mark, 1, alpha / N, round_cap)
    elif mode == "sequential":
        s, r, _, c = _cascade_seq(X, count, mark, 1, alpha / N, round_cap * X.size)
    else:
        raise ValueError(f"unknown cascade mode {mode!r}")
    return X, int(s), int(r), bool(c)


@dataclass
class ParticleState:
    """Positions (< 1 between steps), per-particle spike counts and per-block streams."""

    positions: np.ndarray
    spike_count: np.ndarray
    t: float
    streams: list
    step_index: int = 0
    supz: np.ndarray | None = None

    @classmethod
    def initial(cls, cfg: ModelConfig, N: int, seed: int, track_sup_z: bool = False):
        if N < 1:
            raise ValueError("N must be >= 1")
        init = cfg.init
        n_blocks = -(-N // BLOCK)
        ss = np.random.SeedSequence(seed)
        streams = [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(n_blocks + 1)]
        if init.kind == "dirac":
            X = np.full(N, init.x0)
        else:
            # inverse-CDF sampling of the gridded law with the spare stream
            cdf = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(init.y)
                                                   * (init.density[1:] + init.density[:-1]))])
            X = np.minimum(np.interp(streams[-1].random(N) * cdf[-1], cdf, init.y), 1 - 1e-12)
        supz = np.maximum(X, 0.0) if track_sup_z else None
        return cls(X, np.zeros(N, np.int64), 0.0, streams[:n_blocks], 0, supz)


@dataclass
class ParticleTrace:
    """Per-step record of a particle run (times in internal units)."""

    N: int
    dt: float
    times: np.ndarray
    eN: np.ndarray
    cascade_sizes: np.ndarray
    cascade_rounds: np.ndarray
    cascade_distinct: np.ndarray
    blowup: tuple | None
    spike_total: int
    sup_z_mean: np.ndarray | None = None
    histograms: dict = field(default_factory=dict)
    capped_steps: int = 0

    @property
    def max_fraction(self) -> float:
        return float(self.cascade_distinct.max() / self.N) if self.cascade_distinct.size else 0.0


def _draw(state: ParticleState, N: int, bridge: bool, threads: int):
    normals = np.empty(N)
    uniforms = np.empty(N if bridge else 0)

    def fill(b):
        lo, hi = b * BLOCK, min(N, (b + 1) * BLOCK)
        g = state.streams[b]
        g.standard_normal(out=normals[lo:hi])
        if bridge:
            g.random(out=uniforms[lo:hi])

    nb = len(state.streams)
    if threads > 1 and nb > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(fill, range(nb)))
    else:
        for b in range(nb):
            fill(b)
    return normals, uniforms


def _drift_args(cfg: ModelConfig):
    d = cfg.drift
    bx = np.ascontiguousarray(d.breakpoints if d.kind == "tabulated" else np.zeros(1))
    bv = np.ascontiguousarray(d.values if d.kind == "tabulated" else np.zeros(1))
    return _KINDS[d.kind], float(d.lam), bx, bv


def step(state: ParticleState, cfg: ModelConfig, dt: float, bridge: bool = False,
         mode: str = "synchronous", round_cap: int = ROUND_CAP, noise: float = 1.0,
         threads: int = 1, _mark=None):
    """Advance one Euler-Maruyama step and resolve the cascade in place.

    Returns (state, spikes, rounds); ``noise`` scales the Gaussian increments
    (0 gives the deterministic test variant).
    """
    out = _step(state, cfg, dt, bridge, mode, round_cap, noise, threads, _mark)
    return state, out[0], out[1]


def _step(state, cfg, dt, bridge, mode, round_cap, noise, threads, mark):
    X = state.positions
    N = X.size
    if dt <= 0:
        raise ValueError("dt must be positive")
    normals, uniforms = _draw(state, N, bridge, threads)
    kind, lam, bx, bv = _drift_args(cfg)
    _diffuse(X, normals, uniforms, dt, noise * math.sqrt(dt), kind, lam, bx, bv, bridge)
    if mark is None:
        mark = np.zeros(N, np.int64)
    stamp = state.step_index + 1
    if mode == "synchronous":
        res = _cascade_sync(X, state.spike_count, mark, stamp, cfg.alpha / N, round_cap)
    elif mode == "sequential":
        res = _cascade_seq(X, state.spike_count, mark, stamp, cfg.alpha / N, round_cap * N)
    else:
        raise ValueError(f"unknown cascade mode {mode!r}")
    if state.supz is not None:
        _update_supz(X, state.spike_count, state.supz)
    state.step_index += 1
    state.t = state.step_index * dt
    return int(res[0]), int(res[1]), int(res[2]), bool(res[3])


def simulate(cfg: ModelConfig, N: int, dt: float, T: float, seed: int, threads: int = 1,
             bridge: bool = False, mode: str = "synchronous", delta_blow: float = DELTA_BLOW,
             round_cap: int = ROUND_CAP, track_sup_z: bool = False,
             snapshot_times=(), hist_bins: int = 200, noise: float = 1.0) -> ParticleTrace:
    """Run the N-particle network on [0, T] (internal time units).

    Blow-up is declared at the first step whose cascade resets at least
    ``delta_blow * N`` distinct particles, or hits the round cap.
    """
    if seed is None:
        raise ValueError("simulate needs an explicit seed")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ValueError("T must be an integer multiple of dt")
    state = ParticleState.initial(cfg, N, seed, track_sup_z)
    sizes = np.zeros(n, np.int64)
    rounds = np.zeros(n, np.int64)
    distinct = np.zeros(n, np.int64)
    eN = np.zeros(n + 1)
    supz = np.zeros(n + 1) if track_sup_z else None
    if track_sup_z:
        supz[0] = state.supz.mean()
    snap_steps = {int(round(t / dt)): t for t in snapshot_times}
    hists = {}
    mark = np.zeros(N, np.int64)
    total = 0
    blow = None
    capped_steps = 0

    def snap(k):
        if k in snap_steps:
            h, edges = np.histogram(state.positions, bins=hist_bins,
                                    range=(min(state.positions.min(), -1.0), 1.0), density=True)
            hists[snap_steps[k]] = (0.5 * (edges[1:] + edges[:-1]), h)

    snap(0)
    for k in range(n):
        s, r, d, c = _step(state, cfg, dt, bridge, mode, round_cap, noise, threads, mark)
        sizes[k], rounds[k], distinct[k] = s, r, d
        total += s
        eN[k + 1] = total / N
        capped_steps += c
        if blow is None and (d >= delta_blow * N or c):
            blow = ((k + 1) * dt, d / N)
        if track_sup_z:
            supz[k + 1] = state.supz.mean()
        snap(k + 1)
    return ParticleTrace(N, dt, np.arange(n + 1) * dt, eN, sizes, rounds, distinct, blow,
                         total, supz, hists, capped_steps)


def sup_z_statistic(trace: ParticleTrace, t: float | None = None) -> float:
    """Monte Carlo E[sup_{s<=t} (X_s + M_s)_+] from a run with ``track_sup_z=True``."""
    if trace.sup_z_mean is None:
        raise ValueError("run simulate(..., track_sup_z=True) first")
    if t is None:
        return float(trace.sup_z_mean[-1])
    k = int(round(t / trace.dt))
    if k < 0 or k >= trace.times.size:
        raise ValueError("t outside the simulated horizon")
    return float(trace.sup_z_mean[k])

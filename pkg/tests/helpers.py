"""Independent oracles for the test suite.

Everything here is deliberately written without reference to the package's
kernel implementations: brute-force enumeration for matching/histogramming,
a literal sequential scan for dead-time pruning, and a pair-by-pair
reference engine that routes every photon individually.
"""

from __future__ import annotations

import numpy as np

from entnetsim import photonics, sim
from entnetsim.plan import NetworkPlan
from entnetsim.sim import SystemConfig, route_pair, fiber_delay_ps, PATH_SIGNS


def brute_dead_time(tags: np.ndarray, dead_ps: int) -> np.ndarray:
    """Literal sequential dead-time scan; returns kept indices."""
    kept = []
    last = None
    for i, t in enumerate(tags):
        if last is None or t - last >= dead_ps:
            kept.append(i)
            last = t
    return np.asarray(kept, dtype=np.int64)


def brute_greedy_match(a, b, offset: int, half_window: int):
    """O(na*nb) earliest-first one-to-one matching."""
    used = np.zeros(len(b), dtype=bool)
    ia, ib = [], []
    for i, t in enumerate(a):
        target = t + offset
        for j in range(len(b)):
            if used[j]:
                continue
            if abs(int(b[j]) - int(target)) <= half_window:
                ia.append(i)
                ib.append(j)
                used[j] = True
                break
            if b[j] > target + half_window:
                break
    return np.asarray(ia, dtype=np.int64), np.asarray(ib, dtype=np.int64)


def brute_greedy_match_vec(a, b, offset: int, half_window: int):
    """Same matching rule, row-at-a-time over the full partner stream.

    Still brute force (no index structure over b), but fast enough for the
    10^4-tag acceptance cases.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    used = np.zeros(b.size, dtype=bool)
    ia, ib = [], []
    for i in range(a.size):
        in_window = np.abs(b - (a[i] + offset)) <= half_window
        free = np.flatnonzero(in_window & ~used)
        if free.size:
            ia.append(i)
            ib.append(free[0])
            used[free[0]] = True
    return np.asarray(ia, dtype=np.int64), np.asarray(ib, dtype=np.int64)


def brute_histogram(a, b, offset: int, bin_width: int, n_bins: int) -> np.ndarray:
    """All-pairs delay histogram by direct enumeration."""
    span = n_bins * bin_width
    lo = -(span // 2)
    counts = np.zeros(n_bins, dtype=np.int64)
    for t in a:
        for s in b:
            d = int(s) - int(t) - offset
            if lo <= d < lo + span:
                counts[(d - lo) // bin_width] += 1
    return counts


def brute_histogram_vec(a, b, offset: int, bin_width: int, n_bins: int,
                        chunk: int = 256) -> np.ndarray:
    """All-pairs histogram via dense difference blocks (still O(na*nb))."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    span = n_bins * bin_width
    lo = -(span // 2)
    counts = np.zeros(n_bins, dtype=np.int64)
    for start in range(0, a.size, chunk):
        block = b[None, :] - a[start:start + chunk, None] - offset
        d = block.ravel()
        d = d[(d >= lo) & (d < lo + span)]
        if d.size:
            counts += np.bincount((d - lo) // bin_width, minlength=n_bins)
    return counts


def reference_engine(plan: NetworkPlan, sys_cfg: SystemConfig,
                     duration_s: float, seed: int):
    """Pair-by-pair scenario simulation: emit, route, disperse, detect.

    Routes every emitted pair individually through route_pair, used to
    cross-validate the production engine's outcome-partitioned generation
    at small scale. Returns {(user, path): tags}.
    """
    rng = np.random.default_rng(seed)
    arrivals: dict[tuple[int, int], list[float]] = {}
    for pair in plan.resources():
        stream = photonics.sample_pair_stream(sys_cfg.source, pair.resource_id,
                                              duration_s, rng)
        for t, det in zip(stream.times_ps, stream.detuning_ghz):
            fate = route_pair(pair.resource_id, plan, sys_cfg, rng)
            corr = (rng.normal(0.0, sys_cfg.source.correlation_jitter_ps)
                    if sys_cfg.source.correlation_jitter_ps > 0 else 0.0)
            for role, user, path in (("signal", fate.signal_user, fate.signal_path),
                                     ("idler", fate.idler_user, fate.idler_path)):
                if user == sim.LOST:
                    continue
                channel = pair.signal if role == "signal" else pair.idler
                detuning = det if role == "signal" else -det
                when = t + (corr if role == "idler" else 0.0)
                when += fiber_delay_ps(sys_cfg.losses, user)
                when += photonics.dispersion_time_shift(
                    detuning, channel, PATH_SIGNS[path], sys_cfg.dispersion)
                arrivals.setdefault((user, path), []).append(when)
    streams = {}
    for key in sorted(arrivals):
        arr = np.sort(np.asarray(arrivals[key]))
        streams[key] = photonics.detector_response(arr, sys_cfg.detector,
                                                   duration_s, rng)
    return streams

"""Phenomenological component models: pair source, losses, dispersion, detectors.

All sampling operations are pure functions of (config, rng state); streams
are NumPy arrays with times in picoseconds. Frequency detunings are stored
once per pair (signal offset from its channel center, in GHz); the idler
offset is the exact negative by energy conservation, never stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .plan import ItuChannel, SPEED_OF_LIGHT_NM_THZ

PS_PER_SECOND = 1e12


class ContractViolation(ValueError):
    """An input violated a documented precondition (e.g. unsorted stream)."""


@dataclass(frozen=True)
class SourceConfig:
    """Broadband pair source, one correlated channel pair at a time.

    pair_rate_hz is a calibration default: the generated pair rate per
    channel pair is not a published figure; it is chosen so downstream
    coincidence and key-rate figures land in their reference ranges.
    correlation_jitter_ps is the intrinsic biphoton correlation width.
    """

    pair_rate_hz: float = 2.0e6
    bandwidth_ghz: float = 100.0
    correlation_jitter_ps: float = 2.0

    def __post_init__(self):
        if self.pair_rate_hz <= 0:
            raise ValueError("pair_rate_hz must be positive")
        if self.bandwidth_ghz <= 0:
            raise ValueError("bandwidth_ghz must be positive")
        if self.correlation_jitter_ps < 0:
            raise ValueError("correlation_jitter_ps must be >= 0")


@dataclass(frozen=True)
class DetectorConfig:
    """Single-photon detector: efficiency, dark counts, jitter, dead time."""

    efficiency: float = 0.70
    dark_rate_hz: float = 100.0
    jitter_ps: float = 30.0
    dead_time_ps: int = 50_000

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be within [0, 1]")
        if self.dark_rate_hz < 0:
            raise ValueError("dark_rate_hz must be >= 0")
        if self.jitter_ps < 0:
            raise ValueError("jitter_ps must be >= 0")
        if self.dead_time_ps < 0:
            raise ValueError("dead_time_ps must be >= 0")


NORMAL = +1
ANOMALOUS = -1


@dataclass(frozen=True)
class DispersionConfig:
    """One dispersion module; sign +1 selects normal, -1 anomalous dispersion."""

    magnitude_ps_per_nm: float = 1980.0
    insertion_loss_db: float = 3.0

    def __post_init__(self):
        if self.magnitude_ps_per_nm < 0:
            raise ValueError("magnitude_ps_per_nm must be >= 0")
        if self.insertion_loss_db < 0:
            raise ValueError("insertion_loss_db must be >= 0")


@dataclass(frozen=True)
class PairStream:
    """Emitted photon pairs of one entanglement resource over one acquisition.

    times_ps are sorted emission times; detuning_ghz is the signal-frequency
    offset from its channel center (idler offset is the negative).
    """

    resource_id: int
    duration_ps: int
    times_ps: np.ndarray
    detuning_ghz: np.ndarray

    def __len__(self) -> int:
        return self.times_ps.size


def db_to_transmittance(loss_db: float) -> float:
    """Power transmittance of a loss expressed in dB."""
    if loss_db < 0:
        raise ValueError("loss_db must be >= 0")
    return 10.0 ** (-loss_db / 10.0)


def wavelength_shift_nm_per_ghz(channel: ItuChannel) -> float:
    """d(lambda)/d(nu) at the channel center: -lambda^2/c, in nm per GHz."""
    lam_nm = channel.wavelength_nm()
    return -(lam_nm * lam_nm) / (SPEED_OF_LIGHT_NM_THZ * 1000.0)


def dispersion_time_shift(detuning_ghz, channel: ItuChannel, sign: int,
                          disp: DispersionConfig):
    """Arrival-time shift (ps) of a photon detuned from its channel center.

    shift = sign * D * d(lambda), with d(lambda) = -(lambda^2/c) * detuning
    evaluated at the channel center (about -0.008 nm/GHz near 1545 nm).
    Accepts scalars or arrays.
    """
    if sign not in (NORMAL, ANOMALOUS):
        raise ValueError("sign must be +1 (normal) or -1 (anomalous)")
    dlam = wavelength_shift_nm_per_ghz(channel) * np.asarray(detuning_ghz, dtype=float)
    shift = sign * disp.magnitude_ps_per_nm * dlam
    if np.isscalar(detuning_ghz):
        return float(shift)
    return shift


def sample_pair_stream(cfg: SourceConfig, resource_id: int, duration_s: float,
                       rng: np.random.Generator) -> PairStream:
    """Homogeneous Poisson pair emission with uniform in-band detuning."""
    if duration_s < 0:
        raise ValueError("duration_s must be >= 0")
    duration_ps = int(round(duration_s * PS_PER_SECOND))
    n = int(rng.poisson(cfg.pair_rate_hz * duration_s)) if duration_s > 0 else 0
    times = np.sort(rng.uniform(0.0, duration_ps, size=n))
    detuning = rng.uniform(-cfg.bandwidth_ghz / 2.0, cfg.bandwidth_ghz / 2.0, size=n)
    return PairStream(resource_id=resource_id, duration_ps=duration_ps,
                      times_ps=times, detuning_ghz=detuning)


def detector_response(arrivals_ps: np.ndarray, cfg: DetectorConfig,
                      duration_s: float, rng: np.random.Generator) -> np.ndarray:
    """Detected int64 timestamps for a sorted stream of photon arrivals.

    Applies, in order: efficiency thinning, Gaussian timing jitter,
    rounding to integer picoseconds, dark-count injection (independent
    Poisson process), clipping to [0, duration), dead-time pruning, and
    removal of exact duplicate timestamps (ps-resolution merge).
    """
    tags, _ = detector_response_traced(arrivals_ps, cfg, duration_s, rng)
    return tags


def detector_response_traced(arrivals_ps: np.ndarray, cfg: DetectorConfig,
                             duration_s: float, rng: np.random.Generator
                             ) -> tuple[np.ndarray, np.ndarray]:
    """detector_response plus per-tag provenance.

    Returns (tags, origin) where origin[k] is the index into arrivals_ps
    that produced tags[k], or -1 for a dark count.
    """
    arrivals_ps = np.asarray(arrivals_ps, dtype=float)
    if arrivals_ps.ndim != 1:
        raise ContractViolation("arrivals must be a 1-d array")
    if arrivals_ps.size > 1 and np.any(np.diff(arrivals_ps) < 0):
        raise ContractViolation("arrivals must be sorted ascending")
    duration_ps = int(round(duration_s * PS_PER_SECOND))

    kept = np.flatnonzero(rng.random(arrivals_ps.size) < cfg.efficiency)
    times = arrivals_ps[kept]
    if cfg.jitter_ps > 0:
        times = times + rng.normal(0.0, cfg.jitter_ps, size=times.size)
    tags = np.rint(times).astype(np.int64)
    origin = kept.astype(np.int64)

    n_dark = int(rng.poisson(cfg.dark_rate_hz * duration_s)) if duration_s > 0 else 0
    if n_dark:
        dark = rng.integers(0, max(duration_ps, 1), size=n_dark, dtype=np.int64)
        tags = np.concatenate([tags, dark])
        origin = np.concatenate([origin, np.full(n_dark, -1, dtype=np.int64)])

    in_range = (tags >= 0) & (tags < duration_ps)
    tags, origin = tags[in_range], origin[in_range]
    order = np.argsort(tags, kind="stable")
    tags, origin = tags[order], origin[order]

    keep_idx = _kernels.dead_time_prune(tags, cfg.dead_time_ps)
    tags, origin = tags[keep_idx], origin[keep_idx]
    if tags.size > 1:
        distinct = np.concatenate([[True], np.diff(tags) > 0])
        tags, origin = tags[distinct], origin[distinct]
    return tags, origin

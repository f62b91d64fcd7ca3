"""Coincidence analysis between users: correlation histograms, one-to-one
coincidence matching, CAR estimation and whole-network link matrices.

The heavy sweeps run on the kernel backend (compiled when available); both
sweep algorithms are linear two-pointer passes over the sorted streams,
never all-pairs enumeration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .photonics import ContractViolation
from .plan import NetworkPlan, resource_for_link

CAR_CAP = 1e9  # reported CAR when the accidental floor is exactly zero


@dataclass(frozen=True)
class CorrelationHistogram:
    """Delay histogram between two tag streams.

    Bins are zero-centered: the middle bin straddles zero delay (after
    removing the configured offset), so a jitter-limited coincidence peak
    falls into a single bin. n_bins is forced odd for that reason, which
    may widen the covered span by one bin over the requested range.
    """

    bin_width_ps: int
    offset_ps: int
    counts: np.ndarray
    singles_a: int
    singles_b: int
    duration_ps: int

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    def delays_ps(self) -> np.ndarray:
        """Bin centers."""
        half = self.n_bins // 2
        return (np.arange(-half, half + 1, dtype=np.int64) * self.bin_width_ps)

    def total(self) -> int:
        return int(self.counts.sum())


def _require_sorted(stream: np.ndarray, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(stream, dtype=np.int64)
    if arr.size > 1 and np.any(np.diff(arr) < 0):
        raise ContractViolation(f"{name} stream must be sorted ascending")
    return arr


def cross_correlate(a: np.ndarray, b: np.ndarray, bin_width_ps: int,
                    range_ps: int, offset_ps: int = 0,
                    duration_ps: int = 0) -> CorrelationHistogram:
    """Histogram of all pairwise delays (b - a - offset) within the range.

    All-pairs semantics within the window (a tag may appear in several
    delay pairs); computed with a linear sweep.
    """
    a = _require_sorted(a, "a")
    b = _require_sorted(b, "b")
    if bin_width_ps <= 0:
        raise ValueError("bin_width_ps must be positive")
    if range_ps < bin_width_ps:
        raise ValueError("range_ps must cover at least one bin")
    n_bins = -(-range_ps // bin_width_ps)  # ceil
    if n_bins % 2 == 0:
        n_bins += 1
    counts = _kernels.correlation_histogram(a, b, int(offset_ps),
                                            int(bin_width_ps), int(n_bins))
    return CorrelationHistogram(bin_width_ps=int(bin_width_ps),
                                offset_ps=int(offset_ps), counts=counts,
                                singles_a=int(a.size), singles_b=int(b.size),
                                duration_ps=int(duration_ps))


@dataclass(frozen=True)
class CoincidenceSet:
    """One-to-one matched tag pairs within a full-width window around offset."""

    window_ps: int
    offset_ps: int
    index_a: np.ndarray
    index_b: np.ndarray
    times_a: np.ndarray
    times_b: np.ndarray

    def __len__(self) -> int:
        return int(self.index_a.size)

    def deltas_ps(self) -> np.ndarray:
        """Residual delays t_b - t_a - offset of the matched pairs."""
        return self.times_b - self.times_a - self.offset_ps


def match_coincidences(a: np.ndarray, b: np.ndarray, window_ps: int,
                       offset_ps: int = 0) -> CoincidenceSet:
    """Greedy earliest-first one-to-one matching.

    window_ps is the full window width: a pair qualifies when
    |t_b - t_a - offset| <= window_ps // 2. Each tag is used at most once;
    walking the first stream in time order, each tag takes the earliest
    unconsumed partner in its window.
    """
    a = _require_sorted(a, "a")
    b = _require_sorted(b, "b")
    if window_ps <= 0:
        raise ValueError("window_ps must be positive")
    ia, ib = _kernels.greedy_match(a, b, int(offset_ps), int(window_ps) // 2)
    return CoincidenceSet(window_ps=int(window_ps), offset_ps=int(offset_ps),
                          index_a=ia, index_b=ib,
                          times_a=a[ia], times_b=b[ib])


@dataclass(frozen=True)
class CarEstimate:
    car: float
    peak_counts: int
    peak_bin: int
    accidental_per_window: float
    capped: bool


def compute_car(hist: CorrelationHistogram, peak_window_ps: int,
                guard_windows: int = 3) -> CarEstimate:
    """Coincidence-to-accidental ratio of a correlation histogram.

    Peak counts are summed over a peak_window_ps-wide group of bins
    centered on the maximum bin; the accidental floor is the mean of the
    off-peak bins, excluding guard_windows peak-widths on each side of the
    peak, scaled to the peak window width.
    """
    if peak_window_ps < hist.bin_width_ps:
        raise ValueError("peak_window_ps must be at least one bin wide")
    counts = hist.counts
    n = counts.size
    nwin = max(1, int(round(peak_window_ps / hist.bin_width_ps)))
    peak_bin = int(np.argmax(counts))
    half = (nwin - 1) // 2
    lo = max(0, peak_bin - half)
    hi = min(n, lo + nwin)
    peak_counts = int(counts[lo:hi].sum())

    guard = guard_windows * nwin
    off_mask = np.ones(n, dtype=bool)
    off_mask[max(0, lo - guard):min(n, hi + guard)] = False
    if not np.any(off_mask):
        raise ValueError("no off-peak bins left to estimate the accidental floor")
    acc_per_bin = float(counts[off_mask].mean())
    acc_per_window = acc_per_bin * nwin
    if acc_per_window == 0:
        return CarEstimate(car=CAR_CAP, peak_counts=peak_counts,
                           peak_bin=peak_bin, accidental_per_window=0.0,
                           capped=True)
    return CarEstimate(car=peak_counts / acc_per_window,
                       peak_counts=peak_counts, peak_bin=peak_bin,
                       accidental_per_window=acc_per_window, capped=False)


@dataclass(frozen=True)
class LinkReport:
    user_a: int
    user_b: int
    kind: str
    resource_id: int
    coincidences: int
    car: float
    duration_s: float


def link_matrix(streams: dict[int, tuple[np.ndarray, np.ndarray]],
                plan: NetworkPlan, links, window_ps: int,
                offsets_ps: dict[int, int], duration_s: float,
                hist_range_ps: int | None = None
                ) -> tuple[list[LinkReport], dict[tuple[int, int], CorrelationHistogram]]:
    """Coincidence count and CAR for each requested user pair.

    streams maps user id to its merged (times, path_labels); offsets_ps
    maps user id to its configured propagation delay, whose pairwise
    difference centers each link's window.
    """
    if hist_range_ps is None:
        hist_range_ps = 33 * window_ps
    reports = []
    histograms = {}
    for (ua, ub) in links:
        rid, _pair, kind = resource_for_link(plan, ua, ub)
        offset = offsets_ps.get(ub, 0) - offsets_ps.get(ua, 0)
        ta, tb = streams[ua][0], streams[ub][0]
        hist = cross_correlate(ta, tb, window_ps, hist_range_ps,
                               offset_ps=offset,
                               duration_ps=int(round(duration_s * 1e12)))
        car = compute_car(hist, window_ps)
        matches = match_coincidences(ta, tb, window_ps, offset_ps=offset)
        reports.append(LinkReport(user_a=ua, user_b=ub, kind=kind,
                                  resource_id=rid, coincidences=len(matches),
                                  car=car.car, duration_s=duration_s))
        histograms[(ua, ub)] = hist
    return reports, histograms


LINKS_CSV_HEADER = ["user_a", "user_b", "kind", "resource_id",
                    "coincidences", "car", "duration_s"]


def write_links_csv(reports: list[LinkReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LINKS_CSV_HEADER)
        for r in reports:
            writer.writerow([r.user_a, r.user_b, r.kind, r.resource_id,
                             r.coincidences, repr(r.car), repr(r.duration_s)])


def write_histogram_csv(hist: CorrelationHistogram, path, **metadata) -> None:
    """Histogram CSV: `# key=value` metadata header lines, then
    delay_ps,counts rows."""
    with open(path, "w", newline="") as fh:
        for key in sorted(metadata):
            fh.write(f"# {key}={metadata[key]}\n")
        fh.write(f"# bin_width_ps={hist.bin_width_ps}\n")
        fh.write(f"# offset_ps={hist.offset_ps}\n")
        fh.write(f"# singles_a={hist.singles_a}\n")
        fh.write(f"# singles_b={hist.singles_b}\n")
        fh.write(f"# duration_ps={hist.duration_ps}\n")
        writer = csv.writer(fh)
        writer.writerow(["delay_ps", "counts"])
        for d, c in zip(hist.delays_ps(), hist.counts):
            writer.writerow([int(d), int(c)])

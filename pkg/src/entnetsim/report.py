"""Scenario orchestration and report-bundle output.

Runs plan -> simulation -> coincidence analysis -> key post-processing for
a selected link set and writes the CSV/JSON artifact bundle. Every number
written here is produced by a module operation; this file only routes and
formats. All files are written atomically (write-then-rename).

Reproducibility contract: with identical resolved configuration (which
includes the seed), every file in the bundle is byte-identical across
runs, except timing.json, which holds only the wall-clock measurement and
is documented as non-reproducible.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from itertools import combinations

from . import __version__
from ._kernels import BACKEND
from .analysis import (CorrelationHistogram, LinkReport, link_matrix,
                       write_histogram_csv, write_links_csv)
from .config import ScenarioConfig, parse_link_list
from .doqkd import KeyRateReport, analyze_link
from .plan import NetworkPlan, subnet_label, write_plan_csv
from .rates import monitor_expected_iqr_ps
from .sim import (ScenarioResult, fiber_delay_ps, run_scenario,
                  write_tag_stream, write_truth_csv, PATH_NAMES)

FIGURES = ("fig3a", "fig3b", "fig4a", "fig4b")


class FigureDataError(ValueError):
    """A figure was requested whose links are missing from the bundle."""


def representative_users(plan: NetworkPlan) -> list[int]:
    """One user per subnet for the inter-subnet measurements: the first
    user of each subnet (in the reference network, subnet A's first user
    carries the 1 km fiber)."""
    return [plan.subnet_users(s)[0] for s in range(plan.num_subnets)]


def intra_subnet_links(plan: NetworkPlan, subnet: int) -> list[tuple[int, int]]:
    """All user pairs of one subnet, in lexicographic order (the reference
    labeling 1..28 for an 8-user subnet)."""
    return list(combinations(plan.subnet_users(subnet), 2))


def inter_rep_links(plan: NetworkPlan) -> list[tuple[int, int]]:
    """The representative inter-subnet pairs, lexicographic: AB, AC, ..."""
    return list(combinations(representative_users(plan), 2))


def first_pair_links(plan: NetworkPlan) -> list[tuple[int, int]]:
    """One intra pair per subnet: its first two users."""
    return [(plan.subnet_users(s)[0], plan.subnet_users(s)[1])
            for s in range(plan.num_subnets)]


def resolve_links(plan: NetworkPlan, selector: str) -> list[tuple[int, int]]:
    """Expand a link-set name or explicit list into ordered user pairs.

    default: the reference measurement set (all intra links of the first
    subnet plus the representative inter links). fig3: one intra pair per
    subnet plus the representative inter links. fig4: same as default.
    figures: union of the fig3 and fig4 sets. all: every user pair.
    """
    if selector == "all":
        return list(combinations(plan.users(), 2))
    if selector in ("default", "fig4"):
        return intra_subnet_links(plan, 0) + inter_rep_links(plan)
    if selector == "fig3":
        return first_pair_links(plan) + inter_rep_links(plan)
    if selector == "figures":
        base = intra_subnet_links(plan, 0) + inter_rep_links(plan)
        extra = [l for l in first_pair_links(plan) if l not in base]
        return base + extra
    links = parse_link_list(selector)
    for ua, ub in links:
        plan.subnet_of(ua)
        plan.subnet_of(ub)
    return links


@dataclass
class ReportBundle:
    config: ScenarioConfig
    plan: NetworkPlan
    links: list[tuple[int, int]]
    link_reports: list[LinkReport]
    key_reports: dict[tuple[int, int], KeyRateReport]
    histograms: dict[tuple[int, int], CorrelationHistogram]
    merged_streams: dict[int, tuple] = field(repr=False)
    singles_counts: dict[tuple[int, int], int] = field(repr=False)
    result: ScenarioResult = field(repr=False)

    def link_report(self, ua: int, ub: int) -> LinkReport:
        for rep in self.link_reports:
            if (rep.user_a, rep.user_b) == (ua, ub):
                return rep
        raise KeyError(f"link {ua}-{ub} not in bundle")


def run_bundle(cfg: ScenarioConfig, collect_truth: bool = False) -> ReportBundle:
    """Execute the full pipeline for the configured link set."""
    plan = cfg.network_plan()
    links = resolve_links(plan, cfg.links)
    users = sorted({u for link in links for u in link})
    sys_cfg = cfg.system()
    qkd_cfg = cfg.qkd()

    result = run_scenario(plan, sys_cfg, cfg.duration_s, cfg.seed,
                          selected_users=users, collect_truth=collect_truth)
    merged = {u: result.user_stream(u) for u in users}
    singles = result.singles_counts()
    result.streams = {}  # reconstructible from merged; frees the duplicates
    delays = {u: fiber_delay_ps(sys_cfg.losses, u) for u in users}

    link_reports, histograms = link_matrix(merged, plan, links,
                                           qkd_cfg.window_ps, delays,
                                           cfg.duration_s)
    key_reports = {}
    if cfg.duration_s > 0:
        for (ua, ub), rep in zip(links, link_reports):
            pair = plan.resource_by_id(rep.resource_id)
            expected = monitor_expected_iqr_ps(pair, sys_cfg)
            key_reports[(ua, ub)] = analyze_link(
                merged[ua][0], merged[ua][1], merged[ub][0], merged[ub][1],
                delays[ua], delays[ub], qkd_cfg, cfg.duration_s,
                monitor_expected_ps=expected)

    return ReportBundle(config=cfg, plan=plan, links=links,
                        link_reports=link_reports, key_reports=key_reports,
                        histograms=histograms, merged_streams=merged,
                        singles_counts=singles, result=result)


# ---------------------------------------------------------------------------
# figure-shaped CSV data

def emit_figure_data(bundle: ReportBundle, figure: str) -> list[list]:
    """Rows (including header) for one figure-shaped CSV.

    fig3a/fig3b: per-link delay histograms (one intra pair per subnet /
    the representative inter pairs). fig4a: secure key rate of every link
    in the first subnet, numbered 1..n in lexicographic order. fig4b:
    secure key rate of the representative inter links, labeled by subnet
    letter pairs.
    """
    plan = bundle.plan
    if figure == "fig3a":
        wanted = first_pair_links(plan)
        _require_links(bundle, wanted, figure)
        rows = [["subnet", "user_a", "user_b", "delay_ps", "counts"]]
        for (ua, ub) in wanted:
            hist = bundle.histograms[(ua, ub)]
            label = subnet_label(plan.subnet_of(ua))
            for d, c in zip(hist.delays_ps(), hist.counts):
                rows.append([label, ua, ub, int(d), int(c)])
        return rows
    if figure == "fig3b":
        wanted = inter_rep_links(plan)
        _require_links(bundle, wanted, figure)
        rows = [["link", "user_a", "user_b", "delay_ps", "counts"]]
        for (ua, ub) in wanted:
            hist = bundle.histograms[(ua, ub)]
            label = _pair_label(plan, ua, ub)
            for d, c in zip(hist.delays_ps(), hist.counts):
                rows.append([label, ua, ub, int(d), int(c)])
        return rows
    if figure == "fig4a":
        wanted = intra_subnet_links(plan, 0)
        _require_links(bundle, wanted, figure)
        rows = [["link", "user_a", "user_b", "secure_rate_bps"]]
        for idx, (ua, ub) in enumerate(wanted, start=1):
            rows.append([idx, ua, ub,
                         repr(bundle.key_reports[(ua, ub)].secure_rate_bps)])
        return rows
    if figure == "fig4b":
        wanted = inter_rep_links(plan)
        _require_links(bundle, wanted, figure)
        rows = [["link", "user_a", "user_b", "secure_rate_bps"]]
        for (ua, ub) in wanted:
            rows.append([_pair_label(plan, ua, ub), ua, ub,
                         repr(bundle.key_reports[(ua, ub)].secure_rate_bps)])
        return rows
    raise FigureDataError(f"unknown figure {figure!r}; expected one of {FIGURES}")


def _pair_label(plan: NetworkPlan, ua: int, ub: int) -> str:
    return subnet_label(plan.subnet_of(ua)) + subnet_label(plan.subnet_of(ub))


def _require_links(bundle: ReportBundle, wanted, figure: str) -> None:
    have = set(bundle.histograms)
    missing = [f"{ua}-{ub}" for (ua, ub) in wanted if (ua, ub) not in have]
    if missing:
        raise FigureDataError(
            f"{figure} needs links absent from this bundle: {', '.join(missing)}"
            " (run with --links figures or --links all)")
    if figure.startswith("fig4"):
        missing = [f"{ua}-{ub}" for (ua, ub) in wanted
                   if (ua, ub) not in bundle.key_reports]
        if missing:
            raise FigureDataError(
                f"{figure} needs key reports absent from this bundle:"
                f" {', '.join(missing)}")


# ---------------------------------------------------------------------------
# bundle writing

def _atomic_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_via(path: str, writer_fn) -> None:
    tmp = f"{path}.tmp"
    writer_fn(tmp)
    os.replace(tmp, path)


def _keyrates_payload(bundle: ReportBundle) -> dict:
    links = []
    for (ua, ub) in bundle.links:
        if (ua, ub) not in bundle.key_reports:
            continue
        rep = bundle.link_report(ua, ub)
        body = {"user_a": ua, "user_b": ub, "kind": rep.kind,
                "resource_id": rep.resource_id}
        body.update(bundle.key_reports[(ua, ub)].to_dict())
        links.append(body)
    return {"schema": "entnetsim-keyrates/1", "links": links}


def _metadata_payload(bundle: ReportBundle, overrides: dict) -> dict:
    from .config import provenance
    cfg = bundle.config
    return {
        "schema": "entnetsim-run-metadata/1",
        "package_version": __version__,
        "kernel_backend": BACKEND,
        "seed": cfg.seed,
        "duration_s": cfg.duration_s,
        "links_requested": cfg.links,
        "n_links": len(bundle.links),
        "n_users_selected": len({u for link in bundle.links for u in link}),
        "config_hash": cfg.config_hash(),
        "resolved_config": cfg.as_dict(),
        "parameter_provenance": provenance(),
        "cli_overrides": overrides,
        "emitted_pairs": {str(k): v for k, v in
                          sorted(bundle.result.emitted_pairs.items())},
        "singles_counts": {f"{u}:{PATH_NAMES[p]}": c for (u, p), c in
                           sorted(bundle.singles_counts.items())},
    }


def write_bundle(bundle: ReportBundle, out_dir: str, wall_time_s: float,
                 overrides: dict | None = None, figures=(),
                 dump_tags: bool = False, dump_truth: bool = False) -> list[str]:
    """Write the artifact bundle; returns the relative paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(relpath: str, writer_fn):
        path = os.path.join(out_dir, relpath)
        os.makedirs(os.path.dirname(path) or out_dir, exist_ok=True)
        _atomic_via(path, writer_fn)
        written.append(relpath)

    emit("plan.csv", lambda p: write_plan_csv(bundle.plan, p))
    emit("links.csv", lambda p: write_links_csv(bundle.link_reports, p))
    for (ua, ub) in bundle.links:
        hist = bundle.histograms[(ua, ub)]
        emit(f"histograms/link_{ua}-{ub}.csv",
             lambda p, h=hist, a=ua, b=ub: write_histogram_csv(
                 h, p, user_a=a, user_b=b))
    emit("keyrates.json", lambda p: _atomic_json(p, _keyrates_payload(bundle)))
    emit("run-metadata.json",
         lambda p: _atomic_json(p, _metadata_payload(bundle, overrides or {})))
    for figure in figures:
        rows = emit_figure_data(bundle, figure)
        emit(f"{figure}.csv", lambda p, r=rows: _write_rows(p, r))
    if dump_tags:
        for user in sorted(bundle.merged_streams):
            times, labels = bundle.merged_streams[user]
            for path_idx in (0, 1):
                tags = times[labels == path_idx]
                emit(f"tags/user{user}_{PATH_NAMES[path_idx]}.txt",
                     lambda p, u=user, pi=path_idx, t=tags: write_tag_stream(
                         p, u, pi, bundle.result.duration_ps,
                         bundle.result.seed, t))
    if dump_truth:
        if bundle.result.truth is None:
            raise ValueError("truth log was not collected for this run")
        emit("truth.csv", lambda p: write_truth_csv(bundle.result.truth, p))

    # wall time lives outside the reproducible bundle on purpose
    _atomic_text(os.path.join(out_dir, "timing.json"),
                 json.dumps({"wall_time_s": wall_time_s}, indent=2) + "\n")
    written.append("timing.json")
    return written


def _atomic_json(path: str, payload: dict) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path: str, rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerows(rows)

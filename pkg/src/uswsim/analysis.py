"""Post-run analytics and serialization: effectiveness scoring, tree-ring
layout, scaling fits, CSV/JSON emission and snapshot SVGs.

Everything here is a pure transform of a completed RunResult, so exports
are trivially reproducible: the same run yields byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .engine import Phase, RunResult
from .model import HostBand, host_band, status_value


@dataclass(frozen=True)
class EffectivenessPoint:
    t: int
    effectiveness: float
    cumulative_messages: int


@dataclass(frozen=True)
class TreeRingLayout:
    """Polar placement of DOs: oldest at the center, rings filling outward."""

    positions: dict[int, tuple[int, int]]  # do_id -> (ring, slot)
    ring_capacities: list[int]


@dataclass(frozen=True)
class ScalingFit:
    sizes: list[int]
    totals: list[int]
    slope: float
    intercept: float
    residual: float
    marginal_slope: float | None


def effectiveness(families) -> float:
    """Mean preservation score over families, scaled to [0, 1].

    Each family contributes its status rank 1..4 mapped onto 0..1.
    """
    if not families:
        raise ValueError("effectiveness of zero families")
    total = sum(status_value(f.copy_count, f.r_min, f.r_max) for f in families.values())
    n = len(families)
    return (total - n) / (3 * n)


def ring_capacity(ring: int) -> int:
    return 1 if ring == 0 else 8 * ring


def tree_ring_layout(dos: list[int]) -> TreeRingLayout:
    """Assign DOs to rings and slots in introduction order.

    Ring 0 holds one DO, ring r holds 8r; slots fill clockwise from
    angle zero.
    """
    positions = {}
    capacities = []
    ring = 0
    slot = 0
    cap = ring_capacity(0)
    for do in dos:
        if slot >= cap:
            ring += 1
            slot = 0
            cap = ring_capacity(ring)
            capacities.append(ring_capacity(ring - 1))
        positions[do] = (ring, slot)
        slot += 1
    capacities = [ring_capacity(r) for r in range(ring + 1)]
    return TreeRingLayout(positions, capacities)


def fit_growth_exponent(sweep: list[tuple[int, int]]) -> ScalingFit:
    """Least-squares slope of log(total) against log(size).

    Also fits the marginal cost per added DO from successive differences,
    against the geometric midpoint of each size interval; that slope is
    None when fewer than two positive differences exist.
    """
    if len(sweep) < 3:
        raise ValueError("fit needs at least 3 sizes")
    sizes = [n for n, _ in sweep]
    totals = [t for _, t in sweep]
    if len(set(sizes)) != len(sizes):
        raise ValueError("sizes must be distinct")
    if any(t <= 0 for t in totals):
        raise ValueError("totals must be positive")
    x = np.log(np.array(sizes, dtype=float))
    y = np.log(np.array(totals, dtype=float))
    a = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), res, _, _ = np.linalg.lstsq(a, y, rcond=None)
    residual = float(res[0]) if res.size else 0.0

    marg_x, marg_y = [], []
    for (n1, t1), (n2, t2) in zip(sweep, sweep[1:]):
        dt = (t2 - t1) / (n2 - n1)
        if dt > 0:
            marg_x.append(math.log(math.sqrt(n1 * n2)))
            marg_y.append(math.log(dt))
    marginal = None
    if len(marg_x) >= 2:
        mx = np.array(marg_x)
        my = np.array(marg_y)
        ma = np.vstack([mx, np.ones_like(mx)]).T
        (mslope, _), _, _, _ = np.linalg.lstsq(ma, my, rcond=None)
        marginal = float(mslope)
    return ScalingFit(sizes, totals, float(slope), float(intercept), residual, marginal)


CSV_HEADER = ("t,phase,effectiveness,cum_sent,cum_received,"
              "do_none,do_partial,do_at_min,do_at_max,"
              "host_grey,host_white,host_red,host_yellow,host_green,host_blue")


def emit_timeseries_csv(result: RunResult, path):
    """One row per time bin with status and host-band fractions."""
    boundary = result.phase_boundary_t
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            for i, t in enumerate(result.bin_ts):
                phase = "growth" if boundary is None or t < boundary else "maintenance"
                do_f = result.status_series[i]
                ho_f = result.host_series[i]
                row = [str(t), phase, f"{result.effectiveness_series[i]:.6f}",
                       str(result.cum_sent_series[i]), str(result.cum_received_series[i])]
                row += [f"{v:.6f}" for v in do_f]
                row += [f"{v:.6f}" for v in ho_f]
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise OSError(f"writing timeseries CSV to {path}: {exc}") from exc


def cost_curve(result: RunResult) -> list[EffectivenessPoint]:
    """Effectiveness against cumulative message volume, one point per bin."""
    return [EffectivenessPoint(t, e, m)
            for t, e, m in zip(result.bin_ts, result.effectiveness_series,
                               result.cum_sent_series)]


def summary_dict(result: RunResult) -> dict:
    fams = result.families
    hosts = result.hosts
    h_max = result.config.h_max
    status_counts = [0, 0, 0, 0]
    for f in fams.values():
        status_counts[status_value(f.copy_count, f.r_min, f.r_max) - 1] += 1
    n = len(fams)
    full = sum(1 for h in hosts.values() if h.free_slots == 0)
    white = sum(1 for h in hosts.values() if h.used == 0)
    ledger = result.ledger
    growth = ledger.phase_messages[Phase.GROWTH]
    maint = ledger.phase_messages[Phase.MAINTENANCE]
    cfg = result.config
    return {
        "config": {
            "n_max": cfg.n_max, "h_max": cfg.h_max, "r_min": cfg.r_min,
            "r_max": cfg.r_max, "host_capacity": cfg.host_capacity,
            "policy": cfg.policy.value, "seed": cfg.seed,
            "bin_size": cfg.bin_size, "intro_interval": cfg.intro_interval,
            "link_probability": cfg.link_probability,
            "extra_link_fraction": cfg.extra_link_fraction,
            "max_events": cfg.max_events,
        },
        "seed": result.seed,
        "condition": result.condition.value,
        "terminated_by": result.terminated_by,
        "steady_state_t": result.steady_state_t,
        "final_t": result.final_t,
        "phase_boundary_t": result.phase_boundary_t,
        "messages": {
            "total": ledger.total,
            "growth": growth,
            "maintenance": maint,
        },
        "final_effectiveness": round(result.final_effectiveness, 6),
        "status_fractions": {
            "none_made": round(status_counts[0] / n, 6),
            "partial": round(status_counts[1] / n, 6),
            "at_min": round(status_counts[2] / n, 6),
            "at_max": round(status_counts[3] / n, 6),
        },
        "hosts": {
            "universe": h_max,
            "discovered": len(hosts),
            "undiscovered": h_max - len(hosts),
            "full": full,
            "with_unused_capacity": len(hosts) - full,
            "holding_no_copies": white,
        },
        "graph_edges": result.graph.edge_count,
        "copies_held": sum(f.copy_count for f in fams.values()),
        "placements": result.placements,
        "sacrifices": result.sacrifices,
        "denials": result.denials,
    }


def emit_summary_json(result: RunResult, path):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(summary_dict(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"writing summary JSON to {path}: {exc}") from exc


def snapshot_state(result: RunResult, t: int):
    """Reconstruct per-family copy counts and host usage as of event t."""
    if t < 0 or t > result.final_t:
        raise ValueError(f"snapshot t={t} outside run of length {result.final_t}")
    copies = {do: 0 for do, f in result.families.items() if f.intro_t <= t}
    for et, do, delta in result.copy_events:
        if et > t:
            break
        copies[do] = copies.get(do, 0) + delta
    used = {}
    for et, host, delta in result.host_use_events:
        if et > t:
            break
        used[host] = used.get(host, 0) + delta
    discovered = {h for et, h in result.discovery_events if et <= t}
    return copies, used, discovered


_STATUS_FILL = {1: "#d62728", 2: "#e6c229", 3: "#2ca02c", 4: "#1f77b4"}
_BAND_FILL = {
    HostBand.GREY: "#bbbbbb", HostBand.WHITE: "#ffffff", HostBand.RED: "#d62728",
    HostBand.YELLOW: "#e6c229", HostBand.GREEN: "#2ca02c", HostBand.BLUE: "#1f77b4",
}
_STATUS_COLS = ["#d62728", "#e6c229", "#2ca02c", "#1f77b4"]
_HOST_COLS = ["#bbbbbb", "#ffffff", "#d62728", "#e6c229", "#2ca02c", "#1f77b4"]


def _svg_histogram(series, colors, x0, y0, width, height, upto):
    """Stacked per-bin fraction bars as SVG rects."""
    parts = []
    count = max(upto, 1)
    bar_w = width / count
    for i in range(upto):
        fracs = series[i]
        y = y0 + height
        for frac, color in zip(fracs, colors):
            h = frac * height
            if h <= 0:
                continue
            y -= h
            parts.append(f'<rect x="{x0 + i * bar_w:.2f}" y="{y:.2f}" '
                         f'width="{max(bar_w, 0.5):.2f}" height="{h:.2f}" fill="{color}"/>')
    parts.append(f'<rect x="{x0}" y="{y0}" width="{width}" height="{height}" '
                 f'fill="none" stroke="#333" stroke-width="1"/>')
    return parts


def emit_snapshot_svg(result: RunResult, t: int, path):
    """Four-quadrant composite: DO tree ring, host grid, both histograms.

    The status line above each half reports the simulation time and how
    many DOs exist or how many hosts hold data.
    """
    copies, used, discovered = snapshot_state(result, t)
    cfg = result.config
    width, height = 960, 640
    half = width // 2
    plot_h = 420
    hist_y = 470
    hist_h = 130

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
             f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="#fafafa"/>']

    active_hosts = sum(1 for h, u in used.items() if u > 0)
    parts.append(f'<text x="{half // 2}" y="24" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="14">t={t} DOs={len(copies)}</text>')
    parts.append(f'<text x="{half + half // 2}" y="24" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="14">t={t} hosts preserving={active_hosts}</text>')

    # Left: tree-ring plot of DO statuses.
    order = sorted(copies)
    layout = tree_ring_layout(order)
    max_ring = max((r for r, _ in layout.positions.values()), default=0)
    cx, cy = half // 2, 40 + plot_h // 2
    radius_step = (plot_h // 2 - 10) / max(max_ring, 1)
    dot = max(2.0, min(8.0, radius_step / 2.2))
    for do in order:
        ring, slot = layout.positions[do]
        fam = result.families[do]
        v = status_value(copies[do], fam.r_min, fam.r_max)
        if ring == 0:
            x, y = cx, cy
        else:
            angle = 2 * math.pi * slot / ring_capacity(ring)
            x = cx + ring * radius_step * math.sin(angle)
            y = cy - ring * radius_step * math.cos(angle)
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{dot:.2f}" '
                     f'fill="{_STATUS_FILL[v]}" stroke="#333" stroke-width="0.3"/>')

    # Right: host grid over the whole universe, by sequence number.
    cols = math.ceil(math.sqrt(cfg.h_max))
    rows = math.ceil(cfg.h_max / cols)
    cell = min((half - 40) / cols, plot_h / rows)
    gx, gy = half + 20, 40
    for h in range(1, cfg.h_max + 1):
        u = used.get(h, 0)
        band = host_band(u, cfg.host_capacity, h in discovered, u > 0) \
            if cfg.host_capacity > 0 else (
                HostBand.WHITE if h in discovered else HostBand.GREY)
        col = (h - 1) % cols
        row = (h - 1) // cols
        parts.append(f'<rect x="{gx + col * cell:.2f}" y="{gy + row * cell:.2f}" '
                     f'width="{cell:.2f}" height="{cell:.2f}" '
                     f'fill="{_BAND_FILL[band]}" stroke="#888" stroke-width="0.2"/>')

    # Histograms underneath, truncated at the snapshot bin.
    upto = sum(1 for bt in result.bin_ts if bt <= t)
    if upto:
        parts += _svg_histogram(result.status_series, _STATUS_COLS,
                                20, hist_y, half - 40, hist_h, upto)
        parts += _svg_histogram(result.host_series, _HOST_COLS,
                                half + 20, hist_y, half - 40, hist_h, upto)
    parts.append("</svg>")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(parts) + "\n")
    except OSError as exc:
        raise OSError(f"writing snapshot SVG to {path}: {exc}") from exc

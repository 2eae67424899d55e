"""Host-side map building: replay delivered logs into a possibility/necessity grid."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import grid as gr
from . import robot as rb
from .errormodel import ErrorParams, ErrorState, world_half_extents


class FusionError(ValueError):
    pass


def _by_key(events) -> dict:
    if isinstance(events, dict):
        return dict(events)
    out = {}
    for ev in events:
        out.setdefault(ev.key, ev)
    return out


def wall_segment_ids(events: dict) -> dict:
    """Map every WALL_SEG key to the key of its enclosing WALL_START.

    Raises FusionError when a robot's WALL_* events do not nest.
    """
    per_robot = defaultdict(list)
    for key in events:
        per_robot[key[0]].append(key)
    owner = {}
    for rid, keys in per_robot.items():
        open_key = None
        for key in sorted(keys):
            kind = events[key].kind
            if kind == rb.WALL_START:
                if open_key is not None:
                    raise FusionError(f"robot {rid}: WALL_START at seq {key[1]} inside open wall "
                                      f"started at seq {open_key[1]}")
                open_key = key
            elif kind == rb.WALL_SEG:
                if open_key is None:
                    raise FusionError(f"robot {rid}: WALL_SEG at seq {key[1]} outside any wall")
                owner[key] = open_key
            elif kind == rb.WALL_END:
                if open_key is None:
                    raise FusionError(f"robot {rid}: WALL_END at seq {key[1]} without WALL_START")
                open_key = None
    return owner


def _samples(ev: rb.LogEvent, spacing: float):
    """Points at roughly ``spacing`` along the event, with interpolated error."""
    (x0, y0), (x1, y1) = ev.start, ev.end
    length = math.hypot(x1 - x0, y1 - y0)
    n = max(1, int(math.ceil(length / spacing - 1e-9)))
    (a0, p0), (a1, p1) = ev.err_start, ev.err_end
    for k in range(n + 1):
        f = k / n
        yield (x0 + f * (x1 - x0), y0 + f * (y1 - y0),
               ErrorState(a0 + f * (a1 - a0), p0 + f * (p1 - p0), frame_heading_deg=ev.heading))


def _wall_offset(ev: rb.LogEvent):
    side = 90.0 if ev.side == "left" else -90.0
    th = math.radians(ev.heading + side)
    c, s = math.cos(th), math.sin(th)
    if abs(c) < 1e-15:
        c = 0.0
    if abs(s) < 1e-15:
        s = 0.0
    d = ev.standoff or 0.0
    return d * c, d * s


def _stamp_point(grid, x, y, err, segment_id, max_error, wall):
    hx, hy = world_half_extents(err)
    rect = gr.rect_at(grid, x, y, hx, hy)
    if wall:
        gr.stamp_wall(grid, rect, segment_id, max_error)
    else:
        gr.stamp_free(grid, rect, segment_id, max_error)


def ingest(grid: gr.PossNecGrid, events, params: ErrorParams) -> gr.PossNecGrid:
    """Stamp every not-yet-seen event into the grid, in key order.

    Events are deduplicated by key: a log that reached the host through
    several robots counts once.
    """
    incoming = _by_key(events)
    new = {k: e for k, e in incoming.items() if k not in grid.events}
    if not new:
        return grid
    union = dict(grid.events)
    union.update(new)
    owner = wall_segment_ids(union)
    # half a cell apart, so samples landing on cell borders cannot skip a cell
    spacing = grid.resolution / 2
    max_error = params.max_error
    for key in sorted(new):
        ev = new[key]
        if ev.kind == rb.SEG_FREE:
            for x, y, err in _samples(ev, spacing):
                _stamp_point(grid, x, y, err, key, max_error, wall=False)
        elif ev.kind in (rb.WALL_SEG, rb.WALL_START):
            seg = owner[key] if ev.kind == rb.WALL_SEG else key
            dx, dy = _wall_offset(ev)
            if ev.kind == rb.WALL_START:
                x, y = ev.end
                points = [(x, y, ErrorState(*ev.err_end, frame_heading_deg=ev.heading))]
            else:
                points = _samples(ev, spacing)
            for x, y, err in points:
                _stamp_point(grid, x + dx, y + dy, err, seg, max_error, wall=True)
        elif ev.kind == rb.SINGULAR:
            x, y = ev.start
            err = ErrorState(*ev.err_start, frame_heading_deg=ev.heading)
            _stamp_point(grid, x, y, err, key, max_error, wall=True)
    grid.events.update(new)
    grid.max_error = max_error
    return grid


def incremental_update(grid: gr.PossNecGrid, new_mission_logs, params: ErrorParams) -> gr.PossNecGrid:
    """Fold further missions into an existing map.

    ``new_mission_logs`` is one event collection or a list of them.
    """
    if isinstance(new_mission_logs, dict) or (
            new_mission_logs and isinstance(next(iter(new_mission_logs)), rb.LogEvent)):
        new_mission_logs = [new_mission_logs]
    merged = {}
    for mission in new_mission_logs:
        merged.update(_by_key(mission))
    return ingest(grid, merged, params)


def grid_for_events(events, resolution=gr.DEFAULT_RESOLUTION, margin=1.0) -> gr.PossNecGrid:
    evs = list(_by_key(events).values())
    if not evs:
        return gr.new_grid(1, 1, resolution)
    xs = [p[0] for e in evs for p in (e.start, e.end)]
    ys = [p[1] for e in evs for p in (e.start, e.end)]
    return gr.grid_covering(min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin, resolution)


# --- rendering -------------------------------------------------------------

# display intensity (0 white .. 1 black): trajectories dark grey, walls
# medium grey, both darker with stronger evidence; black marks conflicts
FREE_INTENSITY = (0.55, 0.35)
OCCUPIED_INTENSITY = (0.25, 0.30)
CONFLICT_VALUE = 0


def display_values(grid: gr.PossNecGrid, tau_occ=gr.TAU_OCC, tau_free=gr.TAU_FREE) -> np.ndarray:
    """8-bit grey value per cell, rows ordered as in the grid (south first)."""
    occ = grid.n >= tau_occ
    free = grid.pi <= tau_free
    intensity = np.zeros(grid.n.shape)
    f_base, f_span = FREE_INTENSITY
    o_base, o_span = OCCUPIED_INTENSITY
    only_free = free & ~occ
    only_occ = occ & ~free
    intensity[only_free] = f_base + f_span * (1.0 - grid.pi[only_free])
    intensity[only_occ] = o_base + o_span * grid.n[only_occ]
    values = np.rint(255.0 * (1.0 - intensity)).astype(np.uint8)
    values[occ & free] = CONFLICT_VALUE
    return values


def render(grid: gr.PossNecGrid, tau_occ=gr.TAU_OCC, tau_free=gr.TAU_FREE) -> bytes:
    """Binary PGM (P5) with north at the top."""
    values = display_values(grid, tau_occ, tau_free)[::-1]
    head = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return head + np.ascontiguousarray(values).tobytes()


def parse_pgm(data: bytes) -> np.ndarray:
    """Inverse of ``render`` (north-first rows)."""
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM supported")
    body = data[pos:]
    if len(body) != w * h:
        raise ValueError(f"expected {w * h} pixels, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


# --- statistics ------------------------------------------------------------

@dataclass
class SegmentReport:
    segment_id: tuple
    cells: int
    mean_n: float


@dataclass
class Stats:
    explored_fraction: float
    occupied_cells: int
    free_cells: int
    conflict_cells: int
    mean_n_over_wall_cells: float
    clipped_stamp_count: int
    wall_segments: list = field(default_factory=list)
    singular_points: list = field(default_factory=list)

    def strong_wall_segments(self, tau_occ=gr.TAU_OCC) -> int:
        return sum(1 for s in self.wall_segments if s.mean_n > tau_occ)

    def to_text(self, tau_occ=gr.TAU_OCC) -> str:
        lines = [
            "stats v1",
            f"explored_fraction {self.explored_fraction!r}",
            f"occupied_cells {self.occupied_cells}",
            f"free_cells {self.free_cells}",
            f"conflict_cells {self.conflict_cells}",
            f"mean_n_over_wall_cells {self.mean_n_over_wall_cells!r}",
            f"clipped_stamp_count {self.clipped_stamp_count}",
            f"wall_segments {len(self.wall_segments)}",
            f"strong_wall_segments {self.strong_wall_segments(tau_occ)}",
        ]
        for s in self.wall_segments:
            lines.append(f"segment {s.segment_id[0]} {s.segment_id[1]} {s.cells} {s.mean_n!r}")
        for x, y, kind in self.singular_points:
            lines.append(f"singular {x!r} {y!r} {kind}")
        return "\n".join(lines) + "\n"


def parse_stats(text: str) -> dict:
    """Scalar fields of a stats report."""
    lines = text.splitlines()
    if not lines or lines[0] != "stats v1":
        raise ValueError("missing 'stats v1' header")
    out = {}
    for line in lines[1:]:
        parts = line.split()
        if len(parts) == 2:
            out[parts[0]] = float(parts[1]) if "." in parts[1] or "e" in parts[1] else int(parts[1])
    return out


def stats(grid: gr.PossNecGrid, tau_occ=gr.TAU_OCC, tau_free=gr.TAU_FREE) -> Stats:
    total = grid.width * grid.height
    explored = (grid.pi < 1.0) | (grid.n > 0.0)
    occ = grid.n >= tau_occ
    free = grid.pi <= tau_free
    walled = grid.n > 0.0
    mean_n = float(grid.n[walled].mean()) if walled.any() else 0.0

    cells_of = defaultdict(list)
    for (i, j), contributions in grid.wall_evidence.items():
        for seg in contributions:
            cells_of[seg].append((i, j))
    segments = []
    for seg in sorted(cells_of):
        ev = grid.events.get(seg)
        if ev is not None and ev.kind != rb.WALL_START:
            continue
        ij = cells_of[seg]
        segments.append(SegmentReport(seg, len(ij), float(np.mean([grid.n[j, i] for i, j in ij]))))
    singular = [(ev.start[0], ev.start[1], ev.singular)
                for key, ev in sorted(grid.events.items()) if ev.kind == rb.SINGULAR]
    return Stats(
        explored_fraction=float(explored.sum()) / total,
        occupied_cells=int((occ & ~free).sum()),
        free_cells=int((free & ~occ).sum()),
        conflict_cells=int((occ & free).sum()),
        mean_n_over_wall_cells=mean_n,
        clipped_stamp_count=grid.clipped_stamps,
        wall_segments=segments,
        singular_points=singular,
    )

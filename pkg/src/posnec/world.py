"""Orthogonal environments: loading, saving, ray-cast sensing and free-space queries.

Coordinates are metres with x pointing east and y pointing north; headings are
degrees counter-clockwise from east.  In the text format the first map row is
the northernmost one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

WALL_CHAR = "#"
FREE_CHAR = "."
START_CHAR = "I"

DEFAULT_CELL_SIZE = 0.10
DEFAULT_WALL_THICKNESS = 0.05
DEFAULT_SENSOR_RANGE = 0.3
DEFAULT_OMNI_RADIUS = 1.0

# relative ray headings of the five IR proximity sensors
SENSOR_HEADINGS = {
    "front": 0.0,
    "front-left": 30.0,
    "front-right": -30.0,
    "left": 90.0,
    "right": -90.0,
}
SENSOR_IDS = tuple(SENSOR_HEADINGS) + ("omni",)


class WorldParseError(ValueError):
    """Raised for malformed world documents; carries 1-based line/column."""

    def __init__(self, message, line, column=None):
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Segment:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x0 != self.x1 and self.y0 != self.y1:
            raise ValueError(f"segment {self} is neither horizontal nor vertical")

    @property
    def horizontal(self) -> bool:
        return self.y0 == self.y1

    @property
    def length(self) -> float:
        return abs(self.x1 - self.x0) + abs(self.y1 - self.y0)

    def footprint(self, thickness: float) -> tuple[float, float, float, float]:
        h = thickness / 2.0
        return (min(self.x0, self.x1) - h, min(self.y0, self.y1) - h,
                max(self.x0, self.x1) + h, max(self.y0, self.y1) + h)


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, x, y) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def edges(self) -> list[Segment]:
        return [
            Segment(self.xmin, self.ymin, self.xmax, self.ymin),
            Segment(self.xmax, self.ymin, self.xmax, self.ymax),
            Segment(self.xmin, self.ymax, self.xmax, self.ymax),
            Segment(self.xmin, self.ymin, self.xmin, self.ymax),
        ]


@dataclass(frozen=True)
class ProximityReading:
    sensor_id: str
    hit: bool
    distance: float = float("inf")


@dataclass(frozen=True)
class OrthogonalWorld:
    bounds: Rect
    walls: tuple[Segment, ...]
    obstacles: tuple[Rect, ...] = ()
    start_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    cell_size: float = DEFAULT_CELL_SIZE
    wall_thickness: float = DEFAULT_WALL_THICKNESS
    _lines: np.ndarray = field(default=None, repr=False, compare=False)
    _rays: np.ndarray = field(default=None, repr=False, compare=False)
    _owner: np.ndarray = field(default=None, repr=False, compare=False)
    _horizontal: np.ndarray = field(default=None, repr=False, compare=False)
    _boxes: np.ndarray = field(default=None, repr=False, compare=False)
    # per-face start point, direction and orientation, cached for ray casting
    _faces: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        b = self.bounds
        for w in self.walls:
            if not (b.contains(w.x0, w.y0) and b.contains(w.x1, w.y1)):
                raise ValueError(f"wall {w} lies outside bounds")
        for o in self.obstacles:
            if not (b.contains(o.xmin, o.ymin) and b.contains(o.xmax, o.ymax)):
                raise ValueError(f"obstacle {o} lies outside bounds")
        segs = list(self.walls) + [e for o in self.obstacles for e in o.edges()]
        lines = np.array([[s.x0, s.y0, s.x1, s.y1] for s in segs], dtype=float).reshape(-1, 4)
        boxes = [s.footprint(self.wall_thickness) for s in self.walls]
        boxes += [(o.xmin, o.ymin, o.xmax, o.ymax) for o in self.obstacles]
        # sensors see the faces of a wall's footprint, reported as the wall itself
        rays, owner = [], []
        for k, w in enumerate(self.walls):
            for e in Rect(*boxes[k]).edges():
                rays.append((e.x0, e.y0, e.x1, e.y1))
                owner.append(k)
        for k in range(len(self.walls), len(segs)):
            rays.append(tuple(lines[k]))
            owner.append(k)
        object.__setattr__(self, "_lines", lines)
        object.__setattr__(self, "_rays", np.array(rays, dtype=float).reshape(-1, 4))
        object.__setattr__(self, "_owner", np.array(owner, dtype=int))
        object.__setattr__(self, "_horizontal", np.array([s.horizontal for s in segs], dtype=bool))
        object.__setattr__(self, "_boxes", np.array(boxes, dtype=float).reshape(-1, 4))
        r = self._rays
        object.__setattr__(self, "_faces", (r[:, 0].copy(), r[:, 1].copy(), r[:, 2] - r[:, 0],
                                            r[:, 3] - r[:, 1], r[:, 1] == r[:, 3]))
        sx, sy, _ = self.start_pose
        if not self.is_free((sx, sy)):
            raise ValueError(f"start pose {self.start_pose} is not in free space")

    def is_free(self, point) -> bool:
        return is_free(self, point)

    @property
    def boundary_walls(self) -> tuple[Segment, ...]:
        return tuple(_boundary(self.bounds))

    @property
    def interior_walls(self) -> tuple[Segment, ...]:
        edge = set(self.boundary_walls)
        return tuple(w for w in self.walls if w not in edge)


def _boundary(b: Rect) -> list[Segment]:
    return b.edges()


def _runs(flags: Sequence[bool]) -> list[tuple[int, int]]:
    """Maximal runs of True as inclusive (start, end) index pairs."""
    runs, start = [], None
    for k, f in enumerate(flags):
        if f and start is None:
            start = k
        elif not f and start is not None:
            runs.append((start, k - 1))
            start = None
    if start is not None:
        runs.append((start, len(flags) - 1))
    return runs


def _parse(text: str):
    lines = text.splitlines()
    k = 0
    while k < len(lines) and not lines[k].strip():
        k += 1
    if k == len(lines):
        raise WorldParseError("empty document", 1)
    head = lines[k].split()
    if len(head) != 2 or head[0] != "cell":
        raise WorldParseError("expected header 'cell <meters>'", k + 1, 1)
    try:
        cell = float(head[1])
    except ValueError:
        raise WorldParseError(f"bad cell size {head[1]!r}", k + 1, 6) from None
    if not cell > 0:
        raise WorldParseError("cell size must be positive", k + 1, 6)
    rows, lineno = [], []
    for n, line in enumerate(lines[k + 1:], start=k + 2):
        line = line.rstrip("\r\n")
        if not line:
            continue
        rows.append(line)
        lineno.append(n)
    if not rows:
        raise WorldParseError("no map rows", k + 1)
    width = len(rows[0])
    start = None
    for r, (row, n) in enumerate(zip(rows, lineno)):
        if len(row) != width:
            raise WorldParseError(f"row length {len(row)} differs from {width}", n, min(len(row), width) + 1)
        for c, ch in enumerate(row):
            if ch not in (WALL_CHAR, FREE_CHAR, START_CHAR):
                raise WorldParseError(f"bad character {ch!r}", n, c + 1)
            if ch == START_CHAR:
                if start is not None:
                    raise WorldParseError("more than one start marker", n, c + 1)
                start = (r, c)
    if start is None:
        raise WorldParseError("no start marker 'I'", lineno[-1])
    return cell, rows, start


def _walls_from_rows(rows: list[str], cell: float) -> list[Segment]:
    nrows, ncols = len(rows), len(rows[0])
    occ = [[ch == WALL_CHAR for ch in row] for row in rows]

    def y_center(r):
        return (nrows - r - 0.5) * cell

    def x_center(c):
        return (c + 0.5) * cell

    in_h = [[False] * ncols for _ in range(nrows)]
    in_v = [[False] * ncols for _ in range(nrows)]
    hruns, vruns = [], []
    for r in range(nrows):
        for a, b in _runs(occ[r]):
            if b > a:
                hruns.append((r, a, b))
                for c in range(a, b + 1):
                    in_h[r][c] = True
    for c in range(ncols):
        for a, b in _runs([occ[r][c] for r in range(nrows)]):
            if b > a:
                vruns.append((c, a, b))
                for r in range(a, b + 1):
                    in_v[r][c] = True

    walls = []
    # a run ending in a cell shared with a perpendicular run stops at that
    # cell's centre, otherwise it extends to the cell edge
    for r, a, b in hruns:
        x0 = x_center(a) if in_v[r][a] else a * cell
        x1 = x_center(b) if in_v[r][b] else (b + 1) * cell
        walls.append(Segment(x0, y_center(r), x1, y_center(r)))
    for c, a, b in vruns:
        top = y_center(a) if in_h[a][c] else (nrows - a) * cell
        bottom = y_center(b) if in_h[b][c] else (nrows - b - 1) * cell
        walls.append(Segment(x_center(c), bottom, x_center(c), top))
    for r in range(nrows):
        for c in range(ncols):
            if occ[r][c] and not in_h[r][c] and not in_v[r][c]:
                walls.append(Segment(c * cell, y_center(r), (c + 1) * cell, y_center(r)))
    return walls


def load_world(text: str, wall_thickness: float = DEFAULT_WALL_THICKNESS) -> OrthogonalWorld:
    """Parse a world document (``cell <m>`` header, then ``# . I`` rows)."""
    cell, rows, (sr, sc) = _parse(text)
    nrows, ncols = len(rows), len(rows[0])
    bounds = Rect(0.0, 0.0, ncols * cell, nrows * cell)
    walls = _boundary(bounds) + _walls_from_rows(rows, cell)
    start = ((sc + 0.5) * cell, (nrows - sr - 0.5) * cell, 0.0)
    return OrthogonalWorld(bounds, tuple(walls), (), start, cell, wall_thickness)


def read_world(path, wall_thickness: float = DEFAULT_WALL_THICKNESS) -> OrthogonalWorld:
    with open(path, encoding="utf-8") as fh:
        return load_world(fh.read(), wall_thickness)


def _fmt_cell(cell: float) -> str:
    return repr(float(cell))


def save_world(world: OrthogonalWorld) -> str:
    """Rasterize a world back into the text format.

    Only worlds whose interior walls lie on cell centre lines and whose
    obstacles cover whole cells survive the round trip unchanged.
    """
    cell = world.cell_size
    ncols = int(round((world.bounds.xmax - world.bounds.xmin) / cell))
    nrows = int(round((world.bounds.ymax - world.bounds.ymin) / cell))
    grid = [[FREE_CHAR] * ncols for _ in range(nrows)]

    def row_of(y):
        return nrows - 1 - int(np.floor(y / cell))

    def col_of(x):
        return int(np.floor(x / cell))

    eps = 1e-9 * cell
    for w in world.interior_walls:
        if w.horizontal:
            r = row_of(w.y0)
            lo, hi = sorted((w.x0, w.x1))
            for c in range(ncols):
                if lo - eps <= (c + 0.5) * cell <= hi + eps:
                    grid[r][c] = WALL_CHAR
        else:
            c = col_of(w.x0)
            lo, hi = sorted((w.y0, w.y1))
            for r in range(nrows):
                if lo - eps <= (nrows - r - 0.5) * cell <= hi + eps:
                    grid[r][c] = WALL_CHAR
    for o in world.obstacles:
        for r in range(nrows):
            for c in range(ncols):
                if o.contains((c + 0.5) * cell, (nrows - r - 0.5) * cell):
                    grid[r][c] = WALL_CHAR
    sx, sy, _ = world.start_pose
    grid[row_of(sy)][col_of(sx)] = START_CHAR
    lines = [f"cell {_fmt_cell(cell)}"] + ["".join(row) for row in grid]
    return "\n".join(lines) + "\n"


def ray_face(world: OrthogonalWorld, x, y, heading_deg) -> tuple[float, int, bool]:
    """Like ``ray_hit`` but also reports whether the face struck is horizontal.

    A wall's end cap is a face perpendicular to the wall itself.
    """
    if len(world._rays) == 0:
        return float("inf"), -1, False
    ax, ay, ex, ey, flat = world._faces
    th = np.radians(heading_deg)
    dx, dy = np.cos(th), np.sin(th)
    denom = dx * ey - dy * ex
    wx, wy = ax - x, ay - y
    par = denom == 0
    t = np.divide(wx * ey - wy * ex, denom, out=np.full(len(ax), -1.0), where=~par)
    u = np.divide(wx * dy - wy * dx, denom, out=np.full(len(ax), -1.0), where=~par)
    ok = (t >= 0) & (u >= -1e-12) & (u <= 1 + 1e-12)
    if not ok.any():
        return float("inf"), -1, False
    t[~ok] = np.inf
    k = int(np.argmin(t))
    return float(t[k]), int(world._owner[k]), bool(flat[k])


def ray_hit(world: OrthogonalWorld, x, y, heading_deg) -> tuple[float, int]:
    """Nearest intersection along a ray: (distance, segment index) or (inf, -1).

    Rays stop at the faces of a wall's footprint.  Segment indices run over
    walls first, then the edges of each obstacle.
    """
    d, k, _ = ray_face(world, x, y, heading_deg)
    return d, k


def ray_distance(world: OrthogonalWorld, x, y, heading_deg) -> float:
    """Distance along a ray to the nearest wall or obstacle edge (inf if none)."""
    return ray_hit(world, x, y, heading_deg)[0]


def segment_is_horizontal(world: OrthogonalWorld, index: int) -> bool:
    return bool(world._horizontal[index])


def sense(world: OrthogonalWorld, pose, ranges=None) -> list[ProximityReading]:
    """Read the five IR proximity sensors at a true pose ``(x, y, heading)``.

    ``ranges`` maps sensor id to range in metres; missing ids use 0.3 m.
    """
    x, y, heading = pose
    ranges = ranges or {}
    out = []
    for sid, rel in SENSOR_HEADINGS.items():
        rng = ranges.get(sid, DEFAULT_SENSOR_RANGE)
        d = ray_distance(world, x, y, heading + rel)
        if 0 < d <= rng:
            out.append(ProximityReading(sid, True, d))
        else:
            out.append(ProximityReading(sid, False))
    return out


def is_free(world: OrthogonalWorld, point) -> bool:
    x, y = point[0], point[1]
    b = world.bounds
    if not (b.xmin < x < b.xmax and b.ymin < y < b.ymax):
        return False
    boxes = world._boxes
    if len(boxes) == 0:
        return True
    inside = (boxes[:, 0] <= x) & (x <= boxes[:, 2]) & (boxes[:, 1] <= y) & (y <= boxes[:, 3])
    return not bool(inside.any())


def distance_to_walls(world: OrthogonalWorld, x, y) -> float:
    """Euclidean distance from a point to the nearest wall centre line."""
    segs = world._lines
    ax, ay, bx, by = segs[:, 0], segs[:, 1], segs[:, 2], segs[:, 3]
    cx = np.clip(x, np.minimum(ax, bx), np.maximum(ax, bx))
    cy = np.clip(y, np.minimum(ay, by), np.maximum(ay, by))
    return float(np.hypot(cx - x, cy - y).min())


def make_world(width, height, walls: Iterable = (), obstacles: Iterable = (),
               start_pose=None, cell_size=DEFAULT_CELL_SIZE,
               wall_thickness=DEFAULT_WALL_THICKNESS) -> OrthogonalWorld:
    """Build a bounded world from explicit geometry; the bounds are walled."""
    bounds = Rect(0.0, 0.0, float(width), float(height))
    segs = _boundary(bounds) + [w if isinstance(w, Segment) else Segment(*w) for w in walls]
    rects = tuple(o if isinstance(o, Rect) else Rect(*o) for o in obstacles)
    if start_pose is None:
        start_pose = (width / 2.0, height / 2.0, 0.0)
    return OrthogonalWorld(bounds, tuple(segs), rects, tuple(start_pose), cell_size, wall_thickness)

"""Possibility/necessity grid.

Every cell holds Pi(wall) and N(wall).  A virgin cell is (1, 0), total
ignorance.  Evidence arrives as pyramids over an error rectangle: wall
detections raise N, free-space trajectories lower Pi.

Wall evidence is kept per cell as one value per detection episode (segment
id).  Stamps of the same episode combine by max; distinct episodes reinforce
each other by the probabilistic sum.  The sum is evaluated as one minus the
product of complements taken in segment-id order, so the result does not
depend on the order in which episodes were ingested and never decreases.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

DEFAULT_RESOLUTION = 0.10
TAU_OCC = 0.25
TAU_FREE = 0.5

OCCUPIED, FREE, UNKNOWN, CONFLICT = "occupied", "free", "unknown", "conflict"


class Cell(NamedTuple):
    pi: float
    n: float


@dataclass(frozen=True)
class ErrorRect:
    center_cell: tuple[int, int]
    e_r: int
    e_l: int
    e_u: int
    e_d: int

    def __post_init__(self):
        if min(self.e_r, self.e_l, self.e_u, self.e_d) < 0:
            raise ValueError("rectangle extents must be non-negative")

    @classmethod
    def symmetric(cls, center_cell, e_x: int, e_y: int) -> "ErrorRect":
        return cls(tuple(center_cell), e_x, e_x, e_y, e_y)

    def cells(self):
        ci, cj = self.center_cell
        for j in range(cj - self.e_d, cj + self.e_u + 1):
            for i in range(ci - self.e_l, ci + self.e_r + 1):
                yield i, j


class PossNecGrid:
    def __init__(self, width: int, height: int, resolution: float = DEFAULT_RESOLUTION,
                 origin=(0.0, 0.0)):
        if int(width) != width or int(height) != height or width < 1 or height < 1:
            raise ValueError(f"grid dimensions must be positive integers, got {width}x{height}")
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        self.width = int(width)
        self.height = int(height)
        self.resolution = float(resolution)
        self.origin = (float(origin[0]), float(origin[1]))
        self.pi = np.ones((self.height, self.width))
        self.n = np.zeros((self.height, self.width))
        # (i, j) -> {segment_id: max candidate necessity}
        self.wall_evidence: dict[tuple[int, int], dict] = {}
        self.clipped_stamps = 0
        self.max_error: float | None = None
        # fusion bookkeeping: ingested events by key
        self.events: dict = {}

    def __repr__(self):
        return (f"PossNecGrid({self.width}x{self.height}, resolution={self.resolution}, "
                f"origin={self.origin})")

    def cell_of(self, x, y) -> tuple[int, int]:
        ox, oy = self.origin
        return (int(math.floor((x - ox) / self.resolution)),
                int(math.floor((y - oy) / self.resolution)))

    def cell_center(self, i, j) -> tuple[float, float]:
        ox, oy = self.origin
        return (ox + (i + 0.5) * self.resolution, oy + (j + 0.5) * self.resolution)

    def contains(self, i, j) -> bool:
        return 0 <= i < self.width and 0 <= j < self.height

    def __getitem__(self, ij) -> Cell:
        i, j = ij
        return Cell(float(self.pi[j, i]), float(self.n[j, i]))

    def copy(self) -> "PossNecGrid":
        g = PossNecGrid(self.width, self.height, self.resolution, self.origin)
        g.pi = self.pi.copy()
        g.n = self.n.copy()
        g.wall_evidence = {k: dict(v) for k, v in self.wall_evidence.items()}
        g.clipped_stamps = self.clipped_stamps
        g.max_error = self.max_error
        g.events = dict(self.events)
        return g


def new_grid(width, height, resolution=DEFAULT_RESOLUTION, origin=(0.0, 0.0)) -> PossNecGrid:
    return PossNecGrid(width, height, resolution, origin)


def grid_covering(xmin, ymin, xmax, ymax, resolution=DEFAULT_RESOLUTION) -> PossNecGrid:
    """A grid over a world rectangle with the origin snapped to the lattice."""
    ox = math.floor(xmin / resolution) * resolution
    oy = math.floor(ymin / resolution) * resolution
    w = max(1, int(math.ceil((xmax - ox) / resolution - 1e-9)))
    h = max(1, int(math.ceil((ymax - oy) / resolution - 1e-9)))
    return PossNecGrid(w, h, resolution, (ox, oy))


def pyramid_height(current_error: float, max_error: float) -> float:
    if not max_error > 0:
        raise ValueError("max_error must be positive")
    return min(1.0, max(0.0, 1.0 - current_error / max_error))


def prob_sum(x: float, y: float) -> float:
    """Probabilistic sum x + y - xy, evaluated as hi + lo*(1 - hi)."""
    hi, lo = (x, y) if x >= y else (y, x)
    return min(1.0, hi + lo * (1.0 - hi))


def _axis_necessity(d, err, max_error):
    if err <= 0:
        raise ValueError("rectangle half-extent must be positive")
    d = abs(d)
    if d >= err:
        return 0.0
    return min(1.0, max(0.0, (1.0 - d / err) * pyramid_height(err, max_error)))


def cell_necessity(x, y, err_x, err_y, max_error) -> float:
    """Necessity at offset (x, y) from the centre of an error rectangle.

    Each axis decreases linearly from the pyramid height at the centre to zero
    at the rectangle side; the cell value is the smaller of the two.
    """
    return min(_axis_necessity(x, err_x, max_error), _axis_necessity(y, err_y, max_error))


def propagate_stamp(grid: PossNecGrid, rect: ErrorRect,
                    evaluator: Callable[[int, int, float, float, float, float], None]) -> set:
    """Spread from the centre cell, passing the distances to the four sides.

    Moving right decrements the right distance and increments the left one
    (and so on for the other directions); a neighbour is entered only while
    the distance in the direction of travel is positive.  ``evaluator`` is
    called exactly once per visited cell with ``(i, j, x, err_x, y, err_y)``
    in metres.
    """
    res = grid.resolution
    start = (rect.center_cell[0], rect.center_cell[1])
    seen = {start: (rect.e_r, rect.e_l, rect.e_u, rect.e_d)}
    queue = deque([start])
    while queue:
        i, j = queue.popleft()
        er, el, eu, ed = seen[(i, j)]
        evaluator(i, j, abs(el - er) / 2 * res, (el + er) / 2 * res,
                  abs(ed - eu) / 2 * res, (ed + eu) / 2 * res)
        if er > 0 and (i + 1, j) not in seen:
            seen[(i + 1, j)] = (er - 1, el + 1, eu, ed)
            queue.append((i + 1, j))
        if el > 0 and (i - 1, j) not in seen:
            seen[(i - 1, j)] = (er + 1, el - 1, eu, ed)
            queue.append((i - 1, j))
        if eu > 0 and (i, j + 1) not in seen:
            seen[(i, j + 1)] = (er, el, eu - 1, ed + 1)
            queue.append((i, j + 1))
        if ed > 0 and (i, j - 1) not in seen:
            seen[(i, j - 1)] = (er, el, eu + 1, ed - 1)
            queue.append((i, j - 1))
    return set(seen)


def _axis_block(e_lo, e_hi, ks, res, max_error):
    # the distances a propagated visit carries at offset k are (e_hi - k, e_lo + k)
    err = (e_lo + e_hi) / 2 * res
    if err <= 0:
        # degenerate rectangle: only the centre line, and it carries nothing
        return np.zeros(len(ks))
    d = np.abs((e_lo + ks) - (e_hi - ks)) / 2 * res
    v = np.clip((1.0 - d / err) * pyramid_height(err, max_error), 0.0, 1.0)
    v[d >= err] = 0.0
    return v


def _necessities(grid, rect, max_error):
    """Necessity over the in-grid part of ``rect`` as ``(i0, j0, block)``.

    Same values as evaluating ``cell_necessity`` on every cell that
    ``propagate_stamp`` visits, computed a whole rectangle at a time.
    """
    res = grid.resolution
    if min(pyramid_height((rect.e_l + rect.e_r) / 2 * res, max_error),
           pyramid_height((rect.e_u + rect.e_d) / 2 * res, max_error)) <= 0:
        # error beyond the maximum: the whole pyramid is flat at zero
        return None
    ci, cj = rect.center_cell
    i0, i1 = max(0, ci - rect.e_l), min(grid.width - 1, ci + rect.e_r)
    j0, j1 = max(0, cj - rect.e_d), min(grid.height - 1, cj + rect.e_u)
    if (i0, i1, j0, j1) != (ci - rect.e_l, ci + rect.e_r, cj - rect.e_d, cj + rect.e_u):
        grid.clipped_stamps += 1
    if i0 > i1 or j0 > j1:
        return None
    nx = _axis_block(rect.e_l, rect.e_r, np.arange(i0 - ci, i1 - ci + 1), res, max_error)
    ny = _axis_block(rect.e_d, rect.e_u, np.arange(j0 - cj, j1 - cj + 1), res, max_error)
    return i0, j0, np.minimum(nx[None, :], ny[:, None])


def _refresh_n(grid, ij):
    contributions = grid.wall_evidence[ij]
    omega = 1.0
    for seg in sorted(contributions):
        omega *= 1.0 - contributions[seg]
    i, j = ij
    grid.n[j, i] = 1.0 - omega


def stamp_wall(grid: PossNecGrid, rect: ErrorRect, segment_id, max_error: float) -> PossNecGrid:
    """Raise necessity over the rectangle for one wall detection."""
    found = _necessities(grid, rect, max_error)
    if found is None:
        return grid
    i0, j0, block = found
    for dj, di in zip(*np.nonzero(block > 0)):
        cand = float(block[dj, di])
        ij = (i0 + int(di), j0 + int(dj))
        contributions = grid.wall_evidence.setdefault(ij, {})
        if cand > contributions.get(segment_id, 0.0):
            contributions[segment_id] = cand
            _refresh_n(grid, ij)
    return grid


def stamp_free(grid: PossNecGrid, rect: ErrorRect, segment_id, max_error: float) -> PossNecGrid:
    """Lower possibility over the rectangle for one free-space observation.

    Free stamps always combine by min, so ``segment_id`` is informational.
    """
    found = _necessities(grid, rect, max_error)
    if found is not None:
        i0, j0, block = found
        view = grid.pi[j0:j0 + block.shape[0], i0:i0 + block.shape[1]]
        np.minimum(view, 1.0 - block, out=view)
    return grid


def rect_at(grid: PossNecGrid, x, y, half_x, half_y) -> ErrorRect:
    """Rasterize a world-frame error rectangle centred at (x, y).

    Half-extents round up to whole cells with a floor of one cell, the
    positional quantum of the grid itself.
    """
    res = grid.resolution
    ex = max(1, int(math.ceil(half_x / res - 1e-9)))
    ey = max(1, int(math.ceil(half_y / res - 1e-9)))
    return ErrorRect.symmetric(grid.cell_of(x, y), ex, ey)


def classify(cell, tau_occ: float = TAU_OCC, tau_free: float = TAU_FREE) -> str:
    pi, n = cell
    if n >= tau_occ and pi <= tau_free:
        return CONFLICT
    if n >= tau_occ:
        return OCCUPIED
    if pi <= tau_free:
        return FREE
    return UNKNOWN


def classify_grid(grid: PossNecGrid, tau_occ: float = TAU_OCC, tau_free: float = TAU_FREE) -> np.ndarray:
    """Vectorised ``classify``; returns an array of class strings."""
    occ = grid.n >= tau_occ
    free = grid.pi <= tau_free
    out = np.full(grid.n.shape, UNKNOWN, dtype=object)
    out[free] = FREE
    out[occ] = OCCUPIED
    out[occ & free] = CONFLICT
    return out


# --- text dump ---------------------------------------------------------------

class GridFormatError(ValueError):
    pass


def dumps_grid(grid: PossNecGrid) -> str:
    lines = [f"pngrid v1 {grid.width} {grid.height} {grid.resolution!r} {grid.origin[0]!r} {grid.origin[1]!r}"]
    if grid.max_error is not None:
        lines.append(f"# max_error {grid.max_error!r}")
    pi, n = grid.pi, grid.n
    for j in range(grid.height):
        for i in range(grid.width):
            lines.append(f"{float(pi[j, i])!r} {float(n[j, i])!r}")
    return "\n".join(lines) + "\n"


def loads_grid(text: str) -> PossNecGrid:
    """Parse a ``pngrid v1`` dump.  Only Pi and N survive, not evidence history."""
    lines = text.splitlines()
    if not lines:
        raise GridFormatError("empty grid dump")
    head = lines[0].split()
    if len(head) != 7 or head[:2] != ["pngrid", "v1"]:
        raise GridFormatError(f"line 1: bad header {lines[0]!r}")
    try:
        w, h = int(head[2]), int(head[3])
        res, ox, oy = float(head[4]), float(head[5]), float(head[6])
    except ValueError as exc:
        raise GridFormatError(f"line 1: {exc}") from None
    grid = PossNecGrid(w, h, res, (ox, oy))
    body = []
    for k, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "max_error":
                grid.max_error = float(parts[1])
            continue
        if line.strip():
            body.append((k, line))
    if len(body) != w * h:
        raise GridFormatError(f"expected {w * h} cells, found {len(body)}")
    vals = np.empty((w * h, 2))
    for idx, (k, line) in enumerate(body):
        parts = line.split()
        if len(parts) != 2:
            raise GridFormatError(f"line {k}: expected 'pi n'")
        try:
            vals[idx] = float(parts[0]), float(parts[1])
        except ValueError:
            raise GridFormatError(f"line {k}: non-numeric cell value") from None
        if not (0.0 <= vals[idx, 0] <= 1.0 and 0.0 <= vals[idx, 1] <= 1.0):
            raise GridFormatError(f"line {k}: cell value outside [0, 1]")
    grid.pi = vals[:, 0].reshape(h, w).copy()
    grid.n = vals[:, 1].reshape(h, w).copy()
    return grid

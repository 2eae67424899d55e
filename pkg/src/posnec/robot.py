"""A single exploring robot: navigation behaviour, wall following and event log.

Each robot keeps two poses.  The true pose is what the world sees and is
perturbed by odometry noise and the systematic turn bias; the believed pose is
pure dead reckoning and is what goes into the log together with the error
rectangle that bounds the gap between the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from . import errormodel as em
from .errormodel import ErrorParams, ErrorState
from .world import (DEFAULT_OMNI_RADIUS, DEFAULT_SENSOR_RANGE, OrthogonalWorld, ray_face)

SPEED = 0.6
COS30 = math.cos(math.radians(30.0))
BUDGET = 1000.0
RETURN_FRACTION = 0.5
STANDOFF = 0.08
HOME_RADIUS = 0.3
LOG_SPACING = 0.1

SEG_FREE = "SEG_FREE"
TURN = "TURN"
WALL_START = "WALL_START"
WALL_SEG = "WALL_SEG"
WALL_END = "WALL_END"
SINGULAR = "SINGULAR"
MEET = "MEET"
EVENT_KINDS = (SEG_FREE, TURN, WALL_START, WALL_SEG, WALL_END, SINGULAR, MEET)

WANDER, WALL_FOLLOW, HOMING, DONE, LOST = "wander", "wall_follow", "homing", "done", "lost"

# random-turn probabilities per metre and obstacle left-turn probabilities
P_ANXIOUS, P_NORMAL, P_ROUTINE = 0.08, 0.03, 0.01
P4_RIGHT, P4_LEFT = 0.3, 0.7


@dataclass(frozen=True)
class BehaviourParams:
    p_random_turn: float
    p_left_on_obstacle: float
    label: str = ""

    def __post_init__(self):
        if self.p_random_turn < 0:
            raise ValueError("p_random_turn must be non-negative")
        if not 0 < self.p_left_on_obstacle < 1:
            raise ValueError("p_left_on_obstacle must lie in (0, 1)")

    @property
    def right_tending(self) -> bool:
        return self.p_left_on_obstacle < 0.5


def make_troupe_behaviours(p1=P_ANXIOUS, p2=P_NORMAL, p3=P_ROUTINE,
                           p4_right=P4_RIGHT, p4_left=P4_LEFT) -> list[BehaviourParams]:
    """The six behaviours: {anxious, normal, routine} x {right-, left-tending}."""
    if not p1 > p2 > p3:
        raise ValueError("random-turn probabilities must satisfy p1 > p2 > p3")
    if not p4_right < 0.5 < p4_left:
        raise ValueError("need p4_right < 0.5 < p4_left")
    moods = (("anxious", p1), ("normal", p2), ("routine", p3))
    hands = (("right", p4_right), ("left", p4_left))
    return [BehaviourParams(p, p4, f"{mood}-{hand}") for (mood, p), (hand, p4) in product(moods, hands)]


@dataclass(frozen=True)
class LogEvent:
    robot_id: str
    seq: int
    kind: str
    start: tuple[float, float]
    end: tuple[float, float]
    err_start: tuple[float, float]
    err_end: tuple[float, float]
    heading: float
    turn: float | None = None
    side: str | None = None
    standoff: float | None = None
    singular: str | None = None
    peer: str | None = None

    @property
    def key(self) -> tuple[str, int]:
        return (self.robot_id, self.seq)


@dataclass
class RobotConfig:
    speed: float = SPEED
    budget: float = BUDGET
    return_fraction: float = RETURN_FRACTION
    standoff: float = STANDOFF
    home_radius: float = HOME_RADIUS
    log_spacing: float = LOG_SPACING
    sensor_ranges: dict = field(default_factory=dict)
    noise: bool = True
    # lateral tolerance before a followed wall counts as lost
    follow_tolerance: float = 0.02
    # side-ray distance of a +-30 degree hit treated as an imminent collision
    guard_distance: float = 0.1
    detour: float = 0.3
    # the host at the start point hears a homing robot within its IR range
    host_radius: float = DEFAULT_OMNI_RADIUS

    def range_of(self, sensor_id):
        return self.sensor_ranges.get(sensor_id, DEFAULT_SENSOR_RANGE)


@dataclass
class RobotState:
    id: str
    behaviour: BehaviourParams
    true_pose: list
    believed_pose: list
    error: ErrorState
    bias_sign: int = 1
    config: RobotConfig = field(default_factory=RobotConfig)
    mode: str = WANDER
    odometer: float = 0.0
    log: list = field(default_factory=list)
    foreign_logs: dict = field(default_factory=dict)
    # bookkeeping for the open SEG_FREE or WALL_SEG piece
    _seq: int = 0
    _open_pos: tuple = None
    _open_err: ErrorState = None
    _wall_side: str | None = None
    _waypoints: list = field(default_factory=list)
    _detour_left: float = 0.0
    _detours: int = 0
    # believed position and error at the last side reading that saw the wall
    _contact: tuple = None
    _home: tuple = None

    @property
    def budget(self) -> float:
        return self.config.budget

    @property
    def remaining(self) -> float:
        return max(0.0, self.config.budget - self.odometer)

    @property
    def active(self) -> bool:
        return self.mode not in (DONE, LOST)

    def knowledge(self) -> dict:
        """Every event this robot can deliver, keyed by event key."""
        out = dict(self.foreign_logs)
        out.update((e.key, e) for e in self.log)
        return out


def make_robot(robot_id, behaviour: BehaviourParams, start_pose, config: RobotConfig | None = None,
               bias_sign: int = 1) -> RobotState:
    x, y, h = (float(v) for v in start_pose)
    r = RobotState(robot_id, behaviour, [x, y, h], [x, y, h], ErrorState(frame_heading_deg=h % 360.0),
                   bias_sign=bias_sign, config=config or RobotConfig())
    r._open_pos = (x, y)
    r._open_err = r.error
    r._waypoints = [(x, y)]
    r._home = (x, y)
    return r


# --- geometry helpers ----------------------------------------------------

def _unit(heading_deg):
    th = math.radians(heading_deg)
    c, s = math.cos(th), math.sin(th)
    # exact axes for multiples of 90 degrees keep believed poses on the lattice
    if abs(c) < 1e-15:
        c = 0.0
    if abs(s) < 1e-15:
        s = 0.0
    return c, s


def _wrap(angle):
    a = (angle + 180.0) % 360.0 - 180.0
    return 180.0 if a == -180.0 else a


def _side_heading(heading, side):
    return heading + (90.0 if side == "left" else -90.0)


def _errpair(err: ErrorState):
    return (err.half_along, err.half_perp)


# --- logging -------------------------------------------------------------

def _emit(robot: RobotState, kind, start, end, err0: ErrorState, err1: ErrorState, **extra) -> LogEvent:
    ev = LogEvent(robot.id, robot._seq, kind, tuple(start), tuple(end), _errpair(err0), _errpair(err1),
                  err1.frame_heading_deg, **extra)
    robot._seq += 1
    robot.log.append(ev)
    return ev


def _believed_xy(robot):
    return (robot.believed_pose[0], robot.believed_pose[1])


def flush_pending(robot: RobotState) -> None:
    """Close the open free or wall piece so the log covers the current pose."""
    here = _believed_xy(robot)
    if robot._open_pos is not None and here != robot._open_pos:
        if robot.mode == WALL_FOLLOW:
            _emit(robot, WALL_SEG, robot._open_pos, here, robot._open_err, robot.error,
                  side=robot._wall_side, standoff=robot.config.standoff)
        else:
            _emit(robot, SEG_FREE, robot._open_pos, here, robot._open_err, robot.error)
    robot._open_pos = here
    robot._open_err = robot.error


def _waypoint(robot):
    here = _believed_xy(robot)
    if not robot._waypoints or robot._waypoints[-1] != here:
        robot._waypoints.append(here)


def _turn(robot: RobotState, nominal, params: ErrorParams) -> None:
    flush_pending(robot)
    if robot.mode != HOMING:
        _waypoint(robot)
    err0 = robot.error
    robot.believed_pose[2] = (robot.believed_pose[2] + nominal) % 360.0
    robot.true_pose[2] = (robot.true_pose[2] + nominal + em.turn_bias(nominal, params, robot.bias_sign)) % 360.0
    robot.error = em.apply_turn(robot.error, nominal, params)
    here = _believed_xy(robot)
    _emit(robot, TURN, here, here, err0, robot.error, turn=float(nominal))
    robot._open_err = robot.error


def execute_turn(robot: RobotState, nominal, params: ErrorParams) -> RobotState:
    """Turn by a nominal +-45 or +-90 degrees; the true heading also takes the bias."""
    _turn(robot, nominal, params)
    return robot


def _read(world, robot, rel):
    x, y, h = robot.true_pose
    d, _, horizontal = ray_face(world, x, y, h + rel)
    return d, horizontal


def _move(robot: RobotState, world: OrthogonalWorld, rng, distance, params: ErrorParams,
          lateral_noise=True) -> bool:
    """Advance both poses by ``distance``; False (and mode lost) on collision."""
    if distance <= 0:
        return True
    na, npp = (0.0, 0.0)
    if robot.config.noise:
        na, npp = em.sample_odometry_noise(rng, distance, params)
        if not lateral_noise:
            npp = 0.0
    tx, ty, th = robot.true_pose
    c, s = _unit(th)
    nx = tx + (distance + na) * c - npp * s
    ny = ty + (distance + na) * s + npp * c
    if not world.is_free((nx, ny)):
        flush_pending(robot)
        robot.mode = LOST
        return False
    robot.true_pose[0], robot.true_pose[1] = nx, ny
    bc, bs = _unit(robot.believed_pose[2])
    robot.believed_pose[0] += distance * bc
    robot.believed_pose[1] += distance * bs
    robot.error = em.grow_straight(robot.error, distance, params)
    robot.odometer += distance
    return True


def should_return(robot: RobotState, params: ErrorParams) -> bool:
    if em.cumulated_error(robot.error) > params.max_error:
        return True
    return robot.odometer >= robot.config.return_fraction * robot.config.budget


def _start_homing(robot):
    flush_pending(robot)
    _waypoint(robot)
    robot.mode = HOMING
    robot._detour_left = 0.0
    robot._detours = 0


# --- wander ----------------------------------------------------------------

def _obstacle_turn(robot, rng, params):
    left = rng.random() < robot.behaviour.p_left_on_obstacle
    _turn(robot, 90 if left else -90, params)


def _enter_wall_follow(robot: RobotState, world: OrthogonalWorld, side, face_horizontal, params) -> bool:
    cfg = robot.config
    th = robot.true_pose[2]
    options = (0.0, 180.0) if face_horizontal else (90.0, 270.0)
    wall_dir = min(options, key=lambda d: abs(_wrap(d - th)))
    nominal = int(round(_wrap(wall_dir - th) / 45.0)) * 45
    if abs(nominal) > 90:
        return False
    if nominal:
        _turn(robot, nominal, params)
    robot.true_pose[2] = wall_dir
    d, _ = _read(world, robot, 90.0 if side == "left" else -90.0)
    if not d <= cfg.range_of(side):
        return False
    flush_pending(robot)
    _waypoint(robot)
    shift = d - cfg.standoff
    tc, ts = _unit(_side_heading(robot.true_pose[2], side))
    nx, ny = robot.true_pose[0] + shift * tc, robot.true_pose[1] + shift * ts
    before = _believed_xy(robot)
    if shift and world.is_free((nx, ny)):
        robot.true_pose[0], robot.true_pose[1] = nx, ny
        bc, bs = _unit(_side_heading(robot.believed_pose[2], side))
        robot.believed_pose[0] += shift * bc
        robot.believed_pose[1] += shift * bs
        robot.odometer += abs(shift)
    robot.error = em.freeze_perp_for_wall_follow(robot.error)
    _emit(robot, WALL_START, before, _believed_xy(robot), robot.error, robot.error,
          side=side, standoff=cfg.standoff)
    _waypoint(robot)
    robot.mode = WALL_FOLLOW
    robot._wall_side = side
    robot._open_pos = _believed_xy(robot)
    robot._open_err = robot.error
    robot._contact = (robot._open_pos, robot.error)
    return True


def step(robot: RobotState, world: OrthogonalWorld, rng: np.random.Generator, dt: float,
         params: ErrorParams) -> RobotState:
    """Advance one robot by one time step of ``dt`` seconds."""
    if robot.mode in (DONE, LOST):
        raise ValueError(f"robot {robot.id} is {robot.mode}")
    if robot.mode == WALL_FOLLOW:
        return wall_follow_step(robot, world, rng, dt, params)
    if robot.mode == HOMING:
        return homing_step(robot, world, rng, dt, params)
    cfg = robot.config
    if robot.remaining <= 0:
        flush_pending(robot)
        robot.mode = LOST
        return robot

    d_front, _ = _read(world, robot, 0.0)
    if d_front <= cfg.range_of("front"):
        _obstacle_turn(robot, rng, params)
        return robot
    d_fl, _ = _read(world, robot, 30.0)
    d_fr, _ = _read(world, robot, -30.0)
    if min(d_fl, d_fr) <= cfg.guard_distance:
        _turn(robot, -90 if d_fl <= d_fr else 90, params)
        return robot
    d_l, k_l = _read(world, robot, 90.0)
    d_r, k_r = _read(world, robot, -90.0)
    hit_l, hit_r = d_l <= cfg.range_of("left"), d_r <= cfg.range_of("right")
    if hit_l or hit_r:
        side, k = ("left", k_l) if hit_l and (not hit_r or d_l <= d_r) else ("right", k_r)
        heading = robot.believed_pose[2]
        if _enter_wall_follow(robot, world, side, k, params) or robot.believed_pose[2] != heading:
            # aligned with a face that turned out too short to follow: re-sense first
            return robot

    dist = min(cfg.speed * dt, robot.remaining)
    if not _move(robot, world, rng, dist, params):
        return robot
    if should_return(robot, params):
        _start_homing(robot)
        return robot
    if rng.random() < robot.behaviour.p_random_turn * dist:
        _turn(robot, int(rng.choice(em.TURN_ANGLES)), params)
    return robot


# --- wall following --------------------------------------------------------

def _end_wall(robot, singular_kind=None, at_contact=False):
    """Close the followed wall, at the current pose or at the last contact.

    Past the last contact the wall was not seen, so that stretch is left to
    the next free segment.
    """
    if at_contact:
        pos, err = robot._contact
        if pos != robot._open_pos:
            _emit(robot, WALL_SEG, robot._open_pos, pos, robot._open_err, err,
                  side=robot._wall_side, standoff=robot.config.standoff)
    else:
        flush_pending(robot)
        pos, err = _believed_xy(robot), robot.error
    _emit(robot, WALL_END, pos, pos, err, err, side=robot._wall_side, standoff=robot.config.standoff)
    if singular_kind == "wall_end":
        spot = _side_point(robot, pos, 0.0)
        _emit(robot, SINGULAR, spot, spot, err, err, singular=singular_kind)
    elif singular_kind == "corner":
        spot = _side_point(robot, pos, robot.config.standoff)
        _emit(robot, SINGULAR, spot, spot, err, err, singular=singular_kind)
    robot.error = em.release_perp(robot.error)
    robot._open_pos = pos
    robot._open_err = em.release_perp(err)


def _side_point(robot, pos, ahead):
    """Point on the followed wall face beside believed position ``pos``."""
    bh, lateral = robot.believed_pose[2], robot.config.standoff
    fc, fs = _unit(bh)
    sc, ss = _unit(_side_heading(bh, robot._wall_side))
    return (pos[0] + ahead * fc + lateral * sc, pos[1] + ahead * fs + lateral * ss)


def wall_follow_step(robot: RobotState, world: OrthogonalWorld, rng: np.random.Generator, dt: float,
                     params: ErrorParams) -> RobotState:
    cfg = robot.config
    side = robot._wall_side
    if robot.remaining <= 0:
        _end_wall(robot)
        robot.mode = LOST
        return robot
    step_len = min(cfg.speed * dt, robot.remaining)
    d_front, k_front = _read(world, robot, 0.0)
    if d_front <= cfg.standoff + step_len:
        # concave corner: close in to the standoff, then turn away from the wall
        if not _move(robot, world, rng, max(0.0, d_front - cfg.standoff), params, lateral_noise=False):
            return robot
        _end_wall(robot, "corner")
        _turn(robot, 90 if side == "right" else -90, params)
        if not _enter_wall_follow(robot, world, side, k_front, params):
            robot.mode = WANDER
            robot._wall_side = None
        return robot

    d_side, _ = _read(world, robot, 90.0 if side == "left" else -90.0)
    if abs(d_side - cfg.standoff) > cfg.follow_tolerance:
        _end_wall(robot, "wall_end", at_contact=True)
        robot.mode = WANDER
        robot._wall_side = None
        return robot
    robot._contact = (_believed_xy(robot), robot.error)
    bx, by = robot._contact[0]
    ox, oy = robot._open_pos
    if math.hypot(bx - ox, by - oy) >= cfg.log_spacing - 1e-12:
        flush_pending(robot)

    if not _move(robot, world, rng, step_len, params, lateral_noise=False):
        return robot
    if should_return(robot, params):
        _end_wall(robot, at_contact=True)
        robot.mode = WANDER
        robot._wall_side = None
        _start_homing(robot)
    return robot


# --- homing ----------------------------------------------------------------

def homing_step(robot: RobotState, world: OrthogonalWorld, rng: np.random.Generator, dt: float,
                params: ErrorParams) -> RobotState:
    """Retrace the believed turn points in reverse until the start zone."""
    cfg = robot.config
    bx, by, bh = robot.believed_pose
    hx, hy = robot._home
    if (math.hypot(bx - hx, by - hy) <= cfg.home_radius
            or math.hypot(robot.true_pose[0] - hx, robot.true_pose[1] - hy) <= cfg.host_radius):
        flush_pending(robot)
        robot.mode = DONE
        return robot
    if robot.remaining <= 0:
        flush_pending(robot)
        robot.mode = LOST
        return robot

    while robot._waypoints and math.hypot(robot._waypoints[-1][0] - bx, robot._waypoints[-1][1] - by) < 1e-9:
        robot._waypoints.pop()
        robot._detours = 0
    tx, ty = robot._waypoints[-1] if robot._waypoints else robot._home
    step_len = min(cfg.speed * dt, robot.remaining)

    target_dist = math.hypot(tx - bx, ty - by)
    if robot._detour_left <= 0:
        want = math.degrees(math.atan2(ty - by, tx - bx)) % 360.0
        delta = _wrap(want - bh)
        if abs(delta) > 1e-6:
            flush_pending(robot)
            err0 = robot.error
            robot.believed_pose[2] = want
            robot.true_pose[2] = (robot.true_pose[2] + delta) % 360.0
            robot.error = em.rotate_frame(robot.error, want)
            here = _believed_xy(robot)
            _emit(robot, TURN, here, here, err0, robot.error, turn=delta)
            robot._open_err = robot.error
        step_len = min(step_len, target_dist)
    else:
        target_dist = math.inf

    d_front, _ = _read(world, robot, 0.0)
    d_fl, _ = _read(world, robot, 30.0)
    d_fr, _ = _read(world, robot, -30.0)
    near = cfg.speed * dt + world.wall_thickness
    # only obstacles short of the waypoint block the leg
    blocked_front = d_front <= near and d_front < target_dist
    blocked_side = min(d_fl, d_fr) <= near and min(d_fl, d_fr) * COS30 < target_dist
    if blocked_front or blocked_side:
        if blocked_front:
            _obstacle_turn(robot, rng, params)
        else:
            _turn(robot, -90 if d_fl <= d_fr else 90, params)
        # each consecutive blockage before the next waypoint doubles the detour
        robot._detour_left = cfg.detour * 2 ** min(robot._detours, 4)
        robot._detours += 1
        return robot

    if not _move(robot, world, rng, step_len, params):
        return robot
    if robot._detour_left > 0:
        robot._detour_left -= step_len
    return robot


def replay_believed(events) -> tuple[float, float]:
    """Final believed position implied by a robot's own event chain.

    Robot-centred events must chain end to start; singular points are
    landmarks and carry no motion.
    """
    pos = None
    for ev in events:
        if ev.kind == SINGULAR:
            continue
        if pos is not None and ev.start != pos:
            raise ValueError(f"event {ev.key} starts at {ev.start}, expected {pos}")
        pos = ev.end
    return pos

"""Mission orchestration: round-robin stepping, meetings and log delivery."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import robot as rb
from .errormodel import ErrorParams, default_params
from .logio import LogFormatError, read_log, write_log
from .world import DEFAULT_OMNI_RADIUS, OrthogonalWorld

DT = 0.1
OUTCOME_FILE = "outcome.txt"
OUTCOME_HEADER = "outcome v1"


@dataclass
class MissionConfig:
    dt: float = DT
    robot: rb.RobotConfig = field(default_factory=rb.RobotConfig)
    omni_radius: float = DEFAULT_OMNI_RADIUS
    # robots leave the start one after another
    launch_interval: float = 5.0
    max_time: float = 7200.0
    # right-hand priority: yield one step to a robot on the right this close
    priority_radius: float = 0.5
    exchange: bool = True
    # robot id -> mission time at which that robot breaks down
    forced_lost: dict = field(default_factory=dict)
    id_prefix: str | None = None


@dataclass
class RobotSummary:
    robot_id: str
    label: str
    outcome: str
    distance: float
    events: int
    delivered: int


@dataclass
class MissionResult:
    delivered_logs: dict
    per_robot_outcome: dict
    summaries: list = field(default_factory=list)
    delivered_by: dict = field(default_factory=dict)
    robots: list = field(default_factory=list)
    meetings: list = field(default_factory=list)

    def events(self) -> list:
        return [self.delivered_logs[k] for k in sorted(self.delivered_logs)]


def robot_ids(n: int, seed: int, prefix: str | None = None) -> list[str]:
    prefix = f"s{seed}-" if prefix is None else prefix
    return [f"{prefix}r{k:02d}" for k in range(n)]


def _last_meet_with(r: rb.RobotState, peer_id):
    return bool(r.log) and r.log[-1].kind == rb.MEET and r.log[-1].peer == peer_id


def exchange(a: rb.RobotState, b: rb.RobotState):
    """Swap everything each robot knows; both log a MEET.

    A repeat exchange with nothing new on either side is a no-op.
    """
    if _last_meet_with(a, b.id) and _last_meet_with(b, a.id) and a.knowledge().keys() == b.knowledge().keys():
        return a, b
    for r, peer in ((a, b), (b, a)):
        rb.flush_pending(r)
        here = rb._believed_xy(r)
        rb._emit(r, rb.MEET, here, here, r.error, r.error, peer=peer.id)
    ka, kb = a.knowledge(), b.knowledge()
    for r, other in ((a, kb), (b, ka)):
        for key, ev in other.items():
            if key[0] != r.id:
                r.foreign_logs.setdefault(key, ev)
    return a, b


def _on_right(r: rb.RobotState, other: rb.RobotState, radius) -> bool:
    dx = other.true_pose[0] - r.true_pose[0]
    dy = other.true_pose[1] - r.true_pose[1]
    d = math.hypot(dx, dy)
    if d == 0 or d > radius:
        return False
    rel = rb._wrap(math.degrees(math.atan2(dy, dx)) - r.true_pose[2])
    return -135.0 <= rel <= -45.0


def run_mission(world: OrthogonalWorld, behaviours, seed: int, config: MissionConfig | None = None,
                params: ErrorParams | None = None) -> MissionResult:
    """Run the troupe until every robot is done or lost.

    Robots step in fixed order with a fixed time step; meetings are checked
    after each full round and trigger an exchange when a pair comes into
    omnidirectional range.
    """
    if not behaviours:
        raise ValueError("need at least one behaviour")
    config = config or MissionConfig()
    params = params or default_params()
    ids = robot_ids(len(behaviours), seed, config.id_prefix)
    rngs = [np.random.default_rng([int(seed), k]) for k in range(len(behaviours))]
    robots = []
    for k, (rid, beh) in enumerate(zip(ids, behaviours)):
        sign = 1 if rngs[k].random() < 0.5 else -1
        robots.append(rb.make_robot(rid, beh, world.start_pose, config.robot, bias_sign=sign))
    launch = [k * config.launch_interval for k in range(len(robots))]
    waited = [False] * len(robots)
    contacts: set = set()
    meetings = []
    n_steps = int(round(config.max_time / config.dt))

    for tick in range(n_steps):
        t = tick * config.dt
        if not any(r.active for r in robots):
            break
        live = [k for k, r in enumerate(robots) if r.active and t >= launch[k] - 1e-9]
        for k in live:
            r = robots[k]
            if not r.active:
                continue
            lost_at = config.forced_lost.get(r.id)
            if lost_at is not None and t >= lost_at:
                rb.flush_pending(r)
                r.mode = rb.LOST
                continue
            if not waited[k] and r.mode != rb.HOMING and any(
                    _on_right(r, robots[m], config.priority_radius) for m in live if m != k and robots[m].active):
                waited[k] = True
                continue
            waited[k] = False
            rb.step(r, world, rngs[k], config.dt, params)
        present = [k for k in live if robots[k].active]
        in_range = set()
        for x, k in enumerate(present):
            for m in present[x + 1:]:
                a, b = robots[k], robots[m]
                if math.hypot(a.true_pose[0] - b.true_pose[0],
                              a.true_pose[1] - b.true_pose[1]) <= config.omni_radius:
                    in_range.add((k, m))
        if config.exchange:
            for k, m in sorted(in_range - contacts):
                exchange(robots[k], robots[m])
                meetings.append((round(t, 9), robots[k].id, robots[m].id))
        contacts = in_range

    for r in robots:
        if r.active:
            rb.flush_pending(r)
            r.mode = rb.LOST

    delivered, delivered_by, summaries = {}, {}, []
    for r in robots:
        got = r.knowledge() if r.mode == rb.DONE else {}
        delivered_by[r.id] = [got[k] for k in sorted(got)]
        delivered.update(got)
        summaries.append(rb_summary(r, len(got)))
    return MissionResult(delivered, {r.id: r.mode for r in robots}, summaries, delivered_by, robots, meetings)


def rb_summary(r: rb.RobotState, delivered: int) -> RobotSummary:
    return RobotSummary(r.id, r.behaviour.label, r.mode, r.odometer, len(r.log), delivered)


# --- mission directories ---------------------------------------------------

def save_mission(result: MissionResult, directory) -> None:
    """One ``<robot>.log`` of delivered events per robot, plus ``outcome.txt``."""
    os.makedirs(directory, exist_ok=True)
    for rid in sorted(result.per_robot_outcome):
        write_log(os.path.join(directory, f"{rid}.log"), result.delivered_by.get(rid, []))
    lines = [OUTCOME_HEADER]
    by_id = {s.robot_id: s for s in result.summaries}
    for rid in sorted(result.per_robot_outcome):
        s = by_id.get(rid)
        if s is None:
            lines.append(f"{rid}\t{result.per_robot_outcome[rid]}")
        else:
            lines.append(f"{rid}\t{s.outcome}\t{s.label}\t{format(s.distance, '.9g')}\t{s.events}\t{s.delivered}")
    with open(os.path.join(directory, OUTCOME_FILE), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_outcome(directory) -> dict:
    path = os.path.join(directory, OUTCOME_FILE)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != OUTCOME_HEADER:
        raise LogFormatError(f"missing '{OUTCOME_HEADER}' header", path, 1)
    out = {}
    for k, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) < 2 or parts[1] not in (rb.DONE, rb.LOST):
            raise LogFormatError("expected '<robot_id>\\t<done|lost>...'", path, k)
        out[parts[0]] = parts[1]
    return out


def load_mission(directory) -> tuple[dict, dict]:
    """Read a mission directory back: (delivered events by key, outcomes)."""
    outcomes = read_outcome(directory)
    events = {}
    for name in sorted(os.listdir(directory)):
        if name.endswith(".log"):
            for ev in read_log(os.path.join(directory, name)):
                events.setdefault(ev.key, ev)
    return events, outcomes

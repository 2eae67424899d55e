"""Odometry error rectangles and their propagation along a trajectory.

The believed position of a robot carries an axis-aligned error rectangle in
the robot frame, described by its half-extents along and perpendicular to
the direction of travel.  Both grow linearly with the distance covered.  The
sizes come from straight 10 ft trials: the 95 % rectangle measured 2.5 in
along the trajectory and 11 in across it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

INCH = 0.0254
TEN_FEET = 3.048

# z-value putting 95 % of a normal sample inside +-z sigma
Z95 = 1.96

TURN_ANGLES = (45, -45, 90, -90)


@dataclass(frozen=True)
class ErrorParams:
    rate_along: float
    rate_perp: float
    turn_bias_per_45_deg: float
    max_error: float

    def __post_init__(self):
        if self.rate_along < 0 or self.rate_perp < 0 or self.turn_bias_per_45_deg < 0:
            raise ValueError("error rates must be non-negative")
        if not self.max_error > 0:
            raise ValueError("max_error must be positive")


@dataclass(frozen=True)
class ErrorState:
    half_along: float = 0.0
    half_perp: float = 0.0
    heading_bias_deg: float = 0.0
    frame_heading_deg: float = 0.0
    perp_frozen: bool = False

    def __post_init__(self):
        if self.half_along < 0 or self.half_perp < 0:
            raise ValueError("half-extents must be non-negative")


def default_params(max_error: float = 0.75) -> ErrorParams:
    return ErrorParams(
        rate_along=1.25 * INCH / TEN_FEET,
        rate_perp=5.5 * INCH / TEN_FEET,
        turn_bias_per_45_deg=2.0,
        max_error=max_error,
    )


def zero_params(max_error: float = 0.75) -> ErrorParams:
    """Error-free odometry, for ground-truth checks."""
    return ErrorParams(0.0, 0.0, 0.0, max_error)


def grow_straight(err: ErrorState, distance: float, params: ErrorParams) -> ErrorState:
    if distance < 0:
        raise ValueError("distance must be non-negative")
    if distance == 0:
        return err
    perp = err.half_perp if err.perp_frozen else err.half_perp + params.rate_perp * distance
    return replace(err, half_along=err.half_along + params.rate_along * distance, half_perp=perp)


def apply_turn(err: ErrorState, nominal_angle_deg: float, params: ErrorParams | None = None) -> ErrorState:
    """Rotate the rectangle frame by a nominal turn.

    The new rectangle is the bounding box, in the new frame, of the old one.
    The systematic turn bias is not applied here: the robot does not know it.
    """
    if nominal_angle_deg not in TURN_ANGLES:
        raise ValueError(f"turn angle must be one of {TURN_ANGLES}, got {nominal_angle_deg}")
    a, p = err.half_along, err.half_perp
    if abs(nominal_angle_deg) == 90:
        along, perp = p, a
    else:
        along = perp = (a + p) / math.sqrt(2.0)
    heading = (err.frame_heading_deg + nominal_angle_deg) % 360.0
    return replace(err, half_along=along, half_perp=perp, frame_heading_deg=heading)


def rotate_frame(err: ErrorState, heading_deg: float) -> ErrorState:
    """Re-express the rectangle for an arbitrary new heading (homing legs).

    The half-extents are treated as per-axis 95% bounds of independent
    normals and the variances are rotated, so a**2 + p**2 is preserved and
    repeated small corrections do not inflate the rectangle.
    """
    delta = math.radians(heading_deg - err.frame_heading_deg)
    c2, s2 = math.cos(delta) ** 2, math.sin(delta) ** 2
    a2, p2 = err.half_along ** 2, err.half_perp ** 2
    return replace(err, half_along=math.sqrt(c2 * a2 + s2 * p2), half_perp=math.sqrt(s2 * a2 + c2 * p2),
                   frame_heading_deg=heading_deg % 360.0)


def freeze_perp_for_wall_follow(err: ErrorState) -> ErrorState:
    return replace(err, perp_frozen=True)


def release_perp(err: ErrorState) -> ErrorState:
    return replace(err, perp_frozen=False)


def cumulated_error(err: ErrorState) -> float:
    return max(err.half_along, err.half_perp)


def turn_bias(angle_deg: float, params: ErrorParams, sign: int) -> float:
    """Systematic heading offset added to a turn of ``angle_deg``.

    The offset always points to the same side (``sign``) whatever the turn
    direction, so a left-biased robot over-turns left and under-turns right.
    """
    return sign * abs(angle_deg) / 45.0 * params.turn_bias_per_45_deg


def world_half_extents(err: ErrorState) -> tuple[float, float]:
    """Half-extents of the rectangle's world-frame bounding box."""
    th = math.radians(err.frame_heading_deg)
    c, s = abs(math.cos(th)), abs(math.sin(th))
    # snap cos/sin of multiples of 90 degrees
    if c < 1e-12:
        c = 0.0
    if s < 1e-12:
        s = 0.0
    a, p = err.half_along, err.half_perp
    return c * a + s * p, s * a + c * p


def sample_odometry_noise(rng: np.random.Generator, distance: float, params: ErrorParams) -> tuple[float, float]:
    """Independent zero-mean normal (along, perp) drift for a run of ``distance``."""
    if distance < 0:
        raise ValueError("distance must be non-negative")
    if distance == 0:
        return 0.0, 0.0
    s_along = params.rate_along * distance / Z95
    s_perp = params.rate_perp * distance / Z95
    d = rng.standard_normal(2)
    return float(d[0] * s_along), float(d[1] * s_perp)

"""Plane angles of the quickdraw in wall coordinates.

Each reading is treated on its own: the acceleration vector is projected onto
the three coordinate planes and the angle of each projection is taken with a
two-argument arctangent, so the full circle is resolved. Wall angles follow
from the sensor-plane angles as

    theta_yx = angle(-y_s,  x_s)
    theta_yz = 180 - angle(-y_s, z_s)
    theta_xz = 180 - angle(-x_s, z_s)

all normalized to [0, 360). The tangents of the three sensor-plane angles
are -y/x, y/(-z) and x/(-z); the arctangent quadrant is chosen so that the
upward lowering pose lands in the same half-plane in all three planes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# 3 counts at the default 2 g / 8-bit setting
DEFAULT_DEGENERACY_FLOOR_G = 3 * 2.0 / 127
DEFAULT_LOWERING_TOL_DEG = 25.0

PLANES = ("yx", "yz", "xz")


class DegenerateOrientationError(ValueError):
    """The projection onto a plane is too short to carry an angle."""

    def __init__(self, plane: str, message: str = ""):
        self.plane = plane
        super().__init__(message or f"degenerate orientation in the {plane} plane")


@dataclass(frozen=True)
class OrientationSample:
    theta_yx: float
    theta_yz: float
    theta_xz: float
    t: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta_yx, self.theta_yz, self.theta_xz)


def wrap360(deg):
    """Reduce degrees to [0, 360); works on scalars and arrays."""
    w = np.mod(deg, 360.0)
    # np.mod(-1e-17, 360) rounds to 360.0
    w = np.where(w >= 360.0, 0.0, w)
    if np.ndim(w) == 0:
        return float(w) + 0.0
    return w + 0.0


def plane_angle(num: float, den: float) -> float:
    if num == 0 and den == 0:
        raise DegenerateOrientationError("?", "plane angle undefined for a zero vector")
    return wrap360(math.degrees(math.atan2(num, den)))


def _checked(num, den, plane, floor, strict):
    if abs(num) < floor and abs(den) < floor:
        if strict:
            raise DegenerateOrientationError(plane)
        return math.nan
    return plane_angle(num, den)


def sensor_plane_angles(x: float, y: float, z: float, floor: float = DEFAULT_DEGENERACY_FLOOR_G, strict: bool = True):
    """Angles in the sensor's own y-x, y-z and x-z planes."""
    return (
        _checked(-y, x, "yx", floor, strict),
        _checked(-y, z, "yz", floor, strict),
        _checked(-x, z, "xz", floor, strict),
    )


def orientation_of(acc, t: float = 0.0, floor: float = DEFAULT_DEGENERACY_FLOOR_G, strict: bool = True) -> OrientationSample:
    """Wall-frame plane angles of one acceleration triple ``(x_s, y_s, z_s)``.

    A plane whose two components are both below ``floor`` raises
    DegenerateOrientationError, or yields NaN for that plane when
    ``strict`` is false.
    """
    x, y, z = (float(v) for v in acc)
    a_yx, a_yz, a_xz = sensor_plane_angles(x, y, z, floor, strict)
    return OrientationSample(
        theta_yx=a_yx,
        theta_yz=wrap360(180.0 - a_yz),
        theta_xz=wrap360(180.0 - a_xz),
        t=t,
    )


def orientation_array(acc: np.ndarray, floor: float = DEFAULT_DEGENERACY_FLOOR_G):
    """Vectorized ``orientation_of`` over an (n, 3) array.

    Returns ``(angles, valid)`` where ``angles`` is (n, 3) in the order
    yx, yz, xz and ``valid`` marks rows with no degenerate plane. Angles of
    invalid rows are NaN.
    """
    acc = np.asarray(acc, dtype=float).reshape(-1, 3)
    x, y, z = acc[:, 0], acc[:, 1], acc[:, 2]
    deg = np.column_stack([
        wrap360(np.degrees(np.arctan2(-y, x))),
        wrap360(180.0 - wrap360(np.degrees(np.arctan2(-y, z)))),
        wrap360(180.0 - wrap360(np.degrees(np.arctan2(-x, z)))),
    ])
    ax, ay, az = np.abs(x) < floor, np.abs(y) < floor, np.abs(z) < floor
    valid = ~((ay & ax) | (ay & az) | (ax & az))
    deg[~valid] = np.nan
    return deg, valid


def _angular_distance(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def lowering_signature(o: OrientationSample, tol: float = DEFAULT_LOWERING_TOL_DEG) -> bool:
    """True when the pose matches the upward, wall-orthogonal lowering pose."""
    if not 0 < tol < 90:
        raise ValueError("tol must lie in (0, 90) degrees")
    return (
        90.0 < o.theta_yz < 180.0
        and _angular_distance(o.theta_yx, 90.0) <= tol
        and _angular_distance(o.theta_xz, 180.0) <= tol
    )


def twist_flag(o: OrientationSample) -> bool:
    """True when theta_xz leaves the range the wall allows, i.e. the sensor twisted."""
    return not 90.0 <= o.theta_xz <= 270.0

"""Deterministic simulated worlds: a kinematic arm plus a paint wall or an iron board.

Kinematic convention (angles in degrees, lengths in meters):

* joint 1 is a yaw about the vertical ``z`` axis at the base;
* joints 2..dof pitch about the horizontal axis perpendicular to the arm's
  vertical plane; positive angles lower the chain (flexion toward the floor);
* link ``k`` follows joint ``k``. Link 1 stays horizontal (it only yaws),
  later links are inclined by the cumulative pitch ``theta_2 + ... + theta_k``.

So with all joints at zero the chain lies along ``+x`` and the tip sits at
``(sum(link_lengths), 0, base_z)``.

Motion is joint-space linear interpolation at ``max_joint_speed``; the
environment is updated at fixed 100 Hz sub-steps along the way.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .errors import BoundsError, ConfigError, UnreachableError
from .model import ObservedTrajectory

SUBSTEP = 0.01  # seconds (100 Hz)


@numba.njit(cache=True)
def _fk(q_deg, links, base):
    yaw = math.radians(q_deg[0])
    rho = links[0]
    z = base[2]
    pitch = 0.0
    for k in range(1, q_deg.shape[0]):
        pitch += math.radians(q_deg[k])
        rho += links[k] * math.cos(pitch)
        z -= links[k] * math.sin(pitch)
    return base[0] + rho * math.cos(yaw), base[1] + rho * math.sin(yaw), z


@numba.njit(cache=True)
def _stamp(grid, yc, zc, y0, z0, cell_w, cell_h, radius):
    rows, cols = grid.shape
    c_lo = max(0, int(math.floor((yc - radius - y0) / cell_w)))
    c_hi = min(cols - 1, int(math.floor((yc + radius - y0) / cell_w)))
    r_lo = max(0, int(math.floor((zc - radius - z0) / cell_h)))
    r_hi = min(rows - 1, int(math.floor((zc + radius - z0) / cell_h)))
    r2 = radius * radius
    for r in range(r_lo, r_hi + 1):
        dz = z0 + (r + 0.5) * cell_h - zc
        for c in range(c_lo, c_hi + 1):
            dy = y0 + (c + 0.5) * cell_w - yc
            if dy * dy + dz * dz <= r2:
                grid[r, c] = True


@numba.njit(cache=True)
def _sweep_paint(q0, q1, steps, links, base, grid, wall_x, y0, z0, cell_w, cell_h, radius, reach):
    q = np.empty_like(q0)
    for s in range(1, steps + 1):
        a = s / steps
        for k in range(q0.shape[0]):
            q[k] = q0[k] + a * (q1[k] - q0[k])
        x, y, z = _fk(q, links, base)
        if x >= wall_x - reach:
            _stamp(grid, y, z, y0, z0, cell_w, cell_h, radius)


@numba.njit(cache=True)
def _sweep_iron(q0, q1, steps, links, base, board_z, stiffness):
    peak = 0.0
    q = np.empty_like(q0)
    for s in range(1, steps + 1):
        a = s / steps
        for k in range(q0.shape[0]):
            q[k] = q0[k] + a * (q1[k] - q0[k])
        _, _, z = _fk(q, links, base)
        f = stiffness * max(0.0, board_z - z)
        if f > peak:
            peak = f
    return peak


@dataclass(frozen=True)
class ArmModel:
    dof: int = 3
    link_lengths: tuple[float, ...] = (0.3, 0.3, 0.2)
    joint_bounds: tuple[float, float] = (-15.0, 100.0)
    max_joint_speed: float = 30.0
    base: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "link_lengths", tuple(float(x) for x in self.link_lengths))
        object.__setattr__(self, "joint_bounds", tuple(float(x) for x in self.joint_bounds))
        object.__setattr__(self, "base", tuple(float(x) for x in self.base))
        if self.dof < 1:
            raise ConfigError("dof must be >= 1")
        if len(self.link_lengths) != self.dof or any(l <= 0 for l in self.link_lengths):
            raise ConfigError("need one positive link length per joint")
        if not self.joint_bounds[0] < self.joint_bounds[1]:
            raise ConfigError("joint bounds must satisfy lo < hi")
        if self.max_joint_speed <= 0:
            raise ConfigError("max_joint_speed must be positive")
        object.__setattr__(self, "_links", np.array(self.link_lengths))
        object.__setattr__(self, "_base", np.array(self.base))

    @property
    def reach(self) -> float:
        return sum(self.link_lengths)

    def check_bounds(self, joints) -> np.ndarray:
        q = np.asarray(joints, dtype=float)
        if q.shape != (self.dof,):
            raise ConfigError(f"expected {self.dof} joint values, got shape {q.shape}")
        lo, hi = self.joint_bounds
        for k, v in enumerate(q):
            if not lo <= v <= hi:
                raise BoundsError(k, v, lo, hi)
        return q

    def to_dict(self) -> dict:
        return {
            "dof": self.dof,
            "link_lengths": list(self.link_lengths),
            "joint_bounds": list(self.joint_bounds),
            "max_joint_speed": self.max_joint_speed,
            "base": list(self.base),
        }


def forward_kinematics(arm: ArmModel, joints) -> np.ndarray:
    q = arm.check_bounds(joints)
    return np.array(_fk(q, arm._links, arm._base))


def inverse_kinematics(arm: ArmModel, point, prefer=None) -> np.ndarray:
    """Closed-form IK for the 3-DoF yaw-pitch-pitch chain.

    Among the two elbow solutions, the one within bounds and closest to
    ``prefer`` is returned.
    """
    if arm.dof != 3:
        raise ConfigError("inverse_kinematics supports the 3-DoF chain only")
    l1, l2, l3 = arm.link_lengths
    x, y, z = (np.asarray(point, dtype=float) - np.asarray(arm.base))
    z = -z
    yaw = math.atan2(y, x)
    rho = math.hypot(x, y) - l1
    c3 = (rho * rho + z * z - l2 * l2 - l3 * l3) / (2 * l2 * l3)
    if abs(c3) > 1.0 + 1e-12:
        raise UnreachableError(f"point {np.round(point, 4).tolist()} outside arm reach")
    c3 = min(1.0, max(-1.0, c3))
    lo, hi = arm.joint_bounds
    best = None
    for t3 in (math.acos(c3), -math.acos(c3)):
        t2 = math.atan2(z, rho) - math.atan2(l3 * math.sin(t3), l2 + l3 * math.cos(t3))
        q = np.degrees([yaw, t2, t3])
        if np.all(q >= lo - 1e-9) and np.all(q <= hi + 1e-9):
            q = np.clip(q, lo, hi)
            cost = 0.0 if prefer is None else float(np.max(np.abs(q - prefer)))
            if best is None or cost < best[0]:
                best = (cost, q)
    if best is None:
        raise UnreachableError(f"point {np.round(point, 4).tolist()} violates joint bounds")
    return best[1]


@dataclass
class PaintWorld:
    """Vertical wall in the plane ``x = wall_x``, facing the robot.

    The wall spans ``y in [y0, y0 + width]`` and ``z in [z0, z0 + height]`` and is
    rasterized into ``rows x cols`` cells. The brush paints a disc of
    ``brush_radius`` around the tip's projection whenever the tip is within
    ``paint_reach`` of the plane or past it.
    """

    wall_x: float = 0.45
    y0: float = -0.3
    z0: float = -0.8
    width: float = 1.0
    height: float = 1.0
    cols: int = 100
    rows: int = 100
    brush_radius: float = 0.05
    paint_reach: float = 0.02
    grid: np.ndarray = None

    feature_names = ("painted",)
    feature_units = ("fraction",)
    kind = "paint"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.cols < 1 or self.rows < 1:
            raise ConfigError("wall dimensions and grid size must be positive")
        if self.brush_radius <= 0 or self.paint_reach < 0:
            raise ConfigError("brush_radius must be positive and paint_reach nonnegative")
        if self.grid is None:
            self.grid = np.zeros((self.rows, self.cols), dtype=np.bool_)

    @property
    def cell_w(self) -> float:
        return self.width / self.cols

    @property
    def cell_h(self) -> float:
        return self.height / self.rows

    @property
    def painted_fraction(self) -> float:
        return float(np.count_nonzero(self.grid)) / self.grid.size

    def features(self, tip) -> np.ndarray:
        return np.array([self.painted_fraction])

    def sweep(self, arm: ArmModel, q0, q1, steps: int) -> None:
        _sweep_paint(
            q0, q1, steps, arm._links, arm._base, self.grid, self.wall_x,
            self.y0, self.z0, self.cell_w, self.cell_h, self.brush_radius, self.paint_reach,
        )

    def cells_in_rect(self, rect) -> tuple[slice, slice]:
        """Grid slices for cells whose centers lie in ``(y_min, z_min, y_max, z_max)``."""
        ya, za, yb, zb = (float(v) for v in rect)
        if not (ya < yb and za < zb):
            raise ConfigError(f"malformed region {rect}")
        eps = 1e-9
        if ya < self.y0 - eps or yb > self.y0 + self.width + eps or za < self.z0 - eps or zb > self.z0 + self.height + eps:
            raise ConfigError(f"region {rect} outside wall bounds")
        # centers within 1 nm of an edge count as inside
        ew, eh = 1e-9 / self.cell_w, 1e-9 / self.cell_h
        c_lo = math.ceil((ya - self.y0) / self.cell_w - 0.5 - ew)
        c_hi = math.floor((yb - self.y0) / self.cell_w - 0.5 + ew)
        r_lo = math.ceil((za - self.z0) / self.cell_h - 0.5 - eh)
        r_hi = math.floor((zb - self.z0) / self.cell_h - 0.5 + eh)
        return slice(max(r_lo, 0), r_hi + 1), slice(max(c_lo, 0), c_hi + 1)

    def set_region(self, rect, painted: bool) -> None:
        rs, cs = self.cells_in_rect(rect)
        self.grid[rs, cs] = painted

    def copy(self) -> "PaintWorld":
        new = object.__new__(PaintWorld)
        new.__dict__.update(self.__dict__)
        new.grid = self.grid.copy()
        return new

    def params(self) -> dict:
        return {k: getattr(self, k) for k in
                ("wall_x", "y0", "z0", "width", "height", "cols", "rows", "brush_radius", "paint_reach")}

    def state_bytes(self) -> bytes:
        return self.grid.tobytes()


@dataclass
class IronWorld:
    """Horizontal ironing board at height ``board_height``; contact is a linear penalty spring."""

    board_height: float = -0.3
    stiffness: float = 3000.0
    peak_force: float = 0.0

    feature_names = ("x", "y", "z", "force_z")
    feature_units = ("meter", "meter", "meter", "newton")
    kind = "iron"

    def __post_init__(self):
        if self.stiffness <= 0:
            raise ConfigError("stiffness must be positive")

    def contact_force(self, z: float) -> float:
        return self.stiffness * max(0.0, self.board_height - z)

    def features(self, tip) -> np.ndarray:
        return np.array([tip[0], tip[1], tip[2], self.contact_force(tip[2])])

    def sweep(self, arm: ArmModel, q0, q1, steps: int) -> None:
        peak = _sweep_iron(q0, q1, steps, arm._links, arm._base, self.board_height, self.stiffness)
        if peak > self.peak_force:
            self.peak_force = peak

    def copy(self) -> "IronWorld":
        new = object.__new__(IronWorld)
        new.__dict__.update(self.__dict__)
        return new

    def params(self) -> dict:
        return {"board_height": self.board_height, "stiffness": self.stiffness}

    def state_bytes(self) -> bytes:
        return np.array([self.board_height, self.stiffness, self.peak_force]).tobytes()


@dataclass
class MotorEvent:
    wall: float  # perf_counter seconds
    sim: float  # simulated clock after the move
    execution: int  # motor-execution index; offline strategies group all waypoints under 0
    joints: list[float]


@dataclass
class PerceptionVector:
    t: float
    values: np.ndarray


@dataclass
class World:
    arm: ArmModel
    env: PaintWorld | IronWorld
    joints: np.ndarray
    clock: float = 0.0
    frozen: dict[int, float] = field(default_factory=dict)
    event_log: list[MotorEvent] = field(default_factory=list)

    def __post_init__(self):
        self.joints = self.arm.check_bounds(self.joints).copy()

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.env.feature_names

    def snapshot(self) -> "World":
        """Independent copy for mental execution; the event log is not carried over."""
        new = object.__new__(World)
        new.arm = self.arm
        new.env = self.env.copy()
        new.joints = self.joints.copy()
        new.clock = self.clock
        new.frozen = dict(self.frozen)
        new.event_log = []
        return new

    def tip(self) -> np.ndarray:
        return np.array(_fk(self.joints, self.arm._links, self.arm._base))

    def features(self) -> np.ndarray:
        return self.env.features(self.tip())

    def move(self, target, duration: Optional[float] = None) -> float:
        """Drive the arm to ``target`` without logging; returns simulated duration.

        ``duration`` overrides the speed-capped travel time (used when replaying
        demonstrations, which are not bound by the controller's speed limit).
        """
        q1 = np.array(target, dtype=float)
        for k, v in self.frozen.items():
            q1[k] = v
        self.arm.check_bounds(q1)
        if duration is None:
            travel = float(np.max(np.abs(q1 - self.joints))) if q1.size else 0.0
            duration = travel / self.arm.max_joint_speed
        if duration > 0:
            steps = max(1, math.ceil(duration / SUBSTEP - 1e-9))
            self.env.sweep(self.arm, self.joints, q1, steps)
        self.joints = q1
        self.clock += duration
        return duration

    def state_bytes(self) -> bytes:
        return (
            self.joints.tobytes()
            + np.array([self.clock]).tobytes()
            + repr(sorted(self.frozen.items())).encode()
            + self.env.state_bytes()
        )


def make_world(arm: ArmModel, env, joints=None) -> World:
    if joints is None:
        joints = np.zeros(arm.dof)
    return World(arm, env, np.asarray(joints, dtype=float))


def motor_execution(world: World, target, execution: Optional[int] = None, wall: Optional[float] = None) -> World:
    """Execute one joint-space move on the live world and log it."""
    world.move(target)
    if execution is None:
        execution = world.event_log[-1].execution + 1 if world.event_log else 0
    world.event_log.append(
        MotorEvent(time.perf_counter() if wall is None else wall, world.clock, execution, world.joints.tolist())
    )
    return world


def simulate(world: World, waypoints: Sequence) -> np.ndarray:
    """Run ``waypoints`` on ``world`` in place; feature columns sampled after each one."""
    if len(waypoints) == 0:
        return world.features()[:, None]
    cols = []
    for q in waypoints:
        world.move(q)
        cols.append(world.features())
    return np.column_stack(cols)


def mental_execution(world: World, waypoints: Sequence, interval: float = 1.0) -> ObservedTrajectory:
    """Execute ``waypoints`` on a snapshot of ``world``.

    Each waypoint occupies one sampling slot of ``interval`` seconds: the arm
    moves and then holds, so the slot's sample is the state after the move.
    """
    snap = world.snapshot()
    return ObservedTrajectory(interval, simulate(snap, waypoints), list(world.feature_names))


def sensor_perception(world: World, feature_names: Sequence[str] | None = None) -> PerceptionVector:
    if feature_names is not None and tuple(feature_names) != tuple(world.feature_names):
        raise ConfigError(
            f"action features {tuple(feature_names)} do not match world features {world.feature_names}"
        )
    return PerceptionVector(world.clock, world.features())

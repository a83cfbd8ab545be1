"""Experiment descriptions: world setup, synthetic demonstrations, timed perturbations.

A scenario is a YAML document with top-level keys ``action``, ``world``,
``demos``, ``evolution``, ``strategy`` and ``perturbations``; see the README
for the full schema.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigError, ParseError, UnreachableError
from .evolution import EvolutionConfig
from .model import Demonstration, write_demonstration
from .simenv import ArmModel, IronWorld, PaintWorld, World, inverse_kinematics, make_world
from .strategies import StrategyConfig

log = logging.getLogger(__name__)

ACTIONS = ("paint", "iron", "custom")
PAINT_PATHS = ("raster", "zigzag", "spiral", "random_walk")
OPS = ("erase_paint_region", "paint_region", "move_board", "freeze_joint")

# fraction of the brush radius kept between a lane and the wall edge
_EDGE_MARGIN = 0.6
# lane spacing as a multiple of the brush radius; < 2 leaves overlap
_LANE_SPACING = 1.5
_PRESS_STEP = 0.005


@dataclass(frozen=True)
class DemoProfile:
    id: str
    kind: str
    duration: float
    seed: int = 0
    points: tuple = ()  # 3-D waypoints for ``waypoints``/``stroke`` kinds
    press_depth: float = 0.01
    lift: float = 0.08

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "duration": self.duration}
        if self.kind == "random_walk":
            d["seed"] = self.seed
        if self.points:
            d["points"] = [list(p) for p in self.points]
        if self.kind == "stroke":
            d["press_depth"] = self.press_depth
            d["lift"] = self.lift
        return d


@dataclass(frozen=True)
class PerturbationEvent:
    op: str
    after_motor: Optional[int] = None
    at_time: Optional[float] = None
    rect: Optional[tuple] = None
    painted_share: Optional[float] = None  # erase only: left strip holding this share of painted cells
    dz: Optional[float] = None
    joint: Optional[int] = None
    degrees: Optional[float] = None

    def __post_init__(self):
        if self.op not in OPS:
            raise ConfigError(f"unknown perturbation op {self.op!r}")
        if (self.after_motor is None) == (self.at_time is None):
            raise ConfigError("perturbation needs exactly one of after_motor / at_time")
        if self.after_motor is not None and self.after_motor < 0:
            raise ConfigError("after_motor must be >= 0")
        if self.at_time is not None and self.at_time < 0:
            raise ConfigError("at_time must be >= 0")
        if self.painted_share is not None:
            if self.op != "erase_paint_region" or self.rect is not None:
                raise ConfigError("painted_share applies to erase_paint_region without a rect")
            if not 0.0 < self.painted_share <= 1.0:
                raise ConfigError("painted_share must be in (0, 1]")
        elif self.op in ("erase_paint_region", "paint_region"):
            if self.rect is None or len(self.rect) != 4:
                raise ConfigError(f"{self.op} needs rect [y_min, z_min, y_max, z_max]")
            object.__setattr__(self, "rect", tuple(float(v) for v in self.rect))
        if self.op == "move_board" and self.dz is None:
            raise ConfigError("move_board needs dz")
        if self.op == "freeze_joint" and (self.joint is None or self.degrees is None):
            raise ConfigError("freeze_joint needs joint and degrees")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in dataclasses.asdict(self).items() if v is not None}

    def apply(self, world: World) -> None:
        env = world.env
        if self.op in ("erase_paint_region", "paint_region"):
            if not isinstance(env, PaintWorld):
                raise ConfigError(f"{self.op} requires a paint world")
            rect = self.rect if self.painted_share is None else share_strip(env, self.painted_share)
            if rect is not None:
                env.set_region(rect, painted=self.op == "paint_region")
        elif self.op == "move_board":
            if not isinstance(env, IronWorld):
                raise ConfigError("move_board requires an iron world")
            env.board_height += self.dz
        else:
            world.arm.check_bounds(np.where(np.arange(world.arm.dof) == self.joint, self.degrees, world.joints))
            world.frozen[self.joint] = float(self.degrees)
            world.joints[self.joint] = float(self.degrees)


def share_strip(env: PaintWorld, share: float) -> tuple:
    """Narrowest full-height strip from the wall's left edge holding ``share`` of the painted cells.

    Whole columns only, so the strip holds at least ``share`` and less than
    ``share`` plus one column's worth.
    """
    per_col = np.count_nonzero(env.grid, axis=0)
    total = int(per_col.sum())
    if total == 0:
        cols = 0
    else:
        cum = np.cumsum(per_col)
        cols = int(np.searchsorted(cum * 1.0, share * total - 1e-9)) + 1
    if not cols:
        return None
    return (env.y0, env.z0, min(env.y0 + cols * env.cell_w, env.y0 + env.width), env.z0 + env.height)


class PerturbationSchedule:
    """Run-local view of a scenario's events; each event fires at most once."""

    def __init__(self, events):
        self.events = list(events)
        self.applied: set[int] = set()

    def apply_due(self, world: World, elapsed: float, motor_count: int) -> list[PerturbationEvent]:
        fired = []
        for k, ev in enumerate(self.events):
            if k in self.applied:
                continue
            due = ev.at_time <= elapsed if ev.at_time is not None else ev.after_motor <= motor_count
            if due:
                ev.apply(world)
                self.applied.add(k)
                fired.append(ev)
                log.info("perturbation %s applied (motor=%d)", ev.op, motor_count)
        return fired


def apply_due_perturbations(world, scenario, now: float, motor_count: int = 0, schedule=None):
    """Apply every not-yet-applied event whose trigger is due; returns ``(world, fired)``."""
    schedule = schedule or PerturbationSchedule(scenario.perturbations)
    return world, schedule.apply_due(world, now, motor_count)


@dataclass(frozen=True)
class Scenario:
    action: str
    arm: ArmModel
    initial_joints: tuple
    env_kind: str
    env_params: dict
    t_min: float
    rate_hz: float
    profiles: tuple
    strategy: StrategyConfig
    perturbations: tuple = ()

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ConfigError(f"action must be one of {ACTIONS}")
        if self.env_kind not in ("paint", "iron"):
            raise ConfigError("world needs a 'paint' or 'iron' block")
        if self.action != "custom" and self.action != self.env_kind:
            raise ConfigError(f"action {self.action!r} with a {self.env_kind!r} world")
        for p in self.profiles:
            if p.duration <= 0:
                raise ConfigError(f"demo {p.id!r} duration must be positive")
        for kind in ("after_motor", "at_time"):
            keys = [getattr(e, kind) for e in self.perturbations if getattr(e, kind) is not None]
            if keys != sorted(keys):
                raise ConfigError(f"perturbations must be sorted by {kind}")
        self.arm.check_bounds(self.initial_joints)
        probe = self.make_env()
        for ev in self.perturbations:
            if ev.rect is not None:
                probe.cells_in_rect(ev.rect)

    def make_env(self):
        return PaintWorld(**self.env_params) if self.env_kind == "paint" else IronWorld(**self.env_params)

    def make_world(self) -> World:
        return make_world(self.arm, self.make_env(), self.initial_joints)

    def schedule(self) -> PerturbationSchedule:
        return PerturbationSchedule(self.perturbations)

    @property
    def feature_units(self) -> tuple:
        return (PaintWorld if self.env_kind == "paint" else IronWorld).feature_units

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "world": {
                "arm": self.arm.to_dict(),
                "initial_joints": list(self.initial_joints),
                self.env_kind: dict(self.env_params),
            },
            "demos": {
                "t_min": self.t_min,
                "rate_hz": self.rate_hz,
                "profiles": [p.to_dict() for p in self.profiles],
            },
            "evolution": self.strategy.evolution.to_dict(),
            "strategy": self.strategy.to_dict(),
            "perturbations": [e.to_dict() for e in self.perturbations],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            world = data["world"]
            env_kind = "paint" if "paint" in world else "iron" if "iron" in world else None
            arm = ArmModel(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in world.get("arm", {}).items()})
            demos = data.get("demos") or {}
            profiles = tuple(
                DemoProfile(**{k: (tuple(tuple(p) for p in v) if k == "points" else v) for k, v in prof.items()})
                for prof in demos.get("profiles", [])
            )
            evo = dict(data.get("evolution") or {})
            strat = dict(data.get("strategy") or {})
            strat.setdefault("seed", evo.get("seed", 0))
            return cls(
                action=data["action"],
                arm=arm,
                initial_joints=tuple(float(v) for v in world.get("initial_joints", [0.0] * arm.dof)),
                env_kind=env_kind,
                env_params=dict(world.get(env_kind) or {}) if env_kind else {},
                t_min=float(demos.get("t_min", 1.0)),
                rate_hz=float(demos.get("rate_hz", 10.0)),
                profiles=profiles,
                strategy=StrategyConfig.from_dict(strat, EvolutionConfig.from_dict(evo)),
                perturbations=tuple(PerturbationEvent(**e) for e in data.get("perturbations") or []),
            )
        except KeyError as exc:
            raise ConfigError(f"scenario missing key {exc}") from exc
        except TypeError as exc:
            raise ConfigError(f"malformed scenario: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ParseError(str(exc), path, mark.line + 1 if mark else None) from exc
        if not isinstance(data, dict):
            raise ParseError("scenario must be a mapping", path)
        return cls.from_dict(data)


# --- demonstration synthesis -------------------------------------------------

def _lanes(lo, hi, spacing):
    count = max(1, math.ceil((hi - lo) / spacing - 1e-9))
    return np.linspace(lo, hi, count + 1)


def _paint_polyline(kind: str, width: float, height: float, radius: float, seed: int) -> np.ndarray:
    """Wall-local ``(u, v)`` vertices of a coverage path."""
    m = _EDGE_MARGIN * radius
    s = _LANE_SPACING * radius
    u0, u1, v0, v1 = m, width - m, m, height - m
    pts = []
    if kind == "raster":
        for k, v in enumerate(_lanes(v0, v1, s)):
            a, b = (u0, u1) if k % 2 == 0 else (u1, u0)
            pts += [(a, v), (b, v)]
    elif kind == "zigzag":
        for k, u in enumerate(_lanes(u0, u1, s)):
            a, b = (v1, v0) if k % 2 == 0 else (v0, v1)
            pts += [(u, a), (u, b)]
    elif kind == "spiral":
        level = 0
        while u0 + level * s <= u1 - level * s and v0 + level * s <= v1 - level * s:
            a0, a1, b0, b1 = u0 + level * s, u1 - level * s, v0 + level * s, v1 - level * s
            pts += [(a0, b1), (a1, b1), (a1, b0), (a0, b0), (a0, max(b0, b1 - s))]
            level += 1
        mid = 0.5 * (v0 + v1)
        pts += [(u0 + level * s - s, mid), (u1 - level * s + s, mid)]
    elif kind == "random_walk":
        rng = np.random.default_rng(seed)
        lanes = _lanes(v0, v1, s)
        for k, idx in enumerate(rng.permutation(len(lanes))):
            a, b = (u0, u1) if rng.random() < 0.5 else (u1, u0)
            pts += [(a, lanes[idx]), (b, lanes[idx])]
    else:
        raise ConfigError(f"unknown paint path kind {kind!r}")
    return np.array(pts, dtype=float)


def _resample(vertices: np.ndarray, samples: int) -> np.ndarray:
    seg = np.linalg.norm(np.diff(vertices, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] == 0:
        return np.repeat(vertices[:1], samples, axis=0)
    s = np.linspace(0.0, arc[-1], samples)
    return np.column_stack([np.interp(s, arc, vertices[:, k]) for k in range(vertices.shape[1])])


def _press_ik(arm: ArmModel, wall: PaintWorld, y: float, z: float, prefer) -> np.ndarray:
    """Joints putting the brush on the wall at ``(y, z)``, pressing in as little as possible."""
    for depth in np.arange(0.0, arm.reach, _PRESS_STEP):
        try:
            return inverse_kinematics(arm, (wall.wall_x + depth, y, z), prefer=prefer)
        except UnreachableError:
            continue
    raise UnreachableError(f"wall point ({y:.4f}, {z:.4f}) not reachable")


def _profile_targets(scenario: Scenario, profile: DemoProfile, samples: int) -> np.ndarray:
    """Joint targets for every recording sample of one profile."""
    arm = scenario.arm
    env = scenario.make_env()
    joints = []
    prefer = np.asarray(scenario.initial_joints)
    if profile.kind in PAINT_PATHS:
        if not isinstance(env, PaintWorld):
            raise ConfigError(f"paint path {profile.kind!r} needs a paint world")
        uv = _paint_polyline(profile.kind, env.width, env.height, env.brush_radius, profile.seed)
        pts = _resample(uv, samples)
        for k, (u, v) in enumerate(pts):
            try:
                q = _press_ik(arm, env, env.y0 + u, env.z0 + v, prefer)
            except UnreachableError as exc:
                raise UnreachableError(f"demo {profile.id!r} waypoint {k}: {exc}") from exc
            joints.append(q)
            prefer = q
        return np.array(joints)
    if profile.kind == "stroke":
        if not isinstance(env, IronWorld) or len(profile.points) != 2:
            raise ConfigError("stroke profiles need an iron world and two (x, y) points")
        (xa, ya), (xb, yb) = (tuple(p[:2]) for p in profile.points)
        hi = env.board_height + profile.lift
        lo = env.board_height - profile.press_depth
        verts = np.array([(xa, ya, hi), (xa, ya, lo), (xb, yb, lo), (xb, yb, hi)])
    elif profile.kind == "waypoints":
        verts = np.array(profile.points, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3 or len(verts) < 1:
            raise ConfigError(f"demo {profile.id!r}: waypoints must be a list of (x, y, z)")
    else:
        raise ConfigError(f"unknown demo kind {profile.kind!r}")
    for k, p in enumerate(verts):
        try:
            inverse_kinematics(arm, p)
        except UnreachableError as exc:
            raise UnreachableError(f"demo {profile.id!r} waypoint {k} {p.tolist()}: {exc}") from exc
    for p in _resample(verts, samples):
        q = inverse_kinematics(arm, p, prefer=prefer)
        joints.append(q)
        prefer = q
    return np.array(joints)


def record_profile(scenario: Scenario, profile: DemoProfile) -> Demonstration:
    """Drive a fresh world along one scripted path, recording features at ``rate_hz``."""
    dt = 1.0 / scenario.rate_hz
    steps = int(round(profile.duration * scenario.rate_hz))
    if steps < 1:
        raise ConfigError(f"demo {profile.id!r} shorter than one sample period")
    targets = _profile_targets(scenario, profile, steps + 1)
    world = make_world(scenario.arm, scenario.make_env(), targets[0])
    t = [0.0]
    rows = [world.features()]
    for k in range(1, steps + 1):
        world.move(targets[k], duration=dt)
        t.append(round(k * dt, 9))
        rows.append(world.features())
    return Demonstration(profile.id, world.feature_names, np.array(t), np.array(rows))


def generate_demonstrations(scenario: Scenario, out_dir=None) -> list[Demonstration]:
    if not scenario.profiles:
        raise ConfigError("scenario has no demo profiles")
    demos = [record_profile(scenario, p) for p in scenario.profiles]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for d in demos:
            write_demonstration(d, out / f"{d.id}.csv")
    return demos

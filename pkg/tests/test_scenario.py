import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cgda.errors import ConfigError, ParseError, UnreachableError
from cgda.model import load_demonstrations
from cgda.scenario import (
    DemoProfile,
    PerturbationEvent,
    PerturbationSchedule,
    Scenario,
    apply_due_perturbations,
    generate_demonstrations,
)
from cgda.simenv import PaintWorld


def test_yaml_round_trip(tmp_path, scenario_dir):
    for name in ("paint.yaml", "iron.yaml", "paint_erase.yaml"):
        sc = Scenario.load(scenario_dir / name)
        sc.save(tmp_path / name)
        assert Scenario.load(tmp_path / name) == sc


def test_paint_demos(paint_demos, tmp_path, paint_scenario):
    assert len(paint_demos) == 4
    for d in paint_demos:
        assert d.values[-1, 0] == 1.0
        assert np.all(np.diff(d.values[:, 0]) >= 0)
    generate_demonstrations(paint_scenario, tmp_path)
    loaded = load_demonstrations(tmp_path)
    assert sorted(d.id for d in loaded) == sorted(d.id for d in paint_demos)


def test_iron_demo_peak_force(iron_demos):
    for d in iron_demos:
        assert d.values[:, 3].max() == pytest.approx(30.0, rel=0.10)
        assert d.values[0, 3] == 0.0 and d.values[-1, 3] == 0.0


def test_demo_durations_match_profiles(paint_demos, paint_scenario):
    for d, p in zip(paint_demos, paint_scenario.profiles):
        assert d.duration == pytest.approx(p.duration)


def test_no_profiles_is_an_error(paint_scenario):
    with pytest.raises(ConfigError):
        generate_demonstrations(dataclasses.replace(paint_scenario, profiles=()))


def test_unreachable_waypoint_names_demo(iron_scenario):
    bad = DemoProfile("far", "waypoints", 5.0, points=((2.0, 0.0, 0.0),))
    with pytest.raises(UnreachableError, match="far.*waypoint 0"):
        generate_demonstrations(dataclasses.replace(iron_scenario, profiles=(bad,)))


def test_malformed_yaml_reports_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("action: paint\nworld: [unclosed\n")
    with pytest.raises(ParseError) as info:
        Scenario.load(p)
    assert "bad.yaml" in str(info.value)


@pytest.mark.parametrize(
    "change",
    [
        {"action": "juggle"},
        {"perturbations": [{"op": "warp", "after_motor": 1}]},
        {"perturbations": [{"op": "erase_paint_region", "after_motor": 1}]},
        {"perturbations": [{"op": "erase_paint_region", "after_motor": 1, "at_time": 2.0, "rect": [0, -0.1, 0.1, 0.0]}]},
        {"perturbations": [{"op": "erase_paint_region", "after_motor": 1, "rect": [0.2, 0, 0.1, 0.1]}]},
        {"perturbations": [{"op": "erase_paint_region", "after_motor": 1, "rect": [-5, -5, 5, 5]}]},
        {"perturbations": [{"op": "paint_region", "after_motor": 1, "painted_share": 0.3}]},
        {"perturbations": [{"op": "erase_paint_region", "after_motor": 1, "painted_share": 1.5}]},
        {"perturbations": [{"op": "erase_paint_region", "after_motor": 1, "painted_share": 0.3, "rect": [0, -0.1, 0.1, 0.0]}]},
        {
            "perturbations": [
                {"op": "erase_paint_region", "after_motor": 4, "rect": [0, -0.1, 0.1, 0.0]},
                {"op": "erase_paint_region", "after_motor": 2, "rect": [0, -0.1, 0.1, 0.0]},
            ]
        },
    ],
)
def test_scenario_validation(paint_scenario, change):
    with pytest.raises(ConfigError):
        Scenario.from_dict({**paint_scenario.to_dict(), **change})


def _oracle_cells(env: PaintWorld, rect):
    """Cells whose centers lie inside the closed rectangle, by explicit enumeration."""
    ya, za, yb, zb = rect
    cells = set()
    for r in range(env.rows):
        for c in range(env.cols):
            y = env.y0 + (c + 0.5) * env.width / env.cols
            z = env.z0 + (r + 0.5) * env.height / env.rows
            if ya - 1e-10 <= y <= yb + 1e-10 and za - 1e-10 <= z <= zb + 1e-10:
                cells.add((r, c))
    return cells


@given(
    st.floats(0.0, 0.5), st.floats(0.01, 0.55), st.floats(0.0, 0.3), st.floats(0.01, 0.36), st.integers(0, 2**32 - 1)
)
def test_erase_removes_exactly_the_rect(u, du, v, dv, seed):
    env = PaintWorld(wall_x=0.45, y0=-0.1, z0=-0.32, width=0.55, height=0.36, cols=55, rows=36)
    rect = (env.y0 + u, env.z0 + v, env.y0 + min(u + du, 0.55), env.z0 + min(v + dv, 0.36))
    env.grid[:] = np.random.default_rng(seed).random(env.grid.shape) < 0.7
    before = env.grid.copy()
    env.set_region(rect, painted=False)
    cells = _oracle_cells(env, rect)
    expected = before.copy()
    for r, c in cells:
        expected[r, c] = False
    assert np.array_equal(env.grid, expected)
    removed = sum(before[r, c] for r, c in cells)
    assert np.count_nonzero(before) - np.count_nonzero(env.grid) == removed


def test_erase_event_fires_once_after_fifth_move(scenario_dir):
    sc = Scenario.load(scenario_dir / "paint_erase.yaml")
    world = sc.make_world()
    world.env.grid[:] = True
    sched = sc.schedule()
    assert sched.apply_due(world, 0.0, 4) == []
    fired = sched.apply_due(world, 0.0, 5)
    assert [e.op for e in fired] == ["erase_paint_region"]
    # full wall painted: 17 of 55 columns hold the first 30%
    assert 1.0 - world.env.painted_fraction == pytest.approx(17 / 55)
    world.env.grid[:] = True
    assert sched.apply_due(world, 10.0, 9) == []
    assert world.env.painted_fraction == 1.0


@given(st.floats(0.01, 1.0), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_share_strip_erases_at_least_the_share(share, density, seed):
    env = PaintWorld(wall_x=0.45, y0=-0.1, z0=-0.32, width=0.55, height=0.36, cols=55, rows=36)
    env.grid[:] = np.random.default_rng(seed).random(env.grid.shape) < density
    total = np.count_nonzero(env.grid)
    per_col = env.grid.sum(axis=0)
    # oracle: smallest k with the first k columns holding >= share of the paint
    k = next(k for k in range(1, 56) if per_col[:k].sum() >= share * total - 1e-9) if total else 0
    expected = env.grid.copy()
    expected[:, :k] = False
    ev = PerturbationEvent("erase_paint_region", after_motor=0, painted_share=share)
    world = type("W", (), {"env": env})()
    ev.apply(world)
    assert np.array_equal(env.grid, expected)
    erased = total - np.count_nonzero(env.grid)
    if total:
        assert erased >= share * total - 1e-9
        assert erased - per_col[k - 1] < share * total


def test_share_strip_on_blank_wall_is_noop():
    env = PaintWorld(wall_x=0.45, y0=-0.1, z0=-0.32, width=0.55, height=0.36, cols=55, rows=36)
    world = type("W", (), {"env": env})()
    PerturbationEvent("erase_paint_region", after_motor=0, painted_share=0.3).apply(world)
    assert env.painted_fraction == 0.0


def test_no_due_events_leave_world_unchanged(paint_scenario):
    sc = dataclasses.replace(
        paint_scenario, perturbations=(PerturbationEvent("erase_paint_region", at_time=50.0, rect=(0.0, -0.1, 0.1, 0.0)),)
    )
    world = sc.make_world()
    world.env.grid[:] = True
    before = world.state_bytes()
    _, fired = apply_due_perturbations(world, sc, now=10.0)
    assert fired == [] and world.state_bytes() == before
    _, fired = apply_due_perturbations(world, sc, now=50.0)
    assert len(fired) == 1 and world.state_bytes() != before


def test_move_board_and_freeze_joint(iron_scenario):
    world = iron_scenario.make_world()
    h = world.env.board_height
    sched = PerturbationSchedule(
        [PerturbationEvent("move_board", after_motor=0, dz=0.02), PerturbationEvent("freeze_joint", after_motor=1, joint=0, degrees=12.0)]
    )
    assert len(sched.apply_due(world, 0.0, 0)) == 1
    assert world.env.board_height == pytest.approx(h + 0.02)
    sched.apply_due(world, 0.0, 1)
    world.move([40.0, 20.0, 60.0])
    assert world.joints[0] == 12.0


def test_wrong_world_for_op(iron_scenario):
    ev = PerturbationEvent("erase_paint_region", after_motor=0, rect=(0, 0, 0.1, 0.1))
    with pytest.raises(ConfigError):
        ev.apply(iron_scenario.make_world())

from __future__ import annotations

import random

import pytest

from conftest import grid
from mindgrid.bots import BotSpec, make_bot
from mindgrid.control import NoopController
from mindgrid.core import (
    AtomicAction,
    ContractViolation,
    EpisodeConfig,
    Window,
    derive_seed,
    make_world,
    observe,
    step,
    substrate_names,
)
from mindgrid.harness import run_episode
from mindgrid.layout import LayoutError, load_layout, parse_layout

NOOP2 = [AtomicAction.NOOP, AtomicAction.NOOP]


def test_eight_atomic_actions():
    assert {a.value for a in AtomicAction} == {
        "step_forward", "step_backward", "step_left", "step_right",
        "turn_left", "turn_right", "fire_beam", "noop",
    }


def test_substrates_registered():
    assert substrate_names() == ["cooking_asymmetric", "pd_repeated", "rws_arena", "rws_repeated"]


def test_all_noop_only_advances_step():
    world = make_world(EpisodeConfig("rws_repeated", seed=3))
    before = world.clone()
    _, result = step(world, NOOP2)
    assert world.step_count == 1
    assert [p.pos for p in world.players] == [p.pos for p in before.players]
    assert [p.inventory for p in world.players] == [p.inventory for p in before.players]
    assert result.rewards == (0.0, 0.0)
    assert result.events == ()


def test_step_into_wall_keeps_position():
    world = make_world(EpisodeConfig("rws_repeated"))
    p = world.players[0]
    p.pos, p.orientation = (1, 1), "N"  # wall directly north
    step(world, [AtomicAction.STEP_FORWARD, AtomicAction.NOOP])
    assert p.pos == (1, 1)
    assert world.step_count == 1


def test_step_onto_yellow_collects():
    world = make_world(EpisodeConfig("rws_repeated"))
    p = world.players[0]
    p.pos, p.orientation = (3, 1), "S"  # (3, 2) is yellow
    _, result = step(world, [AtomicAction.STEP_FORWARD, AtomicAction.NOOP])
    assert p.pos == (3, 2)
    assert p.inventory == [2, 1, 1]
    assert not world.resources[(3, 2)].present
    assert [e.kind for e in result.events] == ["collect"]


def test_joint_arity_is_checked():
    world = make_world(EpisodeConfig("rws_repeated"))
    with pytest.raises(ContractViolation):
        step(world, [AtomicAction.NOOP])


def test_done_exactly_at_max_steps():
    world = make_world(EpisodeConfig("rws_repeated", max_steps=3))
    flags = [step(world, NOOP2)[1].done for _ in range(3)]
    assert flags == [False, False, True]
    with pytest.raises(ContractViolation):
        step(world, NOOP2)


def test_max_steps_must_be_positive():
    with pytest.raises(ContractViolation):
        EpisodeConfig("rws_repeated", max_steps=0)


def test_lower_index_wins_contested_cell():
    world = make_world(EpisodeConfig("rws_repeated"))
    a, b = world.players
    a.pos, a.orientation = (5, 8), "E"
    b.pos, b.orientation = (7, 8), "W"
    step(world, [AtomicAction.STEP_FORWARD, AtomicAction.STEP_FORWARD])
    assert a.pos == (6, 8)
    assert b.pos == (7, 8)


def test_window_shapes():
    assert make_world(EpisodeConfig("rws_repeated")).rules.window.shape == (5, 5)
    assert make_world(EpisodeConfig("pd_repeated")).rules.window.shape == (5, 5)
    assert make_world(EpisodeConfig("rws_arena")).rules.window.shape == (11, 11)


def test_window_geometry_three_ahead_one_behind():
    w = Window(3, 1, 2)
    cells = {w.cell((10, 10), "N", f, r) for f, r in w.offsets()}
    assert min(y for _, y in cells) == 7 and max(y for _, y in cells) == 11
    assert min(x for x, _ in cells) == 8 and max(x for x, _ in cells) == 12


def test_corner_window_reports_walls_beyond_boundary():
    world = make_world(EpisodeConfig("rws_repeated"))
    p = world.players[0]
    p.pos, p.orientation = (1, 1), "N"
    obs = observe(world, 0)
    assert len(obs.view) == 5 and all(len(row) == 5 for row in obs.view)
    assert obs.view[0] == "#####"  # three rows ahead are off the map or wall
    assert all(world.layout.in_bounds(c) for c in obs.visible)


def test_respawning_player_observes_nothing():
    world = make_world(EpisodeConfig("rws_repeated"))
    world.players[0].pos = None
    obs = observe(world, 0)
    assert obs.position is None
    assert all(points == () for points in obs.entities.values())


def test_derive_seed_is_stable():
    assert derive_seed(7, "bot", 1) == derive_seed(7, "bot", 1)
    assert derive_seed(7, "bot", 1) != derive_seed(7, "bot", 2)
    assert 0 <= derive_seed(0) < 2**64


def test_noop_episode_has_ten_steps_and_zero_reward():
    r = run_episode("rws_repeated", 6, 0, NoopController(), max_steps=10)
    assert r.steps == 10
    assert r.rewards[0] == 0.0 and r.focal_reward == 0.0


def _collector():
    return make_bot(BotSpec("rws_repeated", "pure", 3, {"kind": "paper"}, seed=11))


def test_scripted_collector_meets_pure_rock_bot():
    r = run_episode("rws_repeated", 6, 0, _collector(), max_steps=1200)
    assert r.event_counts.get("interaction", 0) >= 1


def test_reward_ledger_matches_events():
    r = run_episode("rws_repeated", 6, 0, _collector(), max_steps=1200)
    sums = [0.0, 0.0]
    for ev in r.events:
        if ev["kind"] == "interaction":
            for idx, reward in zip(ev["players"], ev["rewards"]):
                sums[idx] += reward
    assert sums == pytest.approx(r.rewards, abs=1e-6)


def test_positions_stay_in_grid():
    world = make_world(EpisodeConfig("rws_repeated", seed=1, max_steps=300))
    actions = list(AtomicAction)
    rng = random.Random(1)
    while not world.done:
        step(world, [rng.choice(actions), rng.choice(actions)])
        for p in world.players:
            if p.pos is not None:
                assert world.layout.in_bounds(p.pos)
                assert p.pos not in world.layout.walls


def test_map_files_have_documented_sizes():
    assert (load_layout("rws_repeated").width, load_layout("rws_repeated").height) == (23, 15)
    assert (load_layout("pd_repeated").width, load_layout("pd_repeated").height) == (23, 15)
    assert (load_layout("rws_arena").width, load_layout("rws_arena").height) == (25, 24)
    assert len(load_layout("rws_arena").spawns) == 8


def test_layout_rejects_bad_input():
    with pytest.raises(LayoutError):
        parse_layout("NOT-A-MAP v1 x\n...")
    with pytest.raises(LayoutError):
        parse_layout("MINDGRID-MAP v2 x\n...")
    with pytest.raises(LayoutError):
        grid("...", "..")
    with pytest.raises(LayoutError):
        grid("..?")


def test_layout_legend():
    lay = grid("#Py", "Opb", "|SC", "TDg", "r..")
    assert lay.walls == {(0, 0)}
    assert lay.spawns == ((1, 0),)
    assert lay.resources[(2, 0)] == "rock_yellow"
    assert lay.fixtures[(0, 1)] == "pot"
    assert (0, 2) in lay.barrier
    assert lay.fixtures[(1, 2)] == "delivery" and lay.fixtures[(2, 2)] == "counter"
    assert lay.resources[(0, 4)] == "defect_red"

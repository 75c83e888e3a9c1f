from __future__ import annotations

import random

import pytest

from conftest import bfs_length, grid
from mindgrid.core import AtomicAction
from mindgrid.parsing import fire_at, interact, move_to, wait
from mindgrid.planner import (
    TIERS,
    FireAt,
    Interact,
    MoveTo,
    Situation,
    Unreachable,
    Wait,
    compile_call,
    compile_move_to,
    direction_to,
    plan_path,
    turn_towards,
)

# independent strafe table: action -> rotation steps clockwise from facing
_ROT = {
    AtomicAction.STEP_FORWARD: 0,
    AtomicAction.STEP_RIGHT: 1,
    AtomicAction.STEP_BACKWARD: 2,
    AtomicAction.STEP_LEFT: 3,
}
_CLOCKWISE = [(0, -1), (1, 0), (0, 1), (-1, 0)]  # N E S W


def walk(layout, src, orientation, actions):
    here = src
    facing = "NESW".index(orientation)
    for a in actions:
        dx, dy = _CLOCKWISE[(facing + _ROT[a]) % 4]
        here = (here[0] + dx, here[1] + dy)
        assert not layout.blocked(here)
    return here


def random_map(rng, size=15, density=0.2):
    rows = ["".join("#" if rng.random() < density else "." for _ in range(size)) for _ in range(size)]
    return grid(*rows)


def test_move_to_matches_bfs_on_random_maps():
    rng = random.Random(0)
    for _ in range(200):
        layout = random_map(rng)
        floor = [(x, y) for x in range(15) for y in range(15) if not layout.blocked((x, y))]
        src, dst = rng.sample(floor, 2)
        facing = rng.choice("NESW")
        expected = bfs_length(layout, src, dst)
        if expected is None:
            with pytest.raises(Unreachable):
                compile_move_to(layout, src, dst, facing)
            continue
        actions = compile_move_to(layout, src, dst, facing)
        assert len(actions) == expected
        assert walk(layout, src, facing, actions) == dst


def test_already_there_is_empty(open_grid):
    assert compile_move_to(open_grid, (2, 2), (2, 2)) == []


def test_outside_map_unreachable(open_grid):
    with pytest.raises(Unreachable):
        compile_move_to(open_grid, (0, 0), (9, 9))


def _resources(layout):
    return {pos: kind for pos, kind in layout.resources.items()}


def test_tier_one_detours_around_resource():
    layout = grid(".....", "..b..", ".....")
    plan = plan_path(layout, (0, 1), (4, 1), _resources(layout))
    assert plan.tier == TIERS[0]
    assert len(plan.cells) == 6 == bfs_length(layout, (0, 1), (4, 1), {(2, 1)})
    assert (2, 1) not in plan.cells


def test_tier_two_crosses_same_kind_only():
    layout = grid("#####", ".y.y.", "##p##", "..p..")
    plan = plan_path(layout, (0, 1), (3, 1), _resources(layout))
    assert plan.tier == TIERS[1]
    assert plan.cells == ((1, 1), (2, 1), (3, 1))


def test_tier_three_when_only_other_kinds_block():
    layout = grid("#####", ".p.y.", "#####")
    plan = plan_path(layout, (0, 1), (3, 1), _resources(layout))
    assert plan.tier == TIERS[2]
    assert len(plan.cells) == 3


def test_tier_is_least_permissive_feasible():
    rng = random.Random(5)
    for _ in range(150):
        rows = ["".join(rng.choice("....#yb") for _ in range(8)) for _ in range(8)]
        layout = grid(*rows)
        res = _resources(layout)
        floor = [(x, y) for x in range(8) for y in range(8) if not layout.blocked((x, y))]
        src, dst = rng.sample(floor, 2)
        if bfs_length(layout, src, dst) is None:
            continue
        plan = plan_path(layout, src, dst, res)
        chosen = TIERS.index(plan.tier)
        kind = res.get(dst)
        blockers = [
            {p for p in res if p != dst},
            {p for p, k in res.items() if k != kind and p != dst},
            set(),
        ]
        for tier in range(chosen):
            assert bfs_length(layout, src, dst, blockers[tier] - {src}) is None
        assert len(plan.cells) == bfs_length(layout, src, dst, blockers[chosen] - {src})


def test_direction_and_turns():
    assert direction_to((2, 2), (2, 0)) == "N"
    assert direction_to((2, 2), (5, 2)) == "E"
    assert direction_to((2, 2), (3, 3)) is None
    assert turn_towards("N", "N") is None
    assert turn_towards("N", "W") is AtomicAction.TURN_LEFT
    assert turn_towards("N", "E") is AtomicAction.TURN_RIGHT
    assert turn_towards("N", "S") is AtomicAction.TURN_RIGHT


def test_move_routine_walks_and_finishes(open_grid):
    routine = compile_call(move_to((0, 0), (2, 1)))
    assert isinstance(routine, MoveTo)
    pos, steps = (0, 0), 0
    while True:
        action = routine.next_action(Situation(open_grid, pos, "N"))
        if action is None:
            break
        pos = walk(open_grid, pos, "N", [action])
        steps += 1
    assert pos == (2, 1) and steps == 3 and routine.status == "done"


def test_fire_at_turns_then_fires(open_grid):
    routine = compile_call(fire_at((3, 2)))
    assert isinstance(routine, FireAt)
    sit = Situation(open_grid, (1, 2), "N", opponents={1: (3, 2)})
    assert routine.next_action(sit) is AtomicAction.TURN_RIGHT
    sit = Situation(open_grid, (1, 2), "E", opponents={1: (3, 2)})
    assert routine.next_action(sit) is AtomicAction.FIRE_BEAM
    sit = Situation(open_grid, (1, 2), "E", interacted=True)
    assert routine.next_action(sit) is None and routine.note == "interaction"


def test_fire_at_respects_beam_length():
    layout = grid(*["......" for _ in range(3)])
    routine = FireAt(fire_at((0, 1)))
    sit = Situation(layout, (0, 1), "E", opponents={1: (5, 1)}, beam_length=3)
    assert routine.next_action(sit) is not AtomicAction.FIRE_BEAM


def test_fire_at_budget():
    layout = grid(*["....." for _ in range(5)])
    routine = FireAt(fire_at((2, 2)), budget=3)
    sit = Situation(layout, (2, 2), "N")
    actions = [routine.next_action(sit) for _ in range(5)]
    assert actions[3] is None and routine.note == "budget exhausted"


def _kitchen_sit(pos, orientation, **kw):
    layout = grid("#T#", "...", "...")
    return Situation(layout, pos, orientation, fixtures={(1, 0): "tomato_dispenser"}, **kw)


def test_interact_walks_faces_and_uses():
    routine = compile_call(interact((1, 0)))
    assert isinstance(routine, Interact)
    sit = _kitchen_sit((0, 2), "N")
    first = routine.next_action(sit)
    assert first in (AtomicAction.STEP_FORWARD, AtomicAction.STEP_RIGHT)
    assert routine.next_action(_kitchen_sit((1, 1), "E")) is AtomicAction.TURN_LEFT
    assert routine.next_action(_kitchen_sit((1, 1), "N")) is AtomicAction.FIRE_BEAM
    assert routine.next_action(_kitchen_sit((1, 1), "N", last_result="picked_tomato")) is None
    assert routine.status == "done"


def test_interact_fails_when_blocked():
    routine = Interact(interact((1, 0)))
    routine.next_action(_kitchen_sit((1, 1), "N"))
    routine.next_action(_kitchen_sit((1, 1), "N", last_result="blocked"))
    assert routine.status == "failed"


def test_interact_without_fixture_fails():
    routine = Interact(interact((2, 2)))
    assert routine.next_action(_kitchen_sit((1, 1), "N")) is None
    assert routine.status == "failed"


def test_wait_noops_until_cooked():
    layout = grid("#O#", "...", "...")
    fixtures = {(1, 0): "pot"}
    routine = compile_call(wait((1, 0)))
    assert isinstance(routine, Wait)
    sit = Situation(layout, (1, 1), "N", fixtures=fixtures, pots={(1, 0): "cooking_pot"})
    assert [routine.next_action(sit) for _ in range(3)] == [AtomicAction.NOOP] * 3
    sit = Situation(layout, (1, 1), "N", fixtures=fixtures, pots={(1, 0): "cooked_pot"})
    assert routine.next_action(sit) is None and routine.status == "done"


def test_wait_walks_next_to_pot_first():
    layout = grid("#O#", "...", "...")
    routine = Wait(wait((1, 0)))
    sit = Situation(layout, (0, 2), "N", fixtures={(1, 0): "pot"}, pots={(1, 0): "cooking_pot"})
    assert routine.next_action(sit) in (AtomicAction.STEP_FORWARD, AtomicAction.STEP_RIGHT)


def test_wait_budget():
    layout = grid("#O#", "...")
    routine = Wait(wait((1, 0)), budget=2)
    sit = Situation(layout, (1, 1), "N", fixtures={(1, 0): "pot"}, pots={(1, 0): "empty_pot"})
    assert [routine.next_action(sit) for _ in range(3)] == [AtomicAction.NOOP, AtomicAction.NOOP, None]
    assert routine.note == "budget exhausted"

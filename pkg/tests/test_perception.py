from __future__ import annotations

import random

import pytest

from conftest import REFERENCE, reference_scene
from mindgrid.core import AtomicAction, EpisodeConfig, make_world, observe, step
from mindgrid.perception import (
    EntityMemory,
    InteractionRecord,
    StructuredObservation,
    display_name,
    parse_observation,
    render_memory,
    serialize_observation,
    serialize_status,
    update_memory,
)


def test_reference_string_from_structure():
    obs = StructuredObservation(
        player=0,
        position=(21, 4),
        orientation="S",
        entities={
            "yellow_box": [(13, 10), (14, 11)],
            "blue_box": [],
            "purple_box": [(13, 11), (15, 11)],
        },
    )
    assert serialize_observation(obs) == REFERENCE


def test_reference_string_from_world():
    world = reference_scene()
    assert (world.layout.width, world.layout.height) == (23, 15)
    assert serialize_observation(observe(world, 0, full=True)) == REFERENCE


def test_window_hides_far_boxes():
    obs = observe(reference_scene(), 0)
    assert all(points == () for points in obs.entities.values())


def test_parse_inverts_serialize():
    obs = observe(reference_scene(), 0, full=True)
    back = parse_observation(serialize_observation(obs), step=obs.step, inventory=obs.inventory)
    assert back == obs


def test_parse_round_trip_on_random_worlds():
    rng = random.Random(3)
    actions = list(AtomicAction)
    for substrate in ("rws_repeated", "rws_arena", "pd_repeated", "cooking_asymmetric"):
        world = make_world(EpisodeConfig(substrate, seed=2, max_steps=60))
        while not world.done:
            step(world, [rng.choice(actions) for _ in world.players])
            for i in range(len(world.players)):
                obs = observe(world, i)
                text = serialize_observation(obs)
                assert parse_observation(text, step=obs.step, inventory=obs.inventory, held=obs.held) == obs


def test_other_players_listed_after_self():
    world = make_world(EpisodeConfig("rws_repeated"))
    a, b = world.players
    a.pos, a.orientation = (10, 8), "E"
    b.pos, b.orientation = (12, 8), "W"
    text = serialize_observation(observe(world, 0))
    assert text.startswith("Player Position: {'player_0-E': [(10, 8)], 'player_1-W': [(12, 8)]}")


def test_respawning_player_text():
    world = make_world(EpisodeConfig("rws_repeated"))
    world.players[0].pos, world.players[0].orientation = None, "N"
    text = serialize_observation(observe(world, 0))
    assert text.startswith("Player Position: {'player_0-N': []}")
    assert parse_observation(text).position is None


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_observation("Position: {}")
    with pytest.raises(ValueError):
        parse_observation("Player Position: {'me': [(1, 1)]}")
    with pytest.raises(ValueError):
        parse_observation("Player Position: {'player_0-N': [(1, 1)]}, Observable Yellow Box Locations: [(1,")


def test_status_lines():
    obs = StructuredObservation(0, (1, 1), "N", inventory=(2, 1, 1), step=7)
    assert serialize_status(obs) == "Step: 7\nInventory: [2, 1, 1]"
    cook = StructuredObservation(0, (1, 1), "N", held=None, step=3)
    assert serialize_status(cook) == "Step: 3\nHeld Item: nothing"


def test_display_names():
    assert display_name("yellow_box") == "Yellow Box"
    assert display_name("pot_with_1_tomato") == "Pot With 1 Tomato"


def _obs(step, visible, entities, others=()):
    return StructuredObservation(
        0, (5, 5), "N", entities=entities, others=others, step=step, visible=frozenset(visible)
    )


def test_memory_keeps_out_of_view_and_drops_vanished():
    mem = EntityMemory(["yellow_box"])
    update_memory(mem, _obs(1, {(1, 1), (2, 2)}, {"yellow_box": [(1, 1), (2, 2)]}))
    # (1, 1) back in view and empty: dropped; (2, 2) out of view: kept
    update_memory(mem, _obs(4, {(1, 1)}, {"yellow_box": []}))
    assert mem.get("yellow_box") == {(2, 2): 1}
    update_memory(mem, _obs(6, {(2, 2)}, {"yellow_box": [(2, 2)]}))
    assert mem.get("yellow_box") == {(2, 2): 6}


def test_memory_tracks_players():
    mem = EntityMemory(["yellow_box"])
    update_memory(mem, _obs(1, {(3, 3)}, {}, others=((1, (3, 3), "N"),)))
    update_memory(mem, _obs(2, {(7, 7)}, {}))
    assert mem.players() == {1: ((3, 3), 1)}
    update_memory(mem, _obs(3, {(3, 3)}, {}))
    assert mem.players() == {}


def test_render_memory_with_distances():
    mem = EntityMemory(["yellow_box", "blue_box"])
    update_memory(mem, _obs(1087, {(13, 3)}, {"yellow_box": [(13, 3)], "blue_box": []}))
    update_memory(mem, _obs(1090, {(4, 4)}, {}, others=((1, (4, 4), "E"),)))
    # distances from (11, 3): |13-11| + 0 = 2 and 7 + 1 = 8
    assert render_memory(mem, (11, 3)) == "{'yellow_box': [((13, 3), 1087, 2)], 'player_1': [((4, 4), 1090, 8)]}"
    assert render_memory(mem, None) == "{'yellow_box': [((13, 3), 1087)], 'player_1': [((4, 4), 1090)]}"


def test_interaction_record_rejects_nan():
    with pytest.raises(ValueError):
        InteractionRecord(1, 1, (2, 1, 1), float("nan"))

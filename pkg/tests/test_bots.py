from __future__ import annotations

import random
from collections import Counter
from fractions import Fraction

import pytest

from mindgrid.bots import (
    BotSpec,
    BotState,
    KitchenBotState,
    ScenarioError,
    build_scenario,
    cooking_partner_policy,
    make_bot,
    mixture_probabilities,
    pd_next_play,
    rws_next_target,
    scenario_ids,
    side_role,
    SCENARIO_COUNTS,
)
from mindgrid.core import AtomicAction, ContractViolation, EpisodeConfig, make_world, observe
from mindgrid.harness import run_episode
from mindgrid.matrix import COOPERATE, DEFECT, PAPER, ROCK, RWS_PLAYS, SCISSORS, counter


def rws(variant, commitment=5, seed=0, **params):
    return BotSpec("rws_repeated", variant, commitment, params, seed)


def pd(variant, **params):
    return BotSpec("pd_repeated", variant, 3, params, 0)


def test_pure_bot_is_constant():
    spec, st = rws("pure", kind=SCISSORS), BotState()
    for opp in random.Random(0).choices(RWS_PLAYS, k=30):
        assert rws_next_target(spec, st) == (SCISSORS, 5)
        st.record(SCISSORS, opp)


def test_pure_random_kind_is_drawn_once():
    spec, st = rws("pure", kind="random"), BotState(rng=random.Random(4))
    first = rws_next_target(spec, st)[0]
    for _ in range(10):
        st.record(first, ROCK)
        assert rws_next_target(spec, st)[0] == first


def test_best_response_counters_last_play():
    spec, st = rws("best_response"), BotState(rng=random.Random(1))
    assert rws_next_target(spec, st)[0] in RWS_PLAYS
    for opp in (ROCK, PAPER, SCISSORS, SCISSORS):
        st.record(rws_next_target(spec, st)[0], opp)
        assert rws_next_target(spec, st)[0] == counter(opp)


def test_flip_after_two_interactions():
    spec = rws("flip", commitment=1, kind=ROCK, flip_after=2, commitment_after=5)
    st = BotState()
    seen = []
    for _ in range(5):
        seen.append(rws_next_target(spec, st))
        st.record(seen[-1][0], PAPER)
    # rock twice at weak commitment, then scissors (what rock beats)
    assert seen == [(ROCK, 1), (ROCK, 1), (SCISSORS, 5), (SCISSORS, 5), (SCISSORS, 5)]


def test_gullible_counters_most_frequent():
    spec, st = rws("gullible"), BotState(rng=random.Random(0))
    for opp in (ROCK, ROCK, PAPER):
        st.record(PAPER, opp)
    assert rws_next_target(spec, st)[0] == PAPER


def test_tit_for_tat_mirrors():
    spec, st = pd("tit_for_tat", noise=0.0), BotState()
    assert pd_next_play(spec, st) == COOPERATE
    for opp in [DEFECT, COOPERATE, DEFECT, DEFECT, COOPERATE]:
        st.record(pd_next_play(spec, st), opp)
        assert pd_next_play(spec, st) == opp


@pytest.mark.parametrize("threshold", [1, 2])
def test_grim_absorbs(threshold):
    spec, st = pd("grim", threshold=threshold), BotState()
    plays = []
    for opp in [COOPERATE, DEFECT, COOPERATE, DEFECT, COOPERATE, COOPERATE, COOPERATE]:
        plays.append(pd_next_play(spec, st))
        st.record(plays[-1], opp)
    plays.append(pd_next_play(spec, st))
    first_defect = plays.index(DEFECT)
    # triggered right after the threshold-th defection, then never forgives
    assert first_defect == (2 if threshold == 1 else 4)
    assert all(p == DEFECT for p in plays[first_defect:])


def test_unconditional_and_switching():
    st = BotState()
    assert pd_next_play(pd("cooperator"), st) == COOPERATE
    assert pd_next_play(pd("defector"), st) == DEFECT
    spec = pd("cooperate_then_defect", switch_at=2)
    plays = []
    for _ in range(4):
        plays.append(pd_next_play(spec, st))
        st.record(plays[-1], COOPERATE)
    assert plays == [COOPERATE, COOPERATE, DEFECT, DEFECT]


def test_corrigible_turns_into_tit_for_tat():
    spec, st = pd("corrigible", trigger=2, noise=0.0), BotState()
    assert pd_next_play(spec, st) == DEFECT
    st.record(DEFECT, DEFECT)
    assert pd_next_play(spec, st) == DEFECT
    st.record(DEFECT, DEFECT)
    assert pd_next_play(spec, st) == DEFECT  # tit-for-tat of a defection
    st.record(DEFECT, COOPERATE)
    assert pd_next_play(spec, st) == COOPERATE


def test_spec_validation():
    with pytest.raises(ContractViolation):
        rws("pure")
    with pytest.raises(ContractViolation):
        rws("pure", commitment=2, kind=ROCK)
    with pytest.raises(ContractViolation):
        rws("tit_for_tat")
    with pytest.raises(ContractViolation):
        pd("grim", threshold=0)
    with pytest.raises(ContractViolation):
        pd("tit_for_tat", noise=1.5)


def test_scenario_catalog_sizes():
    for substrate, n in SCENARIO_COUNTS.items():
        assert scenario_ids(substrate) == list(range(n))
    with pytest.raises(ScenarioError):
        build_scenario("rws_repeated", 9, 0)


def test_mixture_probabilities_are_exact():
    probs = [p for p, _ in mixture_probabilities("rws_repeated", 2)]
    assert probs == [Fraction(3, 4), Fraction(1, 4)]
    probs = [p for p, _ in mixture_probabilities("rws_repeated", 3)]
    assert probs == [Fraction(1, 3)] * 3


def test_build_scenario_is_seeded_and_sized():
    assert build_scenario("rws_arena", 0, 3) == build_scenario("rws_arena", 0, 3)
    assert len(build_scenario("rws_arena", 0, 3)) == 7
    assert all(b.commitment in (3, 5) for b in build_scenario("rws_arena", 0, 3))
    kinds = {b.params["kind"] for s in range(30) for b in build_scenario("rws_arena", 0, s)}
    assert kinds == set(RWS_PLAYS)


def test_mixture_frequency_small_sample():
    draws = Counter(build_scenario("rws_repeated", 2, s)[0].variant for s in range(2000))
    assert abs(draws["pure"] / 2000 - 0.75) < 0.04


def test_side_roles():
    world = make_world(EpisodeConfig("cooking_asymmetric"))
    x = world.rules.barrier_x
    # left: tomato dispenser sits next to the pots; right: the delivery does
    assert side_role(world.layout, x, 0) == "tomatoes"
    assert side_role(world.layout, x, 1) == "dishes"


def _partner_state(world, player, seed=0):
    x = world.rules.barrier_x
    side = 0 if world.players[player].pos[0] < x else 1
    return KitchenBotState(random.Random(seed), world.layout, x, side, side_role(world.layout, x, side))


def test_unhelpful_partner_never_moves():
    world = make_world(EpisodeConfig("cooking_asymmetric"))
    spec = BotSpec("cooking_asymmetric", "unhelpful", 1)
    st = _partner_state(world, 1)
    assert cooking_partner_policy(spec, observe(world, 1, full=True), st) is AtomicAction.NOOP


def test_semi_skilled_without_errors_matches_skilled():
    world = make_world(EpisodeConfig("cooking_asymmetric"))
    obs = observe(world, 1, full=True)
    skilled = BotSpec("cooking_asymmetric", "skilled", 1)
    semi = BotSpec("cooking_asymmetric", "semi_skilled", 1, {"error": 0.0})
    assert cooking_partner_policy(skilled, obs, _partner_state(world, 1)) == cooking_partner_policy(
        semi, obs, _partner_state(world, 1)
    )


def test_semi_skilled_idles_at_error_rate():
    world = make_world(EpisodeConfig("cooking_asymmetric"))
    obs = observe(world, 1, full=True)
    spec = BotSpec("cooking_asymmetric", "semi_skilled", 1, {"error": 0.3})
    st = _partner_state(world, 1, seed=5)
    idle = sum(cooking_partner_policy(spec, obs, st) is AtomicAction.NOOP for _ in range(4000))
    assert abs(idle / 4000 - 0.3) < 0.03


def test_skilled_pair_delivers():
    focal = make_bot(BotSpec("cooking_asymmetric", "skilled", 1, seed=1))
    r = run_episode("cooking_asymmetric", 0, 0, focal, max_steps=400)
    assert r.deliveries >= 3
    assert r.rewards[0] == r.rewards[1] == 20.0 * r.deliveries

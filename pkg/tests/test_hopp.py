import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ScriptedRng
from sleeping_experts.core import DomainError, PreconditionError, Ranking, RoundTrace, sigma_choice
from sleeping_experts.envgen import GeneratorSpec, generate
from sleeping_experts.hopp import (
    COMMON_ACTION,
    HOPP,
    NO_GOOD_PAIR,
    TRIANGLE,
    PairPairHedgeBank,
    classify,
    find_good_pairs,
    hopp_bound,
    hopp_certificate_comparator_cost,
    hopp_step,
    local_matchups,
    select,
)
from sleeping_experts.rng import Stream

FOUR = {((0, 1), (2, 3)): None, ((0, 2), (1, 3)): None, ((0, 3), (1, 2)): None}


def samples(*winners):
    return {k: w for k, w in zip(FOUR, winners)}


def test_vacuous_good_pairs_for_three_actions():
    good = find_good_pairs({4, 5, 6}, {})
    assert good == ((4, 5), (4, 6), (5, 6))
    assert classify([4, 5, 6], good) == (TRIANGLE, None, (4, 5, 6))


def test_common_action_example():
    good = find_good_pairs({0, 1, 2, 3}, samples((0, 1), (0, 2), (0, 3)))
    assert good == ((0, 1), (0, 2), (0, 3))
    assert classify([0, 1, 2, 3], good) == (COMMON_ACTION, 0, None)


def test_triangle_example():
    good = find_good_pairs({0, 1, 2, 3}, samples((0, 1), (0, 2), (1, 2)))
    assert set(good) == {(0, 1), (0, 2), (1, 2)}
    assert classify([0, 1, 2, 3], good)[0] == TRIANGLE


def test_common_action_need_not_be_lowest_id():
    good = find_good_pairs({0, 1, 2, 3}, samples((2, 3), (1, 3), (0, 3)))
    assert classify([0, 1, 2, 3], good)[:2] == (COMMON_ACTION, 3)


def test_no_good_pair_plays_lowest_id():
    assert classify([5, 7, 9], ())[:2] == (NO_GOOD_PAIR, 5)
    rng = Stream.from_key(0)
    seen = 0
    for _ in range(300):
        out = select([2, 4, 5, 7, 9], PairPairHedgeBank(), rng)
        if out.branch == NO_GOOD_PAIR:
            seen += 1
            assert out.good_pairs == () and out.chosen == 2
    assert seen > 0


def test_missing_sample_is_an_internal_error():
    with pytest.raises(KeyError):
        find_good_pairs({0, 1, 2, 3}, {((0, 1), (2, 3)): (0, 1)})


def test_local_matchups_are_disjoint_and_complete():
    for k in range(2, 8):
        pairs, matchups = local_matchups(k)
        assert len(pairs) == math.comb(k, 2)
        assert len(matchups) == 3 * math.comb(k, 4)
        for p, q in matchups:
            assert not set(pairs[p]) & set(pairs[q])


def test_select_consumes_uniforms_in_matchup_order():
    bank = PairPairHedgeBank()
    out = select([0, 1, 2, 3], bank, ScriptedRng([0.1, 0.1, 0.1]))
    assert out.branch == COMMON_ACTION and out.chosen == 0
    rng = ScriptedRng([0.1, 0.1, 0.9, 0.99])
    out = select([0, 1, 2, 3], bank, rng)
    assert out.branch == TRIANGLE and out.triple_sample == ((0, 1, 2), 2) and out.chosen == 2
    assert rng.used == 4


def test_step_two_actions():
    chosen, cert = hopp_step(PairPairHedgeBank(), RoundTrace(1, (3, 8), (0, 0)), ScriptedRng([]))
    assert chosen == 3
    assert cert.learner_cost == 0
    assert hopp_certificate_comparator_cost(cert, Ranking((8, 3, 0, 1, 2, 4, 5, 6, 7))) == (0, 0)


def test_step_common_action_loss_has_witness():
    # Z = {2, 3}; samples make 0 the common action, which has loss 1.
    rnd = RoundTrace(1, (0, 1, 2, 3), (1, 1, 0, 0))
    chosen, cert = hopp_step(PairPairHedgeBank(), rnd, ScriptedRng([0.1, 0.1, 0.1]))
    assert chosen == 0 and rnd.loss(chosen) == 1
    assert cert.learner_cost >= 1
    assert cert.pair_losses[((0, 1), (2, 3))] == {(0, 1): 1.0, (2, 3): 0.0}


def test_step_triangle_charges_triple():
    # Z = {0, 1}; triangle on {0, 1, 2}; the triple draw lands on 2.
    rnd = RoundTrace(1, (0, 1, 2, 3), (0, 0, 1, 1))
    chosen, cert = hopp_step(PairPairHedgeBank(), rnd, ScriptedRng([0.1, 0.1, 0.9, 0.99]))
    assert chosen == 2
    assert cert.triple_losses[(0, 1, 2)] == {0: 0.0, 1: 0.0, 2: 1.0}
    assert cert.learner_cost >= 1


def test_step_rejects_wrong_zero_count():
    with pytest.raises(PreconditionError):
        hopp_step(PairPairHedgeBank(), RoundTrace(2, (0, 1, 2), (0, 1, 1)), ScriptedRng([0.5] * 5))


def test_bank_rejects_overlapping_matchup():
    with pytest.raises(DomainError):
        PairPairHedgeBank().pair_hedge(((0, 1), (1, 2)))


def brute_force_costs(rnd, Z, N, sigma):
    """Sum of c(sigma(X,Y)) over all disjoint pairs and d(sigma(S)) over all triples of [N]."""
    avail = set(rnd.available)
    pair_cost = 0
    pairs = list(itertools.combinations(range(N), 2))
    for X, Y in itertools.combinations(pairs, 2):
        if set(X) & set(Y):
            continue
        pick = X if sigma_choice(sigma, X + Y) in X else Y
        other = Y if pick == X else X
        if tuple(other) == Z and set(pick) <= avail:
            pair_cost += 1
    triple_cost = 0
    for S in itertools.combinations(range(N), 3):
        if set(Z) <= set(S) <= avail:
            triple_cost += rnd.loss(sigma_choice(sigma, S))
    return pair_cost, triple_cost


@given(st.integers(4, 8), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_comparator_cost_matches_brute_force(N, seed):
    env = generate(GeneratorSpec("uniform-random", N, min(N, 6), 15, 0.0, "exactly-two", seed))
    gen = np.random.default_rng(seed)
    learner = HOPP(Stream.from_key(seed))
    for rnd in env.rounds:
        learner.act(rnd.available)
        learner.learn(rnd)
        cert = learner.certificate
        for _ in range(5):
            sigma = Ranking.random(N, gen)
            assert hopp_certificate_comparator_cost(cert, sigma) == brute_force_costs(rnd, cert.zero_pair, N, sigma)


@given(st.integers(2, 9), st.integers(2, 7), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_per_round_guarantees(N, K, seed):
    K = min(K, N)
    env = generate(GeneratorSpec("uniform-random", N, K, 60, 0.0, "exactly-two", seed))
    gen = np.random.default_rng(seed)
    rankings = [Ranking.random(N, gen) for _ in range(20)]
    learner = HOPP(Stream.from_key(seed))
    for rnd in env.rounds:
        before = learner.bank.snapshot()
        a = learner.act(rnd.available)
        learner.learn(rnd)
        out, cert = learner.outcome, learner.certificate
        for X, Y in itertools.combinations(out.good_pairs, 2):
            assert set(X) & set(Y)
        # learner cost recomputed from the samples
        Z = cert.zero_pair
        cost = sum(1 for key, w in out.pair_samples.items() if Z in key and w != Z)
        if out.triple_sample is not None:
            S, b = out.triple_sample
            cost += int(set(Z) <= set(S) and b not in Z)
        assert cost == cert.learner_cost
        assert rnd.loss(a) <= cert.learner_cost
        for sigma in rankings:
            sl = rnd.loss(sigma_choice(sigma, rnd.available))
            pc, tc = hopp_certificate_comparator_cost(cert, sigma)
            assert pc <= math.comb(K - 2, 2) * sl and tc <= (K - 2) * sl
        after = learner.bank.snapshot()
        allowed = set(cert.pair_losses) | set(cert.triple_losses)
        for k, w in after.items():
            if k not in allowed:
                assert before.get(k, (0.0,) * len(w)) == w


def test_hopp_bound_forms():
    e = math.e
    tight = hopp_bound(1.0, 6, 8, 5)
    ratio = math.comb(4, 2) + 4
    additive = 3 * math.comb(8, 4) * math.log(2) + math.comb(8, 3) * math.log(3)
    assert tight == pytest.approx(e / (e - 1) * (ratio * 5 + additive))
    loose = hopp_bound(1.0, 6, 8, 5, pair_term=True)
    assert loose - tight == pytest.approx(math.comb(8, 2) * math.log(2) * e / (e - 1))

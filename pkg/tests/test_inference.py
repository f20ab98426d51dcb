import math
import random

import pytest

from pamine.corpus import InvariantError, TokenTable, is_subsequence
from pamine.inference import (
    SequenceCache,
    covering_objective,
    greedy_cover,
    supported_patterns,
)
from pamine.model import Covering, Occurrence, PatternSet

from oracles import (
    best_covering_value,
    direct_joint_value,
    enumerate_position_coverings,
)

NEG_INF = float("-inf")


def make_pattern_set(items):
    pats = PatternSet()
    for pattern, probs in items:
        pats.add(pattern, probs, 0)
    return pats


def covering_from_positions(placed):
    by_pattern = {}
    for pattern, positions in placed:
        by_pattern.setdefault(pattern, []).append(tuple(positions))
    occurrences = []
    for pattern, position_lists in by_pattern.items():
        for n, positions in enumerate(sorted(position_lists), start=1):
            occurrences.append(Occurrence(pattern, n, positions))
    occurrences.sort(key=lambda o: o.positions)
    return Covering(tuple(occurrences))


def random_instance(rng, max_len=8, max_multis=6, alphabet=4):
    length = rng.randint(1, max_len)
    tokens = tuple(rng.randrange(alphabet) for _ in range(length))
    prob_map = {}
    for tok in range(alphabet):
        vec = tuple(rng.uniform(0.05, 0.95) for _ in range(max_len))
        prob_map[(tok,)] = vec
    for _ in range(rng.randint(0, max_multis)):
        size = rng.randint(2, 3)
        pattern = tuple(rng.randrange(alphabet) for _ in range(size))
        if pattern in prob_map:
            continue
        vec = tuple(rng.uniform(0.05, 0.95) for _ in range(rng.randint(1, 2)))
        prob_map[pattern] = vec
    return tokens, prob_map


class TestSupportedPatterns:
    def test_containment_filter(self):
        pats = make_pattern_set(
            [((1,), (0.5,)), ((2,), (0.5,)), ((3,), (0.5,)), ((1, 2), (0.5,))]
        )
        got = supported_patterns((1, 2), pats, SequenceCache())
        assert got == [(1,), (2,), (1, 2)]

    def test_empty_sequence(self):
        pats = make_pattern_set([((1,), (0.5,))])
        assert supported_patterns((), pats, SequenceCache()) == []

    def test_incremental_refresh(self):
        pats = make_pattern_set([((1,), (0.5,)), ((2,), (0.5,))])
        cache = SequenceCache()
        assert supported_patterns((1, 2), pats, cache) == [(1,), (2,)]
        assert cache.version == 2
        pats.add((1, 2), (0.5,), 0)
        pats.add((2, 1), (0.5,), 0)
        assert supported_patterns((1, 2), pats, cache) == [(1,), (2,), (1, 2)]
        assert cache.version == 4

    def test_stale_cache_from_the_future_is_an_error(self):
        pats = make_pattern_set([((1,), (0.5,))])
        cache = SequenceCache(version=5)
        with pytest.raises(InvariantError):
            supported_patterns((1,), pats, cache)

    def test_matches_brute_scan(self):
        rng = random.Random(21)
        for _ in range(100):
            tokens, prob_map = random_instance(rng, max_len=8, max_multis=16)
            pats = make_pattern_set(list(prob_map.items()))
            got = supported_patterns(tokens, pats, SequenceCache())
            want = [p for p in pats if is_subsequence(p, tokens)]
            assert got == want


class TestGreedyCover:
    def test_forced_singleton_cover(self):
        pats = make_pattern_set([((0,), (0.5,)), ((1,), (0.5,))])
        covering = greedy_cover((0, 1), pats, SequenceCache())
        assert covering.counts() == {(0,): 1, (1,): 1}
        assert covering.is_partition_of((0, 1))

    def test_empty_sequence(self):
        pats = make_pattern_set([((0,), (0.5,))])
        assert greedy_cover((), pats, SequenceCache()).occurrences == ()

    def test_missing_singleton_is_fatal(self):
        pats = make_pattern_set([((0,), (0.5,))])
        with pytest.raises(InvariantError):
            greedy_cover((0, 1), pats, SequenceCache())

    def test_prefers_strong_pair_and_matches_exhaustive(self):
        pats = make_pattern_set(
            [((1,), (0.01,)), ((2,), (0.01,)), ((1, 2), (0.9,))]
        )
        covering = greedy_cover((1, 2), pats, SequenceCache())
        assert covering.counts() == {(1, 2): 1}
        prob_map = {p: pats.entry(p).probs for p in pats}
        want = best_covering_value((1, 2), prob_map)
        got = covering_objective((1, 2), covering, pats)
        assert got == pytest.approx(want, rel=1e-12)

    def test_general_and_specific_compete_exclusively(self):
        table = TokenTable()
        init = table.intern("builder.<init>")
        common = table.intern("builder.setCommonProperty")
        rare = table.intern("builder.setRareValue")
        build = table.intern("builder.build")
        general = (init, common, build)
        specific = (init, common, rare, build)
        pats = make_pattern_set(
            [
                ((init,), (0.05,)),
                ((common,), (0.05,)),
                ((rare,), (0.05,)),
                ((build,), (0.05,)),
                (general, (0.4,)),
                (specific, (0.35,)),
            ]
        )
        client = (init, common, rare, build)
        covering = greedy_cover(client, pats, SequenceCache())
        counts = covering.counts()
        # Exactly one of the two multi-token patterns explains the calls.
        assert (counts.get(general, 0) >= 1) != (counts.get(specific, 0) >= 1)
        assert covering.is_partition_of(client)

    def test_always_complete_and_exclusive(self):
        rng = random.Random(31)
        for _ in range(200):
            tokens, prob_map = random_instance(rng)
            pats = make_pattern_set(list(prob_map.items()))
            covering = greedy_cover(tokens, pats, SequenceCache())
            assert covering.is_partition_of(tokens)

    def test_deterministic(self):
        rng = random.Random(41)
        for _ in range(50):
            tokens, prob_map = random_instance(rng)
            items = list(prob_map.items())
            first = greedy_cover(tokens, make_pattern_set(items), SequenceCache())
            second = greedy_cover(tokens, make_pattern_set(items), SequenceCache())
            assert first == second

    def test_never_beats_exhaustive_optimum(self):
        rng = random.Random(51)
        for _ in range(100):
            tokens, prob_map = random_instance(rng, max_len=6, max_multis=4)
            pats = make_pattern_set(list(prob_map.items()))
            covering = greedy_cover(tokens, pats, SequenceCache())
            got = covering_objective(tokens, covering, pats)
            best = best_covering_value(tokens, prob_map)
            assert got <= best + 1e-9

    def test_zero_probability_singletons_still_terminate(self):
        # A dead chain can still be used as a last resort; the covering
        # completes with probability zero rather than failing.
        pats = make_pattern_set([((0,), (0.0,)), ((1,), (0.5,))])
        covering = greedy_cover((0, 1, 0), pats, SequenceCache())
        assert covering.is_partition_of((0, 1, 0))
        assert covering_objective((0, 1, 0), covering, pats) == NEG_INF

    def test_repeated_occurrences_get_contiguous_indices(self):
        pats = make_pattern_set([((0,), (0.6, 0.6, 0.6)), ((1,), (0.5,))])
        covering = greedy_cover((0, 1, 0, 0), pats, SequenceCache())
        indices = sorted(
            occ.index for occ in covering.occurrences if occ.pattern == (0,)
        )
        assert indices == [1, 2, 3]


class TestCoveringObjective:
    def test_certain_singleton(self):
        pats = make_pattern_set([((0,), (1.0,))])
        covering = Covering((Occurrence((0,), 1, (0,)),))
        assert covering_objective((0,), covering, pats) == 0.0

    def test_incomplete_is_neg_inf(self):
        pats = make_pattern_set([((0,), (0.5,)), ((1,), (0.5,))])
        covering = Covering((Occurrence((0,), 1, (0,)),))
        assert covering_objective((0, 1), covering, pats) == NEG_INF

    def test_orders_like_normalized_posterior(self):
        rng = random.Random(61)
        for _ in range(30):
            tokens, prob_map = random_instance(rng, max_len=6, max_multis=3)
            pats = make_pattern_set(list(prob_map.items()))
            coverings = [
                covering_from_positions(placed)
                for placed in enumerate_position_coverings(tokens, list(prob_map))
            ]
            joints = [covering_objective(tokens, z, pats) for z in coverings]
            finite = [v for v in joints if v > NEG_INF]
            if not finite:
                continue
            top = max(finite)
            evidence = top + math.log(
                sum(math.exp(v - top) for v in finite)
            )
            posteriors = [
                v - evidence if v > NEG_INF else NEG_INF for v in joints
            ]
            order_a = sorted(range(len(joints)), key=lambda i: joints[i])
            order_b = sorted(range(len(joints)), key=lambda i: posteriors[i])
            assert order_a == order_b

    def test_agrees_with_direct_value_on_greedy_output(self):
        rng = random.Random(71)
        for _ in range(50):
            tokens, prob_map = random_instance(rng, max_len=7)
            pats = make_pattern_set(list(prob_map.items()))
            covering = greedy_cover(tokens, pats, SequenceCache())
            got = covering_objective(tokens, covering, pats)
            want = direct_joint_value(covering.counts(), prob_map)
            if want == NEG_INF:
                assert got == NEG_INF
            else:
                assert got == pytest.approx(want, rel=1e-9)

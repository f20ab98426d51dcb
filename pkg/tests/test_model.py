import math
import random
from collections import Counter

import pytest

from pamine.model import (
    Covering,
    Occurrence,
    OccurrenceProbabilities,
    PatternSet,
    count_probability,
    interleaving_count,
    log_interleaving_count,
    log_joint,
    parse_pattern_set,
    sample_sequence,
    serialize_pattern_set,
)
from pamine.corpus import TokenTable

from oracles import count_arrangements, direct_joint_value

NEG_INF = float("-inf")


def make_pattern_set(items):
    pats = PatternSet()
    for pattern, probs in items:
        pats.add(pattern, probs, 0)
    return pats


class TestInterleavingCount:
    def test_two_pairs(self):
        assert interleaving_count([2, 2]) == 6

    @pytest.mark.parametrize("k", range(1, 9))
    def test_single_pattern(self, k):
        assert interleaving_count([k]) == 1

    def test_three_singletons(self):
        assert interleaving_count([1, 1, 1]) == count_arrangements([1, 1, 1]) == 6

    def test_empty_multiset(self):
        assert interleaving_count([]) == 1

    def test_matches_enumeration(self):
        rng = random.Random(1)
        for _ in range(30):
            lengths = [rng.randint(1, 3) for _ in range(rng.randint(1, 3))]
            assert interleaving_count(lengths) == count_arrangements(lengths)

    def test_permutation_invariant(self):
        rng = random.Random(2)
        for _ in range(30):
            lengths = [rng.randint(1, 5) for _ in range(rng.randint(2, 5))]
            shuffled = lengths[:]
            rng.shuffle(shuffled)
            assert interleaving_count(lengths) == interleaving_count(shuffled)

    def test_log_version_agrees(self):
        rng = random.Random(3)
        for _ in range(30):
            lengths = [rng.randint(1, 6) for _ in range(rng.randint(1, 6))]
            exact = math.log(interleaving_count(lengths))
            assert log_interleaving_count(lengths) == pytest.approx(exact, rel=1e-12)

    def test_rejects_nonpositive_lengths(self):
        with pytest.raises(ValueError):
            interleaving_count([2, 0])
        with pytest.raises(ValueError):
            log_interleaving_count([-1])


class TestCountProbability:
    def test_single_entry(self):
        assert count_probability((0.5,), 0) == 0.5
        assert count_probability((0.5,), 1) == 0.5
        assert count_probability((0.5,), 2) == 0.0

    def test_two_entries(self):
        probs = (0.4, 0.5)
        values = [count_probability(probs, c) for c in (0, 1, 2)]
        assert values == pytest.approx([0.6, 0.2, 0.2])
        assert sum(values) == pytest.approx(1.0, abs=1e-15)

    def test_normalization_random_vectors(self):
        rng = random.Random(4)
        for _ in range(200):
            m = rng.randint(0, 6)
            probs = tuple(rng.random() for _ in range(m))
            total = sum(count_probability(probs, c) for c in range(m + 1))
            assert abs(total - 1.0) <= 1e-12

    def test_accepts_wrapper_type(self):
        probs = OccurrenceProbabilities((0.25,))
        assert count_probability(probs, 0) == 0.75

    def test_validation(self):
        with pytest.raises(ValueError):
            OccurrenceProbabilities((1.5,))
        with pytest.raises(ValueError):
            count_probability((0.5,), -1)


class TestOccurrenceProbabilities:
    def test_indexing(self):
        probs = OccurrenceProbabilities((0.4, 0.2))
        assert probs.max_occurrences == 2
        assert probs.occurrence_prob(1) == 0.4
        assert probs.occurrence_prob(3) == 0.0
        with pytest.raises(ValueError):
            probs.occurrence_prob(0)


class TestPatternSet:
    def test_insertion_order_and_versioning(self):
        pats = make_pattern_set([((0,), (0.5,)), ((1,), (0.5,))])
        assert pats.patterns() == [(0,), (1,)]
        assert pats.version == 2
        pats.add((0, 1), (0.25,), 3)
        assert list(pats.added_since(2)) == [(0, 1)]
        assert pats.support((0, 1)) == 3

    def test_duplicate_add_rejected(self):
        pats = make_pattern_set([((0,), (0.5,))])
        with pytest.raises(ValueError):
            pats.add((0,), (0.1,), 0)

    def test_remove_last_only(self):
        pats = make_pattern_set([((0,), (0.5,)), ((1,), (0.5,))])
        with pytest.raises(ValueError):
            pats.remove_last((0,))
        pats.remove_last((1,))
        assert (1,) not in pats
        assert pats.version == 1

    def test_copy_is_independent(self):
        pats = make_pattern_set([((0,), (0.5,))])
        snap = pats.copy()
        pats.set_probs((0,), (0.9,))
        assert snap.probs((0,)).probs == (0.5,)
        assert pats.probs((0,)).probs == (0.9,)


class TestLogJoint:
    def test_certain_event(self):
        pats = make_pattern_set([((7,), (1.0,))])
        covering = Covering((Occurrence((7,), 1, (0,)),))
        assert log_joint((7,), covering, pats) == 0.0

    def test_single_bernoulli(self):
        pats = make_pattern_set(
            [((0,), (0.0,)), ((1,), (0.0,)), ((0, 1), (0.5,))]
        )
        covering = Covering((Occurrence((0, 1), 1, (0, 1)),))
        assert log_joint((0, 1), covering, pats) == pytest.approx(math.log(0.5))

    def test_incomplete_covering(self):
        pats = make_pattern_set([((0,), (0.5,)), ((1,), (0.5,))])
        covering = Covering((Occurrence((0,), 1, (0,)),))
        assert log_joint((0, 1), covering, pats) == NEG_INF

    def test_overlap_and_spelling_rejected(self):
        pats = make_pattern_set([((0,), (0.5,)), ((1,), (0.5,))])
        overlapping = Covering(
            (Occurrence((0,), 1, (0,)), Occurrence((0,), 2, (0,)))
        )
        assert log_joint((0,), overlapping, pats) == NEG_INF
        misspelled = Covering((Occurrence((1,), 1, (0,)),))
        assert log_joint((0,), misspelled, pats) == NEG_INF
        bad_index = Covering((Occurrence((0,), 2, (0,)),))
        assert log_joint((0,), bad_index, pats) == NEG_INF

    def test_zero_probability_occurrence(self):
        pats = make_pattern_set([((0,), (0.0,))])
        covering = Covering((Occurrence((0,), 1, (0,)),))
        assert log_joint((0,), covering, pats) == NEG_INF

    def test_forbidden_stop(self):
        # The chain forces a second occurrence that the covering lacks.
        pats = make_pattern_set([((0,), (0.5, 1.0))])
        covering = Covering((Occurrence((0,), 1, (0,)),))
        assert log_joint((0,), covering, pats) == NEG_INF

    def test_all_complete_coverings_are_nonpositive(self):
        pats = make_pattern_set(
            [((0,), (0.3,)), ((1,), (0.6,)), ((0, 1), (0.5,))]
        )
        covering = Covering(
            (Occurrence((0,), 1, (0,)), Occurrence((1,), 1, (1,)))
        )
        assert log_joint((0, 1), covering, pats) <= 0.0

    def test_matches_direct_evaluation(self):
        rng = random.Random(9)
        for _ in range(100):
            prob_map = {
                (0,): (rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)),
                (1,): (rng.uniform(0.1, 0.9),),
                (0, 1): (rng.uniform(0.1, 0.9),),
                (1, 0, 1): (rng.uniform(0.1, 0.9),),
            }
            pats = make_pattern_set(list(prob_map.items()))
            seq, covering = sample_sequence(pats, rng)
            got = log_joint(seq, covering, pats)
            want = direct_joint_value(covering.counts(), prob_map)
            if want == NEG_INF:
                assert got == NEG_INF
            else:
                assert got == pytest.approx(want, rel=1e-9)


class TestSampler:
    def test_certain_singleton(self):
        pats = make_pattern_set([((5,), (1.0,))])
        rng = random.Random(0)
        for _ in range(10):
            seq, covering = sample_sequence(pats, rng)
            assert seq.tokens == (5,)
            assert covering.counts() == {(5,): 1}

    def test_ground_truth_covering_is_valid(self):
        pats = make_pattern_set(
            [((0,), (0.7, 0.5)), ((1,), (0.4,)), ((0, 1), (0.5,)), ((2, 2), (0.3,))]
        )
        rng = random.Random(42)
        for _ in range(200):
            seq, covering = sample_sequence(pats, rng)
            assert covering.is_partition_of(seq)

    def test_two_singletons_half_half(self):
        pats = make_pattern_set([((0,), (1.0,)), ((1,), (1.0,))])
        rng = random.Random(123)
        counts = Counter(sample_sequence(pats, rng)[0].tokens for _ in range(20000))
        assert set(counts) == {(0, 1), (1, 0)}
        for value in counts.values():
            assert abs(value / 20000 - 0.5) < 0.02

    def test_seeded_reproducibility(self):
        pats = make_pattern_set(
            [((0,), (0.5, 0.5)), ((1,), (0.5,)), ((0, 1), (0.5,))]
        )
        runs = []
        for _ in range(2):
            rng = random.Random(777)
            runs.append([sample_sequence(pats, rng) for _ in range(50)])
        assert runs[0] == runs[1]

    def test_all_zero_chains_give_empty_sequence(self):
        pats = make_pattern_set([((0,), (0.0,))])
        seq, covering = sample_sequence(pats, random.Random(1))
        assert seq.tokens == ()
        assert covering.occurrences == ()


class TestPatternSetSerialization:
    def test_round_trip_exact(self):
        table = TokenTable()
        ids = [table.intern(n) for n in ("open", "read", "close")]
        pats = PatternSet()
        rng = random.Random(6)
        pats.add((ids[0],), (rng.random(),), 17)
        pats.add((ids[0], ids[1], ids[2]), (rng.random(), rng.random()), 5)
        text = serialize_pattern_set(pats, table)
        loaded, loaded_table = parse_pattern_set(text)
        assert loaded_table.names() == ["open", "read", "close"]
        assert loaded.patterns() == pats.patterns()
        for pattern in pats:
            assert loaded.probs(pattern) == pats.probs(pattern)
            assert loaded.support(pattern) == pats.support(pattern)

    def test_round_trip_into_existing_table(self):
        table = TokenTable()
        table.intern("zzz")
        a = table.intern("a")
        pats = PatternSet()
        pats.add((a,), (0.25,), 1)
        text = serialize_pattern_set(pats, table)
        loaded, _ = parse_pattern_set(text, table)
        assert loaded.patterns() == [(a,)]

    def test_empty_set(self):
        pats, _ = parse_pattern_set(serialize_pattern_set(PatternSet(), TokenTable()))
        assert len(pats) == 0

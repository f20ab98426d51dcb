"""Generative model over client sequences: occurrence-count chains plus
uniform interleaving.

Every pattern carries a vector of conditional occurrence probabilities:
entry n is the probability that the pattern occurs an (n+1)-th time in a
client sequence given that it already occurred n times.  A sequence is
generated by drawing an occurrence count for every pattern from that
chain, then splicing the drawn occurrences together uniformly at random.
The joint probability of a sequence and its covering follows in closed
form; everything downstream works on its natural log.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

from .corpus import ClientSequence, Pattern, TokenTable, _tokens_of

__all__ = [
    "Covering",
    "NEG_INF",
    "Occurrence",
    "OccurrenceProbabilities",
    "PatternSet",
    "count_probability",
    "interleaving_count",
    "log_interleaving_count",
    "log_joint",
    "log_splice_count",
    "parse_pattern_set",
    "sample_sequence",
    "serialize_pattern_set",
]

NEG_INF = float("-inf")
POS_INF = float("inf")


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else NEG_INF


@dataclass(frozen=True)
class OccurrenceProbabilities:
    """Conditional occurrence probabilities (first, second, ... occurrence).

    Entries are in [0, 1]; indices beyond the vector are implicitly 0,
    meaning no further occurrence is possible.
    """

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        for p in self.probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"occurrence probability out of range: {p}")

    @property
    def max_occurrences(self) -> int:
        return len(self.probs)

    def occurrence_prob(self, n: int) -> float:
        """Probability of the n-th occurrence given the (n-1)-th, 1-indexed."""
        if n < 1:
            raise ValueError("occurrence index is 1-based")
        return self.probs[n - 1] if n <= len(self.probs) else 0.0


ProbsLike = Union[OccurrenceProbabilities, Sequence[float]]


def _as_probs_tuple(probs: ProbsLike) -> tuple[float, ...]:
    if isinstance(probs, OccurrenceProbabilities):
        return probs.probs
    return OccurrenceProbabilities(tuple(probs)).probs


def count_probability(probs: ProbsLike, c: int) -> float:
    """Probability that a pattern with chain *probs* occurs exactly *c* times.

    Equals the product of the first c chain entries times one minus the
    next entry, with entries beyond the vector taken as 0.  Summed over
    c = 0..max_occurrences this is a proper distribution.
    """
    if c < 0:
        raise ValueError("count must be non-negative")
    vec = _as_probs_tuple(probs)
    if c > len(vec):
        return 0.0
    out = 1.0
    for k in range(c):
        out *= vec[k]
    stop = vec[c] if c < len(vec) else 0.0
    return out * (1.0 - stop)


def interleaving_count(lengths: Iterable[int]) -> int:
    """Number of distinct ways to splice patterns of the given lengths.

    Merging a length-L pattern into an existing arrangement of total
    length T offers C(T+L, L) placements; the running product over the
    multiset is order-independent.  Exact integer arithmetic throughout;
    the empty multiset yields 1.
    """
    total = 0
    out = 1
    for length in lengths:
        if length < 1:
            raise ValueError("pattern lengths are positive")
        total += length
        out *= math.comb(total, length)
    return out


def log_interleaving_count(lengths: Iterable[int]) -> float:
    """Natural log of :func:`interleaving_count`, via log-gamma."""
    total = 0
    acc = 0.0
    for length in lengths:
        if length < 1:
            raise ValueError("pattern lengths are positive")
        total += length
        acc += math.lgamma(length + 1)
    return math.lgamma(total + 1) - acc


def log_splice_count(existing_total: int, length: int) -> float:
    """log C(existing_total + length, length): placements for one more merge."""
    return (
        math.lgamma(existing_total + length + 1)
        - math.lgamma(length + 1)
        - math.lgamma(existing_total + 1)
    )


class _PatternEntry:
    """Per-pattern state: chain probabilities plus derived log tables.

    The derived tables are what the hot paths read:

    - ``chain_cum[c]``: log probability of exactly c occurrences.
    - ``delta_add[c]``: change in that log probability when moving from
      c to c+1 occurrences, with +inf when the chain forces continuation
      (entry 1.0) and -inf when it forbids it (entry 0.0).
    - ``stop0``: log probability of zero occurrences.
    """

    __slots__ = ("probs", "support", "stop0", "chain_cum", "delta_add")

    def __init__(self, probs: tuple[float, ...], support: int):
        self.probs = probs
        self.support = support
        m = len(probs)
        log_pi = [_log(p) for p in probs]
        # stop[c] = log(1 - pi_{c+1}) for c < m; beyond the vector the
        # next-occurrence probability is 0, so stopping is certain.
        stop = [math.log1p(-p) if p < 1.0 else NEG_INF for p in probs]
        stop.append(0.0)
        self.stop0 = stop[0]
        chain = [stop[0]]
        run = 0.0
        for c in range(1, m + 1):
            run += log_pi[c - 1]
            chain.append(run + stop[c])
        self.chain_cum = chain
        delta = []
        for c in range(m):
            p_next = probs[c]
            if p_next <= 0.0:
                delta.append(NEG_INF)
            elif p_next >= 1.0:
                delta.append(POS_INF)
            else:
                delta.append(log_pi[c] + stop[c + 1] - stop[c])
        self.delta_add = delta

    def chain_at(self, count: int) -> float:
        return self.chain_cum[count] if count < len(self.chain_cum) else NEG_INF

    def delta_for(self, count: int) -> float:
        return self.delta_add[count] if count < len(self.delta_add) else NEG_INF


class PatternSet:
    """The current pattern collection with chain probabilities and supports.

    Patterns iterate in insertion order; the insertion log doubles as a
    version counter so per-sequence caches can catch up incrementally.
    Entries are immutable; updating probabilities installs a fresh entry,
    which makes :meth:`copy` a cheap snapshot.
    """

    def __init__(self) -> None:
        self._entries: dict[Pattern, _PatternEntry] = {}
        self._order: list[Pattern] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, pattern: Pattern) -> bool:
        return pattern in self._entries

    def __iter__(self) -> Iterator[Pattern]:
        return iter(self._order)

    def __repr__(self) -> str:
        return f"PatternSet({len(self._order)} patterns)"

    @property
    def version(self) -> int:
        return len(self._order)

    def patterns(self) -> list[Pattern]:
        return list(self._order)

    def added_since(self, version: int) -> Sequence[Pattern]:
        return self._order[version:]

    def add(self, pattern: Pattern, probs: ProbsLike, support: int) -> None:
        pattern = tuple(pattern)
        if not pattern:
            raise ValueError("patterns are non-empty")
        if pattern in self._entries:
            raise ValueError(f"pattern already present: {pattern}")
        self._entries[pattern] = _PatternEntry(_as_probs_tuple(probs), support)
        self._order.append(pattern)

    def remove_last(self, pattern: Pattern) -> None:
        """Remove *pattern*, which must be the most recently added one.

        Restricting removal to the newest pattern keeps version numbers
        and incremental caches consistent on structural rollback.
        """
        if not self._order or self._order[-1] != pattern:
            raise ValueError("only the most recently added pattern can be removed")
        self._order.pop()
        del self._entries[pattern]

    def set_probs(self, pattern: Pattern, probs: ProbsLike) -> None:
        old = self._entries[pattern]
        self._entries[pattern] = _PatternEntry(_as_probs_tuple(probs), old.support)

    def _restore_entry(self, pattern: Pattern, entry: _PatternEntry) -> None:
        # Rollback path: entries are immutable, so reinstalling a saved
        # reference restores the exact previous state.
        if pattern not in self._entries:
            raise KeyError(pattern)
        self._entries[pattern] = entry

    def probs(self, pattern: Pattern) -> OccurrenceProbabilities:
        return OccurrenceProbabilities(self._entries[pattern].probs)

    def support(self, pattern: Pattern) -> int:
        return self._entries[pattern].support

    def entry(self, pattern: Pattern) -> _PatternEntry:
        return self._entries[pattern]

    def copy(self) -> "PatternSet":
        out = PatternSet()
        out._entries = dict(self._entries)
        out._order = list(self._order)
        return out

    def __getstate__(self):
        return [(p, e.probs, e.support) for p, e in self._entries.items()]

    def __setstate__(self, state):
        self._entries = {}
        self._order = []
        for pattern, probs, support in state:
            self._entries[pattern] = _PatternEntry(probs, support)
            self._order.append(pattern)


@dataclass(frozen=True)
class Occurrence:
    """The *index*-th use of *pattern*, at the given sequence positions."""

    pattern: Pattern
    index: int
    positions: tuple[int, ...]


@dataclass(frozen=True)
class Covering:
    """An assignment of sequence positions to pattern occurrences."""

    occurrences: tuple[Occurrence, ...] = ()

    def counts(self) -> dict[Pattern, int]:
        out: dict[Pattern, int] = {}
        for occ in self.occurrences:
            out[occ.pattern] = out.get(occ.pattern, 0) + 1
        return out

    def lengths(self) -> list[int]:
        return [len(occ.pattern) for occ in self.occurrences]

    def covered_positions(self) -> set[int]:
        out: set[int] = set()
        for occ in self.occurrences:
            out.update(occ.positions)
        return out

    def structurally_valid(self, sequence) -> bool:
        """Check disjointness, spelling, and contiguous occurrence indices."""
        tokens = _tokens_of(sequence)
        seen: set[int] = set()
        indices: dict[Pattern, list[int]] = {}
        for occ in self.occurrences:
            if len(occ.positions) != len(occ.pattern):
                return False
            prev = -1
            for pos, want in zip(occ.positions, occ.pattern):
                if pos <= prev or pos >= len(tokens) or pos in seen:
                    return False
                if tokens[pos] != want:
                    return False
                seen.add(pos)
                prev = pos
            indices.setdefault(occ.pattern, []).append(occ.index)
        for idx_list in indices.values():
            if sorted(idx_list) != list(range(1, len(idx_list) + 1)):
                return False
        return True

    def is_partition_of(self, sequence) -> bool:
        tokens = _tokens_of(sequence)
        if not self.structurally_valid(sequence):
            return False
        return len(self.covered_positions()) == len(tokens)

    def canonical(self) -> tuple:
        return tuple(
            sorted((o.positions, o.pattern, o.index) for o in self.occurrences)
        )


def log_joint(sequence, covering: Covering, pats: PatternSet) -> float:
    """Log joint probability of generating *sequence* with *covering*.

    Returns -inf whenever the covering is not a complete partition of the
    sequence or requires an impossible chain step (a zero probability
    occurrence, or stopping where the chain forces continuation); it never
    raises for those cases.
    """
    tokens = _tokens_of(sequence)
    if not covering.structurally_valid(sequence):
        return NEG_INF
    if len(covering.covered_positions()) != len(tokens):
        return NEG_INF
    counts = covering.counts()
    val = -log_interleaving_count(covering.lengths())
    for pattern in pats:
        c = counts.get(pattern, 0)
        probs = pats.entry(pattern).probs
        if c > len(probs):
            return NEG_INF
        for k in range(c):
            p = probs[k]
            if p <= 0.0:
                return NEG_INF
            val += math.log(p)
        stop_p = probs[c] if c < len(probs) else 0.0
        if stop_p >= 1.0:
            return NEG_INF
        val += math.log1p(-stop_p)
    return val


def sample_sequence(
    pats: PatternSet, rng: random.Random
) -> tuple[ClientSequence, Covering]:
    """Draw one client sequence and its ground-truth covering.

    Counts are drawn independently per pattern from the occurrence chain;
    the selected occurrences are then merged one at a time, each inserted
    at uniformly random splice positions, which realizes a uniform draw
    over all interleavings.  All counts zero yields the empty sequence;
    callers that need non-empty samples resample.
    """
    drawn: list[Pattern] = []
    for pattern in pats:
        probs = pats.entry(pattern).probs
        c = 0
        while c < len(probs) and rng.random() < probs[c]:
            c += 1
        drawn.extend([pattern] * c)

    merged: list[int] = []
    placed: list[tuple[Pattern, list[int]]] = []
    for pattern in drawn:
        length = len(pattern)
        total = len(merged)
        slots = sorted(rng.sample(range(total + length), length))
        slot_set = set(slots)
        new_tokens: list[int] = []
        old_to_new: list[int] = []
        old_iter = iter(merged)
        new_iter = iter(pattern)
        for pos in range(total + length):
            if pos in slot_set:
                new_tokens.append(next(new_iter))
            else:
                new_tokens.append(next(old_iter))
                old_to_new.append(pos)
        for _, positions in placed:
            for i, old_pos in enumerate(positions):
                positions[i] = old_to_new[old_pos]
        placed.append((pattern, slots))
        merged = new_tokens

    by_pattern: dict[Pattern, list[tuple[int, ...]]] = {}
    for pattern, positions in placed:
        by_pattern.setdefault(pattern, []).append(tuple(positions))
    occurrences = []
    for pattern, position_lists in by_pattern.items():
        for n, positions in enumerate(sorted(position_lists), start=1):
            occurrences.append(Occurrence(pattern, n, positions))
    occurrences.sort(key=lambda o: o.positions)
    return ClientSequence(tuple(merged)), Covering(tuple(occurrences))


def serialize_pattern_set(pats: PatternSet, table: TokenTable) -> str:
    """One pattern per line: probabilities, support, token names.

    Probabilities are printed with 17 significant digits so parsing the
    output reproduces the exact float values.
    """
    lines = []
    for pattern in pats:
        entry = pats.entry(pattern)
        if not entry.probs:
            raise ValueError(f"pattern has an empty probability vector: {pattern}")
        probs = " ".join(f"{p:.17g}" for p in entry.probs)
        names = " ".join(table.name_of(t) for t in pattern)
        lines.append(f"{probs}\t{entry.support}\t{names}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_pattern_set(
    text: str, table: TokenTable | None = None
) -> tuple[PatternSet, TokenTable]:
    """Inverse of :func:`serialize_pattern_set`.

    Token names are interned into *table* (a fresh one when omitted), so
    loading against an existing database reuses its ids.
    """
    if table is None:
        table = TokenTable()
    pats = PatternSet()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"malformed pattern line {lineno}: {line!r}")
        probs = tuple(float(f) for f in parts[0].split())
        support = int(parts[1])
        pattern = tuple(table.intern(nm) for nm in parts[2].split())
        pats.add(pattern, probs, support)
    return pats, table

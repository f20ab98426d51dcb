"""Covering inference: explain one sequence as interleaved pattern occurrences.

Exact maximization of the covering objective is intractable, so the cover
is built greedily: at every step the pattern occurrence with the best
objective gain per newly explained token is added, matched left-most
within the still-uncovered positions, until the sequence is fully
partitioned.  Singleton patterns guarantee termination.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .corpus import InvariantError, Pattern, _tokens_of, is_subsequence
from .model import (
    NEG_INF,
    Covering,
    Occurrence,
    PatternSet,
    log_joint,
    log_splice_count,
)

__all__ = [
    "SequenceCache",
    "covering_objective",
    "greedy_cover",
    "supported_patterns",
]


@dataclass
class SequenceCache:
    """Per-sequence memo: contained patterns and the last accepted covering.

    ``version`` is the pattern-set version the candidate list is current
    for; only patterns added after it are re-tested on refresh.
    """

    version: int = 0
    candidates: list[Pattern] = field(default_factory=list)
    last_covering: Covering | None = None


def supported_patterns(
    sequence, pats: PatternSet, cache: SequenceCache
) -> list[Pattern]:
    """Patterns of *pats* contained in *sequence*, via the incremental cache."""
    if cache.version > pats.version:
        raise InvariantError(
            "sequence cache is ahead of the pattern set "
            f"({cache.version} > {pats.version})"
        )
    if cache.version < pats.version:
        tokens = _tokens_of(sequence)
        for pattern in pats.added_since(cache.version):
            if is_subsequence(pattern, tokens):
                cache.candidates.append(pattern)
        cache.version = pats.version
    return cache.candidates


def greedy_cover(sequence, pats: PatternSet, cache: SequenceCache) -> Covering:
    """Complete covering of *sequence*, built by best-gain-per-token greedy.

    Every step scores each candidate pattern by the change in joint log
    probability from adding its next occurrence (matched left-most within
    uncovered positions) divided by its length, and takes the best; ties
    prefer longer patterns, then smaller token tuples, then earlier
    matches.  Requires every token's singleton to be present in *pats*.
    """
    tokens = _tokens_of(sequence)
    n = len(tokens)
    if n == 0:
        cache.last_covering = Covering()
        return cache.last_covering

    cands = supported_patterns(sequence, pats, cache)
    for tok in set(tokens):
        if (tok,) not in pats:
            raise InvariantError(f"token {tok} has no singleton pattern")

    uncovered = [True] * n
    remaining = n
    total_covered = 0

    # Left-most uncovered position per token, maintained lazily.
    positions_by_token: dict[int, deque[int]] = {}
    for pos, tok in enumerate(tokens):
        positions_by_token.setdefault(tok, deque()).append(pos)

    entries = [pats.entry(p) for p in cands]
    lengths = [len(p) for p in cands]
    matches: list[tuple[int, ...] | None] = [None] * len(cands)
    fresh = [False] * len(cands)
    counts: dict[Pattern, int] = {}
    chosen: list[tuple[Pattern, tuple[int, ...]]] = []

    def match_of(i: int) -> tuple[int, ...] | None:
        if fresh[i]:
            return matches[i]
        pattern = cands[i]
        if lengths[i] == 1:
            queue = positions_by_token[pattern[0]]
            while queue and not uncovered[queue[0]]:
                queue.popleft()
            found = (queue[0],) if queue else None
        else:
            found = _leftmost_match(pattern, tokens, uncovered)
        matches[i] = found
        fresh[i] = True
        return found

    while remaining:
        best_i = -1
        best_score = NEG_INF
        best_len = 0
        best_match: tuple[int, ...] | None = None
        splice_cost: dict[int, float] = {}
        for allow_dead in (False, True):
            for i in range(len(cands)):
                entry = entries[i]
                delta = entry.delta_for(counts.get(cands[i], 0))
                if (delta == NEG_INF) != allow_dead:
                    continue
                match = match_of(i)
                if match is None:
                    continue
                length = lengths[i]
                cost = splice_cost.get(length)
                if cost is None:
                    cost = log_splice_count(total_covered, length)
                    splice_cost[length] = cost
                score = (delta - cost) / length
                if best_match is not None:
                    if score < best_score:
                        continue
                    if score == best_score:
                        if length < best_len:
                            continue
                        if length == best_len:
                            if cands[i] > cands[best_i]:
                                continue
                            if cands[i] == cands[best_i]:
                                # Same pattern cannot appear twice in cands.
                                continue
                best_i, best_score = i, score
                best_len, best_match = length, match
            if best_match is not None:
                break
        if best_match is None:
            raise InvariantError("no candidate can cover the remaining positions")

        pattern = cands[best_i]
        counts[pattern] = counts.get(pattern, 0) + 1
        chosen.append((pattern, best_match))
        for pos in best_match:
            uncovered[pos] = False
        remaining -= best_len
        total_covered += best_len
        covered_set = set(best_match)
        for i, match in enumerate(matches):
            if fresh[i] and match is not None and not covered_set.isdisjoint(match):
                fresh[i] = False

    by_pattern: dict[Pattern, list[tuple[int, ...]]] = {}
    for pattern, positions in chosen:
        by_pattern.setdefault(pattern, []).append(positions)
    occurrences = []
    for pattern, position_lists in by_pattern.items():
        for idx, positions in enumerate(sorted(position_lists), start=1):
            occurrences.append(Occurrence(pattern, idx, positions))
    occurrences.sort(key=lambda o: o.positions)
    covering = Covering(tuple(occurrences))
    cache.last_covering = covering
    return covering


def _leftmost_match(pattern, tokens, uncovered) -> tuple[int, ...] | None:
    """Left-most gapped match of *pattern* using only uncovered positions."""
    k = 0
    last = len(pattern) - 1
    out = []
    want = pattern[0]
    for pos in range(len(tokens)):
        if uncovered[pos] and tokens[pos] == want:
            out.append(pos)
            if k == last:
                return tuple(out)
            k += 1
            want = pattern[k]
    return None


def covering_objective(sequence, covering: Covering, pats: PatternSet) -> float:
    """Objective the greedy cover maximizes; -inf for incomplete coverings.

    Equals the joint log probability, which orders coverings identically
    to the conditional probability of the covering given the sequence.
    """
    return log_joint(sequence, covering, pats)

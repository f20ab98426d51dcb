"""Parameter fitting and pattern-set growth.

EM alternates covering inference over the whole corpus (E) with
closed-form ratio updates of the occurrence chains (M).  The pattern set
grows by structural steps: a candidate is forced to explain every
sequence that contains it, its chain is reset to the usage that forcing
produced, and it stays only if the average per-sequence log probability
strictly improved; otherwise the prior state is restored exactly.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import multiprocessing
from collections import Counter
from dataclasses import dataclass, field

from .corpus import (
    CorpusError,
    InvariantError,
    Pattern,
    SequenceDatabase,
    occurrence_capacity,
    supporting_indices,
)
from .inference import SequenceCache, greedy_cover
from .model import NEG_INF, Covering, PatternSet, log_interleaving_count

__all__ = [
    "AuditEntry",
    "CandidateQueue",
    "EStepPool",
    "LearningState",
    "em_optimize",
    "generate_candidates",
    "initialize",
    "state_hash",
    "structural_em_step",
]

# Minimum strict improvement of the average log-likelihood for a
# candidate to be admitted; guards against float-noise churn on ties.
ACCEPT_EPS = 1e-10

DEFAULT_EM_MAX_ITERS = 10
DEFAULT_EM_TOL = 1e-6


@dataclass
class AuditEntry:
    """One structural proposal, for acceptance-soundness checks."""

    candidate: Pattern
    accepted: bool
    old_average: float
    new_average: float
    hash_before: str | None = None
    hash_after: str | None = None


@dataclass
class LearningState:
    """Everything the mining loop threads through its iterations."""

    db: SequenceDatabase
    pats: PatternSet
    caches: list[SequenceCache]
    coverings: list[Covering]
    seq_lj: list[float]
    total_log_likelihood: float = 0.0
    stop0_sum: float = 0.0
    required: list[Pattern] = field(default_factory=list)
    # hist[pattern][c] = number of coverings using the pattern exactly c
    # times (c >= 1); kept in sync incrementally by structural steps.
    hist: dict[Pattern, dict[int, int]] = field(default_factory=dict)
    em_iterations: int = 0
    em_rounds: int = 0
    em_converged: bool = False
    candidates_proposed: int = 0
    candidates_accepted: int = 0
    candidates_rejected: int = 0
    audit: list[AuditEntry] | None = None


def _stop_terms(pats: PatternSet) -> tuple[float, list[Pattern]]:
    """Sum of zero-occurrence log terms, and the chains that forbid zero.

    A pattern whose first entry is 1.0 cannot stop at zero occurrences;
    its term is kept out of the sum and the pattern is instead required
    to appear in every covering.
    """
    acc = 0.0
    required: list[Pattern] = []
    for pattern in pats:
        stop0 = pats.entry(pattern).stop0
        if stop0 == NEG_INF:
            required.append(pattern)
        else:
            acc += stop0
    return acc, required


def _refresh_stop_terms(state: LearningState) -> None:
    state.stop0_sum, state.required = _stop_terms(state.pats)


def _sequence_log_joint(
    pats: PatternSet, stop0_sum: float, required: list[Pattern], covering: Covering
) -> float:
    """Joint log probability of a completely covered sequence.

    Same value as :func:`pamine.model.log_joint` for complete coverings,
    but O(occurrences) instead of O(patterns): the zero-occurrence terms
    of all patterns are pre-summed and only used patterns are adjusted.
    """
    counts = covering.counts()
    for pattern in required:
        if pattern not in counts:
            return NEG_INF
    val = stop0_sum - log_interleaving_count(covering.lengths())
    for pattern, c in counts.items():
        entry = pats.entry(pattern)
        val += entry.chain_at(c)
        stop0 = entry.stop0
        if stop0 != NEG_INF:
            val -= stop0
    return val


def _chain_from_suffix_counts(at_least: list[int], db_size: int) -> tuple[float, ...]:
    """Ratio estimates: entry n is at_least[n+1] / at_least[n], with
    at_least[0] = db_size; zero denominators give zero entries."""
    probs = []
    prev = db_size
    for n_count in at_least:
        probs.append(n_count / prev if prev > 0 else 0.0)
        prev = n_count
    return tuple(probs)


def initialize(db: SequenceDatabase, *, audit: bool = False) -> LearningState:
    """Singleton-only state: chains from containment-count frequencies.

    Each token's singleton gets a chain whose n-th entry is the fraction
    of sequences containing the token at least n times among those
    containing it at least n-1 times; the first entry is the relative
    support.  Coverings come from one covering pass.
    """
    if len(db) == 0:
        raise CorpusError("cannot learn from an empty database")
    m = len(db)
    count_hist: dict[int, dict[int, int]] = {}
    for seq in db.sequences:
        for tok, cnt in Counter(seq.tokens).items():
            d = count_hist.setdefault(tok, {})
            d[cnt] = d.get(cnt, 0) + 1

    pats = PatternSet()
    for tok in range(len(db.token_table)):
        d = count_hist.get(tok)
        if not d:
            pats.add((tok,), (0.0,), 0)
            continue
        max_count = max(d)
        tally = [0] * (max_count + 1)
        for cnt, k in d.items():
            tally[cnt] += k
        at_least = [0] * max_count
        acc = 0
        for n in range(max_count, 0, -1):
            acc += tally[n]
            at_least[n - 1] = acc
        pats.add((tok,), _chain_from_suffix_counts(at_least, m), at_least[0])

    state = LearningState(
        db=db,
        pats=pats,
        caches=[SequenceCache() for _ in range(m)],
        coverings=[Covering() for _ in range(m)],
        seq_lj=[0.0] * m,
        audit=[] if audit else None,
    )
    _refresh_stop_terms(state)
    _estep(state)
    return state


def _estep(state: LearningState, pool: "EStepPool | None" = None) -> None:
    """Cover every sequence under the current chains; database order."""
    if pool is not None:
        for i, (covering, lj) in enumerate(pool.estep(state.pats)):
            state.coverings[i] = covering
            state.seq_lj[i] = lj
    else:
        pats = state.pats
        stop0_sum, required = state.stop0_sum, state.required
        for i, seq in enumerate(state.db.sequences):
            covering = greedy_cover(seq, pats, state.caches[i])
            state.coverings[i] = covering
            state.seq_lj[i] = _sequence_log_joint(pats, stop0_sum, required, covering)
    state.total_log_likelihood = sum(state.seq_lj)
    hist: dict[Pattern, dict[int, int]] = {}
    for covering in state.coverings:
        for pattern, c in covering.counts().items():
            d = hist.setdefault(pattern, {})
            d[c] = d.get(c, 0) + 1
    state.hist = hist


def _ratios_from_hist(state: LearningState, pattern: Pattern, min_len: int) -> tuple:
    """Chain ratio estimates for *pattern* from the usage histogram."""
    d = state.hist.get(pattern)
    if not d:
        return (0.0,) * min_len
    vec_len = max(min_len, max(d))
    tally = [0] * (vec_len + 1)
    for cnt, k in d.items():
        tally[cnt] += k
    at_least = [0] * vec_len
    acc = 0
    for n in range(vec_len, 0, -1):
        acc += tally[n]
        at_least[n - 1] = acc
    return _chain_from_suffix_counts(at_least, len(state.db))


def _mstep(state: LearningState) -> None:
    """Reset every chain to the count ratios of the current coverings."""
    pats = state.pats
    for pattern in pats:
        entry = pats.entry(pattern)
        new_probs = _ratios_from_hist(state, pattern, len(entry.probs))
        if new_probs != entry.probs:
            pats.set_probs(pattern, new_probs)
    _refresh_stop_terms(state)


def _recompute_likelihoods(state: LearningState) -> None:
    pats = state.pats
    stop0_sum, required = state.stop0_sum, state.required
    for i, covering in enumerate(state.coverings):
        state.seq_lj[i] = _sequence_log_joint(pats, stop0_sum, required, covering)
    state.total_log_likelihood = sum(state.seq_lj)


def em_optimize(
    state: LearningState,
    max_iters: int = DEFAULT_EM_MAX_ITERS,
    tol: float = DEFAULT_EM_TOL,
    pool: "EStepPool | None" = None,
) -> LearningState:
    """Alternate covering and ratio updates until the total log-likelihood
    moves by less than *tol* relative, or *max_iters* passes run out.

    ``state.em_converged`` records which of the two happened.
    """
    state.em_rounds += 1
    state.em_converged = False
    prev = state.total_log_likelihood
    for _ in range(max_iters):
        _estep(state, pool)
        _mstep(state)
        _recompute_likelihoods(state)
        state.em_iterations += 1
        total = state.total_log_likelihood
        if math.isfinite(total) and math.isfinite(prev):
            delta = abs(total - prev)
            if delta == 0.0 or delta / max(abs(total), 1e-300) < tol:
                state.em_converged = True
                break
        prev = total
    return state


class CandidateQueue:
    """Pairs of current patterns, popped highest min-parent-support first.

    Ties prefer the larger summed support, then the smaller concatenated
    token tuple.  The seen-set guarantees a candidate is proposed at most
    once, no matter how many parent pairs produce it.
    """

    def __init__(self) -> None:
        self._heap: list = []
        self.seen: set[Pattern] = set()
        self.support_cache: dict[Pattern, list[int]] = {}

    def __len__(self) -> int:
        return len(self._heap)

    @classmethod
    def from_state(cls, state: LearningState) -> "CandidateQueue":
        queue = cls()
        entries = [(p, state.pats.support(p)) for p in state.pats]
        for a, sup_a in entries:
            for b, sup_b in entries:
                queue._push(a, sup_a, b, sup_b)
        return queue

    def add_pattern(
        self, new: Pattern, new_support: int, existing: list[tuple[Pattern, int]]
    ) -> None:
        """Queue the pairs a newly accepted pattern forms with the set."""
        for other, other_support in existing:
            if other == new:
                continue
            self._push(new, new_support, other, other_support)
            self._push(other, other_support, new, new_support)
        self._push(new, new_support, new, new_support)

    def _push(self, a: Pattern, sup_a: int, b: Pattern, sup_b: int) -> None:
        cand = a + b
        key = (-min(sup_a, sup_b), -(sup_a + sup_b), cand)
        heapq.heappush(self._heap, (key, cand))

    def pop_unseen(self) -> Pattern | None:
        while self._heap:
            _, cand = heapq.heappop(self._heap)
            if cand in self.seen:
                continue
            self.seen.add(cand)
            return cand
        return None


def generate_candidates(
    state: LearningState, queue: CandidateQueue, batch: int
) -> list[Pattern]:
    """Up to *batch* fresh candidates with non-zero support, best first.

    Supporting sequence indices are stashed on the queue so the
    structural step does not rescan the database.  An empty result means
    the pair space is exhausted.
    """
    if batch < 1:
        raise ValueError("batch must be positive")
    out: list[Pattern] = []
    while len(out) < batch:
        cand = queue.pop_unseen()
        if cand is None:
            break
        if cand in state.pats:
            continue
        idxs = supporting_indices(cand, state.db)
        if not idxs:
            continue
        queue.support_cache[cand] = idxs
        out.append(cand)
    return out


def structural_em_step(
    state: LearningState,
    candidate: Pattern,
    *,
    supporting: list[int] | None = None,
) -> tuple[LearningState, bool]:
    """Tentatively admit *candidate*; keep it only on strict improvement.

    The candidate enters with an all-ones chain so the cover of every
    supporting sequence is forced to use it as often as it fits.  The
    chains of the candidate and of every pattern whose usage those covers
    displaced are then reset to the count ratios of the tentative state,
    and the new average log-likelihood (supporting sequences re-scored,
    everything else at its cached value) is compared against the old.
    Rejection restores the previous state exactly.
    """
    candidate = tuple(candidate)
    if len(candidate) < 2:
        raise ValueError("structural candidates have length >= 2")
    if candidate in state.pats:
        raise ValueError(f"candidate already present: {candidate}")

    state.candidates_proposed += 1
    audit = state.audit
    pre_hash = state_hash(state) if audit is not None else None
    m = len(state.db)
    old_total = state.total_log_likelihood

    if supporting is None:
        supporting = supporting_indices(candidate, state.db)
    if not supporting:
        state.candidates_rejected += 1
        if audit is not None:
            avg = old_total / m
            audit.append(
                AuditEntry(candidate, False, avg, avg, pre_hash, state_hash(state))
            )
        return state, False

    db = state.db
    pats = state.pats
    saved = [
        (
            i,
            state.coverings[i],
            state.seq_lj[i],
            state.caches[i].version,
            len(state.caches[i].candidates),
        )
        for i in supporting
    ]
    saved_stop0 = state.stop0_sum
    saved_required = state.required

    max_capacity = max(
        occurrence_capacity(candidate, db.sequences[i]) for i in supporting
    )
    pats.add(candidate, (1.0,) * max_capacity, len(supporting))
    for i in supporting:
        state.coverings[i] = greedy_cover(db.sequences[i], pats, state.caches[i])

    # Usage histogram deltas from the tentative covers; `affected` holds
    # every pattern whose count distribution moved.
    hist = state.hist
    hist_deltas: list[tuple[Pattern, int, int]] = []
    affected: dict[Pattern, None] = {}

    def _bump(pattern: Pattern, c: int, delta: int) -> None:
        d = hist.setdefault(pattern, {})
        new = d.get(c, 0) + delta
        if new:
            d[c] = new
        else:
            d.pop(c, None)
            if not d:
                del hist[pattern]
        hist_deltas.append((pattern, c, delta))
        affected[pattern] = None

    for i, old_covering, _, _, _ in saved:
        old_counts = old_covering.counts()
        new_counts = state.coverings[i].counts()
        for pattern in {**old_counts, **new_counts}:
            c_old = old_counts.get(pattern, 0)
            c_new = new_counts.get(pattern, 0)
            if c_old != c_new:
                if c_old:
                    _bump(pattern, c_old, -1)
                if c_new:
                    _bump(pattern, c_new, +1)

    saved_entries = {
        pattern: pats.entry(pattern) for pattern in affected if pattern != candidate
    }
    for pattern in affected:
        min_len = 1 if pattern == candidate else len(pats.entry(pattern).probs)
        pats.set_probs(pattern, _ratios_from_hist(state, pattern, min_len))
    _refresh_stop_terms(state)

    new_lj = {
        i: _sequence_log_joint(
            pats, state.stop0_sum, state.required, state.coverings[i]
        )
        for i in supporting
    }
    new_total = old_total
    for i, _, old_lj, _, _ in saved:
        new_total += new_lj[i] - old_lj
    old_average = old_total / m
    new_average = new_total / m

    if new_average > old_average + ACCEPT_EPS:
        # Re-priced chains shift the zero-occurrence terms of untouched
        # sequences too, so refresh everything exactly.
        _recompute_likelihoods(state)
        state.candidates_accepted += 1
        if audit is not None:
            audit.append(AuditEntry(candidate, True, old_average, new_average))
        return state, True

    for pattern, c, delta in reversed(hist_deltas):
        d = hist.setdefault(pattern, {})
        new = d.get(c, 0) - delta
        if new:
            d[c] = new
        else:
            d.pop(c, None)
            if not d:
                del hist[pattern]
    pats.remove_last(candidate)
    for pattern, entry in saved_entries.items():
        pats._restore_entry(pattern, entry)
    for i, covering, old_lj, version, n_cands in saved:
        state.coverings[i] = covering
        state.seq_lj[i] = old_lj
        cache = state.caches[i]
        del cache.candidates[n_cands:]
        cache.version = version
        cache.last_covering = covering
    state.stop0_sum = saved_stop0
    state.required = saved_required
    state.candidates_rejected += 1
    if audit is not None:
        post_hash = state_hash(state)
        if post_hash != pre_hash:
            raise InvariantError("structural rollback failed to restore the state")
        audit.append(
            AuditEntry(candidate, False, old_average, new_average, pre_hash, post_hash)
        )
    return state, False


def state_hash(state: LearningState) -> str:
    """Digest of patterns, chains, supports, coverings, and the total."""
    h = hashlib.sha256()
    for pattern in sorted(state.pats.patterns()):
        entry = state.pats.entry(pattern)
        h.update(repr((pattern, entry.probs, entry.support)).encode())
    for covering in state.coverings:
        h.update(repr(covering.canonical()).encode())
    h.update(repr(state.total_log_likelihood).encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Parallel E-step support.  Workers hold the sequence list (sent once at
# pool start) plus their own caches; each E-step ships only the pattern
# set.  Results are reduced in database order, so any worker count
# produces bit-identical state.

_POOL_SEQUENCES: list | None = None
_POOL_CACHES: dict[int, SequenceCache] = {}


def _pool_init(sequences) -> None:
    global _POOL_SEQUENCES, _POOL_CACHES
    _POOL_SEQUENCES = sequences
    _POOL_CACHES = {}


def _pool_chunk(args) -> list[tuple[Covering, float]]:
    lo, hi, pats = args
    stop0_sum, required = _stop_terms(pats)
    out = []
    for i in range(lo, hi):
        cache = _POOL_CACHES.get(i)
        if cache is None:
            cache = _POOL_CACHES[i] = SequenceCache()
        covering = greedy_cover(_POOL_SEQUENCES[i], pats, cache)
        out.append((covering, _sequence_log_joint(pats, stop0_sum, required, covering)))
    return out


class EStepPool:
    """Worker pool for covering passes over a fixed database."""

    def __init__(self, db: SequenceDatabase, workers: int):
        if workers < 1:
            raise ValueError("workers must be positive")
        self._workers = workers
        m = len(db)
        chunk = max(1, math.ceil(m / workers))
        self._bounds = [(lo, min(lo + chunk, m)) for lo in range(0, m, chunk)]
        self._pool = multiprocessing.get_context().Pool(
            workers, initializer=_pool_init, initargs=(db.sequences,)
        )

    def estep(self, pats: PatternSet) -> list[tuple[Covering, float]]:
        chunks = self._pool.map(
            _pool_chunk, [(lo, hi, pats) for lo, hi in self._bounds]
        )
        out: list[tuple[Covering, float]] = []
        for chunk in chunks:
            out.extend(chunk)
        return out

    def close(self) -> None:
        self._pool.close()
        self._pool.join()

    def __enter__(self) -> "EStepPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

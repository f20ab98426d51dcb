"""Mining driver, ranking, synthetic corpus generation, and the CLI.

The driver grows the pattern set from singletons by alternating
structural proposal phases with EM parameter passes, then ranks the
surviving multi-token patterns by their first-occurrence probability.
Everything is deterministic for a fixed input, seed, and configuration,
regardless of the thread count.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import time
from dataclasses import dataclass, field

from .corpus import (
    DEFAULT_MAX_SEQUENCE_LENGTH,
    ClientSequence,
    CorpusError,
    InvariantError,
    Pattern,
    SequenceDatabase,
    TokenTable,
    parse_database,
    support,
)
from .learning import (
    DEFAULT_EM_MAX_ITERS,
    DEFAULT_EM_TOL,
    CandidateQueue,
    EStepPool,
    LearningState,
    _estep,
    _refresh_stop_terms,
    em_optimize,
    generate_candidates,
    initialize,
    structural_em_step,
)
from .inference import greedy_cover
from .model import (
    OccurrenceProbabilities,
    PatternSet,
    parse_pattern_set,
    sample_sequence,
    serialize_pattern_set,
)

__all__ = [
    "MiningConfig",
    "MiningResult",
    "RankedPattern",
    "UsageError",
    "emit_output",
    "load_database",
    "main",
    "mine",
    "parse_output",
    "random_planted_patterns",
    "rank",
    "synth_generate",
]

logger = logging.getLogger("pamine")

DEFAULT_REJECTION_STREAK = 500
DEFAULT_MAX_CANDIDATES = 100_000
# Acceptances per structural phase before parameters are re-optimized,
# and candidates fetched from the queue at a time.
STRUCTURAL_ACCEPT_BATCH = 24
PROPOSAL_BATCH = 64

CHECKPOINT_HEADER = "pamine-checkpoint 1"


class UsageError(Exception):
    """Bad command line or configuration."""


@dataclass
class MiningConfig:
    """Run controls; budgets stop the search, they never filter patterns."""

    input_path: str | None = None
    output_path: str | None = None
    fmt: str = "tsv"
    top_k: int | None = None
    seed: int = 0
    threads: int = 1
    max_candidates: int = DEFAULT_MAX_CANDIDATES
    rejection_streak: int = DEFAULT_REJECTION_STREAK
    max_seconds: float | None = None
    em_max_iters: int = DEFAULT_EM_MAX_ITERS
    em_tol: float = DEFAULT_EM_TOL
    max_seq_len: int = DEFAULT_MAX_SEQUENCE_LENGTH
    checkpoint_path: str | None = None
    verbose: bool = False
    audit: bool = False

    def validate(self) -> None:
        if self.threads < 1:
            raise UsageError("threads must be >= 1")
        if self.top_k is not None and self.top_k < 1:
            raise UsageError("top-k must be >= 1")
        for name in ("max_candidates", "rejection_streak", "em_max_iters"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name.replace('_', '-')} must be >= 1")
        if self.em_tol <= 0:
            raise UsageError("em-tol must be > 0")
        if self.max_seq_len < 1:
            raise UsageError("max-seq-len must be >= 1")
        if self.fmt not in ("tsv", "json"):
            raise UsageError(f"unknown output format: {self.fmt!r}")


@dataclass(frozen=True)
class RankedPattern:
    rank: int
    pattern: tuple[str, ...]
    probability: float
    support: int
    occurrence_probs: tuple[float, ...]


@dataclass
class MiningResult:
    ranked: list[RankedPattern]
    metadata: dict
    state: LearningState = field(repr=False, default=None)


def load_database(
    path: str, max_seq_len: int = DEFAULT_MAX_SEQUENCE_LENGTH
) -> SequenceDatabase:
    try:
        with open(path, encoding="utf-8") as handle:
            db = parse_database(handle, max_sequence_length=max_seq_len)
    except OSError as exc:
        raise CorpusError(f"cannot read input {path}: {exc}") from exc
    stats = db.stats
    logger.info(
        "loaded %d sequences (%d tokens); dropped %d empty, %d malformed, %d overlong",
        stats.kept,
        len(db.token_table),
        stats.dropped_empty,
        stats.dropped_malformed,
        stats.dropped_overlong,
    )
    return db


def mine(config: MiningConfig, database: SequenceDatabase | None = None) -> MiningResult:
    """Run the full mining loop and return the ranked multi-token patterns.

    Singletons are seeded with their support frequencies, the candidate
    queue proposes pattern pairs highest-support-first, and the loop
    stops on a rejection streak, an exhausted queue, or a budget.
    """
    config.validate()
    started = time.monotonic()
    if database is not None:
        db = database
    else:
        if not config.input_path:
            raise UsageError("an input corpus is required")
        db = load_database(config.input_path, config.max_seq_len)
    if len(db) == 0:
        raise CorpusError("input corpus contains no usable sequences")

    state = initialize(db, audit=config.audit)
    if config.checkpoint_path and os.path.exists(config.checkpoint_path):
        _resume_from_checkpoint(state, config.checkpoint_path)
        logger.info("resumed %d patterns from %s", len(state.pats), config.checkpoint_path)
    queue = CandidateQueue.from_state(state)

    pool = EStepPool(db, config.threads) if config.threads > 1 else None
    stop_reason = None
    streak = 0
    try:
        while True:
            phase_accepts = 0
            while phase_accepts < STRUCTURAL_ACCEPT_BATCH and stop_reason is None:
                batch = generate_candidates(state, queue, PROPOSAL_BATCH)
                if not batch:
                    stop_reason = "queue_exhausted"
                    break
                for cand in batch:
                    supporting = queue.support_cache.pop(cand, None)
                    _, accepted = structural_em_step(state, cand, supporting=supporting)
                    if accepted:
                        streak = 0
                        phase_accepts += 1
                        existing = [(p, state.pats.support(p)) for p in state.pats]
                        queue.add_pattern(cand, state.pats.support(cand), existing)
                        logger.debug("accepted %s", cand)
                    else:
                        streak += 1
                        if streak >= config.rejection_streak:
                            stop_reason = "rejection_streak"
                            break
                    if state.candidates_proposed >= config.max_candidates:
                        stop_reason = "candidate_budget"
                        break
                    if (
                        config.max_seconds is not None
                        and time.monotonic() - started > config.max_seconds
                    ):
                        stop_reason = "wall_clock"
                        break
                    if phase_accepts >= STRUCTURAL_ACCEPT_BATCH:
                        break
            em_optimize(state, config.em_max_iters, config.em_tol, pool)
            logger.info(
                "phase done: %d patterns, total log-likelihood %.4f",
                len(state.pats),
                state.total_log_likelihood,
            )
            if stop_reason is not None:
                break
    finally:
        if pool is not None:
            pool.close()

    ranked = rank(state.pats, db.token_table, config.top_k)
    if config.checkpoint_path:
        _save_checkpoint(state, db.token_table, config.checkpoint_path)
    metadata = {
        "converged": stop_reason,
        "sequences": len(db),
        "vocabulary": len(db.token_table),
        "candidates_proposed": state.candidates_proposed,
        "candidates_accepted": state.candidates_accepted,
        "candidates_rejected": state.candidates_rejected,
        "em_rounds": state.em_rounds,
        "em_iterations": state.em_iterations,
        "patterns_total": len(state.pats),
        "patterns_ranked": len(ranked),
        "seed": config.seed,
        "top_k": config.top_k,
        "budgets": {
            "max_candidates": config.max_candidates,
            "rejection_streak": config.rejection_streak,
            "em_max_iters": config.em_max_iters,
            "em_tol": config.em_tol,
        },
    }
    logger.info("mining finished in %.2fs (%s)", time.monotonic() - started, stop_reason)
    return MiningResult(ranked=ranked, metadata=metadata, state=state)


def rank(
    pats: PatternSet, table: TokenTable, top_k: int | None = None
) -> list[RankedPattern]:
    """Multi-token patterns ordered by first-occurrence probability.

    Singletons never appear.  Ties fall back to support, then length,
    then the token tuple, all descending except the last.
    """
    rows = []
    for pattern in pats:
        if len(pattern) < 2:
            continue
        entry = pats.entry(pattern)
        first = entry.probs[0] if entry.probs else 0.0
        rows.append((pattern, first, entry.support, entry.probs))
    rows.sort(key=lambda r: (-r[1], -r[2], -len(r[0]), r[0]))
    if top_k is not None:
        rows = rows[:top_k]
    return [
        RankedPattern(
            rank=i + 1,
            pattern=tuple(table.name_of(t) for t in pattern),
            probability=first,
            support=sup,
            occurrence_probs=probs,
        )
        for i, (pattern, first, sup, probs) in enumerate(rows)
    ]


def emit_output(ranked: list[RankedPattern], fmt: str, metadata: dict) -> bytes:
    """Render ranked patterns as TSV or JSON bytes.

    TSV: a header line then one row per pattern, probability with six
    decimals, tokens space-separated.  JSON: an object with a "patterns"
    array and a "metadata" object.
    """
    if fmt == "tsv":
        lines = ["rank\tprobability\tsupport\tpattern"]
        for row in ranked:
            lines.append(
                f"{row.rank}\t{row.probability:.6f}\t{row.support}\t"
                + " ".join(row.pattern)
            )
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt == "json":
        obj = {
            "patterns": [
                {
                    "rank": row.rank,
                    "pattern": list(row.pattern),
                    "probability": row.probability,
                    "support": row.support,
                    "occurrence_probs": list(row.occurrence_probs),
                }
                for row in ranked
            ],
            "metadata": metadata,
        }
        return (json.dumps(obj, indent=2) + "\n").encode("utf-8")
    raise UsageError(f"unknown output format: {fmt!r}")


def parse_output(data: bytes, fmt: str):
    """Inverse of :func:`emit_output`: (ranked patterns, metadata).

    TSV carries no chain vectors and rounds probabilities to six
    decimals, so those fields come back accordingly; metadata is None.
    """
    text = data.decode("utf-8")
    if fmt == "tsv":
        lines = [ln for ln in text.splitlines() if ln]
        if not lines or lines[0] != "rank\tprobability\tsupport\tpattern":
            raise ValueError("missing TSV header")
        ranked = []
        for line in lines[1:]:
            rank_s, prob_s, sup_s, pattern_s = line.split("\t")
            prob = float(prob_s)
            ranked.append(
                RankedPattern(
                    rank=int(rank_s),
                    pattern=tuple(pattern_s.split(" ")),
                    probability=prob,
                    support=int(sup_s),
                    occurrence_probs=(),
                )
            )
        return ranked, None
    if fmt == "json":
        obj = json.loads(text)
        ranked = [
            RankedPattern(
                rank=row["rank"],
                pattern=tuple(row["pattern"]),
                probability=row["probability"],
                support=row["support"],
                occurrence_probs=tuple(row["occurrence_probs"]),
            )
            for row in obj["patterns"]
        ]
        return ranked, obj["metadata"]
    raise ValueError(f"unknown output format: {fmt!r}")


def random_planted_patterns(
    rng: random.Random,
    vocab_size: int,
    n_patterns: int,
    length_range: tuple[int, int] = (2, 4),
    prob_range: tuple[float, float] = (0.3, 0.6),
) -> list[tuple[Pattern, tuple[float, ...]]]:
    """Draw disjoint-token planted patterns for synthetic corpora."""
    lo, hi = length_range
    lengths = [rng.randint(lo, hi) for _ in range(n_patterns)]
    if sum(lengths) > vocab_size:
        raise ValueError("vocabulary too small for disjoint planted patterns")
    pool = rng.sample(range(vocab_size), sum(lengths))
    planted = []
    offset = 0
    for length in lengths:
        tokens = tuple(pool[offset : offset + length])
        offset += length
        prob = rng.uniform(*prob_range)
        planted.append((tokens, (prob,)))
    return planted


def synth_generate(
    planted: list[tuple[Pattern, "OccurrenceProbabilities | tuple[float, ...]"]],
    vocab_size: int,
    n_sequences: int,
    seed: int,
    output_path: str | None = None,
    *,
    noise_prob: float = 0.0,
    token_names: list[str] | None = None,
    ground_truth_path: str | None = None,
) -> SequenceDatabase:
    """Sample a corpus from planted patterns plus singleton noise.

    Every vocabulary token gets a noise singleton; planted patterns are
    layered on top.  Empty draws are resampled.  When *output_path* is
    given the corpus is written in the text line format together with a
    ground-truth sidecar listing the planted patterns with their
    empirical supports.
    """
    if vocab_size < 1 and not planted:
        raise ValueError("need a vocabulary or planted patterns")
    for pattern, _ in planted:
        if any(t < 0 or t >= vocab_size for t in pattern):
            raise ValueError(f"planted pattern {pattern} outside the vocabulary")
    names = token_names or [f"m{i}" for i in range(vocab_size)]
    if len(names) != vocab_size:
        raise ValueError("token_names must cover the vocabulary")

    pats = PatternSet()
    for tok in range(vocab_size):
        pats.add((tok,), (noise_prob,), 0)
    for pattern, probs in planted:
        pattern = tuple(pattern)
        if len(pattern) == 1:
            pats.set_probs(pattern, probs)
        else:
            pats.add(pattern, probs, 0)
    if all(p == 0.0 for pattern in pats for p in pats.entry(pattern).probs):
        raise ValueError("unsatisfiable generator: every probability is zero")

    rng = random.Random(seed)
    table = TokenTable()
    for name in names:
        table.intern(name)
    sequences = []
    for k in range(n_sequences):
        for _ in range(100_000):
            seq, _cov = sample_sequence(pats, rng)
            if len(seq.tokens) > 0:
                break
        else:
            raise ValueError("generator failed to produce a non-empty sequence")
        sequences.append(ClientSequence(seq.tokens, str(k + 1)))
    db = SequenceDatabase(sequences, table)

    if output_path is not None:
        lines = [
            " ".join(table.name_of(t) for t in seq.tokens) for seq in db.sequences
        ]
        with open(output_path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + ("\n" if lines else ""))
        truth_path = ground_truth_path or output_path + ".truth"
        truth = PatternSet()
        for pattern, probs in planted:
            truth.add(tuple(pattern), probs, support(tuple(pattern), db))
        with open(truth_path, "w", encoding="utf-8") as handle:
            handle.write(serialize_pattern_set(truth, table))
    return db


# ---------------------------------------------------------------------------
# Checkpointing: the pattern-set serialization plus iteration counters.

_COUNTER_FIELDS = (
    "em_iterations",
    "em_rounds",
    "candidates_proposed",
    "candidates_accepted",
    "candidates_rejected",
)


def _save_checkpoint(state: LearningState, table: TokenTable, path: str) -> None:
    counters = "\t".join(f"{n}={getattr(state, n)}" for n in _COUNTER_FIELDS)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(CHECKPOINT_HEADER + "\n")
        handle.write(counters + "\n")
        handle.write(serialize_pattern_set(state.pats, table))


def _resume_from_checkpoint(state: LearningState, path: str) -> None:
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    lines = text.splitlines()
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise CorpusError(f"not a checkpoint file: {path}")
    counters: dict[str, int] = {}
    for item in lines[1].split("\t"):
        name, _, value = item.partition("=")
        counters[name] = int(value)
    loaded, _ = parse_pattern_set("\n".join(lines[2:]), state.db.token_table)

    # Keep the freshly initialized singletons for any vocabulary token the
    # checkpoint lacks, and trust the corpus for supports.
    merged = PatternSet()
    db = state.db
    for pattern in loaded:
        merged.add(pattern, loaded.entry(pattern).probs, support(pattern, db))
    for tok in range(len(db.token_table)):
        if (tok,) not in merged:
            singleton = (tok,)
            merged.add(
                singleton,
                state.pats.entry(singleton).probs,
                state.pats.entry(singleton).support,
            )
    state.pats = merged
    state.caches = [type(state.caches[0])() for _ in range(len(db))]
    for name in _COUNTER_FIELDS:
        setattr(state, name, counters.get(name, 0))
    _refresh_stop_terms(state)
    _estep(state)


# ---------------------------------------------------------------------------
# Command line front-end.


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="pamine",
        description="Mine ranked, probabilistically interesting API usage "
        "patterns from a corpus of client call sequences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mine_p = sub.add_parser(
        "mine", help="mine ranked patterns from a corpus", add_help=True
    )
    mine_p.add_argument("--input", required=True, help="corpus file (text or JSON lines)")
    mine_p.add_argument("--output", default=None, help="output file (default: stdout)")
    mine_p.add_argument(
        "--format", default="tsv", choices=("tsv", "json"), help="output format (default: %(default)s)"
    )
    mine_p.add_argument(
        "--top-k", type=int, default=None, help="emit only the best K patterns (default: all)"
    )
    mine_p.add_argument("--seed", type=int, default=0, help="run seed (default: %(default)s)")
    mine_p.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("PAMINE_THREADS", "1")),
        help="worker processes for covering passes "
        "(default: $PAMINE_THREADS or 1)",
    )
    mine_p.add_argument(
        "--max-candidates",
        type=int,
        default=DEFAULT_MAX_CANDIDATES,
        help="stop after proposing this many candidates (default: %(default)s)",
    )
    mine_p.add_argument(
        "--rejection-streak",
        type=int,
        default=DEFAULT_REJECTION_STREAK,
        help="stop after this many consecutive rejections (default: %(default)s)",
    )
    mine_p.add_argument(
        "--max-seconds",
        type=float,
        default=None,
        help="wall-clock budget in seconds (default: none)",
    )
    mine_p.add_argument(
        "--em-iters",
        type=int,
        default=DEFAULT_EM_MAX_ITERS,
        help="inner EM iterations per phase (default: %(default)s)",
    )
    mine_p.add_argument(
        "--em-tol",
        type=float,
        default=DEFAULT_EM_TOL,
        help="relative log-likelihood tolerance (default: %(default)s)",
    )
    mine_p.add_argument(
        "--max-seq-len",
        type=int,
        default=DEFAULT_MAX_SEQUENCE_LENGTH,
        help="drop input records longer than this (default: %(default)s)",
    )
    mine_p.add_argument(
        "--checkpoint", default=None, help="resume from / save to this checkpoint file"
    )
    mine_p.add_argument("--verbose", action="store_true", help="log progress to stderr")

    gen_p = sub.add_parser("generate", help="write a synthetic corpus with planted patterns")
    gen_p.add_argument("--output", required=True, help="corpus file to write")
    gen_p.add_argument("--vocab-size", type=int, default=100, help="(default: %(default)s)")
    gen_p.add_argument("--sequences", type=int, default=1000, help="(default: %(default)s)")
    gen_p.add_argument("--seed", type=int, default=0, help="(default: %(default)s)")
    gen_p.add_argument("--patterns", type=int, default=10, help="planted pattern count (default: %(default)s)")
    gen_p.add_argument("--min-pattern-len", type=int, default=2, help="(default: %(default)s)")
    gen_p.add_argument("--max-pattern-len", type=int, default=4, help="(default: %(default)s)")
    gen_p.add_argument("--min-prob", type=float, default=0.3, help="(default: %(default)s)")
    gen_p.add_argument("--max-prob", type=float, default=0.6, help="(default: %(default)s)")
    gen_p.add_argument(
        "--noise-prob",
        type=float,
        default=0.05,
        help="singleton noise probability per token (default: %(default)s)",
    )
    gen_p.add_argument(
        "--planted-file",
        default=None,
        help="pattern-set file of planted patterns (instead of random ones)",
    )
    gen_p.add_argument("--verbose", action="store_true", help="log progress to stderr")

    rank_p = sub.add_parser("rank", help="re-rank a checkpointed pattern set")
    rank_p.add_argument("--checkpoint", required=True, help="checkpoint file to rank")
    rank_p.add_argument("--output", default=None, help="output file (default: stdout)")
    rank_p.add_argument("--format", default="tsv", choices=("tsv", "json"), help="(default: %(default)s)")
    rank_p.add_argument("--top-k", type=int, default=None, help="(default: all)")
    rank_p.add_argument("--verbose", action="store_true", help="log progress to stderr")

    ins_p = sub.add_parser("inspect", help="dump the covering of one sequence as JSON")
    ins_p.add_argument("--input", required=True, help="corpus file")
    ins_p.add_argument("--checkpoint", default=None, help="checkpoint with learned patterns")
    ins_p.add_argument("--sequence", type=int, required=True, help="0-based sequence index")
    ins_p.add_argument("--max-seq-len", type=int, default=DEFAULT_MAX_SEQUENCE_LENGTH)
    ins_p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def _write_bytes(path: str | None, data: bytes) -> None:
    if path is None:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        try:
            with open(path, "wb") as handle:
                handle.write(data)
        except OSError as exc:
            raise CorpusError(f"cannot write output {path}: {exc}") from exc


def _cmd_mine(args) -> int:
    config = MiningConfig(
        input_path=args.input,
        output_path=args.output,
        fmt=args.format,
        top_k=args.top_k,
        seed=args.seed,
        threads=args.threads,
        max_candidates=args.max_candidates,
        rejection_streak=args.rejection_streak,
        max_seconds=args.max_seconds,
        em_max_iters=args.em_iters,
        em_tol=args.em_tol,
        max_seq_len=args.max_seq_len,
        checkpoint_path=args.checkpoint,
        verbose=args.verbose,
    )
    result = mine(config)
    _write_bytes(config.output_path, emit_output(result.ranked, config.fmt, result.metadata))
    return 0


def _cmd_generate(args) -> int:
    rng = random.Random(args.seed)
    if args.planted_file:
        with open(args.planted_file, encoding="utf-8") as handle:
            loaded, table = parse_pattern_set(handle.read())
        vocab_size = max(args.vocab_size, len(table))
        names = table.names() + [f"m{i}" for i in range(len(table), vocab_size)]
        planted = [(p, loaded.entry(p).probs) for p in loaded]
    else:
        vocab_size = args.vocab_size
        names = None
        planted = random_planted_patterns(
            rng,
            vocab_size,
            args.patterns,
            (args.min_pattern_len, args.max_pattern_len),
            (args.min_prob, args.max_prob),
        )
    synth_generate(
        planted,
        vocab_size,
        args.sequences,
        args.seed,
        args.output,
        noise_prob=args.noise_prob,
        token_names=names,
    )
    logger.info("wrote %s and %s", args.output, args.output + ".truth")
    return 0


def _cmd_rank(args) -> int:
    try:
        with open(args.checkpoint, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise CorpusError(f"cannot read checkpoint {args.checkpoint}: {exc}") from exc
    lines = text.splitlines()
    if lines and lines[0] == CHECKPOINT_HEADER:
        text = "\n".join(lines[2:])
    pats, table = parse_pattern_set(text)
    ranked = rank(pats, table, args.top_k)
    metadata = {"source": "checkpoint", "patterns_ranked": len(ranked), "top_k": args.top_k}
    _write_bytes(args.output, emit_output(ranked, args.format, metadata))
    return 0


def _cmd_inspect(args) -> int:
    db = load_database(args.input, args.max_seq_len)
    state = initialize(db)
    if args.checkpoint:
        _resume_from_checkpoint(state, args.checkpoint)
    if not 0 <= args.sequence < len(db):
        raise UsageError(f"sequence index out of range: {args.sequence}")
    seq = db.sequences[args.sequence]
    covering = greedy_cover(seq, state.pats, state.caches[args.sequence])
    table = db.token_table
    obj = {
        "sequence_id": seq.source_id,
        "occurrences": [
            {
                "pattern": [table.name_of(t) for t in occ.pattern],
                "n": occ.index,
                "positions": list(occ.positions),
            }
            for occ in covering.occurrences
        ],
    }
    _write_bytes(None, (json.dumps(obj, indent=2) + "\n").encode("utf-8"))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
            stream=sys.stderr,
            format="%(levelname)s %(message)s",
        )
        if args.command == "mine":
            return _cmd_mine(args)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "rank":
            return _cmd_rank(args)
        if args.command == "inspect":
            return _cmd_inspect(args)
        raise UsageError(f"unknown command: {args.command}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (CorpusError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (InvariantError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

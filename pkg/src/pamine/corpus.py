"""Client call sequence corpus: interning, ingestion, containment queries.

A corpus is an ordered list of client call sequences, one per input
record, with every distinct call name interned to a dense integer id.
All pattern matching is gapped subsequence matching over those ids: a
pattern is contained in a sequence when its tokens appear in order, not
necessarily contiguously.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

__all__ = [
    "ApiToken",
    "ClientSequence",
    "CorpusError",
    "DEFAULT_MAX_SEQUENCE_LENGTH",
    "IngestStats",
    "InvariantError",
    "Pattern",
    "SequenceDatabase",
    "TokenTable",
    "is_subsequence",
    "occurrence_capacity",
    "parse_database",
    "relative_support",
    "serialize_database",
    "support",
    "supporting_indices",
]

# An ordered tuple of token ids; a length-1 pattern is a "singleton".
Pattern = tuple

DEFAULT_MAX_SEQUENCE_LENGTH = 10_000


class CorpusError(Exception):
    """Unreadable or undecodable corpus input."""


class InvariantError(Exception):
    """An internal consistency guarantee was violated."""


@dataclass(frozen=True)
class ApiToken:
    """One interned call name."""

    id: int
    name: str


def _valid_name(name: str) -> bool:
    return bool(name) and not any(ch.isspace() for ch in name)


class TokenTable:
    """Bijective mapping between call names and dense non-negative ids.

    Ids are assigned in first-seen order and are only meaningful within
    the database that produced them; files exchanged externally always
    carry names, never ids.
    """

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._names: list[str] = []

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TokenTable):
            return NotImplemented
        return self._names == other._names

    def __repr__(self) -> str:
        return f"TokenTable({len(self._names)} tokens)"

    def intern(self, name: str) -> int:
        """Return the id for *name*, assigning the next free id if new."""
        token_id = self._ids.get(name)
        if token_id is not None:
            return token_id
        if not _valid_name(name):
            raise ValueError(f"invalid token name: {name!r}")
        token_id = len(self._names)
        self._ids[name] = token_id
        self._names.append(name)
        return token_id

    def id_of(self, name: str) -> int:
        return self._ids[name]

    def name_of(self, token_id: int) -> str:
        return self._names[token_id]

    def names(self) -> list[str]:
        return list(self._names)

    def tokens(self) -> Iterator[ApiToken]:
        for token_id, name in enumerate(self._names):
            yield ApiToken(token_id, name)


@dataclass(frozen=True)
class ClientSequence:
    """The ordered API calls of one client method."""

    tokens: tuple[int, ...]
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[int]:
        return iter(self.tokens)


TokenSeq = Union[ClientSequence, Sequence[int]]


def _tokens_of(seq: TokenSeq) -> Sequence[int]:
    return seq.tokens if isinstance(seq, ClientSequence) else seq


@dataclass(frozen=True)
class IngestStats:
    """Record counts from one ingestion pass."""

    kept: int = 0
    dropped_empty: int = 0
    dropped_malformed: int = 0
    dropped_overlong: int = 0


@dataclass
class SequenceDatabase:
    """An immutable-after-construction, order-preserving sequence list.

    Iteration order is the input order; every downstream reduction relies
    on that as its determinism anchor.
    """

    sequences: list[ClientSequence]
    token_table: TokenTable
    stats: IngestStats = field(default_factory=IngestStats, compare=False)
    _postings: dict[int, list[int]] | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self) -> Iterator[ClientSequence]:
        return iter(self.sequences)

    def __getitem__(self, index: int) -> ClientSequence:
        return self.sequences[index]

    def vocabulary(self) -> range:
        return range(len(self.token_table))

    def postings(self) -> dict[int, list[int]]:
        """Token id -> sorted indices of the sequences containing it."""
        if self._postings is None:
            postings: dict[int, list[int]] = {}
            for idx, seq in enumerate(self.sequences):
                for tok in set(seq.tokens):
                    postings.setdefault(tok, []).append(idx)
            self._postings = postings
        return self._postings


def parse_database(
    source,
    *,
    max_sequence_length: int = DEFAULT_MAX_SEQUENCE_LENGTH,
    fmt: str = "auto",
) -> SequenceDatabase:
    """Read a sequence database from a text stream or string.

    Text format: one client sequence per line, call names separated by
    spaces or tabs, leading/trailing whitespace ignored.  Lines starting
    with '#' (after stripping) are comments; blank lines are skipped and
    counted as dropped-empty.  A JSON-lines record of the form
    ``{"id": ..., "calls": [...]}`` is accepted wherever a text line is;
    with ``fmt="auto"`` a leading '{' selects it per line, and
    ``fmt="text"`` / ``fmt="jsonl"`` force one format for every line.

    Records that are empty, malformed, or longer than
    *max_sequence_length* are dropped and counted, never fatal.
    Undecodable input raises :class:`CorpusError` with the byte offset.
    """
    if fmt not in ("auto", "text", "jsonl"):
        raise ValueError(f"unknown corpus format: {fmt!r}")
    lines: Iterable[str] = source.splitlines() if isinstance(source, str) else source

    table = TokenTable()
    sequences: list[ClientSequence] = []
    kept = empty = malformed = overlong = 0
    try:
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line:
                empty += 1
                continue
            if line.startswith("#"):
                continue
            if fmt == "jsonl" or (fmt == "auto" and line.startswith("{")):
                names, source_id = _parse_json_record(line, lineno)
                if names is None:
                    malformed += 1
                    continue
            else:
                names = line.split()
                source_id = str(lineno)
            if not names:
                empty += 1
                continue
            if len(names) > max_sequence_length:
                overlong += 1
                continue
            if not all(_valid_name(nm) for nm in names):
                malformed += 1
                continue
            ids = tuple(table.intern(nm) for nm in names)
            sequences.append(ClientSequence(ids, source_id))
            kept += 1
    except UnicodeDecodeError as exc:
        raise CorpusError(
            f"undecodable corpus input at byte offset {exc.start}: {exc.reason}"
        ) from exc
    stats = IngestStats(kept, empty, malformed, overlong)
    return SequenceDatabase(sequences, table, stats)


def _parse_json_record(line: str, lineno: int):
    """Return (names, source_id) for one JSON-lines record, or (None, None)."""
    try:
        record = json.loads(line)
    except json.JSONDecodeError:
        return None, None
    if not isinstance(record, dict):
        return None, None
    calls = record.get("calls")
    if not isinstance(calls, list) or not all(isinstance(c, str) for c in calls):
        return None, None
    record_id = record.get("id")
    source_id = str(record_id) if record_id is not None else str(lineno)
    return calls, source_id


def serialize_database(db: SequenceDatabase, fmt: str = "text") -> str:
    """Render *db* back to the input line format.

    The "jsonl" format preserves source ids exactly, so
    ``parse_database(serialize_database(db, "jsonl"), fmt="jsonl")``
    reproduces the database; the "text" format keeps only token content.
    """
    names = db.token_table
    out = []
    if fmt == "text":
        for seq in db.sequences:
            out.append(" ".join(names.name_of(t) for t in seq.tokens))
    elif fmt == "jsonl":
        for seq in db.sequences:
            record = {
                "id": seq.source_id,
                "calls": [names.name_of(t) for t in seq.tokens],
            }
            out.append(json.dumps(record))
    else:
        raise ValueError(f"unknown corpus format: {fmt!r}")
    return "\n".join(out) + ("\n" if out else "")


def is_subsequence(pattern: Pattern, sequence: TokenSeq) -> bool:
    """True iff *pattern*'s tokens appear in *sequence* in order, gaps allowed.

    Greedy left-most matching; sound and complete for containment.
    """
    it = iter(_tokens_of(sequence))
    return all(tok in it for tok in pattern)


def occurrence_capacity(pattern: Pattern, sequence: TokenSeq) -> int:
    """Largest n such that n back-to-back copies of *pattern* fit in *sequence*.

    Computed by repeated left-most matching, restarting the pattern after
    each completed occurrence; equals the n-fold self-concatenation
    definition of repeated containment.  Returns 0 when not contained.
    """
    if not pattern:
        raise ValueError("pattern must be non-empty")
    tokens = _tokens_of(sequence)
    count = 0
    k = 0
    last = len(pattern) - 1
    for tok in tokens:
        if tok == pattern[k]:
            if k == last:
                count += 1
                k = 0
            else:
                k += 1
    return count


def supporting_indices(pattern: Pattern, db: SequenceDatabase) -> list[int]:
    """Indices of the sequences in *db* that contain *pattern*."""
    if not pattern:
        raise ValueError("pattern must be non-empty")
    postings = db.postings()
    needed = set(pattern)
    candidate: list[int] | None = None
    for tok in needed:
        lst = postings.get(tok)
        if lst is None:
            return []
        if candidate is None or len(lst) < len(candidate):
            candidate = lst
    assert candidate is not None
    if len(needed) > 1:
        others = [set(postings[tok]) for tok in needed]
        candidate = [i for i in candidate if all(i in s for s in others)]
    return [i for i in candidate if is_subsequence(pattern, db.sequences[i])]


def support(pattern: Pattern, db: SequenceDatabase) -> int:
    """Number of sequences in *db* containing *pattern*."""
    return len(supporting_indices(pattern, db))


def relative_support(pattern: Pattern, db: SequenceDatabase) -> float:
    """Support divided by database size; 0 for the empty database."""
    if not db.sequences:
        return 0.0
    return support(pattern, db) / len(db.sequences)

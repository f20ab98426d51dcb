"""pamine: probabilistic mining of ranked API usage patterns.

Given a database of client call sequences, the miner grows a set of
multi-token patterns that best explain the corpus under a generative
interleaving model, and ranks them by how likely a client is to use
them.  No support threshold is involved; search budgets are the only
stopping controls.
"""

from .corpus import (
    ApiToken,
    ClientSequence,
    CorpusError,
    IngestStats,
    InvariantError,
    Pattern,
    SequenceDatabase,
    TokenTable,
    is_subsequence,
    occurrence_capacity,
    parse_database,
    relative_support,
    serialize_database,
    support,
    supporting_indices,
)
from .model import (
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
from .inference import (
    SequenceCache,
    covering_objective,
    greedy_cover,
    supported_patterns,
)
from .learning import (
    CandidateQueue,
    EStepPool,
    LearningState,
    em_optimize,
    generate_candidates,
    initialize,
    state_hash,
    structural_em_step,
)
from .cli import (
    MiningConfig,
    MiningResult,
    RankedPattern,
    emit_output,
    mine,
    parse_output,
    random_planted_patterns,
    rank,
    synth_generate,
)

__version__ = "0.1.0"

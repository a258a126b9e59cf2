"""symalign: symbolic music alignment.

Offline two-step DTW note alignment, an online value-network score follower
with a tempo-assisted aligning policy, plus the evaluation, state-sampling,
and synthetic-data machinery to validate both.
"""

__version__ = "0.1.0"

from .notes import (
    AlignmentRecord,
    NoteAlignment,
    Performance,
    PerfNote,
    SchemaError,
    Score,
    ScoreOnset,
    load_alignment_json,
    load_performance_json,
    load_score_json,
    save_alignment_json,
    save_performance_json,
    save_score_json,
    score_from_notes,
)
from .midi import MidiParseError, load_performance_midi
from .dtw import WarpPath, disagreement_brackets, dtw, dtw_backward, inclusion_cost
from .offline import (
    OfflineAligner,
    TimeMap,
    align_offline,
    build_time_map,
    onset_align,
    pitch_sequence_align,
    resolve_brackets,
)
from .model import (
    AgentState,
    ModelConfig,
    ModelWeights,
    SlotValues,
    TokenSequence,
    WeightFormatError,
    embed,
    forward,
    load_weights,
    network_value_fn,
    save_weights,
    suffix_match_values,
    tokenize,
)
from .online import (
    FollowerSession,
    GreedyFollower,
    OnlineAligner,
    StepDecision,
    TempoEstimate,
    estimate_tempo,
)
from .metrics import AsynchronyReport, MatchScore, asynchrony, fscore, topk_hits
from .sampling import (
    LabeledState,
    augment_pitch_shift,
    export_states,
    import_states,
    sample_states,
)
from .synth import SynthParams, generate_performance

__all__ = [name for name in dir() if not name.startswith("_")]

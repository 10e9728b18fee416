"""Budgeted chat-room speech regulation.

Members spend a refillable speech budget to act in a room; after every
accepted action a pluggable allocator (no-op, banned-token rule, room
heuristic, or a learned sequence regressor) reassigns the actor's
budget from the room's recent feature history. The package bundles the
room engine, deterministic multi-agent simulator, hand-written
temporal-transformer regressor with its training loop, append-only
persistence, a WebSocket chat service, and a CLI.
"""

from .core import (
    ATMOSPHERE_SLOTS,
    Action,
    ActionKind,
    AtmosphereWindow,
    Field,
    MemberId,
    MemberResources,
    Message,
    ResourceLedger,
    ResourceStructure,
    resource_structure,
)
from .engine import (
    ActionOutcome,
    Election,
    EngineConfig,
    OutcomeReason,
    Room,
    RoomEvent,
    TaskRecord,
    TaskStatus,
    action_cost,
)
from .errors import AgoraError
from .matrix import (
    ATMOSPHERE_SLICE,
    FEATURE_DIM,
    HeuristicConfig,
    HeuristicMatrix,
    LearnedMatrix,
    Matrix,
    MatrixDecision,
    NoOpMatrix,
    RuleConfig,
    RuleMatrix,
    allocate,
    assemble_features,
    heuristic_allocate,
    make_matrix,
    noop_allocate,
    rule_allocate,
)
from .model_store import load_dataset, load_weights, save_dataset, save_weights
from .persistence import RoomLog, persist_room, restore_room
from .sentiment import (
    Lexicon,
    LexiconScorer,
    SentimentScore,
    atmosphere_value,
    atmosphere_vector,
    make_scorer,
    register_external_scorer,
)
from .simulator import (
    AgentPolicy,
    Persona,
    Regime,
    ScenarioConfig,
    SimulationReport,
    generate_dataset,
    load_scenario,
    run_scenario,
    shipped_scenarios,
)
from .training import (
    LabeledSample,
    TrainConfig,
    TrainHistory,
    desk_train_config,
    evaluate,
    paper_train_config,
    split_indices,
    train,
)
from .transformer import (
    ModelConfig,
    ModelWeights,
    desk_config,
    forward,
    gradient_check,
    init_weights,
    paper_config,
    predict,
    tiny_config,
)
from .vectorizer import CorpusStats, action_vector, tokenize, word_vector

__version__ = "0.1.0"

__all__ = [
    "ATMOSPHERE_SLICE",
    "ATMOSPHERE_SLOTS",
    "Action",
    "ActionKind",
    "ActionOutcome",
    "AgentPolicy",
    "AgoraError",
    "AtmosphereWindow",
    "CorpusStats",
    "Election",
    "EngineConfig",
    "FEATURE_DIM",
    "Field",
    "HeuristicConfig",
    "HeuristicMatrix",
    "LabeledSample",
    "LearnedMatrix",
    "Lexicon",
    "LexiconScorer",
    "Matrix",
    "MatrixDecision",
    "MemberId",
    "MemberResources",
    "Message",
    "ModelConfig",
    "ModelWeights",
    "NoOpMatrix",
    "OutcomeReason",
    "Persona",
    "Regime",
    "ResourceLedger",
    "ResourceStructure",
    "Room",
    "RoomEvent",
    "RoomLog",
    "RuleConfig",
    "RuleMatrix",
    "ScenarioConfig",
    "SentimentScore",
    "SimulationReport",
    "TaskRecord",
    "TaskStatus",
    "TrainConfig",
    "TrainHistory",
    "action_cost",
    "action_vector",
    "allocate",
    "assemble_features",
    "atmosphere_value",
    "atmosphere_vector",
    "desk_config",
    "desk_train_config",
    "evaluate",
    "forward",
    "generate_dataset",
    "gradient_check",
    "heuristic_allocate",
    "init_weights",
    "load_dataset",
    "load_scenario",
    "load_weights",
    "make_matrix",
    "make_scorer",
    "noop_allocate",
    "paper_config",
    "paper_train_config",
    "persist_room",
    "predict",
    "register_external_scorer",
    "resource_structure",
    "restore_room",
    "rule_allocate",
    "run_scenario",
    "save_dataset",
    "save_weights",
    "shipped_scenarios",
    "split_indices",
    "tiny_config",
    "tokenize",
    "train",
    "word_vector",
]

"""scenechain: deterministic indoor-scene layout engine and editing environment.

A scene is a polygonal room plus yaw-rotated object boxes. The package
provides the scene data model and agent tool protocol, collision/boundary
geometry, physics metrics, a hierarchical reward system, reverse-engineered
editing-trajectory synthesis, a rule-based layout optimizer, a multi-turn
editing environment, top-down/perspective renderers, and a CLI.
"""

from .assets import (
    AssetCatalog,
    AssetEntry,
    load_catalog,
    mandatory_objects,
    match_category,
    resolve_room_type,
    size_valid,
    snap_size,
)
from .chains import (
    ChainConfig,
    ChainScore,
    ChainVerificationError,
    EditChain,
    chain_from_json,
    chain_to_json,
    replay,
    score_chain,
    synthesize_chain,
    synthesize_dataset,
    verify_chain,
)
from .env import (
    EpisodeConfig,
    EpisodeRecord,
    Observation,
    TerminationCause,
    load_episode_record,
    rescore_episode,
    run_episode,
    write_episode_record,
)
from .fixtures import make_fixture_scene, make_fixture_scenes, perturb_scene
from .geometry import Obb, obb_from_object, pair_penetration, support_status
from .judges import JudgeUnavailable, MockJudge, RemoteJudge
from .metrics import (
    DEFAULT_PHYSICS,
    PhysicsConfig,
    ViolationReport,
    aggregate,
    check_physics,
    scene_ratios,
)
from .optimizer import OptReport, optimize
from .policies import (
    GreedyBuilderPolicy,
    PolicyUnavailable,
    RandomPolicy,
    RemotePolicy,
    ReplayPolicy,
    ScriptedPolicy,
)
from .render import RenderOptions, render_merged, render_topdown
from .rewards import (
    DEFAULT_WEIGHTS,
    FinalReward,
    JudgeScores,
    RewardWeights,
    StepReward,
    TrajectoryScore,
    final_reward,
    init_reward,
    step_reward,
    trajectory_score,
)
from .scene import (
    RoomGeometry,
    Scene,
    SceneObject,
    Vec3,
    parse_scene_json,
    serialize_scene,
)
from .tools import (
    FormatPenalty,
    Phase,
    apply_tool_calls,
    parse_agent_response,
)

__version__ = "0.1.0"

__all__ = [
    "AssetCatalog",
    "AssetEntry",
    "ChainConfig",
    "ChainScore",
    "ChainVerificationError",
    "DEFAULT_PHYSICS",
    "DEFAULT_WEIGHTS",
    "EditChain",
    "EpisodeConfig",
    "EpisodeRecord",
    "FinalReward",
    "FormatPenalty",
    "GreedyBuilderPolicy",
    "JudgeScores",
    "JudgeUnavailable",
    "MockJudge",
    "Obb",
    "Observation",
    "OptReport",
    "Phase",
    "PhysicsConfig",
    "PolicyUnavailable",
    "RandomPolicy",
    "RemoteJudge",
    "RemotePolicy",
    "RenderOptions",
    "ReplayPolicy",
    "RewardWeights",
    "RoomGeometry",
    "Scene",
    "SceneObject",
    "ScriptedPolicy",
    "StepReward",
    "TerminationCause",
    "TrajectoryScore",
    "Vec3",
    "ViolationReport",
    "aggregate",
    "apply_tool_calls",
    "chain_from_json",
    "chain_to_json",
    "check_physics",
    "final_reward",
    "init_reward",
    "load_catalog",
    "load_episode_record",
    "make_fixture_scene",
    "make_fixture_scenes",
    "mandatory_objects",
    "match_category",
    "obb_from_object",
    "optimize",
    "pair_penetration",
    "parse_agent_response",
    "parse_scene_json",
    "perturb_scene",
    "render_merged",
    "render_topdown",
    "replay",
    "rescore_episode",
    "resolve_room_type",
    "run_episode",
    "scene_ratios",
    "score_chain",
    "serialize_scene",
    "size_valid",
    "snap_size",
    "step_reward",
    "support_status",
    "synthesize_chain",
    "synthesize_dataset",
    "trajectory_score",
    "verify_chain",
    "write_episode_record",
]

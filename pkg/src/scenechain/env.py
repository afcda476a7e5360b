"""Multi-turn scene-editing episodes.

``run_episode`` drives one policy/judge pair through the three-phase loop:
an init turn that creates (or receives) the room, edit turns that parse the
policy's raw text through the shared protocol parser and score each
resulting state, and a terminal pass that optionally runs the layout
optimizer before computing the final reward and trajectory return.

Everything observable is recorded. A record stores raw action texts, the
judge's verdicts, and every reward with full float fidelity, so
``rescore_episode`` can replay the exact scoring pipeline offline — judge
calls replaced by the stored verdicts — and reproduce each number bit for
bit. Scene payloads inside records stay in canonical 6-decimal form; reward
floats are serialized at full precision (they are derived quantities, not
wire geometry).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from statistics import fmean

from .assets import (
    AssetCatalog,
    UnknownRoomType,
    essential_missing,
    key_object_counts,
    load_catalog,
    resolve_room_type,
)
from .judges import JudgeContext, JudgeUnavailable
from .metrics import DEFAULT_PHYSICS, PhysicsConfig, check_physics, scene_ratios
from .optimizer import optimize
from .rewards import (
    DEFAULT_WEIGHTS,
    FinalReward,
    JudgeScores,
    RewardWeights,
    StepReward,
    TrajectoryScore,
    final_reward,
    format_reward,
    init_reward,
    key_objects_score,
    relevance_score,
    step_reward_from_ratios,
    trajectory_score,
)
from .scene import Scene, Vec3, parse_scene_json, serialize_scene
from .tools import (
    FormatPenalty,
    Phase,
    PenaltyKind,
    apply_tool_calls,
    parse_agent_response,
)

RECORD_FILE = "episode.jsonl"
SUMMARY_FILE = "summary.json"


class TerminationCause(str, Enum):
    TERMINATE_TOOL = "terminate_tool"
    MAX_TURNS = "max_turns"
    FATAL_INIT = "fatal_init"


@dataclass(frozen=True)
class HistoryEntry:
    """One prior turn as the policy sees it: its text and its reward."""

    text: str
    reward: float


@dataclass(frozen=True)
class Observation:
    instruction: str
    scene_json: str
    render: bytes | None
    render_format: str | None
    render_failed: bool
    history: tuple[HistoryEntry, ...]
    turn: int
    phase: Phase


@dataclass(frozen=True)
class EpisodeConfig:
    max_turns: int = 15
    render_enabled: bool = False
    weights: RewardWeights = field(default_factory=lambda: DEFAULT_WEIGHTS)
    physics_opt_on_finish: bool = False
    history_depth: int = 4
    physics: PhysicsConfig = field(default_factory=lambda: DEFAULT_PHYSICS)

    def __post_init__(self):
        if self.max_turns < 1:
            raise ValueError("max_turns must be at least 1")
        if self.history_depth < 0:
            raise ValueError("history_depth must be non-negative")

    @classmethod
    def refinement(cls, **overrides) -> "EpisodeConfig":
        """Defaults for goal-oriented episodes over an existing scene."""
        overrides.setdefault("max_turns", 10)
        overrides.setdefault("physics_opt_on_finish", True)
        return cls(**overrides)


@dataclass(frozen=True)
class InitRecord:
    action_text: str | None  # None when the scene was given, not created
    scene_json: str | None  # canonical scene after init; None on fatal init
    r_init: float
    penalties: tuple[FormatPenalty, ...]
    counted_in_mean: bool


@dataclass(frozen=True)
class TurnRecord:
    turn: int
    action_text: str
    scene_json: str  # canonical scene after this turn's calls
    penalties: tuple[FormatPenalty, ...]
    terminated: bool
    case: str  # "A" (relevance of additions) or "B" (key-object presence)
    improvement: int
    relevant: tuple[str, ...]
    irrelevant: tuple[str, ...]
    key_found: int
    key_total: int
    essential_missing: bool
    step: StepReward
    render_sha256: str | None = None


@dataclass(frozen=True)
class OptimizerSummary:
    """Flat, serializable digest of a physics-optimization pass."""

    steps_run: int
    moved: tuple[tuple[str, Vec3, Vec3], ...]
    deleted: tuple[str, ...]
    residual_violations: int
    resolved_pairs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class TerminalRecord:
    final_scene_json: str
    optimizer: OptimizerSummary | None
    mandatory: tuple[str, ...]
    consolidated: tuple[float, float, float]
    key_found: int
    key_total: int
    essential_missing: bool
    final: FinalReward


@dataclass(frozen=True)
class EpisodeRecord:
    instruction: str
    room_type: str | None  # requested (or inherited) room type
    mode: str  # "from_scratch" | "refinement"
    seed: int | None
    max_turns: int
    termination_cause: TerminationCause
    init: InitRecord
    turns: tuple[TurnRecord, ...]
    terminal: TerminalRecord | None  # None only on fatal init
    r_final: float
    trajectory: TrajectoryScore

    @property
    def final_scene(self) -> Scene | None:
        if self.terminal is None:
            return None
        return parse_scene_json(self.terminal.final_scene_json)


# --------------------------------------------------------------------------
# Observation assembly


def assemble_observation(
    instruction: str,
    scene: Scene | None,
    history: tuple[HistoryEntry, ...],
    turn: int,
    phase: Phase,
    cfg: EpisodeConfig,
) -> Observation:
    """Deterministic observation for one turn; renders degrade gracefully."""
    render = None
    render_format = None
    render_failed = False
    if cfg.render_enabled and scene is not None and phase is not Phase.INIT:
        try:
            from .render import render_merged_png

            render = render_merged_png(scene)
            render_format = "png"
        except Exception:
            render_failed = True
    depth = cfg.history_depth
    kept = history[-depth:] if depth else ()
    return Observation(
        instruction=instruction,
        scene_json=serialize_scene(scene) if scene is not None else "null",
        render=render,
        render_format=render_format,
        render_failed=render_failed,
        history=tuple(kept),
        turn=turn,
        phase=phase,
    )


# --------------------------------------------------------------------------
# Turn scoring (shared by the live loop and offline re-scoring)


def _new_descriptions(before: Scene, after: Scene) -> list[str]:
    """Descriptions of objects added or swapped in by this turn's calls."""
    previous = {obj.uid: obj.description for obj in before.objects}
    added = []
    for obj in after.objects:
        if obj.uid not in previous or previous[obj.uid] != obj.description:
            added.append(obj.description)
    return added


def _score_edit_turn(
    scene: Scene,
    turn_index: int,
    action_text: str,
    catalog: AssetCatalog,
    mandatory: list[str],
    context: JudgeContext,
    cfg: EpisodeConfig,
    improvement_fn,
    relevance_fn,
    render_sha256: str | None = None,
) -> tuple[Scene, TurnRecord, bool]:
    """Parse, apply, and score one edit turn against the scene."""
    response, parse_penalties = parse_agent_response(action_text, Phase.EDIT)
    after, apply_penalties, terminated = apply_tool_calls(
        scene, response.tool_calls, catalog
    )
    penalties = tuple(parse_penalties) + tuple(apply_penalties)
    r_fmt = format_reward(penalties)

    report = check_physics(after, cfg.physics)
    ratios = scene_ratios(report, after)
    improvement = improvement_fn(scene, after)

    added = _new_descriptions(scene, after)
    if added:
        case = "A"
        relevant, irrelevant = relevance_fn(added)
        if len(relevant) + len(irrelevant) < 1:
            raise JudgeUnavailable(
                f"relevance verdict empty for non-empty additions {added!r}"
            )
        r_sem = relevance_score(len(relevant), len(irrelevant))
        found, total = key_object_counts(catalog, after, mandatory)
        gone = essential_missing(catalog, after, context.room_type, context.instruction)
    else:
        case = "B"
        relevant, irrelevant = [], []
        found, total = key_object_counts(catalog, after, mandatory)
        gone = essential_missing(catalog, after, context.room_type, context.instruction)
        r_sem = key_objects_score(found, total, gone)

    step = step_reward_from_ratios(
        r_fmt, ratios, float(improvement), r_sem, cfg.weights
    )
    record = TurnRecord(
        turn=turn_index,
        action_text=action_text,
        scene_json=serialize_scene(after),
        penalties=penalties,
        terminated=terminated,
        case=case,
        improvement=improvement,
        relevant=tuple(relevant),
        irrelevant=tuple(irrelevant),
        key_found=found,
        key_total=total,
        essential_missing=gone,
        step=step,
        render_sha256=render_sha256,
    )
    return after, record, terminated


def _score_terminal(
    scene: Scene,
    turns: tuple[TurnRecord, ...],
    catalog: AssetCatalog,
    mandatory: list[str],
    context: JudgeContext,
    cfg: EpisodeConfig,
    consolidated: tuple[float, float, float],
    optimizer_summary: OptimizerSummary | None,
) -> TerminalRecord:
    report = check_physics(scene, cfg.physics)
    ratios = scene_ratios(report, scene)
    r_fmt = fmean(t.step.r_fmt for t in turns) if turns else 1.0
    found, total = key_object_counts(catalog, scene, mandatory)
    gone = essential_missing(catalog, scene, context.room_type, context.instruction)
    judge_scores = JudgeScores(
        improvement=0,
        mandatory_objects=tuple(mandatory),
        consolidated=consolidated,
    )
    final = final_reward(
        scene,
        report,
        ratios,
        judge_scores,
        (found, total, gone),
        catalog,
        r_fmt,
        cfg.weights,
    )
    return TerminalRecord(
        final_scene_json=serialize_scene(scene),
        optimizer=optimizer_summary,
        mandatory=tuple(mandatory),
        consolidated=consolidated,
        key_found=found,
        key_total=total,
        essential_missing=gone,
        final=final,
    )


def _trajectory(record_init: InitRecord, turns, r_final: float, weights) -> TrajectoryScore:
    steps = [record_init.r_init] if record_init.counted_in_mean else []
    steps += [t.step.r_t for t in turns]
    return trajectory_score(steps, r_final, weights)


def _run_optimizer(scene: Scene, cfg: EpisodeConfig) -> tuple[Scene, OptimizerSummary]:
    fixed, report = optimize(scene, cfg.physics)
    summary = OptimizerSummary(
        steps_run=report.steps_run,
        moved=report.moved,
        deleted=report.deleted,
        residual_violations=report.residual.violation_count(),
        resolved_pairs=report.resolved_pairs,
    )
    return fixed, summary


# --------------------------------------------------------------------------
# The episode loop


def run_episode(
    policy,
    judge,
    instruction: str,
    init_scene: Scene | None = None,
    cfg: EpisodeConfig | None = None,
    rng=None,
    seed: int | None = None,
    catalog: AssetCatalog | None = None,
    record_dir: str | Path | None = None,
) -> EpisodeRecord:
    """Run one episode to completion and (optionally) persist its record.

    ``rng`` is accepted for interface symmetry with stochastic components;
    the loop itself draws no randomness — determinism comes from the policy,
    judge, and config alone. Policy or judge transport failures propagate as
    exceptions (an aborted episode must never masquerade as a scored one).
    """
    del rng
    catalog = catalog if catalog is not None else load_catalog()
    cfg = cfg if cfg is not None else EpisodeConfig()
    mode = "refinement" if init_scene is not None else "from_scratch"

    try:
        requested = resolve_room_type(catalog, None, instruction)
    except UnknownRoomType:
        requested = None

    # -- init phase
    if init_scene is None:
        observation = assemble_observation(instruction, None, (), 0, Phase.INIT, cfg)
        action_text = policy.act(observation)
        response, init_penalties = parse_agent_response(action_text, Phase.INIT)
        r_init = init_reward(response.create_scene, requested)
        if response.create_scene is None:
            init_rec = InitRecord(
                action_text=action_text,
                scene_json=None,
                r_init=r_init,
                penalties=tuple(init_penalties),
                counted_in_mean=True,
            )
            record = EpisodeRecord(
                instruction=instruction,
                room_type=requested,
                mode=mode,
                seed=seed,
                max_turns=cfg.max_turns,
                termination_cause=TerminationCause.FATAL_INIT,
                init=init_rec,
                turns=(),
                terminal=None,
                r_final=-1.0,
                trajectory=trajectory_score([r_init], -1.0, cfg.weights),
            )
            if record_dir is not None:
                write_episode_record(record, record_dir)
            return record
        scene = response.create_scene
        init_rec = InitRecord(
            action_text=action_text,
            scene_json=serialize_scene(scene),
            r_init=r_init,
            penalties=tuple(init_penalties),
            counted_in_mean=True,
        )
    else:
        scene = init_scene
        init_rec = InitRecord(
            action_text=None,
            scene_json=serialize_scene(scene),
            r_init=init_reward(scene, scene.room.room_type),
            penalties=(),
            counted_in_mean=False,
        )
        if requested is None:
            requested = scene.room.room_type

    room_type = requested if requested is not None else scene.room.room_type
    context = JudgeContext(instruction=instruction, room_type=room_type)
    mandatory = judge.mandatory(room_type, instruction)
    if not mandatory:
        raise JudgeUnavailable(f"empty mandatory-object list for {room_type!r}")

    # -- edit phase
    turns: list[TurnRecord] = []
    history: tuple[HistoryEntry, ...] = ()
    cause = TerminationCause.MAX_TURNS
    for turn_index in range(1, cfg.max_turns + 1):
        observation = assemble_observation(
            instruction, scene, history, turn_index, Phase.EDIT, cfg
        )
        action_text = policy.act(observation)
        render_hash = (
            hashlib.sha256(observation.render).hexdigest()
            if observation.render is not None
            else None
        )
        scene, turn_record, terminated = _score_edit_turn(
            scene,
            turn_index,
            action_text,
            catalog,
            mandatory,
            context,
            cfg,
            improvement_fn=lambda prev, cur: judge.improvement(prev, cur, context),
            relevance_fn=lambda added: judge.relevance(
                room_type, instruction, added
            ),
            render_sha256=render_hash,
        )
        turns.append(turn_record)
        history = history + (HistoryEntry(action_text, turn_record.step.r_t),)
        if terminated:
            cause = TerminationCause.TERMINATE_TOOL
            break

    # -- terminal phase
    optimizer_summary = None
    if cfg.physics_opt_on_finish:
        scene, optimizer_summary = _run_optimizer(scene, cfg)
    consolidated = judge.consolidate(scene, context)
    terminal = _score_terminal(
        scene, tuple(turns), catalog, mandatory, context, cfg,
        consolidated, optimizer_summary,
    )
    record = EpisodeRecord(
        instruction=instruction,
        room_type=room_type,
        mode=mode,
        seed=seed,
        max_turns=cfg.max_turns,
        termination_cause=cause,
        init=init_rec,
        turns=tuple(turns),
        terminal=terminal,
        r_final=terminal.final.r_final,
        trajectory=_trajectory(init_rec, turns, terminal.final.r_final, cfg.weights),
    )
    if record_dir is not None:
        write_episode_record(record, record_dir)
    return record


# --------------------------------------------------------------------------
# Offline re-scoring


def rescore_episode(
    record: EpisodeRecord,
    catalog: AssetCatalog | None = None,
    cfg: EpisodeConfig | None = None,
) -> EpisodeRecord:
    """Recompute every reward in a stored episode from its raw materials.

    Re-parses the stored action texts, re-applies the calls, and re-derives
    all physics and reward arithmetic; judge verdicts are taken from the
    record (they are inputs, not derived values). The result must match the
    original record bit for bit — any drift indicates nondeterminism.
    """
    catalog = catalog if catalog is not None else load_catalog()
    cfg = cfg if cfg is not None else EpisodeConfig(max_turns=record.max_turns)

    if record.init.action_text is not None:
        response, init_penalties = parse_agent_response(
            record.init.action_text, Phase.INIT
        )
        r_init = init_reward(response.create_scene, record.room_type)
        if response.create_scene is None:
            init_rec = InitRecord(
                action_text=record.init.action_text,
                scene_json=None,
                r_init=r_init,
                penalties=tuple(init_penalties),
                counted_in_mean=True,
            )
            return EpisodeRecord(
                instruction=record.instruction,
                room_type=record.room_type,
                mode=record.mode,
                seed=record.seed,
                max_turns=record.max_turns,
                termination_cause=TerminationCause.FATAL_INIT,
                init=init_rec,
                turns=(),
                terminal=None,
                r_final=-1.0,
                trajectory=trajectory_score([r_init], -1.0, cfg.weights),
            )
        scene = response.create_scene
        init_rec = InitRecord(
            action_text=record.init.action_text,
            scene_json=serialize_scene(scene),
            r_init=r_init,
            penalties=tuple(init_penalties),
            counted_in_mean=True,
        )
    else:
        scene = parse_scene_json(record.init.scene_json)
        init_rec = InitRecord(
            action_text=None,
            scene_json=serialize_scene(scene),
            r_init=init_reward(scene, scene.room.room_type),
            penalties=(),
            counted_in_mean=False,
        )

    context = JudgeContext(instruction=record.instruction, room_type=record.room_type)
    assert record.terminal is not None
    mandatory = list(record.terminal.mandatory)

    turns: list[TurnRecord] = []
    cause = TerminationCause.MAX_TURNS
    for stored in record.turns:
        scene, turn_record, terminated = _score_edit_turn(
            scene,
            stored.turn,
            stored.action_text,
            catalog,
            mandatory,
            context,
            cfg,
            improvement_fn=lambda prev, cur, s=stored: s.improvement,
            relevance_fn=lambda added, s=stored: (list(s.relevant), list(s.irrelevant)),
            render_sha256=stored.render_sha256,
        )
        if turn_record.case != stored.case:
            raise ValueError(
                f"turn {stored.turn}: stored case {stored.case!r} but replay "
                f"derived {turn_record.case!r}"
            )
        turns.append(turn_record)
        if terminated:
            cause = TerminationCause.TERMINATE_TOOL
            break

    if record.terminal.optimizer is not None:
        scene, optimizer_summary = _run_optimizer(scene, cfg)
    else:
        optimizer_summary = None
    terminal = _score_terminal(
        scene, tuple(turns), catalog, mandatory, context, cfg,
        record.terminal.consolidated, optimizer_summary,
    )
    return EpisodeRecord(
        instruction=record.instruction,
        room_type=record.room_type,
        mode=record.mode,
        seed=record.seed,
        max_turns=record.max_turns,
        termination_cause=cause,
        init=init_rec,
        turns=tuple(turns),
        terminal=terminal,
        r_final=terminal.final.r_final,
        trajectory=_trajectory(init_rec, turns, terminal.final.r_final, cfg.weights),
    )


# --------------------------------------------------------------------------
# Record persistence (full-fidelity floats; scenes stay canonical strings)


def _record_json(value: dict) -> str:
    return json.dumps(value, separators=(",", ":"), allow_nan=False)


def _penalties_to_wire(penalties) -> list[dict]:
    return [{"kind": p.kind.name, "detail": p.detail} for p in penalties]


def _penalties_from_wire(entries) -> tuple[FormatPenalty, ...]:
    return tuple(FormatPenalty(PenaltyKind[e["kind"]], e["detail"]) for e in entries)


def _step_to_wire(step: StepReward) -> dict:
    return {
        "r_fmt": step.r_fmt,
        "r_col": step.r_col,
        "r_oob": step.r_oob,
        "r_pen": step.r_pen,
        "r_oob_vol": step.r_oob_vol,
        "r_imp": step.r_imp,
        "r_key": step.r_key,
        "r_t": step.r_t,
    }


def _final_to_wire(final: FinalReward) -> dict:
    return {
        "r_fmt": final.r_fmt,
        "r_key": final.r_key,
        "r_size": final.r_size,
        "r_support": final.r_support,
        "r_col": final.r_col,
        "r_oob": final.r_oob,
        "r_pen": final.r_pen,
        "r_oob_vol": final.r_oob_vol,
        "consolidated": list(final.consolidated),
        "object_count_override": final.object_count_override,
        "physics_skipped": final.physics_skipped,
        "r_final": final.r_final,
    }


def _optimizer_to_wire(summary: OptimizerSummary | None) -> dict | None:
    if summary is None:
        return None
    return {
        "steps_run": summary.steps_run,
        "moved": [
            {"uid": uid, "from": src.to_list(), "to": dst.to_list()}
            for uid, src, dst in summary.moved
        ],
        "deleted": list(summary.deleted),
        "residual_violations": summary.residual_violations,
        "resolved_pairs": [list(pair) for pair in summary.resolved_pairs],
    }


def write_episode_record(record: EpisodeRecord, out_dir: str | Path) -> Path:
    """Persist a record as one JSONL line per turn plus a summary file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = [
        _record_json(
            {
                "kind": "init",
                "action_text": record.init.action_text,
                "scene_json": record.init.scene_json,
                "r_init": record.init.r_init,
                "penalties": _penalties_to_wire(record.init.penalties),
                "counted_in_mean": record.init.counted_in_mean,
            }
        )
    ]
    for turn in record.turns:
        lines.append(
            _record_json(
                {
                    "kind": "turn",
                    "turn": turn.turn,
                    "action_text": turn.action_text,
                    "scene_json": turn.scene_json,
                    "penalties": _penalties_to_wire(turn.penalties),
                    "terminated": turn.terminated,
                    "case": turn.case,
                    "improvement": turn.improvement,
                    "relevant": list(turn.relevant),
                    "irrelevant": list(turn.irrelevant),
                    "key_found": turn.key_found,
                    "key_total": turn.key_total,
                    "essential_missing": turn.essential_missing,
                    "step": _step_to_wire(turn.step),
                    "render_sha256": turn.render_sha256,
                }
            )
        )
    (out_dir / RECORD_FILE).write_text("\n".join(lines) + "\n")

    summary = {
        "instruction": record.instruction,
        "room_type": record.room_type,
        "mode": record.mode,
        "seed": record.seed,
        "max_turns": record.max_turns,
        "termination_cause": record.termination_cause.value,
        "r_final": record.r_final,
        "mean_step": record.trajectory.mean_step,
        "j_tau": record.trajectory.j_tau,
    }
    if record.terminal is not None:
        summary["terminal"] = {
            "final_scene_json": record.terminal.final_scene_json,
            "optimizer": _optimizer_to_wire(record.terminal.optimizer),
            "mandatory": list(record.terminal.mandatory),
            "consolidated": list(record.terminal.consolidated),
            "key_found": record.terminal.key_found,
            "key_total": record.terminal.key_total,
            "essential_missing": record.terminal.essential_missing,
            "final": _final_to_wire(record.terminal.final),
        }
    else:
        summary["terminal"] = None
    (out_dir / SUMMARY_FILE).write_text(_record_json(summary) + "\n")
    return out_dir / SUMMARY_FILE


def load_episode_record(record_dir: str | Path) -> EpisodeRecord:
    """Inverse of ``write_episode_record``."""
    record_dir = Path(record_dir)
    lines = (record_dir / RECORD_FILE).read_text().splitlines()
    summary = json.loads((record_dir / SUMMARY_FILE).read_text())

    init_data = json.loads(lines[0])
    if init_data.get("kind") != "init":
        raise ValueError("episode record must start with an init line")
    init_rec = InitRecord(
        action_text=init_data["action_text"],
        scene_json=init_data["scene_json"],
        r_init=init_data["r_init"],
        penalties=_penalties_from_wire(init_data["penalties"]),
        counted_in_mean=init_data["counted_in_mean"],
    )

    turns = []
    for line in lines[1:]:
        data = json.loads(line)
        step = StepReward(**data["step"])
        turns.append(
            TurnRecord(
                turn=data["turn"],
                action_text=data["action_text"],
                scene_json=data["scene_json"],
                penalties=_penalties_from_wire(data["penalties"]),
                terminated=data["terminated"],
                case=data["case"],
                improvement=data["improvement"],
                relevant=tuple(data["relevant"]),
                irrelevant=tuple(data["irrelevant"]),
                key_found=data["key_found"],
                key_total=data["key_total"],
                essential_missing=data["essential_missing"],
                step=step,
                render_sha256=data["render_sha256"],
            )
        )

    terminal = None
    if summary["terminal"] is not None:
        t = summary["terminal"]
        final_data = dict(t["final"])
        final_data["consolidated"] = tuple(final_data["consolidated"])
        opt = None
        if t["optimizer"] is not None:
            o = t["optimizer"]
            opt = OptimizerSummary(
                steps_run=o["steps_run"],
                moved=tuple(
                    (m["uid"], Vec3.from_seq(m["from"]), Vec3.from_seq(m["to"]))
                    for m in o["moved"]
                ),
                deleted=tuple(o["deleted"]),
                residual_violations=o["residual_violations"],
                resolved_pairs=tuple(tuple(p) for p in o["resolved_pairs"]),
            )
        terminal = TerminalRecord(
            final_scene_json=t["final_scene_json"],
            optimizer=opt,
            mandatory=tuple(t["mandatory"]),
            consolidated=tuple(t["consolidated"]),
            key_found=t["key_found"],
            key_total=t["key_total"],
            essential_missing=t["essential_missing"],
            final=FinalReward(**final_data),
        )

    return EpisodeRecord(
        instruction=summary["instruction"],
        room_type=summary["room_type"],
        mode=summary["mode"],
        seed=summary["seed"],
        max_turns=summary["max_turns"],
        termination_cause=TerminationCause(summary["termination_cause"]),
        init=init_rec,
        turns=tuple(turns),
        terminal=terminal,
        r_final=summary["r_final"],
        trajectory=TrajectoryScore(
            mean_step=summary["mean_step"],
            final=summary["r_final"],
            j_tau=summary["j_tau"],
        ),
    )

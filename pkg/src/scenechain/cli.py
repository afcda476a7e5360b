"""Operator command line: synthesis, verification, episodes, scoring,
optimization, metrics, rendering, and fixture generation.

Conventions shared by every subcommand:

* stdout is JSON by default; ``--pretty`` switches to a human summary.
* exit codes: 0 success, 1 domain error (bad data, failed verification),
  2 usage error (argparse).
* ``--config FILE`` supplies defaults from a TOML or JSON file keyed by
  subcommand name; explicit flags always win over the file, the file wins
  over built-in defaults.
* outputs are deterministic under a fixed seed; every command that writes
  files also writes a ``manifest.json`` beside them (atomically). The
  manifest carries wall-clock time, so byte-level determinism comparisons
  should skip it.
* ``--jobs N`` fans independent work items over a thread pool; result
  ordering is input ordering regardless of N.
* the catalog resolves from ``--catalog``, then ``$SCENECHAIN_CATALOG``,
  then the packaged data.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .assets import load_catalog
from .chains import (
    ChainConfig,
    chain_from_json,
    synthesize_dataset,
    verify_chain,
)
from .env import (
    EpisodeConfig,
    load_episode_record,
    rescore_episode,
    run_episode,
    write_episode_record,
)
from .fixtures import drop_key_objects, make_fixture_scene, perturb_scene
from .judges import MockJudge, RemoteJudge
from .metrics import DEFAULT_PHYSICS, aggregate, check_physics
from .optimizer import optimize
from .policies import (
    GreedyBuilderPolicy,
    RandomPolicy,
    RemotePolicy,
    ReplayPolicy,
)
from .render import RenderOptions, render_merged, render_topdown, render_topdown_png
from .scene import parse_scene_json, serialize_scene

_MANIFEST_NAME = "manifest.json"
_FIXTURE_MODES = ("clean", "chaotic", "missing")


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("scenechain")
    except Exception:
        return "unknown"


# --------------------------------------------------------------------------
# Shared plumbing


def _atomic_write(path: Path, data: str | bytes) -> None:
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(out_dir: Path, args, inputs: list[str], outputs: list[str], started: float) -> None:
    config = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in {"func", "human"} and not key.startswith("_")
    }
    manifest = {
        "command": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": inputs,
        "outputs": outputs,
        "version": _version(),
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / _MANIFEST_NAME, json.dumps(manifest, indent=2) + "\n")


def _parallel_map(fn, items, jobs: int) -> list:
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _emit(payload: dict, args, human) -> None:
    if args.pretty:
        print(human(payload))
    else:
        print(json.dumps(payload, indent=2))


def _load_scene_file(path: str | Path):
    return parse_scene_json(Path(path).read_text())


def _load_scene_dir(path: str | Path) -> list:
    root = Path(path)
    if not root.is_dir():
        raise NotADirectoryError(f"scene directory not found: {root}")
    files = sorted(p for p in root.glob("*.json") if p.name != _MANIFEST_NAME)
    if not files:
        raise FileNotFoundError(f"no scene files in {root}")
    return [(p, _load_scene_file(p)) for p in files]


def _make_judge(args, catalog):
    if getattr(args, "judge", "mock") == "remote":
        if not args.judge_url:
            raise ValueError("--judge remote requires --judge-url")
        return RemoteJudge(args.judge_url)
    return MockJudge(catalog)


def _kv_table(rows: list[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


# --------------------------------------------------------------------------
# Subcommands


def _cmd_make_fixtures(args, catalog) -> tuple[dict, int]:
    started = time.monotonic()
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    unknown = set(modes) - set(_FIXTURE_MODES)
    if unknown:
        raise ValueError(f"unknown fixture modes: {sorted(unknown)}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    files = []
    for index in range(args.count):
        scene = make_fixture_scene(index, catalog)
        variants = {}
        if "clean" in modes:
            variants["clean"] = scene
        if "chaotic" in modes:
            rng = random.Random(f"{args.seed}:chaotic:{index}")
            variants["chaotic"] = perturb_scene(scene, rng, max_offset=args.max_offset)
        if "missing" in modes:
            rng = random.Random(f"{args.seed}:missing:{index}")
            variants["missing"] = drop_key_objects(scene, rng, catalog, count=args.drop)
        for mode, variant in variants.items():
            name = f"{mode}_{index:03d}.json"
            _atomic_write(out_dir / name, serialize_scene(variant) + "\n")
            files.append(name)

    _write_manifest(out_dir, args, inputs=[], outputs=files, started=started)
    payload = {"count": args.count, "modes": modes, "out": str(out_dir), "files": files}
    return payload, 0


def _human_make_fixtures(payload: dict) -> str:
    return _kv_table(
        [
            ("fixtures", payload["count"]),
            ("modes", ", ".join(payload["modes"])),
            ("files written", len(payload["files"])),
            ("output dir", payload["out"]),
        ]
    )


def _cmd_synth_chains(args, catalog) -> tuple[dict, int]:
    started = time.monotonic()
    if (args.scenes is None) == (args.fixtures is None):
        raise ValueError("provide exactly one of --scenes or --fixtures")
    if args.scenes is not None:
        named = _load_scene_dir(args.scenes)
        scenes = [scene for _, scene in named]
        inputs = [str(p) for p, _ in named]
    else:
        scenes = [make_fixture_scene(i, catalog) for i in range(args.fixtures)]
        inputs = []
    ids = [scene.room.room_id for scene in scenes]
    if len(set(ids)) != len(ids):
        raise ValueError("scene room_ids must be unique within a dataset")

    judge = _make_judge(args, catalog)
    cfg = ChainConfig(seed=args.seed)
    entries = synthesize_dataset(
        scenes,
        cfg,
        judge,
        args.out,
        n_candidates=args.candidates,
        keep=args.keep,
        catalog=catalog,
        map_fn=lambda fn, items: _parallel_map(fn, items, args.jobs),
    )
    outputs = [e.chain_path for e in entries] + ["index.jsonl"]
    _write_manifest(Path(args.out), args, inputs=inputs, outputs=outputs, started=started)
    payload = {
        "scenes": len(scenes),
        "chains": len(entries),
        "candidates_per_scene": args.candidates,
        "kept_per_scene": args.keep,
        "out": str(args.out),
        "mean_overall_score": (
            round(sum(e.overall_score for e in entries) / len(entries), 2)
            if entries
            else None
        ),
    }
    return payload, 0


def _human_synth_chains(payload: dict) -> str:
    return _kv_table(
        [
            ("scenes", payload["scenes"]),
            ("chains written", payload["chains"]),
            ("kept per scene", payload["kept_per_scene"]),
            ("mean overall score", payload["mean_overall_score"]),
            ("output dir", payload["out"]),
        ]
    )


def _cmd_verify_chains(args, catalog) -> tuple[dict, int]:
    root = Path(args.dataset)
    index = root / "index.jsonl"
    if not index.is_file():
        raise FileNotFoundError(f"dataset index not found: {index}")
    entries = [json.loads(line) for line in index.read_text().splitlines() if line]

    def verify_one(entry: dict) -> tuple[str, str | None]:
        path = root / entry["chain_path"]
        try:
            chain = chain_from_json(path.read_text())
            verify_chain(chain, catalog)
        except (ValueError, OSError) as exc:
            return entry["chain_path"], str(exc)
        return entry["chain_path"], None

    results = _parallel_map(verify_one, entries, args.jobs)
    failures = [
        {"chain_path": path, "error": error} for path, error in results if error
    ]
    payload = {
        "total": len(results),
        "passed": len(results) - len(failures),
        "failed": len(failures),
        "failures": failures,
    }
    return payload, 0 if not failures else 1


def _human_verify_chains(payload: dict) -> str:
    lines = [
        _kv_table(
            [
                ("chains checked", payload["total"]),
                ("passed", payload["passed"]),
                ("failed", payload["failed"]),
            ]
        )
    ]
    for failure in payload["failures"]:
        lines.append(f"  FAIL {failure['chain_path']}: {failure['error']}")
    return "\n".join(lines)


def _cmd_run_episode(args, catalog) -> tuple[dict, int]:
    started = time.monotonic()
    chain = None
    if args.chain:
        chain = chain_from_json(Path(args.chain).read_text())
    instruction = args.instruction or (chain.instruction if chain else None)
    if not instruction:
        raise ValueError("--instruction is required (or supply --chain)")

    if args.policy == "greedy":
        policy = GreedyBuilderPolicy(catalog)
    elif args.policy == "random":
        policy = RandomPolicy(seed=args.seed, catalog=catalog)
    elif args.policy == "replay":
        if chain is None:
            raise ValueError("--policy replay requires --chain")
        policy = ReplayPolicy(chain)
    else:
        if not args.policy_url:
            raise ValueError("--policy remote requires --policy-url")
        policy = RemotePolicy(args.policy_url)

    init_scene = _load_scene_file(args.init_scene) if args.init_scene else None
    base = EpisodeConfig.refinement() if init_scene is not None else EpisodeConfig()
    cfg = EpisodeConfig(
        max_turns=args.max_turns if args.max_turns is not None else base.max_turns,
        render_enabled=args.render,
        physics_opt_on_finish=(
            args.optimize_on_finish
            if args.optimize_on_finish is not None
            else base.physics_opt_on_finish
        ),
        history_depth=args.history_depth,
    )
    judge = _make_judge(args, catalog)
    record = run_episode(
        policy,
        judge,
        instruction,
        init_scene=init_scene,
        cfg=cfg,
        seed=args.seed,
        catalog=catalog,
        record_dir=args.out,
    )
    if args.out:
        _write_manifest(
            Path(args.out),
            args,
            inputs=[p for p in (args.init_scene, args.chain) if p],
            outputs=["episode.jsonl", "summary.json"],
            started=started,
        )
    payload = {
        "mode": record.mode,
        "termination_cause": record.termination_cause.value,
        "turns": len(record.turns),
        "r_init": record.init.r_init,
        "r_final": record.r_final,
        "mean_step": record.trajectory.mean_step,
        "j_tau": record.trajectory.j_tau,
        "record_dir": str(args.out) if args.out else None,
    }
    return payload, 0


def _human_run_episode(payload: dict) -> str:
    return _kv_table(
        [
            ("mode", payload["mode"]),
            ("termination", payload["termination_cause"]),
            ("edit turns", payload["turns"]),
            ("final reward", f"{payload['r_final']:.4f}"),
            ("mean step reward", f"{payload['mean_step']:.4f}"),
            ("trajectory score J", f"{payload['j_tau']:.4f}"),
            ("record dir", payload["record_dir"] or "(not written)"),
        ]
    )


def _cmd_score_episode(args, catalog) -> tuple[dict, int]:
    record = load_episode_record(args.record)
    recomputed = rescore_episode(record, catalog)

    drifts = []
    if recomputed.init.r_init != record.init.r_init:
        drifts.append({"field": "r_init", "stored": record.init.r_init, "recomputed": recomputed.init.r_init})
    for stored, fresh in zip(record.turns, recomputed.turns):
        if stored.step != fresh.step:
            drifts.append(
                {
                    "field": f"turn_{stored.turn}.r_t",
                    "stored": stored.step.r_t,
                    "recomputed": fresh.step.r_t,
                }
            )
    if record.r_final != recomputed.r_final:
        drifts.append({"field": "r_final", "stored": record.r_final, "recomputed": recomputed.r_final})
    if record.trajectory.j_tau != recomputed.trajectory.j_tau:
        drifts.append(
            {
                "field": "j_tau",
                "stored": record.trajectory.j_tau,
                "recomputed": recomputed.trajectory.j_tau,
            }
        )
    payload = {
        "record": str(args.record),
        "turns": len(record.turns),
        "stored_j_tau": record.trajectory.j_tau,
        "recomputed_j_tau": recomputed.trajectory.j_tau,
        "match": not drifts,
        "drifts": drifts,
    }
    return payload, 0 if not drifts else 1


def _human_score_episode(payload: dict) -> str:
    rows = [
        ("record", payload["record"]),
        ("turns", payload["turns"]),
        ("stored J", payload["stored_j_tau"]),
        ("recomputed J", payload["recomputed_j_tau"]),
        ("match", "yes" if payload["match"] else "NO"),
    ]
    lines = [_kv_table(rows)]
    for drift in payload["drifts"]:
        lines.append(
            f"  drift {drift['field']}: stored={drift['stored']} recomputed={drift['recomputed']}"
        )
    return "\n".join(lines)


def _cmd_optimize(args, catalog) -> tuple[dict, int]:
    started = time.monotonic()
    scene = _load_scene_file(args.infile)
    before = check_physics(scene, DEFAULT_PHYSICS)
    fixed, report = optimize(scene, DEFAULT_PHYSICS)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(out, serialize_scene(fixed) + "\n")
    _write_manifest(out.parent, args, inputs=[args.infile], outputs=[out.name], started=started)
    payload = {
        "in": args.infile,
        "out": str(out),
        "violations_before": before.violation_count(),
        "violations_after": report.residual.violation_count(),
        "steps_run": report.steps_run,
        "moved": len(report.moved),
        "deleted": list(report.deleted),
    }
    return payload, 0


def _human_optimize(payload: dict) -> str:
    return _kv_table(
        [
            ("violations before", payload["violations_before"]),
            ("violations after", payload["violations_after"]),
            ("optimizer steps", payload["steps_run"]),
            ("objects moved", payload["moved"]),
            ("objects deleted", len(payload["deleted"])),
            ("output", payload["out"]),
        ]
    )


def _cmd_metrics(args, catalog) -> tuple[dict, int]:
    named = _load_scene_dir(args.scenes)
    reports = [(check_physics(scene, DEFAULT_PHYSICS), scene) for _, scene in named]
    stats = aggregate(reports)
    payload = {
        "scene_count": stats.scene_count,
        "obr": stats.obr,
        "cnr": stats.cnr,
        "vbl_m3": stats.vbl,
        "vbl_liters": stats.vbl * 1000.0,
    }
    return payload, 0


def _human_metrics(payload: dict) -> str:
    return _kv_table(
        [
            ("scenes", payload["scene_count"]),
            ("out-of-bounds rate", f"{payload['obr']:.4f}"),
            ("collision rate", f"{payload['cnr']:.4f}"),
            ("violation volume", f"{payload['vbl_liters']:.2f} L"),
        ]
    )


def _cmd_render(args, catalog) -> tuple[dict, int]:
    started = time.monotonic()
    scene = _load_scene_file(args.infile)
    out = Path(args.out)
    suffix = out.suffix.lower()
    opts = RenderOptions(
        px_per_meter=args.ppm,
        grid_step=args.grid_step,
        label_boxes=not args.no_labels,
        merged=args.merged,
    )
    if suffix == ".svg":
        if args.merged:
            raise ValueError("--merged requires a .png output (raster panels)")
        data: str | bytes = render_topdown(scene, opts)
    elif suffix == ".png":
        data = render_merged(scene, opts) if args.merged else render_topdown_png(scene, opts)
    else:
        raise ValueError(f"unsupported output format {suffix!r}: use .svg or .png")
    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(out, data)
    _write_manifest(out.parent, args, inputs=[args.infile], outputs=[out.name], started=started)
    size = len(data.encode() if isinstance(data, str) else data)
    payload = {"in": args.infile, "out": str(out), "format": suffix[1:], "bytes": size}
    return payload, 0


def _human_render(payload: dict) -> str:
    return _kv_table(
        [
            ("input", payload["in"]),
            ("output", payload["out"]),
            ("format", payload["format"]),
            ("size", f"{payload['bytes']} bytes"),
        ]
    )


# --------------------------------------------------------------------------
# Parser assembly and config-file defaults


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    raw = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(raw.decode())
    return json.loads(raw.decode())


def _section(config: dict, command: str) -> dict:
    return config.get(command, config.get(command.replace("-", "_"), {}))


def _common_flags(*, suppress: bool) -> argparse.ArgumentParser:
    """Global flags, accepted both before and after the subcommand.

    The subparser copies use SUPPRESS defaults so an unprovided flag never
    clobbers a value parsed at the top level.
    """
    absent = argparse.SUPPRESS if suppress else None
    flag_absent = argparse.SUPPRESS if suppress else False
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=absent,
                        help="TOML or JSON file with per-subcommand defaults")
    common.add_argument("--pretty", action="store_true", default=flag_absent,
                        help="human-readable output instead of JSON")
    common.add_argument("--json", action="store_true", default=flag_absent,
                        help="machine-readable errors on stderr")
    common.add_argument("--catalog", default=absent,
                        help="asset catalog path (default: $SCENECHAIN_CATALOG or built-in)")
    return common


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    config = config or {}
    parser = argparse.ArgumentParser(
        prog="scenechain",
        description="Deterministic indoor-scene layout toolkit: chain synthesis, "
        "episodes, scoring, physics repair, metrics, rendering.",
        parents=[_common_flags(suppress=False)],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    trailing = _common_flags(suppress=True)

    def command(name: str, func, human, help_text: str):
        sp = sub.add_parser(name, help=help_text, parents=[trailing])
        sp.set_defaults(func=func, human=human)
        return sp

    sp = command("make-fixtures", _cmd_make_fixtures, _human_make_fixtures,
                 "generate clean / chaotic / missing starter scenes")
    sp.add_argument("--count", type=int, default=5, help="number of base fixtures")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--modes", default="clean,chaotic,missing",
                    help="comma list of clean, chaotic, missing")
    sp.add_argument("--seed", type=int, default=0, help="seed for chaotic/missing variants")
    sp.add_argument("--drop", type=int, default=1, help="required objects removed per missing scene")
    sp.add_argument("--max-offset", type=float, default=0.8, help="chaotic pose jitter in meters")

    sp = command("synth-chains", _cmd_synth_chains, _human_synth_chains,
                 "reverse-engineer edit chains from finished scenes")
    sp.add_argument("--scenes", help="directory of scene JSON files")
    sp.add_argument("--fixtures", type=int, help="generate N fixture scenes instead of --scenes")
    sp.add_argument("--out", required=True, help="dataset output directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--candidates", type=int, default=10, help="chains drawn per scene")
    sp.add_argument("--keep", type=int, default=3, help="top-scored chains kept per scene")
    sp.add_argument("--jobs", type=int, default=1, help="parallel workers over scenes")
    sp.add_argument("--judge", choices=("mock", "remote"), default="mock")
    sp.add_argument("--judge-url")

    sp = command("verify-chains", _cmd_verify_chains, _human_verify_chains,
                 "replay every chain in a dataset and report pass/fail")
    sp.add_argument("dataset", help="dataset directory containing index.jsonl")
    sp.add_argument("--jobs", type=int, default=1)

    sp = command("run-episode", _cmd_run_episode, _human_run_episode,
                 "run one policy/judge episode and optionally record it")
    sp.add_argument("--instruction", help="natural-language goal")
    sp.add_argument("--policy", choices=("greedy", "random", "replay", "remote"), default="greedy")
    sp.add_argument("--policy-url", help="endpoint for --policy remote")
    sp.add_argument("--chain", help="chain JSON for --policy replay (also supplies the instruction)")
    sp.add_argument("--judge", choices=("mock", "remote"), default="mock")
    sp.add_argument("--judge-url")
    sp.add_argument("--init-scene", help="start from this scene (refinement mode)")
    sp.add_argument("--max-turns", type=int, default=None,
                    help="edit-turn cap (default 15 from scratch, 10 refinement)")
    sp.add_argument("--render", action="store_true", help="attach rendered observations")
    opt = sp.add_mutually_exclusive_group()
    opt.add_argument("--optimize-on-finish", dest="optimize_on_finish",
                     action="store_true", default=None)
    opt.add_argument("--no-optimize-on-finish", dest="optimize_on_finish",
                     action="store_false", default=None)
    sp.add_argument("--history-depth", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="directory for episode.jsonl + summary.json")

    sp = command("score-episode", _cmd_score_episode, _human_score_episode,
                 "re-score a stored episode and check it matches bit for bit")
    sp.add_argument("record", help="directory holding episode.jsonl + summary.json")

    sp = command("optimize", _cmd_optimize, _human_optimize,
                 "run rule-based physics repair on a scene")
    sp.add_argument("--in", dest="infile", required=True, help="scene JSON input")
    sp.add_argument("--out", required=True, help="optimized scene JSON output")

    sp = command("metrics", _cmd_metrics, _human_metrics,
                 "aggregate physics-quality metrics over a scene directory")
    sp.add_argument("--scenes", required=True, help="directory of scene JSON files")

    sp = command("render", _cmd_render, _human_render,
                 "render a scene to SVG (plan) or PNG (plan, or plan+isometric)")
    sp.add_argument("--in", dest="infile", required=True, help="scene JSON input")
    sp.add_argument("--out", required=True, help="image path ending in .svg or .png")
    sp.add_argument("--merged", action="store_true", help="two-panel plan + isometric PNG")
    sp.add_argument("--ppm", type=float, default=80.0, help="SVG pixels per meter")
    sp.add_argument("--grid-step", type=float, default=1.0, help="grid spacing in meters")
    sp.add_argument("--no-labels", action="store_true", help="omit object description labels")

    # Config-file values become per-subcommand defaults (flags still win).
    for name, sp in sub.choices.items():
        section = _section(config, name)
        if section:
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in section.items() if k in known})
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    config = _load_config(known.config)

    parser = build_parser(config)
    args = parser.parse_args(argv)

    try:
        catalog = load_catalog(args.catalog)
        payload, code = args.func(args, catalog)
    except (ValueError, OSError, RuntimeError) as exc:
        if args.json:
            print(
                json.dumps({"error": type(exc).__name__, "message": str(exc)}),
                file=sys.stderr,
            )
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(payload, args, args.human)
    return code


if __name__ == "__main__":
    sys.exit(main())

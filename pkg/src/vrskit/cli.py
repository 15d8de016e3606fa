"""Command-line entry point.

Subcommands: reward, evaluate, simulate-aks, grpo-advantages, build-dataset.
All outputs are written atomically (write-then-rename); failures leave no
partial files and exit with a distinct code per error class:

    0  success
    2  usage error (argparse)
    3  unreadable input file
    4  schema violation in an input file or record
    5  invalid configuration
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .aks import (
    GreedyAreaSelector,
    NoisyEvaluator,
    OracleEvaluator,
    ProtocolViolation,
    ScriptedSelector,
    VideoMeta,
    batch_stats,
    run_episode,
)
from .config import ConfigError, load_config, parse_reeval
from .dataset import AnnotatedVideo, MixSpec, build_mix
from .geometry import BinaryMask, MaskSequence, RleMask, rle_decode
from .grpo import RolloutGroup, advantages, group_objective
from .io import InputError, SchemaError, read_jsonl, write_json, write_jsonl
from .metrics import evaluate_dataset
from .responses import Task
from .rewards import score_batch
from .util import derive_seed

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_SCHEMA = 4
EXIT_CONFIG = 5


def _fail(code: int, kind: str, exc: BaseException) -> int:
    report = {"error": {"code": code, "kind": kind, "message": str(exc)}}
    print(json.dumps(report, sort_keys=True), file=sys.stderr)
    return code


def _load_run_config(args, extra_overrides: dict | None = None):
    overrides = dict(extra_overrides or {})
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return load_config(getattr(args, "config", None), overrides)


# ---------------------------------------------------------------- reward

def _cmd_reward(args) -> None:
    reward_overrides = {
        "reward.eta": args.eta,
        "reward.gamma_box": args.gamma_box,
        "reward.gamma_pt": args.gamma_pt,
        "reward.alpha_iou": args.alpha_iou,
        "reward.alpha_boxl1": args.alpha_boxl1,
        "reward.alpha_ptl1": args.alpha_ptl1,
        "reward.scale": args.scale,
    }
    task = Task.from_value(args.task)
    if args.lambda_f is not None:
        reward_overrides[f"reward.lambda_f_{task.value}"] = args.lambda_f
    if args.lambda_a is not None:
        reward_overrides[f"reward.lambda_a_{task.value}"] = args.lambda_a
    run = _load_run_config(args, reward_overrides)

    records = []
    for obj in read_jsonl(args.in_path):
        if not isinstance(obj, dict):
            raise SchemaError(f"{args.in_path}: every line must be a JSON object")
        records.append(obj)

    if args.gt is not None:
        gt_map = {}
        for obj in read_jsonl(args.gt):
            if not isinstance(obj, dict) or "id" not in obj:
                raise SchemaError(f"{args.gt}: every line must be an object with an 'id'")
            key = obj["id"]
            if key in gt_map:
                raise SchemaError(f"{args.gt}: duplicate ground-truth id {key!r}")
            gt_map[key] = {k: v for k, v in obj.items() if k != "id"}
        for record in records:
            record["gt"] = gt_map.get(record.get("id"))

    jobs = run.jobs or os.cpu_count() or 1
    results = score_batch(records, run.reward, task, jobs=jobs)
    n = write_jsonl(args.out, results)
    print(f"scored {n} records -> {args.out}")


# ---------------------------------------------------------------- evaluate

def _load_mask_sequences(path) -> dict[str, MaskSequence]:
    frames: dict[str, dict[int, BinaryMask]] = {}
    for obj in read_jsonl(path):
        if not isinstance(obj, dict):
            raise SchemaError(f"{path}: every line must be a JSON object")
        video = obj.get("video", "")
        if "frame" not in obj or not isinstance(obj["frame"], int):
            raise SchemaError(f"{path}: mask record needs an integer 'frame' index")
        try:
            mask = rle_decode(RleMask.from_json(obj))
        except ValueError as exc:
            raise SchemaError(f"{path}: video {video!r} frame {obj['frame']}: {exc}") from exc
        per_video = frames.setdefault(str(video), {})
        if obj["frame"] in per_video:
            raise SchemaError(f"{path}: duplicate frame {obj['frame']} for video {video!r}")
        per_video[obj["frame"]] = mask
    if not frames:
        raise SchemaError(f"{path}: no mask records found")
    sequences = {}
    for video, by_frame in frames.items():
        try:
            sequences[video] = MaskSequence(tuple(by_frame[t] for t in sorted(by_frame)))
        except ValueError as exc:
            raise SchemaError(f"{path}: video {video!r}: {exc}") from exc
    return sequences


def _cmd_evaluate(args) -> None:
    pred = _load_mask_sequences(args.pred)
    gt = _load_mask_sequences(args.gt)
    if set(pred) != set(gt):
        only_pred = sorted(set(pred) - set(gt))
        only_gt = sorted(set(gt) - set(pred))
        raise SchemaError(
            f"prediction/ground-truth video sets differ "
            f"(only in pred: {only_pred}, only in gt: {only_gt})"
        )
    pairs = [(video, pred[video], gt[video]) for video in sorted(pred)]
    aggregate, per_video = evaluate_dataset(pairs, tolerance=args.tolerance)
    report = {
        "dataset": aggregate.to_json(),
        "videos": {vid: rep.to_json() for vid, rep in per_video.items()},
        "video_count": len(per_video),
        "tolerance": args.tolerance,
    }
    write_json(args.out, report)
    if args.figures:
        from .figures import save_metric_figures

        paths = save_metric_figures(aggregate, per_video, args.figures)
        print(f"wrote {len(paths)} figures -> {args.figures}")
    print(
        f"evaluated {len(per_video)} videos: "
        f"J {aggregate.j_mean:.4f}  F {aggregate.f_mean:.4f}  J&F {aggregate.jf_mean:.4f}"
    )


# ---------------------------------------------------------------- simulate-aks

def _parse_policy(value: str) -> tuple[str, float]:
    if value in ("oracle", "scripted"):
        return value, 0.0
    if value.startswith("noisy:"):
        try:
            p = float(value.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"invalid noisy policy {value!r}; expected noisy:<p>") from None
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"noisy flip probability must be in [0, 1], got {p}")
        return "noisy", p
    raise ConfigError(f"unknown policy {value!r}; expected oracle, scripted, or noisy:<p>")


def _load_videos(path) -> list[dict]:
    videos = []
    for obj in read_jsonl(path):
        if not isinstance(obj, dict) or "id" not in obj or "areas" not in obj:
            raise SchemaError(f"{path}: video records need 'id' and 'areas'")
        try:
            meta = VideoMeta(
                video_id=str(obj["id"]),
                areas=tuple(obj["areas"]),
                width=int(obj.get("width", 0)),
                height=int(obj.get("height", 0)),
                query=str(obj.get("query", "")),
            )
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: video {obj.get('id')!r}: {exc}") from exc
        videos.append({"meta": meta, "script": obj.get("script")})
    if not videos:
        raise SchemaError(f"{path}: no video records found")
    return videos


def _cmd_simulate_aks(args) -> None:
    overrides = {}
    if args.lambda_max is not None:
        overrides["aks.lambda_max"] = args.lambda_max
    if args.reeval is not None:
        mode, k = parse_reeval(args.reeval)
        overrides["aks.reeval_mode"] = mode
        if k is not None:
            overrides["aks.sample_k"] = k
    run = _load_run_config(args, overrides)
    policy, flip_p = _parse_policy(args.policy)

    videos = _load_videos(args.videos)
    episodes = []
    metas = []
    rows = []
    for entry in videos:
        meta = entry["meta"]
        if policy == "scripted":
            if not isinstance(entry["script"], list):
                raise SchemaError(
                    f"video {meta.video_id!r} needs a 'script' list for the scripted policy"
                )
            selector = ScriptedSelector([int(v) for v in entry["script"]])
            evaluator = OracleEvaluator(args.threshold)
        elif policy == "noisy":
            selector = GreedyAreaSelector()
            evaluator = NoisyEvaluator(
                args.threshold, flip_p, derive_seed(run.seed, "noisy", meta.video_id)
            )
        else:
            selector = GreedyAreaSelector()
            evaluator = OracleEvaluator(args.threshold)
        episode = run_episode(meta, meta.query, selector, evaluator, run.aks)
        episodes.append(episode)
        metas.append(meta)
        peak = meta.max_area
        rows.append(
            {
                "id": meta.video_id,
                "candidates": [[frame, verdict.value] for frame, verdict in episode.candidates],
                "final_frame": episode.final_frame,
                "rounds": episode.rounds,
                "terminated_by": episode.terminated_by.value,
                "frames_encoded": episode.frames_encoded,
                "initial_area_ratio": (meta.areas[episode.initial_frame] / peak) if peak > 0 else None,
                "final_area_ratio": (meta.areas[episode.final_frame] / peak) if peak > 0 else None,
            }
        )
    n = write_jsonl(args.out, rows)

    if args.stats or args.figures:
        stats = batch_stats(episodes, metas)
        if args.stats:
            write_json(args.stats, stats.to_json())
        if args.figures:
            from .figures import save_aks_figures

            ratios = [(row["initial_area_ratio"], row["final_area_ratio"]) for row in rows]
            save_aks_figures(episodes, stats, ratios, args.figures)
        print(
            f"simulated {n} episodes: mean rounds {stats.mean_rounds:.3f}, "
            f"acceptance {stats.acceptance_rate:.3f}"
        )
    else:
        print(f"simulated {n} episodes -> {args.out}")


# ---------------------------------------------------------------- grpo-advantages

def _cmd_grpo_advantages(args) -> None:
    overrides = {
        "grpo.epsilon": args.epsilon,
        "grpo.beta": args.beta,
        "grpo.std_floor": args.std_floor,
    }
    run = _load_run_config(args, overrides)

    def rows():
        for obj in read_jsonl(args.in_path):
            if not isinstance(obj, dict) or "rewards" not in obj:
                raise SchemaError(f"{args.in_path}: group records need a 'rewards' vector")
            query_id = obj.get("query_id")
            logps = [obj.get(k) for k in ("logp_new", "logp_old", "logp_ref")]
            present = [v is not None for v in logps]
            if any(present) and not all(present):
                raise SchemaError(
                    f"group {query_id!r}: logp_new/logp_old/logp_ref must be given together"
                )
            try:
                adv = advantages(obj["rewards"], run.grpo)
            except ValueError as exc:
                raise SchemaError(f"group {query_id!r}: {exc}") from exc
            row = {"query_id": query_id, "advantages": [float(a) for a in adv]}
            if all(present):
                try:
                    group = RolloutGroup(str(query_id), obj["rewards"], *logps)
                except ValueError as exc:
                    raise SchemaError(f"group {query_id!r}: {exc}") from exc
                row["objective"] = group_objective(group, run.grpo)
            yield row

    n = write_jsonl(args.out, rows())
    print(f"processed {n} groups -> {args.out}")


# ---------------------------------------------------------------- build-dataset

def _load_corpus(path) -> list[AnnotatedVideo]:
    corpus = []
    for obj in read_jsonl(path):
        if not isinstance(obj, dict) or "id" not in obj:
            raise SchemaError(f"{path}: corpus records need an 'id'")
        try:
            width = int(obj["width"])
            height = int(obj["height"])
            objects = []
            for track in obj["objects"]:
                masks = tuple(rle_decode(RleMask.from_json(m)) for m in track["masks"])
                objects.append(masks)
            video = AnnotatedVideo(
                video_id=str(obj["id"]),
                width=width,
                height=height,
                objects=tuple(objects),
                queries=tuple(str(q) for q in obj.get("queries", [])),
                source=str(obj.get("source", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: video {obj.get('id')!r}: {exc}") from exc
        corpus.append(video)
    if not corpus:
        raise SchemaError(f"{path}: no corpus records found")
    return corpus


def _cmd_build_dataset(args) -> None:
    spec_data = {}
    if args.spec is not None:
        try:
            spec_data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read spec file {args.spec}: {exc}") from exc
        except ValueError as exc:
            raise SchemaError(f"spec file {args.spec} is not valid JSON: {exc}") from exc
        if not isinstance(spec_data, dict):
            raise SchemaError(f"spec file {args.spec} must contain a JSON object")
    if args.seed is not None:
        spec_data["seed"] = args.seed
    for key in ("single_multi_ratio", "a_b_ratio"):
        if key in spec_data:
            spec_data[key] = tuple(spec_data[key])
    try:
        spec = MixSpec(**spec_data)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"invalid mix spec: {exc}") from exc
    if args.task == "aks":
        spec = MixSpec(spec.aks_count, 0, spec.single_multi_ratio, spec.a_b_ratio, spec.seed)
    elif args.task == "ktg":
        spec = MixSpec(0, spec.ktg_count, spec.single_multi_ratio, spec.a_b_ratio, spec.seed)

    corpus = _load_corpus(args.corpus)
    records = build_mix(corpus, spec)
    n = write_jsonl(args.out, (r.to_json() for r in records))
    print(f"built {n} records -> {args.out}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrskit",
        description="Verifiable rewards, GRPO math, keyframe-selection simulation, "
        "segmentation metrics, and dataset construction.",
    )
    parser.add_argument("--version", action="version", version=f"vrskit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="JSON config file (or $VRSKIT_CONFIG)")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: cores)")

    p = sub.add_parser("reward", help="score model responses against ground truth")
    add_common(p)
    p.add_argument("--task", required=True, choices=["aks", "ktg"])
    p.add_argument("--in", dest="in_path", required=True, help="responses JSONL")
    p.add_argument("--gt", default=None, help="ground-truth JSONL keyed by id")
    p.add_argument("--out", required=True, help="rewards JSONL")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--gamma-box", dest="gamma_box", type=float, default=None)
    p.add_argument("--gamma-pt", dest="gamma_pt", type=float, default=None)
    p.add_argument("--alpha-iou", dest="alpha_iou", type=float, default=None)
    p.add_argument("--alpha-boxl1", dest="alpha_boxl1", type=float, default=None)
    p.add_argument("--alpha-ptl1", dest="alpha_ptl1", type=float, default=None)
    p.add_argument("--lambda-f", dest="lambda_f", type=float, default=None)
    p.add_argument("--lambda-a", dest="lambda_a", type=float, default=None)
    p.add_argument("--scale", type=float, default=None)
    p.set_defaults(func=_cmd_reward)

    p = sub.add_parser("evaluate", help="compute J/F/J&F over mask sequences")
    add_common(p)
    p.add_argument("--pred", required=True, help="predicted masks JSONL")
    p.add_argument("--gt", required=True, help="ground-truth masks JSONL")
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--tolerance", type=float, default=None,
                   help="boundary tolerance in pixels (default: 0.008 x diagonal)")
    p.add_argument("--figures", default=None, help="directory for rendered figures")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("simulate-aks", help="run the keyframe-selection loop on synthetic videos")
    add_common(p)
    p.add_argument("--videos", required=True, help="videos JSONL")
    p.add_argument("--policy", default="oracle", help="oracle | scripted | noisy:<p>")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="oracle acceptance threshold on the area ratio")
    p.add_argument("--lambda", dest="lambda_max", type=int, default=None,
                   help="maximum selection rounds")
    p.add_argument("--reeval", default=None, help="full | sampleN (e.g. sample16)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="episodes JSONL")
    p.add_argument("--stats", default=None, help="summary JSON")
    p.add_argument("--figures", default=None, help="directory for rendered figures")
    p.set_defaults(func=_cmd_simulate_aks)

    p = sub.add_parser("grpo-advantages", help="group-standardized advantages (and objective)")
    add_common(p)
    p.add_argument("--in", dest="in_path", required=True, help="rollout groups JSONL")
    p.add_argument("--out", required=True, help="advantages JSONL")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--std-floor", dest="std_floor", type=float, default=None)
    p.set_defaults(func=_cmd_grpo_advantages)

    p = sub.add_parser("build-dataset", help="construct training records from a mask corpus")
    add_common(p)
    p.add_argument("--corpus", required=True, help="annotated-video corpus JSONL")
    p.add_argument("--task", default="both", choices=["aks", "ktg", "both"])
    p.add_argument("--spec", default=None, help="mix spec JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="records JSONL")
    p.set_defaults(func=_cmd_build_dataset)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
        return EXIT_OK
    except InputError as exc:
        return _fail(EXIT_INPUT, "input", exc)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except (SchemaError, ProtocolViolation) as exc:
        return _fail(EXIT_SCHEMA, "schema", exc)
    except ValueError as exc:
        return _fail(EXIT_SCHEMA, "schema", exc)


if __name__ == "__main__":
    sys.exit(main())

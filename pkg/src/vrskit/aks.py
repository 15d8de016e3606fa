"""Agentic keyframe-selection loop with pluggable selector/evaluator policies.

The loop proposes a candidate frame, asks the evaluator for a verdict
(option A = satisfied, option B = unsatisfied), excludes rejected frames
from re-selection, and stops on acceptance or after ``lambda_max`` rounds.
No pixels are involved: a video is summarized by its per-frame target area,
which stands in for target visibility.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Protocol, Sequence

from .responses import AksOption


class ReevalMode(enum.Enum):
    FULL_VIDEO = "full"
    SAMPLED_K = "sample"


class Termination(enum.Enum):
    ACCEPTED = "accepted"
    BUDGET_EXHAUSTED = "budget_exhausted"


class ProtocolViolation(RuntimeError):
    """A policy broke the loop contract (bad index or re-selected rejection)."""


@dataclass(frozen=True)
class VideoMeta:
    """Desk-scale stand-in for a video: per-frame target pixel areas."""

    video_id: str
    areas: tuple[float, ...]
    width: int = 0
    height: int = 0
    query: str = ""

    def __post_init__(self):
        areas = tuple(float(a) for a in self.areas)
        if not areas:
            raise ValueError("video must have at least one frame")
        if any(a < 0 for a in areas):
            raise ValueError("frame areas must be non-negative")
        object.__setattr__(self, "areas", areas)

    @property
    def frame_count(self) -> int:
        return len(self.areas)

    @property
    def max_area(self) -> float:
        return max(self.areas)


@dataclass(frozen=True)
class AksConfig:
    lambda_max: int = 5
    reeval_mode: ReevalMode = ReevalMode.FULL_VIDEO
    sample_k: int = 16

    def __post_init__(self):
        if self.lambda_max < 1:
            raise ValueError("lambda_max must be >= 1")
        if self.sample_k < 1:
            raise ValueError("sample_k must be >= 1")


class SelectorPolicy(Protocol):
    def select(self, video: VideoMeta, query: str, excluded: frozenset[int],
               round_index: int) -> int: ...


class EvaluatorPolicy(Protocol):
    def judge(self, frame: int, video: VideoMeta, query: str) -> AksOption: ...


@dataclass(frozen=True)
class AksEpisode:
    """Trace of one selection loop: candidates with verdicts, in round order."""

    video_id: str
    candidates: tuple[tuple[int, AksOption], ...]
    final_frame: int
    rounds: int
    terminated_by: Termination
    frames_encoded: int

    @property
    def accepted(self) -> bool:
        return self.terminated_by is Termination.ACCEPTED

    @property
    def initial_frame(self) -> int:
        return self.candidates[0][0]


def run_episode(
    video: VideoMeta,
    query: str,
    selector: SelectorPolicy,
    evaluator: EvaluatorPolicy,
    cfg: AksConfig | None = None,
) -> AksEpisode:
    """Run the selection loop until acceptance or the round budget expires.

    Rejected frames are excluded from re-selection (while unrejected frames
    remain); on budget exhaustion the last candidate survives. Raises
    :class:`ProtocolViolation` if the selector returns an out-of-range index
    or revisits a rejected frame while alternatives exist.
    """
    cfg = cfg or AksConfig()
    total = video.frame_count
    excluded: set[int] = set()
    candidates: list[tuple[int, AksOption]] = []
    frames_encoded = total  # initial pass always encodes the full video

    for round_index in range(1, cfg.lambda_max + 1):
        if round_index > 1:
            if cfg.reeval_mode is ReevalMode.FULL_VIDEO:
                frames_encoded += total
            else:
                frames_encoded += min(cfg.sample_k, total)
        frame = selector.select(video, query, frozenset(excluded), round_index)
        if not isinstance(frame, int) or not 0 <= frame < total:
            raise ProtocolViolation(
                f"selector returned frame {frame!r} outside [0, {total}) for video {video.video_id!r}"
            )
        if frame in excluded and len(excluded) < total:
            raise ProtocolViolation(
                f"selector re-selected rejected frame {frame} for video {video.video_id!r}"
            )
        verdict = evaluator.judge(frame, video, query)
        if not isinstance(verdict, AksOption):
            raise ProtocolViolation(f"evaluator returned {verdict!r}, expected an option")
        candidates.append((frame, verdict))
        if verdict is AksOption.A:
            return AksEpisode(
                video.video_id, tuple(candidates), frame, round_index,
                Termination.ACCEPTED, frames_encoded,
            )
        excluded.add(frame)

    final = candidates[-1][0]
    return AksEpisode(
        video.video_id, tuple(candidates), final, cfg.lambda_max,
        Termination.BUDGET_EXHAUSTED, frames_encoded,
    )


def area_ratio(episode: AksEpisode, video: VideoMeta) -> float:
    """Target area of the final frame relative to the video maximum."""
    peak = video.max_area
    if peak <= 0:
        raise ValueError(f"video {video.video_id!r} has no frame with positive target area")
    return video.areas[episode.final_frame] / peak


@dataclass(frozen=True)
class AksBatchStats:
    episodes: int
    mean_rounds: float
    mean_initial_area_ratio: float
    mean_final_area_ratio: float
    acceptance_rate: float
    mean_frames_encoded: float

    def to_json(self) -> dict:
        return {
            "episodes": self.episodes,
            "mean_rounds": self.mean_rounds,
            "mean_initial_area_ratio": self.mean_initial_area_ratio,
            "mean_final_area_ratio": self.mean_final_area_ratio,
            "acceptance_rate": self.acceptance_rate,
            "mean_frames_encoded": self.mean_frames_encoded,
        }


def batch_stats(episodes: Sequence[AksEpisode], videos: Sequence[VideoMeta]) -> AksBatchStats:
    """Aggregate round counts, area-ratio quality, and acceptance over episodes."""
    if not episodes:
        raise ValueError("batch_stats requires at least one episode")
    if len(episodes) != len(videos):
        raise ValueError(f"got {len(episodes)} episodes but {len(videos)} videos")
    n = len(episodes)
    initial = []
    final = []
    for ep, video in zip(episodes, videos):
        peak = video.max_area
        if peak <= 0:
            raise ValueError(f"video {video.video_id!r} has no frame with positive target area")
        initial.append(video.areas[ep.initial_frame] / peak)
        final.append(video.areas[ep.final_frame] / peak)
    return AksBatchStats(
        episodes=n,
        mean_rounds=sum(ep.rounds for ep in episodes) / n,
        mean_initial_area_ratio=sum(initial) / n,
        mean_final_area_ratio=sum(final) / n,
        acceptance_rate=sum(1 for ep in episodes if ep.accepted) / n,
        mean_frames_encoded=sum(ep.frames_encoded for ep in episodes) / n,
    )


class GreedyAreaSelector:
    """Picks the not-yet-rejected frame with the largest area (ties: smaller index)."""

    def select(self, video: VideoMeta, query: str, excluded: frozenset[int],
               round_index: int) -> int:
        best = None
        for idx, area in enumerate(video.areas):
            if idx in excluded:
                continue
            if best is None or area > video.areas[best]:
                best = idx
        return best if best is not None else 0


class ScriptedSelector:
    """Replays a fixed list of candidate indices, one per round."""

    def __init__(self, frames: Sequence[int]):
        self._frames = list(frames)

    def select(self, video: VideoMeta, query: str, excluded: frozenset[int],
               round_index: int) -> int:
        if round_index > len(self._frames):
            raise ProtocolViolation(
                f"script has {len(self._frames)} frames but round {round_index} was requested"
            )
        return self._frames[round_index - 1]


class OracleEvaluator:
    """Ground-truth stub: accepts a frame iff its area reaches ``threshold``
    of the video maximum. Zero-area frames are always rejected."""

    def __init__(self, threshold: float):
        if not 0.0 < threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {threshold}")
        self.threshold = threshold

    def judge(self, frame: int, video: VideoMeta, query: str) -> AksOption:
        peak = video.max_area
        if peak <= 0 or video.areas[frame] <= 0:
            return AksOption.B
        return AksOption.A if video.areas[frame] / peak >= self.threshold else AksOption.B


def oracle_evaluator(threshold: float) -> OracleEvaluator:
    return OracleEvaluator(threshold)


class ConstantEvaluator:
    """Always returns the same verdict; useful for budget tests."""

    def __init__(self, verdict: AksOption):
        self.verdict = verdict

    def judge(self, frame: int, video: VideoMeta, query: str) -> AksOption:
        return self.verdict


class NoisyEvaluator:
    """Oracle verdicts flipped with probability ``flip_p`` under a fixed seed.

    Holds per-instance RNG state: create one instance per episode for
    reproducible traces.
    """

    def __init__(self, threshold: float, flip_p: float, seed: int):
        if not 0.0 <= flip_p <= 1.0:
            raise ValueError(f"flip probability must be in [0, 1], got {flip_p}")
        self._base = OracleEvaluator(threshold)
        self._flip_p = flip_p
        self._rng = random.Random(seed)

    def judge(self, frame: int, video: VideoMeta, query: str) -> AksOption:
        verdict = self._base.judge(frame, video, query)
        if self._rng.random() < self._flip_p:
            return AksOption.B if verdict is AksOption.A else AksOption.A
        return verdict

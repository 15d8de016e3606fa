"""Parsing and format scoring of structured ``<think>``/``<answer>`` outputs.

Parsing never raises on malformed input: every violated rule is reported as a
diagnostic code and the payload is set only when all checks pass. The format
reward is derived from the same diagnostics, with a full score of 1.0 for the
keyframe-selection task and an additive maximum of 3.0 for the grounding task.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

from .geometry import COORD_SCALE, BBox, PointCue

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
ANSWER_OPEN = "<answer>"
ANSWER_CLOSE = "</answer>"

# Diagnostic codes emitted by parse(). Grouped by the format credit they void.
TAG_DIAGNOSTICS = frozenset(
    {
        "missing_think_tag",
        "duplicate_think_tag",
        "missing_answer_tag",
        "duplicate_answer_tag",
        "tag_order",
    }
)
ARRAY_DIAGNOSTICS = frozenset(
    {"answer_not_json", "answer_not_array", "empty_cue_list", "cue_not_object"}
)
SCHEMA_DIAGNOSTICS = frozenset(
    {"cue_wrong_keys", "bad_bbox", "bad_point", "unordered_box", "coord_out_of_range"}
)
OPTION_DIAGNOSTICS = frozenset({"bad_option"})


class Task(enum.Enum):
    AKS = "aks"  # agentic keyframe selection: answer is one of two options
    KTG = "ktg"  # keyframe target grounding: answer is a list of box/point cues

    @classmethod
    def from_value(cls, value) -> "Task":
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown task {value!r}, expected 'aks' or 'ktg'") from None


class AksOption(enum.Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class GroundingCue:
    """One predicted target: a box plus an interior point."""

    box: BBox
    point: PointCue

    def to_json(self) -> dict:
        return {
            "bbox_2d": [_json_num(v) for v in self.box.as_tuple()],
            "point_2d": [_json_num(v) for v in self.point.as_tuple()],
        }


@dataclass(frozen=True)
class CueList:
    cues: tuple[GroundingCue, ...]

    def __post_init__(self):
        object.__setattr__(self, "cues", tuple(self.cues))
        if not self.cues:
            raise ValueError("a valid cue list is non-empty")

    def __len__(self) -> int:
        return len(self.cues)


@dataclass(frozen=True)
class ParsedResponse:
    """Structured decomposition of a raw model output.

    ``payload`` is an :class:`AksOption` or :class:`CueList` only when every
    structural check passed; otherwise it is ``None`` and ``diagnostics``
    lists each violated rule.
    """

    task: Task
    think_text: str | None
    answer_text: str | None
    payload: AksOption | CueList | None
    diagnostics: tuple[str, ...] = ()

    @property
    def is_valid(self) -> bool:
        return self.payload is not None


@dataclass(frozen=True)
class FormatScore:
    score: float
    max_score: float
    rule_flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.score <= self.max_score:
            raise ValueError(f"format score {self.score} outside [0, {self.max_score}]")


def _json_num(v: float):
    return int(v) if float(v).is_integer() else float(v)


def _is_number(v) -> bool:
    t = type(v)
    if t is float or t is int:  # the JSON decoder only produces these
        return math.isfinite(v)
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _extract_blocks(raw: str) -> tuple[str | None, str | None, list[str]]:
    """Locate the single think and answer blocks, reporting tag violations."""
    diagnostics: list[str] = []
    positions = {}
    for tag, missing, duplicate in (
        (THINK_OPEN, "missing_think_tag", "duplicate_think_tag"),
        (THINK_CLOSE, "missing_think_tag", "duplicate_think_tag"),
        (ANSWER_OPEN, "missing_answer_tag", "duplicate_answer_tag"),
        (ANSWER_CLOSE, "missing_answer_tag", "duplicate_answer_tag"),
    ):
        n = raw.count(tag)
        if n == 0 and missing not in diagnostics:
            diagnostics.append(missing)
        elif n > 1 and duplicate not in diagnostics:
            diagnostics.append(duplicate)
        if n >= 1:
            positions[tag] = raw.index(tag)

    think_text = None
    if (
        raw.count(THINK_OPEN) == 1
        and raw.count(THINK_CLOSE) == 1
        and positions[THINK_OPEN] < positions[THINK_CLOSE]
    ):
        think_text = raw[positions[THINK_OPEN] + len(THINK_OPEN) : positions[THINK_CLOSE]]

    answer_text = None
    if (
        raw.count(ANSWER_OPEN) == 1
        and raw.count(ANSWER_CLOSE) == 1
        and positions[ANSWER_OPEN] < positions[ANSWER_CLOSE]
    ):
        answer_text = raw[positions[ANSWER_OPEN] + len(ANSWER_OPEN) : positions[ANSWER_CLOSE]]

    if not diagnostics:
        ordered = (
            positions[THINK_OPEN]
            < positions[THINK_CLOSE]
            < positions[ANSWER_OPEN]
            < positions[ANSWER_CLOSE]
        )
        if not ordered:
            diagnostics.append("tag_order")
    return think_text, answer_text, diagnostics


def _parse_cues(answer_text: str, scale: float) -> tuple[tuple[GroundingCue, ...] | None, list[str]]:
    try:
        data = json.loads(answer_text)
    except ValueError:
        return None, ["answer_not_json"]
    return _validate_cue_objects(data, scale)


def _validate_cue_objects(data, scale: float) -> tuple[tuple[GroundingCue, ...] | None, list[str]]:
    if not isinstance(data, list):
        return None, ["answer_not_array"]
    if not data:
        return None, ["empty_cue_list"]
    if not all(isinstance(el, dict) for el in data):
        return None, ["cue_not_object"]

    diagnostics: list[str] = []

    def flag(code: str):
        if code not in diagnostics:
            diagnostics.append(code)

    cues: list[GroundingCue] = []
    for el in data:
        if len(el) != 2 or "bbox_2d" not in el or "point_2d" not in el:
            flag("cue_wrong_keys")
            continue
        box_vals, pt_vals = el["bbox_2d"], el["point_2d"]
        if not (
            isinstance(box_vals, list)
            and len(box_vals) == 4
            and _is_number(box_vals[0])
            and _is_number(box_vals[1])
            and _is_number(box_vals[2])
            and _is_number(box_vals[3])
        ):
            flag("bad_bbox")
            continue
        if not (
            isinstance(pt_vals, list)
            and len(pt_vals) == 2
            and _is_number(pt_vals[0])
            and _is_number(pt_vals[1])
        ):
            flag("bad_point")
            continue
        x1 = float(box_vals[0])
        y1 = float(box_vals[1])
        x2 = float(box_vals[2])
        y2 = float(box_vals[3])
        px = float(pt_vals[0])
        py = float(pt_vals[1])
        bad = False
        if x1 > x2 or y1 > y2:
            flag("unordered_box")
            bad = True
        if not (0.0 <= x1 <= scale and 0.0 <= y1 <= scale and 0.0 <= x2 <= scale
                and 0.0 <= y2 <= scale and 0.0 <= px <= scale and 0.0 <= py <= scale):
            flag("coord_out_of_range")
            bad = True
        if not bad:
            cues.append(GroundingCue(BBox(x1, y1, x2, y2), PointCue(px, py)))

    if diagnostics:
        return None, diagnostics
    return tuple(cues), []


def parse(raw: str, task: Task | str) -> ParsedResponse:
    """Decompose a raw response into think text plus a validated payload.

    Total over arbitrary strings: malformed input yields a ``ParsedResponse``
    with ``payload=None`` and one diagnostic per violated rule.
    """
    task = Task.from_value(task) if not isinstance(task, Task) else task
    think_text, answer_text, diagnostics = _extract_blocks(raw)

    payload: AksOption | CueList | None = None
    if task is Task.AKS:
        if answer_text is not None:
            option = answer_text.strip()
            if option in ("A", "B"):
                payload = AksOption(option)
            else:
                diagnostics.append("bad_option")
    else:
        if answer_text is not None:
            cues, cue_diags = _parse_cues(answer_text, COORD_SCALE)
            diagnostics.extend(cue_diags)
            if cues is not None:
                payload = CueList(cues)

    if diagnostics:
        payload = None
    return ParsedResponse(task, think_text, answer_text, payload, tuple(diagnostics))


def format_reward(resp: ParsedResponse, task: Task | None = None) -> FormatScore:
    """Score output structure: 1.0 cap for AKS, additive 3.0 cap for KTG.

    KTG credits are graded: tag structure, answer-is-cue-array, and
    per-cue schema/range each earn 1.0 independently.
    """
    task = task or resp.task
    diags = set(resp.diagnostics)
    tags_ok = not (diags & TAG_DIAGNOSTICS)
    if task is Task.AKS:
        option_ok = resp.answer_text is not None and resp.answer_text.strip() in ("A", "B")
        score = 1.0 if (tags_ok and option_ok) else 0.0
        return FormatScore(score, 1.0, {"tags": tags_ok, "option": option_ok})

    array_ok = resp.answer_text is not None and not (diags & ARRAY_DIAGNOSTICS)
    schema_ok = array_ok and not (diags & SCHEMA_DIAGNOSTICS)
    score = float(tags_ok) + float(array_ok) + float(schema_ok)
    return FormatScore(score, 3.0, {"tags": tags_ok, "cue_array": array_ok, "cue_schema": schema_ok})


def cues_to_json_text(cues) -> str:
    """Canonical JSON for a cue list; integral coordinates render as ints."""
    return json.dumps([c.to_json() for c in cues])


def cues_from_payload(payload) -> CueList:
    """Build a validated CueList from decoded JSON objects (ground-truth side)."""
    cues, diags = _validate_cue_objects(payload, COORD_SCALE)
    if cues is None or diags:
        raise ValueError(f"invalid cue payload: {', '.join(diags)}")
    return CueList(cues)


def serialize_response(resp: ParsedResponse) -> str:
    """Render a valid response back to its canonical raw form."""
    if resp.payload is None:
        raise ValueError("cannot serialize a malformed response")
    if isinstance(resp.payload, AksOption):
        answer = resp.payload.value
    else:
        answer = cues_to_json_text(resp.payload.cues)
    return f"{THINK_OPEN}{resp.think_text}{THINK_CLOSE}{ANSWER_OPEN}{answer}{ANSWER_CLOSE}"

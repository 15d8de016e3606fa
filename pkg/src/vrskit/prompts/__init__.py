"""Prompt templates for model adapters built on the policy interfaces.

The simulator never consumes these; they exist so a real-model adapter can
drive video description, keyframe selection/re-selection, keyframe judging,
and target grounding with outputs that satisfy the response parser. Slots
use ``str.format`` placeholders.
"""

from __future__ import annotations

from importlib import resources

_SUFFIX = ".txt"


def available_prompts() -> list[str]:
    """Names of the shipped templates."""
    return sorted(
        entry.name[: -len(_SUFFIX)]
        for entry in resources.files(__name__).iterdir()
        if entry.name.endswith(_SUFFIX)
    )


def load_prompt(name: str) -> str:
    """Return the template text for ``name`` (without the .txt suffix)."""
    resource = resources.files(__name__) / f"{name}{_SUFFIX}"
    try:
        return resource.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise KeyError(
            f"unknown prompt template {name!r}; available: {available_prompts()}"
        ) from None

"""Run configuration: defaults, JSON config files, and CLI overrides.

Precedence is flags > config file > built-in defaults; every override passes
through the owning module's validation. The default config path may be set
with the VRSKIT_CONFIG environment variable.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .aks import AksConfig, ReevalMode
from .grpo import GrpoConfig
from .rewards import RewardConfig

ENV_CONFIG = "VRSKIT_CONFIG"


class ConfigError(Exception):
    """A config file or override failed validation."""


@dataclass(frozen=True)
class RunConfig:
    reward: RewardConfig
    grpo: GrpoConfig
    aks: AksConfig
    seed: int = 0
    jobs: int | None = None  # None -> available cores

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls(reward=RewardConfig(), grpo=GrpoConfig(), aks=AksConfig())


def _section_fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _build_section(cls, data: Mapping[str, Any], name: str):
    unknown = set(data) - _section_fields(cls)
    if unknown:
        raise ConfigError(f"unknown {name} config keys: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} config: {exc}") from exc


def parse_reeval(value: str) -> tuple[ReevalMode, int | None]:
    """Parse a --reeval value: 'full' or 'sampleN' (e.g. 'sample16')."""
    value = str(value).strip().lower()
    if value == "full":
        return ReevalMode.FULL_VIDEO, None
    if value.startswith("sample"):
        rest = value[len("sample"):]
        if rest == "":
            return ReevalMode.SAMPLED_K, None
        if rest.isdigit() and int(rest) >= 1:
            return ReevalMode.SAMPLED_K, int(rest)
    raise ConfigError(f"invalid reeval mode {value!r}; expected 'full' or 'sampleN'")


def load_config(path: str | Path | None = None,
                overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Load a RunConfig from defaults, an optional JSON file, and overrides.

    ``overrides`` maps dotted keys ("reward.eta", "grpo.beta", "aks.lambda_max",
    "seed", "jobs") to values; None values are ignored so unset CLI flags
    pass through.
    """
    if path is None:
        env_path = os.environ.get(ENV_CONFIG)
        path = env_path if env_path else None

    sections: dict[str, dict[str, Any]] = {"reward": {}, "grpo": {}, "aks": {}}
    top: dict[str, Any] = {"seed": 0, "jobs": None}

    if path is not None:
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            data = json.loads(raw)
        except ValueError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must contain a JSON object")
        for key, value in data.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ConfigError(f"config section {key!r} must be an object")
                sections[key].update(value)
            elif key in top:
                top[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in dotted:
            section, field = dotted.split(".", 1)
            if section not in sections:
                raise ConfigError(f"unknown config section {section!r}")
            sections[section][field] = value
        elif dotted in top:
            top[dotted] = value
        else:
            raise ConfigError(f"unknown config key {dotted!r}")

    aks_data = dict(sections["aks"])
    if "reeval" in aks_data:  # accept the CLI spelling in files too
        mode, k = parse_reeval(aks_data.pop("reeval"))
        aks_data["reeval_mode"] = mode
        if k is not None:
            aks_data["sample_k"] = k
    if isinstance(aks_data.get("reeval_mode"), str):
        aks_data["reeval_mode"] = ReevalMode(aks_data["reeval_mode"])

    if top["seed"] is not None and not isinstance(top["seed"], int):
        raise ConfigError("seed must be an integer")
    if top["jobs"] is not None and (not isinstance(top["jobs"], int) or top["jobs"] < 1):
        raise ConfigError("jobs must be a positive integer")

    return RunConfig(
        reward=_build_section(RewardConfig, sections["reward"], "reward"),
        grpo=_build_section(GrpoConfig, sections["grpo"], "grpo"),
        aks=_build_section(AksConfig, aks_data, "aks"),
        seed=top["seed"] if top["seed"] is not None else 0,
        jobs=top["jobs"],
    )

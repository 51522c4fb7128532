"""Training configuration, read from the [finetune] table of a pipeline
config file (TOML or JSON).  Field names mirror that table one to one."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

_SCHEDULERS = ("linear", "constant")


@dataclass
class FinetuneConfig:
    base_model: str = "tiny"
    output_dir: str = "runs/finetune"
    lora_r: int = 16
    lora_alpha: float = 32.0
    lora_target_patterns: tuple[str, ...] = (r"mlp\.(gate_proj|up_proj|down_proj)$",)
    stage1_min_epochs: int = 5
    stage1_max_epochs: int = 50
    stage2_min_epochs: int = 5
    stage2_max_epochs: int = 50
    early_stop_loss_threshold: float = 0.4
    learning_rate: float = 1e-3
    scheduler: str = "linear"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.98
    adam_epsilon: float = 1e-4
    max_grad_norm: float = 1.0
    gradient_accumulation: int | str = "full"
    batch_size: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        self.lora_target_patterns = tuple(self.lora_target_patterns)
        if not self.base_model:
            raise ValueError("base_model must be set")
        if self.lora_r < 1:
            raise ValueError("lora_r must be >= 1")
        if self.lora_alpha <= 0:
            raise ValueError("lora_alpha must be positive")
        if not self.lora_target_patterns:
            raise ValueError("lora_target_patterns must not be empty")
        for pattern in self.lora_target_patterns:
            try:
                re.compile(pattern)
            except re.error as exc:
                raise ValueError(f"bad adapter pattern {pattern!r}: {exc}") from None
        for stage in ("stage1", "stage2"):
            low, high = self.epoch_bounds(stage)
            if low < 0 or high < 1:
                raise ValueError(f"{stage} epoch bounds must be nonnegative with max >= 1")
            if low > high:
                raise ValueError(f"{stage} min epochs exceeds max epochs")
        if self.early_stop_loss_threshold <= 0:
            raise ValueError("early_stop_loss_threshold must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.scheduler not in _SCHEDULERS:
            raise ValueError(f"scheduler must be one of {_SCHEDULERS}")
        for name in ("adam_beta1", "adam_beta2"):
            beta = getattr(self, name)
            if not 0.0 <= beta < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.adam_epsilon <= 0:
            raise ValueError("adam_epsilon must be positive")
        if self.max_grad_norm <= 0:
            raise ValueError("max_grad_norm must be positive")
        accum = self.gradient_accumulation
        valid_accum = accum == "full" or (
            isinstance(accum, int) and not isinstance(accum, bool) and accum >= 1
        )
        if not valid_accum:
            raise ValueError('gradient_accumulation must be a positive integer or "full"')
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def epoch_bounds(self, stage: str) -> tuple[int, int]:
        if stage == "stage1":
            return self.stage1_min_epochs, self.stage1_max_epochs
        if stage == "stage2":
            return self.stage2_min_epochs, self.stage2_max_epochs
        raise ValueError(f"unknown stage {stage!r}")

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["lora_target_patterns"] = list(self.lora_target_patterns)
        return out

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "FinetuneConfig":
        known = {f.name for f in fields(cls)}
        for key in mapping:
            if key not in known:
                raise ValueError(f"unknown finetune key {key!r}")
        return cls(**dict(mapping))


def load_config(path: str | Path) -> FinetuneConfig:
    """Load the [finetune] table from a pipeline config file.

    A top-level seed applies when the table carries none, so corpus
    generation and tuning stay on one seed by default.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
    else:
        data = tomllib.loads(text)
    if not isinstance(data, dict):
        raise ValueError("config root must be a table")
    section = data.get("finetune")
    if not isinstance(section, dict):
        raise ValueError("config has no [finetune] section")
    merged = dict(section)
    if "seed" not in merged and isinstance(data.get("seed"), int):
        merged["seed"] = data["seed"]
    return FinetuneConfig.from_mapping(merged)

"""Low-rank adapters over selected linear layers.

The wrapped base layer is frozen; only the two factor matrices train.  The
up factor starts at zero, so a freshly attached adapter computes exactly
the base mapping.  An adapter directory stores just the factor tensors plus
the recipe (base id, seeds, rank, patterns, vocabulary) needed to rebuild
the frozen base around them.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Iterable

import torch
from torch import nn

from .errors import ModelLoadError
from .model import build_model
from .vocab import WordTokenizer

ADAPTER_WEIGHTS = "adapter.pt"
ADAPTER_CONFIG = "adapter_config.json"
VOCAB_FILE = "vocab.json"


class LoRALinear(nn.Module):
    def __init__(self, base: nn.Linear, r: int, alpha: float, generator: torch.Generator):
        super().__init__()
        base.weight.requires_grad_(False)
        if base.bias is not None:
            base.bias.requires_grad_(False)
        self.base = base
        self.lora_down = nn.Linear(base.in_features, r, bias=False)
        self.lora_up = nn.Linear(r, base.out_features, bias=False)
        self.scaling = alpha / r
        with torch.no_grad():
            bound = 1.0 / math.sqrt(base.in_features)
            self.lora_down.weight.uniform_(-bound, bound, generator=generator)
            self.lora_up.weight.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.lora_up(self.lora_down(x)) * self.scaling


def attach_lora(
    model: nn.Module, patterns: Iterable[str], r: int, alpha: float, seed: int
) -> list[str]:
    """Freeze the model, then wrap every linear whose dotted module path
    matches one of the patterns.  Returns the matched paths; matching
    nothing is a configuration error."""
    compiled = [re.compile(p) for p in patterns]
    for param in model.parameters():
        param.requires_grad_(False)
    generator = torch.Generator().manual_seed(seed)
    matched: list[str] = []
    # snapshot first: replacements must not be revisited as parents
    for parent_path, parent in list(model.named_modules()):
        for child_name, child in list(parent.named_children()):
            path = f"{parent_path}.{child_name}" if parent_path else child_name
            if isinstance(child, nn.Linear) and any(p.search(path) for p in compiled):
                setattr(parent, child_name, LoRALinear(child, r=r, alpha=alpha, generator=generator))
                matched.append(path)
    if not matched:
        raise ValueError("no modules matched lora_target_patterns")
    return matched


def trainable_parameter_names(model: nn.Module) -> list[str]:
    return [name for name, param in model.named_parameters() if param.requires_grad]


def adapter_state(model: nn.Module) -> dict[str, torch.Tensor]:
    return {
        name: param.detach().clone()
        for name, param in model.named_parameters()
        if param.requires_grad
    }


def save_adapter(
    adapter_dir: str | Path, model: nn.Module, tokenizer: WordTokenizer, meta: dict
) -> Path:
    adapter_dir = Path(adapter_dir)
    adapter_dir.mkdir(parents=True, exist_ok=True)
    torch.save(adapter_state(model), adapter_dir / ADAPTER_WEIGHTS)
    (adapter_dir / VOCAB_FILE).write_text(
        json.dumps(tokenizer.to_dict()), encoding="utf-8"
    )
    (adapter_dir / ADAPTER_CONFIG).write_text(
        json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8"
    )
    return adapter_dir


def load_adapter(adapter_dir: str | Path, device: str = "cpu"):
    """Rebuild the frozen base from its recorded seed and restore the
    adapter tensors on top.  Returns (model, tokenizer, meta)."""
    adapter_dir = Path(adapter_dir)
    try:
        meta = json.loads((adapter_dir / ADAPTER_CONFIG).read_text(encoding="utf-8"))
        vocab = json.loads((adapter_dir / VOCAB_FILE).read_text(encoding="utf-8"))
        state = torch.load(adapter_dir / ADAPTER_WEIGHTS, map_location=device)
    except FileNotFoundError as exc:
        raise ModelLoadError(
            f"{adapter_dir}: not a complete adapter ({exc.filename} missing)"
        ) from None
    except (json.JSONDecodeError, RuntimeError) as exc:
        raise ModelLoadError(f"{adapter_dir}: unreadable adapter ({exc})") from None
    tokenizer = WordTokenizer.from_dict(vocab)
    try:
        model = build_model(meta["base_model"], tokenizer.vocab_size, seed=meta["init_seed"])
        attach_lora(
            model,
            meta["lora_target_patterns"],
            r=meta["lora_r"],
            alpha=meta["lora_alpha"],
            seed=meta["lora_seed"],
        )
    except KeyError as exc:
        raise ModelLoadError(f"{adapter_dir}: adapter config missing {exc}") from None
    trainable = {name: p for name, p in model.named_parameters() if p.requires_grad}
    if set(state) != set(trainable):
        raise ModelLoadError(
            f"{adapter_dir}: adapter tensors do not match the configured placement"
        )
    with torch.no_grad():
        for name, tensor in state.items():
            if trainable[name].shape != tensor.shape:
                raise ModelLoadError(f"{adapter_dir}: shape mismatch for {name}")
            trainable[name].copy_(tensor)
    model.to(device)
    return model, tokenizer, meta

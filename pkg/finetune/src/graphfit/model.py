"""Small decoder-only causal LM, sized for CPU experiments.

Module paths follow the common transformer layout (blocks.N.self_attn.*_proj
and blocks.N.mlp.*_proj), so adapter target patterns written against
full-size checkpoints select the same module roles here.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .errors import ModelLoadError

MODEL_SPECS: dict[str, dict[str, int]] = {
    "tiny": {"dim": 64, "n_layers": 2, "n_heads": 4, "max_seq": 256},
}


def spec_for(base_model: str) -> dict[str, int]:
    try:
        return dict(MODEL_SPECS[base_model])
    except KeyError:
        raise ModelLoadError(f"unknown base model {base_model!r}") from None


class RMSNorm(nn.Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(dim))
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        scale = torch.rsqrt(x.pow(2).mean(dim=-1, keepdim=True) + self.eps)
        return x * scale * self.weight


class SelfAttention(nn.Module):
    def __init__(self, dim: int, n_heads: int):
        super().__init__()
        if dim % n_heads:
            raise ValueError("dim must divide evenly into heads")
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.q_proj = nn.Linear(dim, dim, bias=False)
        self.k_proj = nn.Linear(dim, dim, bias=False)
        self.v_proj = nn.Linear(dim, dim, bias=False)
        self.o_proj = nn.Linear(dim, dim, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch, seq, dim = x.shape

        def split(t: torch.Tensor) -> torch.Tensor:
            return t.view(batch, seq, self.n_heads, self.head_dim).transpose(1, 2)

        q, k, v = split(self.q_proj(x)), split(self.k_proj(x)), split(self.v_proj(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        mask = torch.triu(
            torch.full((seq, seq), float("-inf"), device=x.device), diagonal=1
        )
        weights = torch.softmax(scores + mask, dim=-1)
        merged = (weights @ v).transpose(1, 2).reshape(batch, seq, dim)
        return self.o_proj(merged)


class Mlp(nn.Module):
    """Gated feed-forward block."""

    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.gate_proj = nn.Linear(dim, hidden, bias=False)
        self.up_proj = nn.Linear(dim, hidden, bias=False)
        self.down_proj = nn.Linear(hidden, dim, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.down_proj(nn.functional.silu(self.gate_proj(x)) * self.up_proj(x))


class Block(nn.Module):
    def __init__(self, dim: int, n_heads: int):
        super().__init__()
        self.attn_norm = RMSNorm(dim)
        self.self_attn = SelfAttention(dim, n_heads)
        self.mlp_norm = RMSNorm(dim)
        self.mlp = Mlp(dim, hidden=2 * dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.self_attn(self.attn_norm(x))
        return x + self.mlp(self.mlp_norm(x))


class TinyCausalLM(nn.Module):
    def __init__(self, vocab_size: int, dim: int, n_layers: int, n_heads: int, max_seq: int):
        super().__init__()
        self.max_seq = max_seq
        self.tok_emb = nn.Embedding(vocab_size, dim)
        self.pos_emb = nn.Embedding(max_seq, dim)
        self.blocks = nn.ModuleList(Block(dim, n_heads) for _ in range(n_layers))
        self.norm = RMSNorm(dim)
        self.lm_head = nn.Linear(dim, vocab_size, bias=False)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        _, seq = tokens.shape
        if seq > self.max_seq:
            raise ValueError(f"sequence length {seq} exceeds model context {self.max_seq}")
        positions = torch.arange(seq, device=tokens.device)
        x = self.tok_emb(tokens) + self.pos_emb(positions)
        for block in self.blocks:
            x = block(x)
        return self.lm_head(self.norm(x))


def init_weights(model: nn.Module, seed: int) -> None:
    """Reinitialize in place from an explicit generator.

    The global RNG is never touched, so two builds from one seed are
    bit-identical regardless of what ran before.
    """
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, nn.Linear):
                bound = 1.0 / math.sqrt(module.in_features)
                module.weight.uniform_(-bound, bound, generator=generator)
                if module.bias is not None:
                    module.bias.zero_()
            elif isinstance(module, nn.Embedding):
                module.weight.normal_(0.0, 0.02, generator=generator)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def build_model(base_model: str, vocab_size: int, seed: int) -> TinyCausalLM:
    spec = spec_for(base_model)
    # fork_rng: module constructors draw from the global stream, and the
    # caller's RNG state should survive a build even though init_weights
    # overwrites every draw anyway
    with torch.random.fork_rng():
        model = TinyCausalLM(vocab_size=vocab_size, **spec)
    init_weights(model, seed)
    return model

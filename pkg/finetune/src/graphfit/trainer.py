"""Two-stage adapter training.

Stage1 treats each record as one plain-text sequence and trains the full
next-word objective.  Stage2 frames a record as question then answer and
ignore-labels everything through the separator, so only the answer tokens
(and the closing end-of-text) contribute loss.

Early stopping watches mean training loss per epoch: the loop exits at the
first epoch at or past the stage minimum whose mean loss is at or under the
threshold, and otherwise at the stage maximum.  The learning-rate schedule
is laid out over the maximum epoch budget, so an early stop simply ends the
decay sooner.
"""

from __future__ import annotations

import json
import logging
import math
import shutil
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .config import FinetuneConfig
from .corpus import (
    STAGE1,
    STAGE1_FILE,
    STAGE2,
    STAGE2_FILE,
    load_stage1,
    load_stage2,
    text_hash,
    verify_against_sibling_manifest,
    verify_corpus_dir,
)
from .errors import ModelLoadError, NonFiniteLoss
from .lora import ADAPTER_CONFIG, attach_lora, load_adapter, save_adapter
from .model import build_model
from .vocab import BOS_ID, EOS_ID, PAD_ID, SEP_ID, WordTokenizer

log = logging.getLogger(__name__)

IGNORE_INDEX = -100

STOP_THRESHOLD = "threshold"
STOP_MAX_EPOCHS = "max-epochs"
STOP_EMPTY = "empty-stage"

FINAL_DIR = "final"
RESULT_FILE = "train_result.json"


@dataclass
class StageResult:
    stage: str
    epochs_run: int
    final_loss: float | None
    stop_reason: str
    adapter_path: str


@dataclass
class TwoStageResult:
    stage1: StageResult
    stage2: StageResult
    adapter_path: str


@dataclass
class Batch:
    tokens: torch.Tensor  # [B, T] long
    labels: torch.Tensor  # [B, T] long, IGNORE_INDEX outside the loss

    @property
    def label_count(self) -> int:
        return int((self.labels[:, 1:] != IGNORE_INDEX).sum().item())


def encode_stage1(tokenizer: WordTokenizer, text: str) -> tuple[list[int], list[int]]:
    ids = [BOS_ID] + tokenizer.encode(text) + [EOS_ID]
    return ids, list(ids)


def encode_stage2(
    tokenizer: WordTokenizer, question: str, answer: str
) -> tuple[list[int], list[int]]:
    question_ids = tokenizer.encode(question)
    answer_ids = tokenizer.encode(answer)
    ids = [BOS_ID] + question_ids + [SEP_ID] + answer_ids + [EOS_ID]
    labels = [IGNORE_INDEX] * (len(question_ids) + 2) + answer_ids + [EOS_ID]
    return ids, labels


def make_batches(
    encoded: Sequence[tuple[list[int], list[int]]], batch_size: int
) -> list[Batch]:
    batches = []
    for start in range(0, len(encoded), batch_size):
        chunk = encoded[start : start + batch_size]
        width = max(len(ids) for ids, _ in chunk)
        tokens = torch.full((len(chunk), width), PAD_ID, dtype=torch.long)
        labels = torch.full((len(chunk), width), IGNORE_INDEX, dtype=torch.long)
        # right padding: with a causal mask, real positions never attend to pads
        for i, (ids, labs) in enumerate(chunk):
            tokens[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            labels[i, : len(labs)] = torch.tensor(labs, dtype=torch.long)
        batches.append(Batch(tokens=tokens, labels=labels))
    return batches


def lm_loss(model: nn.Module, batch: Batch) -> tuple[torch.Tensor, int]:
    """Mean cross entropy over positions whose shifted label is not ignored."""
    logits = model(batch.tokens)
    shifted = logits[:, :-1, :].reshape(-1, logits.shape[-1])
    targets = batch.labels[:, 1:].reshape(-1)
    loss = nn.functional.cross_entropy(shifted, targets, ignore_index=IGNORE_INDEX)
    return loss, batch.label_count


def fit(
    model: nn.Module,
    batches: Sequence[Batch],
    config: FinetuneConfig,
    stage: str,
    device: str = "cpu",
) -> tuple[int, float, str]:
    """Run the epoch loop; returns (epochs run, final mean loss, stop reason)."""
    if not batches:
        raise ValueError("nothing to train on")
    model.to(device).train()
    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(
        params,
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
        eps=config.adam_epsilon,
    )
    min_epochs, max_epochs = config.epoch_bounds(stage)
    accum = config.gradient_accumulation
    group = len(batches) if accum == "full" else int(accum)
    total_steps = math.ceil(len(batches) / group) * max_epochs
    if config.scheduler == "linear":
        schedule = torch.optim.lr_scheduler.LambdaLR(
            optimizer, lambda step: max(0.0, 1.0 - step / total_steps)
        )
    else:
        schedule = torch.optim.lr_scheduler.LambdaLR(optimizer, lambda step: 1.0)
    mean_loss = math.inf
    for epoch in range(1, max_epochs + 1):
        loss_sum = 0.0
        token_sum = 0
        optimizer.zero_grad()
        for index, batch in enumerate(batches):
            on_device = Batch(batch.tokens.to(device), batch.labels.to(device))
            batch_loss, count = lm_loss(model, on_device)
            if not torch.isfinite(batch_loss):
                raise NonFiniteLoss(
                    f"{stage} epoch {epoch} batch {index}: loss is {batch_loss.item()!r}"
                )
            loss_sum += batch_loss.item() * count
            token_sum += count
            batch_loss.backward()
            if (index + 1) % group == 0 or index + 1 == len(batches):
                torch.nn.utils.clip_grad_norm_(params, config.max_grad_norm)
                optimizer.step()
                schedule.step()
                optimizer.zero_grad()
        mean_loss = loss_sum / token_sum
        log.info("%s epoch %d/%d: mean loss %.6f", stage, epoch, max_epochs, mean_loss)
        if epoch >= min_epochs and mean_loss <= config.early_stop_loss_threshold:
            log.info(
                "%s stopped: threshold (loss %.6f <= %.6f at epoch %d)",
                stage,
                mean_loss,
                config.early_stop_loss_threshold,
                epoch,
            )
            return epoch, mean_loss, STOP_THRESHOLD
    log.info("%s stopped: max-epochs (%d epochs, final loss %.6f)", stage, max_epochs, mean_loss)
    return max_epochs, mean_loss, STOP_MAX_EPOCHS


def _training_texts(stage: str, records) -> list[str]:
    if stage == STAGE1:
        return [r.text for r in records]
    texts = []
    for record in records:
        texts.extend((record.question, record.answer))
    return texts


def _check_adapter_matches_config(meta: dict, config: FinetuneConfig, adapter) -> None:
    fixed = ("base_model", "lora_r", "lora_alpha")
    for key in fixed:
        if meta.get(key) != getattr(config, key):
            raise ModelLoadError(
                f"{adapter}: adapter was built with {key}={meta.get(key)!r}, "
                f"config says {getattr(config, key)!r}"
            )
    if list(meta.get("lora_target_patterns", [])) != list(config.lora_target_patterns):
        raise ModelLoadError(f"{adapter}: adapter target patterns differ from config")


def train_stage(
    corpus_file: str | Path,
    stage: str,
    config: FinetuneConfig,
    resume_adapter: str | Path | None = None,
    *,
    vocab_texts: Sequence[str] | None = None,
    device: str = "cpu",
) -> StageResult:
    """Train one stage on one corpus file and save the adapter.

    When the file sits beside a manifest.json it is integrity-checked first.
    Records must fit the model context window.  An empty file is only legal
    when there is a resume adapter to carry forward unchanged.
    """
    corpus_file = Path(corpus_file)
    verify_against_sibling_manifest(corpus_file)
    if stage == STAGE1:
        records = load_stage1(corpus_file)
    elif stage == STAGE2:
        records = load_stage2(corpus_file)
    else:
        raise ValueError(f"unknown stage {stage!r}")
    if not records:
        if resume_adapter is None:
            raise ValueError(
                f"{corpus_file.name} is empty and there is no adapter to carry forward"
            )
        log.info("%s skipped: empty corpus, keeping %s", stage, resume_adapter)
        return StageResult(
            stage=stage,
            epochs_run=0,
            final_loss=None,
            stop_reason=STOP_EMPTY,
            adapter_path=str(resume_adapter),
        )
    if resume_adapter is not None:
        model, tokenizer, meta = load_adapter(resume_adapter, device=device)
        _check_adapter_matches_config(meta, config, resume_adapter)
        carried_hashes = meta.get("stage1_text_hashes")
        init_seed, lora_seed = meta["init_seed"], meta["lora_seed"]
    else:
        texts = list(vocab_texts) if vocab_texts is not None else _training_texts(stage, records)
        tokenizer = WordTokenizer.from_texts(texts)
        init_seed, lora_seed = config.seed, config.seed + 1
        model = build_model(config.base_model, tokenizer.vocab_size, seed=init_seed)
        attach_lora(
            model,
            config.lora_target_patterns,
            r=config.lora_r,
            alpha=config.lora_alpha,
            seed=lora_seed,
        )
        carried_hashes = None
    if stage == STAGE1:
        encoded = [encode_stage1(tokenizer, r.text) for r in records]
    else:
        encoded = [encode_stage2(tokenizer, r.question, r.answer) for r in records]
    batches = make_batches(encoded, config.batch_size)
    epochs, final_loss, reason = fit(model, batches, config, stage, device=device)
    if stage == STAGE1:
        hashes = sorted({text_hash(r.text) for r in records})
    else:
        hashes = carried_hashes
    meta_out = {
        "base_model": config.base_model,
        "init_seed": init_seed,
        "lora_seed": lora_seed,
        "lora_r": config.lora_r,
        "lora_alpha": config.lora_alpha,
        "lora_target_patterns": list(config.lora_target_patterns),
        "stage": stage,
        "stage1_text_hashes": hashes,
    }
    adapter_dir = Path(config.output_dir) / stage
    save_adapter(adapter_dir, model, tokenizer, meta_out)
    return StageResult(
        stage=stage,
        epochs_run=epochs,
        final_loss=final_loss,
        stop_reason=reason,
        adapter_path=str(adapter_dir),
    )


def run_two_stage(
    corpus_dir: str | Path, config: FinetuneConfig, device: str = "cpu"
) -> TwoStageResult:
    """Verify the corpus, train stage1 then stage2, and save the final adapter
    with a config snapshot plus a train_result.json summary."""
    corpus_dir = Path(corpus_dir)
    verify_corpus_dir(corpus_dir)
    stage1_records = load_stage1(corpus_dir / STAGE1_FILE)
    stage2_records = load_stage2(corpus_dir / STAGE2_FILE)
    # one vocabulary across both stages, so stage2 answers stay in-vocab
    union_texts = [r.text for r in stage1_records]
    for record in stage2_records:
        union_texts.extend((record.question, record.answer))
    first = train_stage(
        corpus_dir / STAGE1_FILE, STAGE1, config, vocab_texts=union_texts, device=device
    )
    second = train_stage(
        corpus_dir / STAGE2_FILE,
        STAGE2,
        config,
        resume_adapter=first.adapter_path,
        device=device,
    )
    output_dir = Path(config.output_dir)
    final_dir = output_dir / FINAL_DIR
    if final_dir.exists():
        shutil.rmtree(final_dir)
    shutil.copytree(second.adapter_path, final_dir)
    meta_path = final_dir / ADAPTER_CONFIG
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta["config"] = config.to_dict()
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    payload = {
        "stage1": asdict(first),
        "stage2": asdict(second),
        "adapter": str(final_dir),
        "config": config.to_dict(),
    }
    (output_dir / RESULT_FILE).write_text(
        json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
    )
    return TwoStageResult(stage1=first, stage2=second, adapter_path=str(final_dir))

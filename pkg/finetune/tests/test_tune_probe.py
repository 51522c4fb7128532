from graphfit import (
    WordTokenizer,
    attach_lora,
    build_model,
    memorization_probe,
    save_adapter,
    train_stage,
)
from graphfit.corpus import STAGE1

from tune_fixtures import SCENE_CONTEXT_TEXTS, make_config, memorization_corpus

_ = (make_config, memorization_corpus)

PATTERNS = (r"mlp\.(gate_proj|up_proj|down_proj)$",)


def _untrained_adapter(tmp_path, texts):
    tok = WordTokenizer.from_texts(texts)
    model = build_model("tiny", tok.vocab_size, seed=5)
    attach_lora(model, PATTERNS, r=4, alpha=8.0, seed=6)
    meta = {
        "base_model": "tiny",
        "init_seed": 5,
        "lora_seed": 6,
        "lora_r": 4,
        "lora_alpha": 8.0,
        "lora_target_patterns": list(PATTERNS),
        "stage": "stage1",
        "stage1_text_hashes": None,
    }
    return save_adapter(tmp_path / "fresh", model, tok, meta)


def _trained_adapter(memorization_corpus, make_config, epochs=1):
    config = make_config(stage1_min_epochs=epochs, stage1_max_epochs=epochs)
    return train_stage(memorization_corpus / "stage1.jsonl", STAGE1, config).adapter_path


def test_untrained_adapter_reproduces_nothing(tmp_path):
    adapter = _untrained_adapter(tmp_path, SCENE_CONTEXT_TEXTS)
    report = memorization_probe(adapter, SCENE_CONTEXT_TEXTS)
    assert report.checked == 8
    assert report.excluded == 0
    assert report.reproduced == 0
    assert report.fraction == 0.0
    assert len(report.details) == 8


def test_records_outside_the_training_set_are_excluded(memorization_corpus, make_config):
    adapter = _trained_adapter(memorization_corpus, make_config)
    foreign = "In context graph scene, the node the cat is is under the node the chair."
    report = memorization_probe(adapter, SCENE_CONTEXT_TEXTS + [foreign])
    assert report.checked == 8
    assert report.excluded == 1


def test_short_records_are_excluded(tmp_path):
    adapter = _untrained_adapter(tmp_path, SCENE_CONTEXT_TEXTS + ["so short"])
    report = memorization_probe(adapter, ["so short"] + SCENE_CONTEXT_TEXTS)
    assert report.excluded == 1
    assert report.checked == 8


def test_probe_accepts_a_corpus_file(memorization_corpus, make_config):
    adapter = _trained_adapter(memorization_corpus, make_config)
    report = memorization_probe(adapter, memorization_corpus / "stage1.jsonl")
    assert report.checked + report.excluded == 8


def test_overfit_pair_is_fully_reproduced(tmp_path, make_config):
    # two records(*) memorize to a perfect greedy decode well before the
    # loss bottoms out, so the assertion is on the probe, not the loss
    # (*) they still collide at the very first word, where both condition
    # on nothing but the start marker
    import json

    texts = [
        "the red fox jumps over the lazy dog",
        "a small bird rests under the tall tree",
    ]
    corpus = tmp_path / "pair.jsonl"
    rows = [{"kind": "node-context", "text": t, "provenance": {}} for t in texts]
    corpus.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    config = make_config(
        stage1_min_epochs=1,
        stage1_max_epochs=100,
        early_stop_loss_threshold=0.05,
        learning_rate=1e-2,
        scheduler="constant",
    )
    result = train_stage(corpus, STAGE1, config)
    assert result.final_loss is not None and result.final_loss < 1.0
    report = memorization_probe(result.adapter_path, texts)
    assert report.checked == 2
    assert report.fraction == 1.0

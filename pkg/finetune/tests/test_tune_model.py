import pytest
import torch

from graphfit import ModelLoadError, build_model, count_parameters


def test_unknown_base_model():
    with pytest.raises(ModelLoadError, match="7b-chat"):
        build_model("7b-chat", 40, seed=0)


def test_parameter_count_is_desk_scale():
    model = build_model("tiny", 40, seed=0)
    assert count_parameters(model) < 100_000_000
    assert count_parameters(model) < 1_000_000  # genuinely tiny


def test_forward_shape():
    model = build_model("tiny", 40, seed=0)
    logits = model(torch.randint(0, 40, (3, 17)))
    assert logits.shape == (3, 17, 40)


def test_context_window_enforced():
    model = build_model("tiny", 40, seed=0)
    with pytest.raises(ValueError, match="exceeds model context"):
        model(torch.zeros((1, 257), dtype=torch.long))


def test_same_seed_same_weights():
    a = build_model("tiny", 40, seed=5)
    b = build_model("tiny", 40, seed=5)
    for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
        assert torch.equal(pa, pb), name


def test_different_seed_different_weights():
    a = build_model("tiny", 40, seed=5)
    b = build_model("tiny", 40, seed=6)
    assert any(
        not torch.equal(pa, pb)
        for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters())
    )


def test_build_does_not_touch_global_rng():
    torch.manual_seed(123)
    before = torch.rand(4)
    torch.manual_seed(123)
    build_model("tiny", 40, seed=5)
    after = torch.rand(4)
    assert torch.equal(before, after)


def test_causality():
    # earlier logits must not depend on later tokens
    model = build_model("tiny", 40, seed=0)
    model.eval()
    seq = torch.randint(0, 40, (1, 12))
    changed = seq.clone()
    changed[0, -1] = (changed[0, -1] + 1) % 40
    with torch.no_grad():
        logits_a = model(seq)
        logits_b = model(changed)
    assert torch.equal(logits_a[:, :-1], logits_b[:, :-1])


def test_module_layout_names():
    model = build_model("tiny", 40, seed=0)
    names = {name for name, _ in model.named_modules()}
    for i in range(2):
        for proj in ("q_proj", "k_proj", "v_proj", "o_proj"):
            assert f"blocks.{i}.self_attn.{proj}" in names
        for proj in ("gate_proj", "up_proj", "down_proj"):
            assert f"blocks.{i}.mlp.{proj}" in names

"""Byte-exactness checks for every prompt and template asset.

Two layers of golden data live under tests/golden/:
  asset_hashes.json   sha256 + size of each raw asset file
  rendered/<name>.txt full rendered output for fixed substitution values

Any change to asset text must be deliberate: regenerate the goldens and
bump the asset's version in graphtune.prompts.VERSIONS.
"""

import hashlib
import json
from pathlib import Path

import pytest

from conftest import FIXTURES
from graphtune import prompts
from graphtune.graph import load_graph
from graphtune.serialize import serialize

GOLDEN = Path(__file__).parent / "golden"
ASSET_DIR = Path(prompts.__file__).parent


def _scene_context() -> str:
    graph = load_graph(FIXTURES / "scene.json", format="graph-json")
    text, _ = serialize(graph, "edge-list")
    return text


_SAMPLE_QUESTIONS = (
    "Question: How many nodes does the man connect to? Answer: 3\n"
    "Question: Is there an edge between the bird and the chair? Answer: No"
)

_EDGE_QUESTION = (
    "Based on the context graph, what is the relation between the node "
    "the man and the node the chair?"
)


def _render_cases() -> dict[str, dict[str, str]]:
    context = _scene_context()
    summary = "A man sits on a chair beneath a tree while a bird perches above him."
    return {
        "summary": {"context": context},
        "rephrase": {"context": context, "summary": summary},
        "node_qa": {"node": "the man"},
        "multihop_qa": {"context": context},
        "global_qa": {"context": context},
        "binary_qa": {"context": context},
        "kshot_qa": {"context": context, "sample questions": _SAMPLE_QUESTIONS},
        "edge_qa_rephrase": {
            "fact": "the man is sitting on the chair",
            "question": _EDGE_QUESTION,
            "answer": "is sitting on",
        },
        "judge": {
            "question": _EDGE_QUESTION,
            "gold": "is sitting on",
            "prediction": "sitting on",
        },
        "node_context": {"title": "Scene Graph", "node": "the man"},
        "edge_context": {
            "title": "Scene Graph",
            "src": "the man",
            "rel": "is sitting on",
            "tgt": "the chair",
        },
        "summary_record": {
            "title": "Scene Graph",
            "summary": summary.rstrip("."),
        },
        "edge_qa_src": {"rel": "is sitting on", "tgt": "the chair"},
        "edge_qa_rel": {"src": "the man", "tgt": "the chair"},
        "edge_qa_tgt": {"rel": "is sitting on", "src": "the man"},
    }


def test_version_map_covers_every_asset_file():
    on_disk = {p.stem for p in ASSET_DIR.glob("*.txt")}
    assert on_disk == set(prompts.VERSIONS)
    assert len(prompts.VERSIONS) == 15


@pytest.mark.parametrize("name", sorted(prompts.VERSIONS))
def test_asset_bytes_match_golden_hash(name):
    golden = json.loads((GOLDEN / "asset_hashes.json").read_text("utf-8"))
    raw = (ASSET_DIR / f"{name}.txt").read_bytes()
    assert hashlib.sha256(raw).hexdigest() == golden[name]["sha256"]
    assert len(raw) == golden[name]["bytes"]
    assert prompts.VERSIONS[name] == golden[name]["version"]


@pytest.mark.parametrize("name", sorted(prompts.VERSIONS))
def test_asset_has_no_trailing_newline(name):
    raw = (ASSET_DIR / f"{name}.txt").read_bytes()
    assert raw, "asset must not be empty"
    assert not raw.endswith(b"\n")


@pytest.mark.parametrize("name", sorted(prompts.VERSIONS))
def test_rendered_output_byte_matches_golden(name):
    mapping = _render_cases()[name]
    rendered = prompts.prompt(name, mapping)
    expected = (GOLDEN / "rendered" / f"{name}.txt").read_bytes()
    assert rendered.encode("utf-8") == expected


@pytest.mark.parametrize("name", sorted(prompts.VERSIONS))
def test_rendered_output_leaves_no_placeholders(name):
    rendered = prompts.prompt(name, _render_cases()[name])
    for key in _render_cases()[name]:
        assert "{" + key + "}" not in rendered


def test_load_matches_raw_file():
    for name in prompts.VERSIONS:
        raw = (ASSET_DIR / f"{name}.txt").read_text("utf-8")
        assert prompts.load(name) == raw


def test_load_unknown_asset():
    with pytest.raises(KeyError):
        prompts.load("nonexistent")


def test_render_is_literal_replacement():
    # format-spec characters and stray braces must pass through untouched
    out = prompts.render("a {x:>10} b {x} {unset}", x="V")
    assert out == "a {x:>10} b V {unset}"


def test_render_mapping_handles_keys_with_spaces():
    out = prompts.render("Q: {sample questions}!", {"sample questions": "none"})
    assert out == "Q: none!"


def test_render_kwargs_override_mapping():
    out = prompts.render("{a}", {"a": "low"}, a="high")
    assert out == "high"


def test_values_containing_braces_survive():
    out = prompts.render("x {a} y", a="{literal}")
    assert out == "x {literal} y"


def test_prompt_id_and_versions():
    assert prompts.prompt_id("summary") == "summary@v1"
    versions = prompts.version_map()
    assert versions["judge"] == "v1"
    versions["judge"] = "hacked"
    assert prompts.version_map()["judge"] == "v1"

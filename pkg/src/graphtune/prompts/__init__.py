"""Versioned prompt and template assets.

Each asset lives in a .txt file next to this module and is addressed by
name. Placeholders use single-brace ``{key}`` syntax and are substituted
literally (plain string replacement, no format-spec interpretation), so
template text may freely contain braces-with-spaces like
``{sample questions}``.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

# bump a version when its asset text changes; ids are recorded in
# corpus provenance so emitted records stay traceable to prompt text
VERSIONS = {
    "summary": "v1",
    "rephrase": "v1",
    "node_qa": "v1",
    "multihop_qa": "v1",
    "global_qa": "v1",
    "binary_qa": "v1",
    "kshot_qa": "v1",
    "edge_qa_rephrase": "v1",
    "judge": "v1",
    "node_context": "v1",
    "edge_context": "v1",
    "summary_record": "v1",
    "edge_qa_src": "v1",
    "edge_qa_rel": "v1",
    "edge_qa_tgt": "v1",
}


@lru_cache(maxsize=None)
def load(name: str) -> str:
    """Raw text of one asset, exactly as stored."""
    if name not in VERSIONS:
        raise KeyError(f"unknown prompt asset {name!r}")
    return (
        resources.files(__package__).joinpath(f"{name}.txt").read_text("utf-8")
    )


def render(template: str, mapping: dict[str, str] | None = None, **values: str) -> str:
    """Substitute ``{key}`` placeholders by literal replacement.

    Keys that are not valid identifiers (like "sample questions") go in
    ``mapping``; the rest can be passed as keyword arguments.
    """
    out = template
    combined = {**(mapping or {}), **values}
    for key, value in combined.items():
        out = out.replace("{" + key + "}", value)
    return out


def prompt(name: str, mapping: dict[str, str] | None = None, **values: str) -> str:
    """Load an asset and substitute its placeholders."""
    return render(load(name), mapping, **values)


def prompt_id(name: str) -> str:
    return f"{name}@{VERSIONS[name]}"


def version_map() -> dict[str, str]:
    return dict(VERSIONS)

"""Reader side of the two-file corpus layout written by the generation pipeline.

stage1.jsonl carries plain-text lines for memorization training and
stage2.jsonl carries two-turn chats (user question, assistant answer).  The
manifest pins sha256 digests and per-file record counts, so a run can refuse
silently corrupted input.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import CorpusSchemaError

STAGE1_FILE = "stage1.jsonl"
STAGE2_FILE = "stage2.jsonl"
MANIFEST_FILE = "manifest.json"

STAGE1 = "stage1"
STAGE2 = "stage2"

STAGE1_KINDS = frozenset({"node-context", "edge-context", "summary"})
STAGE2_KINDS = frozenset({"node-qa", "edge-qa", "reasoning-qa"})


@dataclass(frozen=True)
class Stage1Record:
    kind: str
    text: str
    provenance: dict


@dataclass(frozen=True)
class Stage2Record:
    kind: str
    question: str
    answer: str
    provenance: dict


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _rows(path: Path):
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CorpusSchemaError(f"{path}: missing corpus file") from None
    for lineno, line in enumerate(raw.splitlines(), start=1):
        try:
            row = json.loads(line)
        except json.JSONDecodeError:
            raise CorpusSchemaError(f"{path.name}:{lineno}: invalid JSON") from None
        if not isinstance(row, dict):
            raise CorpusSchemaError(f"{path.name}:{lineno}: row is not an object")
        yield lineno, row


def _require(cond: bool, path: Path, lineno: int, message: str) -> None:
    if not cond:
        raise CorpusSchemaError(f"{path.name}:{lineno}: {message}")


def load_stage1(path: str | Path) -> list[Stage1Record]:
    path = Path(path)
    records = []
    for lineno, row in _rows(path):
        _require(
            set(row) == {"kind", "text", "provenance"}, path, lineno, "unexpected fields"
        )
        _require(
            row["kind"] in STAGE1_KINDS,
            path,
            lineno,
            f"kind {row['kind']!r} not allowed in stage1",
        )
        _require(
            isinstance(row["text"], str) and row["text"] != "",
            path,
            lineno,
            "text must be a nonempty string",
        )
        _require(
            isinstance(row["provenance"], dict), path, lineno, "provenance must be an object"
        )
        records.append(
            Stage1Record(kind=row["kind"], text=row["text"], provenance=row["provenance"])
        )
    return records


def load_stage2(path: str | Path) -> list[Stage2Record]:
    path = Path(path)
    records = []
    for lineno, row in _rows(path):
        _require(
            set(row) == {"kind", "messages", "provenance"},
            path,
            lineno,
            "unexpected fields",
        )
        _require(
            row["kind"] in STAGE2_KINDS,
            path,
            lineno,
            f"kind {row['kind']!r} not allowed in stage2",
        )
        _require(
            isinstance(row["provenance"], dict), path, lineno, "provenance must be an object"
        )
        messages = row["messages"]
        shaped = (
            isinstance(messages, list)
            and len(messages) == 2
            and all(isinstance(m, dict) for m in messages)
            and [m.get("role") for m in messages] == ["user", "assistant"]
            and all(isinstance(m.get("content"), str) and m["content"] for m in messages)
        )
        _require(shaped, path, lineno, "messages must be a user turn then an assistant turn")
        records.append(
            Stage2Record(
                kind=row["kind"],
                question=messages[0]["content"],
                answer=messages[1]["content"],
                provenance=row["provenance"],
            )
        )
    return records


def read_manifest(corpus_dir: str | Path) -> dict:
    path = Path(corpus_dir) / MANIFEST_FILE
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CorpusSchemaError(f"{path}: missing manifest") from None
    except json.JSONDecodeError:
        raise CorpusSchemaError(f"{path}: manifest is not valid JSON") from None
    if not isinstance(manifest, dict):
        raise CorpusSchemaError(f"{path}: manifest must be an object")
    version = manifest.get("schema_version")
    if version != "1":
        raise CorpusSchemaError(f"unsupported manifest schema_version {version!r}")
    fmt = manifest.get("stage1_format", "plain")
    if fmt != "plain":
        raise CorpusSchemaError(f"unsupported stage1_format {fmt!r}")
    files = manifest.get("files")
    if not isinstance(files, list) or not files:
        raise CorpusSchemaError("manifest lists no files")
    return manifest


def _check_file(corpus_dir: Path, entry: dict) -> None:
    name = str(entry.get("name"))
    path = corpus_dir / name
    if not path.is_file():
        raise CorpusSchemaError(f"{name}: missing corpus file")
    data = path.read_bytes()
    digest = hashlib.sha256(data).hexdigest()
    if digest != entry.get("sha256"):
        raise CorpusSchemaError(f"{name}: sha256 mismatch against manifest")
    records = len(data.decode("utf-8").splitlines())
    if records != entry.get("records"):
        raise CorpusSchemaError(
            f"{name}: {records} records on disk, manifest says {entry.get('records')}"
        )


def verify_corpus_dir(corpus_dir: str | Path) -> dict:
    """Integrity-check a corpus directory; returns the parsed manifest."""
    corpus_dir = Path(corpus_dir)
    manifest = read_manifest(corpus_dir)
    for entry in manifest["files"]:
        if not isinstance(entry, dict):
            raise CorpusSchemaError("manifest file entry must be an object")
        _check_file(corpus_dir, entry)
    return manifest


def verify_against_sibling_manifest(path: str | Path) -> None:
    """Check one corpus file against a manifest.json beside it, if present.

    A bare file without a manifest is accepted, so hand-built fixtures do
    not have to fabricate digests.
    """
    path = Path(path)
    if not (path.parent / MANIFEST_FILE).is_file():
        return
    manifest = read_manifest(path.parent)
    for entry in manifest["files"]:
        if isinstance(entry, dict) and entry.get("name") == path.name:
            _check_file(path.parent, entry)
            return
    raise CorpusSchemaError(f"{path.name}: not listed in {MANIFEST_FILE}")

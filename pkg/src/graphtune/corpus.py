"""Corpus emission: stage-partitioned JSONL files plus a manifest.

Layout of an emitted corpus directory::

    stage1.jsonl    {"kind", "text", "provenance"}     per line
    stage2.jsonl    {"kind", "messages", "provenance"} per line
    manifest.json   counts, hashes, config snapshot

Stage 1 is plain text for language-model loss; stage 2 carries a
two-turn chat (user question, assistant answer) so a trainer can mask
the prompt tokens. Records are sorted by (kind, provenance) before
writing, so emitting the same records twice produces byte-identical
files.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .errors import CorpusSchemaError
from .graph import TextAttributedGraph
from .tasks import STAGE1, STAGE2, STAGE1_KINDS, STAGE2_KINDS, TaskRecord

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
STAGE1_FILE = "stage1.jsonl"
STAGE2_FILE = "stage2.jsonl"
MANIFEST_FILE = "manifest.json"


def _dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False)


def graph_content_hash(graph: TextAttributedGraph) -> str:
    payload = _dumps(
        {
            "title": graph.title,
            "nodes": [[n.id, n.text] for n in graph.nodes],
            "edges": [[e.src, e.rel, e.tgt, e.text] for e in graph.edges],
        }
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _atomic_write(path: Path, data: str) -> None:
    handle = tempfile.NamedTemporaryFile(
        "w", dir=path.parent, suffix=".tmp", delete=False, encoding="utf-8"
    )
    try:
        handle.write(data)
        handle.close()
        os.replace(handle.name, path)
    except OSError:
        handle.close()
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise


@dataclass
class ManifestFile:
    name: str
    records: int
    sha256: str


@dataclass
class CorpusManifest:
    schema_version: str = SCHEMA_VERSION
    created_at: str = ""
    graph_title: str | None = None
    graph_hash: str | None = None
    counts: dict = field(default_factory=dict)
    files: list[ManifestFile] = field(default_factory=list)
    stage1_format: str = "plain"
    config: dict | None = None
    prompt_versions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "created_at": self.created_at,
            "graph_title": self.graph_title,
            "graph_hash": self.graph_hash,
            "counts": self.counts,
            "files": [vars(f) for f in self.files],
            "stage1_format": self.stage1_format,
            "config": self.config,
            "prompt_versions": self.prompt_versions,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CorpusManifest":
        try:
            files = [ManifestFile(**f) for f in payload["files"]]
            return cls(
                schema_version=payload["schema_version"],
                created_at=payload.get("created_at", ""),
                graph_title=payload.get("graph_title"),
                graph_hash=payload.get("graph_hash"),
                counts=dict(payload["counts"]),
                files=files,
                stage1_format=payload.get("stage1_format", "plain"),
                config=payload.get("config"),
                prompt_versions=dict(payload.get("prompt_versions", {})),
            )
        except (KeyError, TypeError) as exc:
            raise CorpusSchemaError(f"manifest missing field: {exc}") from None


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CorpusSchemaError(f"cannot read manifest: {exc}") from None
    return CorpusManifest.from_dict(payload)


def _record_line(record: TaskRecord) -> str:
    if record.stage == STAGE1:
        body = {
            "kind": record.kind,
            "text": record.plain_text,
            "provenance": record.provenance,
        }
    else:
        body = {
            "kind": record.kind,
            "messages": [
                {"role": "user", "content": record.user_text},
                {"role": "assistant", "content": record.answer_text},
            ],
            "provenance": record.provenance,
        }
    return _dumps(body)


def emit(
    records: list[TaskRecord],
    out_dir: str | Path,
    graph: TextAttributedGraph | None = None,
    config: dict | None = None,
) -> CorpusManifest:
    """Write stage1/stage2 JSONL plus manifest. The manifest goes last,
    atomically, so its presence marks a complete corpus."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ordered = sorted(records, key=lambda r: (r.kind, _dumps(r.provenance)))
    stages = {
        STAGE1_FILE: [r for r in ordered if r.stage == STAGE1],
        STAGE2_FILE: [r for r in ordered if r.stage == STAGE2],
    }
    counts: dict[str, int] = {}
    files = []
    for name, stage_records in stages.items():
        if not stage_records:
            logger.warning("stage file %s has zero records", name)
        body = "".join(_record_line(r) + "\n" for r in stage_records)
        path = out / name
        _atomic_write(path, body)
        for record in stage_records:
            counts[record.kind] = counts.get(record.kind, 0) + 1
        files.append(
            ManifestFile(name=name, records=len(stage_records), sha256=_sha256_file(path))
        )
    manifest = CorpusManifest(
        created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        graph_title=graph.title if graph else None,
        graph_hash=graph_content_hash(graph) if graph else None,
        counts=counts,
        files=files,
        config=config,
        prompt_versions=prompts.version_map(),
    )
    _atomic_write(out / MANIFEST_FILE, json.dumps(manifest.to_dict(), indent=2) + "\n")
    return manifest


@dataclass
class VerifyReport:
    errors: list[str] = field(default_factory=list)

    def ok(self) -> bool:
        return not self.errors


_STAGE_FIELDS = {
    STAGE1_FILE: ({"kind", "text", "provenance"}, STAGE1_KINDS),
    STAGE2_FILE: ({"kind", "messages", "provenance"}, STAGE2_KINDS),
}


def _messages_shape_error(messages) -> str | None:
    ok = (
        isinstance(messages, list)
        and len(messages) == 2
        and all(isinstance(m, dict) for m in messages)
        and [m.get("role") for m in messages] == ["user", "assistant"]
        and all(m.get("content") for m in messages)
    )
    return None if ok else "messages must be a user turn then an assistant turn"


def verify(manifest: CorpusManifest, out_dir: str | Path) -> VerifyReport:
    """Recount and rehash the corpus files against the manifest."""
    out = Path(out_dir)
    report = VerifyReport()
    seen_counts: dict[str, int] = {}
    for entry in manifest.files:
        path = out / entry.name
        if not path.exists():
            report.errors.append(f"{entry.name}: missing")
            continue
        digest = _sha256_file(path)
        if digest != entry.sha256:
            report.errors.append(f"{entry.name}: sha256 mismatch")
        expected_fields, expected_kinds = _STAGE_FIELDS.get(entry.name, (None, None))
        lines = 0
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    report.errors.append(f"{entry.name}:{lineno}: blank line")
                    continue
                lines += 1
                try:
                    row = json.loads(line)
                except ValueError:
                    report.errors.append(f"{entry.name}:{lineno}: invalid JSON")
                    continue
                if expected_fields and set(row) != expected_fields:
                    report.errors.append(f"{entry.name}:{lineno}: unexpected fields")
                elif expected_kinds and row["kind"] not in expected_kinds:
                    report.errors.append(
                        f"{entry.name}:{lineno}: kind {row['kind']!r} not allowed"
                    )
                elif entry.name == STAGE2_FILE and (
                    shape_err := _messages_shape_error(row["messages"])
                ):
                    report.errors.append(f"{entry.name}:{lineno}: {shape_err}")
                else:
                    seen_counts[row["kind"]] = seen_counts.get(row["kind"], 0) + 1
        if lines != entry.records:
            report.errors.append(
                f"{entry.name}: {lines} records on disk, manifest says {entry.records}"
            )
    if not report.errors and seen_counts != manifest.counts:
        report.errors.append(
            f"per-kind counts {seen_counts} do not match manifest {manifest.counts}"
        )
    return report


def load_stage(out_dir: str | Path, name: str) -> list[dict]:
    """Read one stage file as a list of row dicts."""
    rows = []
    with open(Path(out_dir) / name, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(json.loads(line))
    return rows

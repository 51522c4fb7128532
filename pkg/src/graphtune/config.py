"""Pipeline configuration: one TOML or JSON file drives every subcommand.

Relative paths inside the file are resolved against the directory the
config file lives in, so a config can travel with its fixtures. The
``finetune`` section is carried through untouched; the tuning driver
parses it with its own schema (the file format keeps both tools on one
config).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .client import ClientConfig
from .sampling import SubgraphSampleConfig
from .tasks import TaskGenConfig

_CLIENT_KEYS = {
    "base_url",
    "model",
    "auth_env",
    "max_concurrent",
    "retries",
    "backoff",
    "cache_dir",
    "timeout",
}


@dataclass
class GraphSource:
    path: str | None = None
    format: str | None = None
    nodes_path: str | None = None
    title: str | None = None


@dataclass
class EvalSettings:
    with_context: bool = False
    context_hops: int = 2
    scorer: str = "exact"
    test_triples_path: str | None = None


@dataclass
class PipelineConfig:
    seed: int = 0
    out_dir: str = "out"
    counter_mode: str = "whitespace"
    tokenize_endpoint: str | None = None
    graph: GraphSource = field(default_factory=GraphSource)
    taskgen: TaskGenConfig = field(default_factory=TaskGenConfig)
    sampler: SubgraphSampleConfig = field(default_factory=SubgraphSampleConfig)
    generator: ClientConfig = field(default_factory=ClientConfig)
    judge: ClientConfig = field(default_factory=ClientConfig)
    model: ClientConfig = field(default_factory=ClientConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)
    finetune: dict = field(default_factory=dict)

    def snapshot(self) -> dict:
        """Reproducibility snapshot embedded in emitted artifacts."""
        return {
            "seed": self.seed,
            "counter_mode": self.counter_mode,
            "graph": vars(self.graph),
            "taskgen": {
                "n_summary": self.taskgen.n_summary,
                "n_context_qa": self.taskgen.n_context_qa,
                "n_reasoning": self.taskgen.n_reasoning,
                "k_shots": self.taskgen.k_shots,
                "rephrase_edge_qa": self.taskgen.rephrase_edge_qa,
                "seed": self.taskgen.seed,
                "train_qa_path": self.taskgen.train_qa_path,
            },
            "sampler": {
                "hops": self.sampler.hops,
                "max_neighbors_per_node": self.sampler.max_neighbors_per_node,
                "max_nodes": self.sampler.max_nodes,
                "direction": self.sampler.direction,
            },
            "eval": vars(self.eval),
            "finetune": dict(self.finetune),
        }


def _require_keys(section: dict, allowed: set[str], name: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ValueError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")


def _client_config(section: dict, name: str) -> ClientConfig:
    _require_keys(section, _CLIENT_KEYS, name)
    return ClientConfig(**section)


def _resolve(base: Path, value: str | None) -> str | None:
    if not value:
        return value
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a .toml or .json config file into a PipelineConfig."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text(encoding="utf-8"))
    else:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    if not isinstance(raw, dict):
        raise ValueError("config root must be a table/object")
    base = path.resolve().parent

    top_allowed = {
        "seed",
        "out_dir",
        "counter",
        "tokenize_endpoint",
        "graph",
        "taskgen",
        "sampler",
        "generator",
        "judge",
        "model",
        "eval",
        "finetune",
    }
    _require_keys(raw, top_allowed, "top level")

    seed = int(raw.get("seed", 0))
    counter_mode = raw.get("counter", "whitespace")
    if counter_mode not in ("whitespace", "endpoint"):
        raise ValueError(f"unknown counter mode {counter_mode!r}")
    tokenize_endpoint = raw.get("tokenize_endpoint") or None
    if counter_mode == "endpoint" and not tokenize_endpoint:
        raise ValueError("counter = 'endpoint' requires tokenize_endpoint")

    graph_raw = dict(raw.get("graph", {}))
    _require_keys(graph_raw, {"path", "format", "nodes_path", "title"}, "graph")
    graph = GraphSource(
        path=_resolve(base, graph_raw.get("path")),
        format=graph_raw.get("format"),
        nodes_path=_resolve(base, graph_raw.get("nodes_path")),
        title=graph_raw.get("title"),
    )

    sampler_raw = dict(raw.get("sampler", {}))
    _require_keys(
        sampler_raw,
        {"hops", "max_neighbors_per_node", "max_nodes", "direction"},
        "sampler",
    )
    sampler = SubgraphSampleConfig(**sampler_raw)

    taskgen_raw = dict(raw.get("taskgen", {}))
    _require_keys(
        taskgen_raw,
        {
            "n_summary",
            "n_context_qa",
            "n_reasoning",
            "k_shots",
            "rephrase_edge_qa",
            "train_qa_path",
        },
        "taskgen",
    )
    taskgen_raw["train_qa_path"] = _resolve(base, taskgen_raw.get("train_qa_path"))
    taskgen = TaskGenConfig(seed=seed, subgraph=sampler, **taskgen_raw)

    clients = {}
    for name in ("generator", "judge", "model"):
        section = dict(raw.get(name, {}))
        if "cache_dir" in section:
            section["cache_dir"] = _resolve(base, section["cache_dir"])
        clients[name] = _client_config(section, name)

    eval_raw = dict(raw.get("eval", {}))
    _require_keys(
        eval_raw,
        {"with_context", "context_hops", "scorer", "test_triples_path"},
        "eval",
    )
    eval_raw["test_triples_path"] = _resolve(base, eval_raw.get("test_triples_path"))
    eval_settings = EvalSettings(**eval_raw)
    if eval_settings.scorer not in ("exact", "judge"):
        raise ValueError(f"unknown scorer {eval_settings.scorer!r}")

    finetune = dict(raw.get("finetune", {}))

    return PipelineConfig(
        seed=seed,
        out_dir=_resolve(base, raw.get("out_dir", "out")),
        counter_mode=counter_mode,
        tokenize_endpoint=tokenize_endpoint,
        graph=graph,
        taskgen=taskgen,
        sampler=sampler,
        generator=clients["generator"],
        judge=clients["judge"],
        model=clients["model"],
        eval=eval_settings,
        finetune=finetune,
    )

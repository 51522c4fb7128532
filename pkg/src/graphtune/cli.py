"""Command-line entry point wiring the pipeline together.

Subcommands: stats, serialize, gen, emit-verify, make-eval-items, eval.
One config file (TOML or JSON) drives everything; the few flags that
exist override the corresponding config values. Exit codes: 0 ok,
1 usage, 2 validation, 3 generation budget exceeded, 4 transport.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus, evaluation, mock, tasks
from .client import ChatClient, MockChatClient, OpenAIChatClient
from .config import PipelineConfig, load_config
from .errors import (
    CorpusSchemaError,
    EndpointError,
    GenerationBudgetExceeded,
    ParseError,
    TransportError,
    ValidationError,
    VocabTooSmall,
)
from .graph import load_graph, load_test_triples
from .serialize import (
    EDGE_LIST,
    EDGE_WITH_INDEX,
    METHODS,
    TokenCounter,
    serialize,
    theoretical_token_cost,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_TRANSPORT = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_pipeline(args) -> PipelineConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = PipelineConfig()
    if getattr(args, "graph", None):
        cfg.graph.path = args.graph
    if getattr(args, "format", None):
        cfg.graph.format = args.format
    if getattr(args, "nodes", None):
        cfg.graph.nodes_path = args.nodes
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.taskgen.seed = args.seed
    if getattr(args, "out", None) and hasattr(cfg, "out_dir"):
        pass  # out handling is per-command; kept on args
    return cfg


def _graph_from(cfg: PipelineConfig):
    if not cfg.graph.path:
        raise ValueError("no graph source: set [graph].path or pass --graph")
    return load_graph(
        cfg.graph.path,
        format=cfg.graph.format,
        nodes_path=cfg.graph.nodes_path,
        title=cfg.graph.title,
    )


def _counter_from(cfg: PipelineConfig, override: str | None = None) -> TokenCounter:
    mode = override or cfg.counter_mode
    return TokenCounter(mode=mode, endpoint=cfg.tokenize_endpoint)


def cmd_stats(args) -> int:
    cfg = _load_pipeline(args)
    graph = _graph_from(cfg)
    counter = _counter_from(cfg, args.counter)
    print(f"graph {graph.title!r}: nodes={graph.node_count} edges={graph.edge_count}")
    for method in METHODS:
        _, stats = serialize(graph, method, counter)
        theoretical = theoretical_token_cost(
            stats.node_count,
            stats.mean_out_degree,
            stats.mean_node_tokens,
            stats.mean_edge_tokens,
            method,
        )
        print(
            f"{method}: mean_out_degree={stats.mean_out_degree:.2f} "
            f"mean_node_tokens={stats.mean_node_tokens:.2f} "
            f"mean_edge_tokens={stats.mean_edge_tokens:.2f}"
        )
        print(
            f"  exact_total={stats.exact_total} content_total={stats.content_total} "
            f"feature_total={stats.feature_total} theoretical={theoretical:.1f}"
        )
    return EXIT_OK


def cmd_serialize(args) -> int:
    cfg = _load_pipeline(args)
    graph = _graph_from(cfg)
    text, _ = serialize(graph, args.method, _counter_from(cfg, args.counter))
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def _generator_client(cfg: PipelineConfig, use_mock: bool) -> ChatClient:
    if use_mock:
        return MockChatClient(handler=mock.cooperative_handler)
    return OpenAIChatClient(cfg.generator)


def cmd_gen(args) -> int:
    cfg = _load_pipeline(args)
    graph = _graph_from(cfg)
    out_dir = args.out or cfg.out_dir
    client = _generator_client(cfg, args.mock)
    train_qa = (
        tasks.load_train_qa(cfg.taskgen.train_qa_path)
        if cfg.taskgen.train_qa_path
        else None
    )
    budget_error = None
    try:
        records = tasks.generate_all(graph, cfg.taskgen, client, train_qa)
    except GenerationBudgetExceeded as exc:
        budget_error = exc
        records = exc.records
    manifest = corpus.emit(records, out_dir, graph=graph, config=cfg.snapshot())
    targets = {
        tasks.KIND_NODE_CONTEXT: graph.node_count,
        tasks.KIND_EDGE_CONTEXT: graph.edge_count,
        tasks.KIND_SUMMARY: 6 * cfg.taskgen.n_summary,
        tasks.KIND_NODE_QA: cfg.taskgen.n_context_qa,
        tasks.KIND_EDGE_QA: cfg.taskgen.n_context_qa,
        tasks.KIND_REASONING_QA: 2 * cfg.taskgen.n_reasoning,
    }
    print(f"corpus written to {out_dir}")
    for kind, target in targets.items():
        print(f"  {kind}: {manifest.counts.get(kind, 0)} (target {target})")
    if budget_error is not None:
        print(
            f"error: {budget_error}; partial corpus preserved in {out_dir}",
            file=sys.stderr,
        )
        return EXIT_BUDGET
    return EXIT_OK


def cmd_emit_verify(args) -> int:
    manifest = corpus.load_manifest(args.dir)
    report = corpus.verify(manifest, args.dir)
    if report.ok():
        total = sum(f.records for f in manifest.files)
        print(f"ok: {total} records across {len(manifest.files)} files verified")
        return EXIT_OK
    for problem in report.errors:
        print(f"error: {problem}", file=sys.stderr)
    return EXIT_VALIDATION


def _load_eval_items(cfg: PipelineConfig, args) -> list[evaluation.EvalItem]:
    if getattr(args, "items", None):
        return evaluation.load_items(args.items)
    triples_path = getattr(args, "test_triples", None) or cfg.eval.test_triples_path
    if not triples_path:
        raise ValueError("pass --items or --test-triples (or set [eval].test_triples_path)")
    graph = _graph_from(cfg)
    triples = load_test_triples(triples_path)
    if getattr(args, "limit", None):
        triples = triples[: args.limit]
    with_context = cfg.eval.with_context
    if getattr(args, "with_context", None) is not None:
        with_context = args.with_context
    return evaluation.build_kg_eval_items(
        graph,
        triples,
        seed=cfg.seed,
        with_context=with_context,
        context_hops=cfg.eval.context_hops,
        sample_config=cfg.sampler,
    )


def cmd_make_eval_items(args) -> int:
    cfg = _load_pipeline(args)
    items = _load_eval_items(cfg, args)
    evaluation.save_items(items, args.out)
    print(f"wrote {len(items)} eval items to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_pipeline(args)
    items = _load_eval_items(cfg, args)
    scorer = args.scorer or cfg.eval.scorer
    if args.mock == "oracle":
        client: ChatClient = MockChatClient(handler=mock.oracle_handler_for(items))
    elif args.mock == "random":
        client = MockChatClient(handler=mock.random_option_handler(cfg.seed))
    else:
        client = OpenAIChatClient(cfg.model)
    judge_client: ChatClient | None = None
    if scorer == "judge":
        judge_client = (
            MockChatClient(handler=mock.cooperative_handler)
            if args.mock
            else OpenAIChatClient(cfg.judge)
        )
    use_context = cfg.eval.with_context
    if args.with_context is not None:
        use_context = args.with_context
    report = evaluation.run_eval(
        items,
        client,
        scorer=scorer,
        counter=_counter_from(cfg, args.counter),
        judge_client=judge_client,
        use_context=use_context,
    )
    out_path = args.out or str(Path(cfg.out_dir) / "eval_report.json")
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    evaluation.save_report(report, out_path)
    print(
        f"accuracy {report.accuracy:.4f} ({report.correct}/{report.total}) "
        f"avg_input_tokens {report.avg_input_tokens:.1f} "
        f"total_seconds {report.total_seconds:.2f} "
        f"scorer={report.scorer} with_context={report.with_context}"
    )
    print(f"report written to {out_path}")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="graphtune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="TOML/JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("stats", help="token statistics for both serializations")
    common(p, config_required=False)
    p.add_argument("--graph", help="graph file (overrides config)")
    p.add_argument("--format", choices=["graph-json", "triples-tsv"])
    p.add_argument("--nodes", help="node-text sidecar TSV for triples input")
    p.add_argument("--counter", choices=["whitespace", "endpoint"], default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serialize", help="emit one serialization to stdout or a file")
    common(p, config_required=False)
    p.add_argument("--graph", help="graph file (overrides config)")
    p.add_argument("--format", choices=["graph-json", "triples-tsv"])
    p.add_argument("--nodes", help="node-text sidecar TSV for triples input")
    p.add_argument("--method", choices=list(METHODS), required=True)
    p.add_argument("--counter", choices=["whitespace", "endpoint"], default=None)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_serialize)

    p = sub.add_parser("gen", help="generate all task families and emit the corpus")
    common(p)
    p.add_argument("--mock", action="store_true", help="offline deterministic mock endpoint")
    p.add_argument("--out", help="corpus directory (overrides config out_dir)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("emit-verify", help="verify a corpus directory against its manifest")
    p.add_argument("--dir", required=True, help="corpus directory")
    p.set_defaults(func=cmd_emit_verify)

    p = sub.add_parser("make-eval-items", help="build 10-way eval items from test triples")
    common(p)
    p.add_argument("--test-triples", help="held-out triples TSV")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument(
        "--with-context",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="attach entity-centered context subgraphs",
    )
    p.add_argument("--out", required=True, help="items JSONL path")
    p.set_defaults(func=cmd_make_eval_items)

    p = sub.add_parser("eval", help="evaluate a served model on eval items")
    common(p)
    p.add_argument("--items", help="items JSONL (from make-eval-items)")
    p.add_argument("--test-triples", help="build items on the fly from this TSV")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--mock", choices=["oracle", "random"], default=None)
    p.add_argument("--scorer", choices=["exact", "judge"], default=None)
    p.add_argument(
        "--with-context",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="attach item contexts to the model input",
    )
    p.add_argument("--counter", choices=["whitespace", "endpoint"], default=None)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except (
        ParseError,
        ValidationError,
        VocabTooSmall,
        CorpusSchemaError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GenerationBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (TransportError, EndpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())

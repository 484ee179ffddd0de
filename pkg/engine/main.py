"""Command-line front end: neighborhoods -> embedding -> evaluation, plus replay checks and sweeps."""

from __future__ import annotations

import argparse
import hashlib
import itertools
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Optional

from config import PRESETS, resolve_config
from errors import ConfigValidationError, EngineError, StabilityError, StructuralError
from evaluation import SWEEP_PARAMETERS, compare_runs, performance_stability, sensitivity_sweep, train_classifier
from expansion import format_expanded
from graph_core import Graph, read_edge_list, read_labels
from models import PipelineConfig
from pipeline import build_neighborhoods, embed_graph, neighborhood_provenance
from refinement import RefinedNeighborhood, format_circuit, format_refined, parse_refined, read_provenance
from run_history import RunRecord, open_history
from skipgram import read_embeddings, write_embeddings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 3

# flag dest -> PipelineConfig field
_CONFIG_FLAGS: dict[str, str] = {
    "graph": "graph_path",
    "weighted": "weighted",
    "alpha": "alpha",
    "expansion_size": "expansion_size",
    "refinement_size": "refinement_size",
    "k_max": "k_max",
    "dimensions": "dimensions",
    "epochs": "epochs",
    "learning_rate": "learning_rate",
    "min_learning_rate": "min_learning_rate",
    "negatives": "negatives_k",
    "noise_exponent": "noise_exponent",
    "seed": "seed",
    "shuffle": "shuffle",
    "threads": "threads",
    "labels": "labels_path",
    "label_fraction": "label_fraction",
    "folds": "folds",
    "l2_lambda": "l2_lambda",
    "output_dir": "output_dir",
    "expanded": "expanded_path",
    "refined": "refined_path",
    "embedding": "embedding_path",
    "history_db": "history_db",
}


def _config_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration (flags override --config, which overrides --preset)")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--config", type=Path, help="key=value or YAML config file")
    g.add_argument("--verbose", "-v", action="store_true")
    g.add_argument("--graph", type=Path, help="edge list file")
    g.add_argument("--weighted", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--alpha", type=float)
    g.add_argument("--expansion-size", "-e", type=int)
    g.add_argument("--refinement-size", "-r", type=int)
    g.add_argument("--k-max", type=int)
    g.add_argument("--dimensions", "-d", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--min-learning-rate", type=float)
    g.add_argument("--negatives", type=int)
    g.add_argument("--noise-exponent", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--threads", type=int)
    g.add_argument("--labels", type=Path, help="label file: node label1 label2 ...")
    g.add_argument("--label-fraction", type=float)
    g.add_argument("--folds", type=int)
    g.add_argument("--l2-lambda", type=float)
    g.add_argument("--output-dir", type=Path)
    g.add_argument("--expanded", type=Path)
    g.add_argument("--refined", type=Path)
    g.add_argument("--embedding", type=Path)
    g.add_argument("--history-db", type=Path)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circuit-embed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_config_flags()]

    p = sub.add_parser("neighborhoods", parents=common, help="write expanded and refined neighborhood dumps")
    p.add_argument("--circuit-dump", type=Path, help="also write voltages and currents per source")

    p = sub.add_parser("embed", parents=common, help="train and write the embedding file")
    p.add_argument("--recompute", action="store_true", help="ignore a persisted refined dump")

    sub.add_parser("evaluate", parents=common, help="k-fold Micro-F1 of the embedding against labels")

    p = sub.add_parser("stability", parents=common, help="replay the pipeline and compare embeddings")
    p.add_argument("--runs", type=int, default=2)
    p.add_argument("--tolerance", type=float, default=0.0)
    p.add_argument("--vary-seeds", action="store_true", help="seed + run index per run; report only")
    p.add_argument("--thread-counts", help="comma list of worker counts cycled across runs, e.g. 1,8")

    p = sub.add_parser("sweep", parents=common, help="Micro-F1 over a parameter grid")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMETERS)
    p.add_argument("--grid", required=True, help="comma list of values")
    p.add_argument("--out", type=Path, help="also write the table here")

    p = sub.add_parser("history", parents=common, help="list, show or clear recorded runs")
    p.add_argument("--limit", type=int, default=20)
    p.add_argument("--command", dest="filter_command", choices=[c for c in COMMANDS if c != "history"])
    action = p.add_mutually_exclusive_group()
    action.add_argument("--id", help="show one run, config included; a unique id prefix is enough")
    action.add_argument("--clear", action="store_true", help="delete recorded runs (only --command ones if given)")

    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {field: getattr(args, flag) for flag, field in _CONFIG_FLAGS.items()}


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigValidationError(f"{what} must be a comma list of integers, got {text!r}") from None
    if not values:
        raise ConfigValidationError(f"{what} is empty")
    return values


def _load_graph(config: PipelineConfig) -> Graph:
    if config.graph_path is None:
        raise ConfigValidationError("graph_path is required (--graph or config file)")
    return read_edge_list(config.graph_path, weighted=config.weighted)


def _labels_path(config: PipelineConfig) -> Path:
    if config.labels_path is None:
        raise ConfigValidationError("labels_path is required (--labels or config file)")
    if not config.labels_path.is_file():
        raise ConfigValidationError(f"Label file not found: {config.labels_path}")
    return config.labels_path


def _write_text(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode("utf-8")
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def cmd_neighborhoods(args: argparse.Namespace, config: PipelineConfig) -> tuple[int, Optional[Path], Optional[str]]:
    graph = _load_graph(config)
    run = build_neighborhoods(graph, config, keep_circuits=args.circuit_dump is not None)

    _write_text(config.expanded_file, format_expanded(run.expanded, graph))
    digest = _write_text(config.refined_file, format_refined(run.refined, graph, neighborhood_provenance(graph, config)))
    if args.circuit_dump is not None:
        dumps = [format_circuit(run.refined[s].circuit, graph) for s in sorted(run.refined)]
        _write_text(args.circuit_dump, "".join(dumps))

    print(f"nodes\t{graph.n}")
    print(f"expansion_seconds\t{run.expansion_seconds:.3f}")
    print(f"refinement_seconds\t{run.refinement_seconds:.3f}")
    print(f"expanded\t{config.expanded_file}")
    print(f"refined\t{config.refined_file}")
    return EXIT_OK, config.refined_file, digest


def _persisted_refined(config: PipelineConfig, graph: Graph) -> Optional[dict[int, RefinedNeighborhood]]:
    """The refined dump on disk, if it was built from this graph with these neighborhood settings."""
    try:
        text = config.refined_file.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise StructuralError(f"{config.refined_file}: invalid UTF-8 byte at offset {exc.start}") from None
    wanted = neighborhood_provenance(graph, config)
    stored = read_provenance(text)
    if stored != wanted:
        stale = "no header" if stored is None else ", ".join(k for k in wanted if stored.get(k) != wanted[k])
        logger.warning("Persisted neighborhoods in %s are stale (%s); recomputing", config.refined_file, stale)
        return None

    logger.info("Training from persisted neighborhoods in %s", config.refined_file)
    refined = parse_refined(text, graph, config.refinement_size)
    missing = graph.n - len(refined)
    if missing:
        logger.warning("%d node(s) have no line in %s", missing, config.refined_file)
    return refined


def cmd_embed(args: argparse.Namespace, config: PipelineConfig) -> tuple[int, Optional[Path], Optional[str]]:
    graph = _load_graph(config)
    refined = None
    if not args.recompute and config.refined_file.is_file():
        refined = _persisted_refined(config, graph)
    if refined is None:
        run = build_neighborhoods(graph, config)
        _write_text(config.expanded_file, format_expanded(run.expanded, graph))
        _write_text(config.refined_file, format_refined(run.refined, graph, neighborhood_provenance(graph, config)))
        refined = run.refined

    emb = embed_graph(graph, config, refined)
    digest = _write_text(config.embedding_file, write_embeddings(emb, graph.names))
    print(f"embedding\t{config.embedding_file}")
    print(f"shape\t{emb.n} {emb.d}")
    for epoch, loss in enumerate(emb.epoch_losses, start=1):
        print(f"epoch\t{epoch}\t{loss:.6f}")
    return EXIT_OK, config.embedding_file, digest


def cmd_evaluate(args: argparse.Namespace, config: PipelineConfig) -> tuple[int, Optional[Path], Optional[str]]:
    labels_path = _labels_path(config)
    names, vectors = read_embeddings(config.embedding_file)
    labels = read_labels(labels_path, names)
    report = train_classifier(
        vectors, labels, config.l2_lambda, config.folds, config.label_fraction, config.seed
    )
    print(report.to_text(), end="")
    return EXIT_OK, None, None


def cmd_stability(args: argparse.Namespace, config: PipelineConfig) -> tuple[int, Optional[Path], Optional[str]]:
    if args.runs < 2:
        raise ConfigValidationError(f"stability needs at least 2 runs, got {args.runs}")
    thread_counts = (
        _parse_int_list(args.thread_counts, "--thread-counts") if args.thread_counts else [config.threads]
    )
    if min(thread_counts) < 1:
        raise ConfigValidationError("--thread-counts values must be >= 1")

    graph = _load_graph(config)
    run_dir = config.output_dir / "stability"
    paths: list[Path] = []
    for i in range(args.runs):
        point = config.model_copy(update={
            "seed": config.seed + i if args.vary_seeds else config.seed,
            "threads": thread_counts[i % len(thread_counts)],
        })
        path = run_dir / f"run{i}.emb"
        _write_text(path, write_embeddings(embed_graph(graph, point), graph.names))
        logger.info("Run %d (seed %d, %d thread(s)) -> %s", i, point.seed, point.threads, path)
        paths.append(path)

    worst = None
    for (i, a), (j, b) in itertools.combinations(enumerate(paths), 2):
        report = compare_runs(a, b, args.tolerance)
        print(f"pair\t{i}-{j}\tglobal_max\t{report.global_max:.9g}\t{'PASS' if report.passed else 'FAIL'}")
        if worst is None or report.global_max > worst.global_max:
            worst = report
    print(worst.to_text(), end="")

    if config.labels_path is not None:
        labels = read_labels(_labels_path(config), graph.names)
        perf = performance_stability(
            paths, labels, graph.names, config.l2_lambda, config.folds, config.label_fraction, config.seed
        )
        print(perf.to_text(), end="")

    if not worst.passed:
        if args.vary_seeds:
            logger.info("Seeds varied across runs; deviation %.3g reported, not asserted", worst.global_max)
        else:
            raise StabilityError(
                f"runs deviate by {worst.global_max:.9g} (dimension {worst.worst_dimension}), "
                f"tolerance {args.tolerance:.9g}"
            )
    return EXIT_OK, paths[0], None


def cmd_sweep(args: argparse.Namespace, config: PipelineConfig) -> tuple[int, Optional[Path], Optional[str]]:
    grid = _parse_int_list(args.grid, "--grid")
    graph = _load_graph(config)
    labels = read_labels(_labels_path(config), graph.names)
    table = sensitivity_sweep(graph, labels, args.param, grid, config)
    text = table.to_csv(sep="\t", index=False)
    print(text, end="")
    digest = None
    if args.out is not None:
        digest = _write_text(args.out, text)
    return EXIT_OK, args.out, digest


def cmd_history(args: argparse.Namespace, config: PipelineConfig) -> tuple[int, Optional[Path], Optional[str]]:
    history = open_history(config.history_db)
    if args.clear:
        print(f"cleared\t{history.clear(args.filter_command)}")
    elif args.id is not None:
        record = history.get(args.id)
        if record is None:
            raise ConfigValidationError(f"no recorded run with id {args.id!r}")
        print(record.to_text(), end="")
    else:
        for record in history.list(limit=args.limit, command=args.filter_command):
            print(record.summary_line())
    return EXIT_OK, None, None


COMMANDS: dict[str, Callable[[argparse.Namespace, PipelineConfig], tuple[int, Optional[Path], Optional[str]]]] = {
    "neighborhoods": cmd_neighborhoods,
    "embed": cmd_embed,
    "evaluate": cmd_evaluate,
    "stability": cmd_stability,
    "sweep": cmd_sweep,
    "history": cmd_history,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(level=logging.INFO)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    started = time.perf_counter()
    try:
        config = resolve_config(args.preset, args.config, _overrides(args))
        logger.info("Resolved config:\n%s", config.to_text().rstrip())
        code, artifact, digest = COMMANDS[args.command](args, config)
    except EngineError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO

    if args.command != "history":
        open_history(config.history_db).save(RunRecord.new(
            args.command,
            config.to_text(),
            artifact,
            digest,
            elapsed_ms=(time.perf_counter() - started) * 1000.0,
        ))
    return code


if __name__ == "__main__":
    sys.exit(main())

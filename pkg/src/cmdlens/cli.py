"""Command-line entry points for every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Every subcommand
takes --config/--seed/--format; --format json prints one JSON document,
--format table prints an aligned text rendering.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import errors as E
from .config import Config, load_config
from .doccorpus import (
    ChunkRule, build_ground_truth, chunk_to_record, generate_commands,
    ingest_man_dir, make_triples, mask_private, read_jsonl, record_to_chunk,
    record_to_triple, split_dataset, triple_to_record, write_jsonl,
)
from .embedding import OfflineEmbedder
from .explain import ExplainDeps, PipelineConfig, explain_command
from .intent import (
    BehaviorDescription, IntentPrediction, MatchConfig, identify_intent,
    load_catalog, topk_acc,
)
from .retrieval import build_index, evaluate_retrieval, load_index, save_index
from .shellparse import Dialect, parse
from .textmetrics import Scheme, evaluate_corpus


def _print_kv_table(data: dict, out) -> None:
    width = max(len(k) for k in data)
    for key, value in data.items():
        out.write(f"{key:<{width}}  {value}\n")


def _emit(data, fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(data, ensure_ascii=False, sort_keys=True, indent=2) + "\n")
    else:
        if isinstance(data, dict) and all(not isinstance(v, (dict, list))
                                          for v in data.values()):
            _print_kv_table(data, out)
        else:
            out.write(json.dumps(data, ensure_ascii=False, sort_keys=True, indent=2) + "\n")


def _chunk_rule(spec: str) -> ChunkRule:
    if spec == "blanklines":
        return ChunkRule.blank_lines()
    if spec.startswith("words:"):
        return ChunkRule.words(int(spec.split(":", 1)[1]))
    raise argparse.ArgumentTypeError(f"bad chunk rule {spec!r} (words:N or blanklines)")


def _ratios(spec: str) -> tuple[float, float, float]:
    parts = [float(x) for x in spec.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios must be three comma-separated numbers")
    return (parts[0], parts[1], parts[2])


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="path to a JSON config file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--format", choices=("json", "table"), default="json")


def _provider_from_args(args, cfg: Config):
    if getattr(args, "provider", None) == "offline" or cfg.embed.provider == "offline":
        dim = getattr(args, "dim", None) or cfg.embed.dim
        seed = args.seed if args.seed is not None else cfg.embed.seed
        return OfflineEmbedder(dim=dim, seed=seed)
    return cfg.make_provider()


def cmd_parse(args, cfg: Config) -> int:
    cmd = parse(args.command, Dialect(args.dialect))
    _emit({
        "source": cmd.source,
        "dialect": cmd.dialect.value,
        "separators": [s.name.lower() for s in cmd.separators],
        "units": [dataclasses.asdict(u) for u in cmd.units],
    }, args.format)
    return 0


def cmd_ingest(args, cfg: Config) -> int:
    _, chunks = ingest_man_dir(args.man_dir, args.rule)
    write_jsonl(args.out, (chunk_to_record(c) for c in chunks))
    _emit({"chunks": len(chunks), "out": args.out}, args.format)
    return 0


def cmd_dataset(args, cfg: Config) -> int:
    seed = args.seed if args.seed is not None else cfg.seed
    docs, chunks = ingest_man_dir(args.man_dir, args.rule)
    commands: list[str] = []
    for i, doc in enumerate(docs):
        commands.extend(generate_commands(doc, n=args.commands_per_utility,
                                          max_options=args.max_options,
                                          seed=seed + i))
    truth = build_ground_truth(commands, chunks)
    triples = make_triples(commands, chunks, truth,
                           negatives_per_positive=args.negatives, seed=seed)
    if args.mask:
        identifiers = sorted({doc.utility for doc in docs})
        masked = []
        for t in triples:
            masked_command, masked_chunks, _ = mask_private(
                t.command, [t.doc], identifiers, seed=seed)
            masked.append(dataclasses.replace(t, command=masked_command,
                                              doc=masked_chunks[0]))
        triples = masked
    train, val, test = split_dataset(triples, args.ratios, seed=seed)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_jsonl(out_dir / "chunks.jsonl", (chunk_to_record(c) for c in chunks))
    for name, part in (("train", train), ("val", val), ("test", test)):
        write_jsonl(out_dir / f"triples_{name}.jsonl",
                    (triple_to_record(t) for t in part))
    _emit({"commands": len(commands), "chunks": len(chunks),
           "triples": len(triples), "train": len(train), "val": len(val),
           "test": len(test), "out_dir": str(out_dir)}, args.format)
    return 0


def cmd_index(args, cfg: Config) -> int:
    chunks = [record_to_chunk(r) for r in read_jsonl(args.chunks)]
    provider = _provider_from_args(args, cfg)
    index = build_index(chunks, provider)
    save_index(index, args.out)
    _emit({"entries": len(index), "dim": index.dim,
           "provider_id": index.provider_id, "out": args.out}, args.format)
    return 0


def _deps_from_config(cfg: Config, seed: int | None) -> ExplainDeps:
    catalog = load_catalog(cfg.catalog_path)
    index = load_index(cfg.index_path) if cfg.index_path else None
    template_set = cfg.make_template_set()
    return ExplainDeps(
        catalog=catalog, provider=cfg.make_provider(), backend=cfg.make_backend(),
        template_set=template_set, index=index,
        cfg=PipelineConfig(dialect=Dialect(cfg.dialect), k_per_unit=cfg.k_per_unit,
                           intent_k=cfg.intent_k,
                           seed=seed if seed is not None else cfg.seed,
                           prompt_char_budget=cfg.prompt_char_budget,
                           temperature=cfg.backend.temperature,
                           top_p=cfg.backend.top_p))


def cmd_explain(args, cfg: Config) -> int:
    deps = _deps_from_config(cfg, args.seed)
    explanation = explain_command(args.command, deps)
    _emit(explanation.to_dict(), args.format)
    return 0


def cmd_identify(args, cfg: Config) -> int:
    catalog = load_catalog(args.catalog or cfg.catalog_path)
    provider = _provider_from_args(args, cfg)
    prediction = identify_intent(BehaviorDescription(text=args.text), catalog,
                                 provider, MatchConfig(k=args.k))
    payload = prediction.to_dict()
    payload["top_technique"] = prediction.top_technique
    payload["top_tactic"] = prediction.top_tactic
    _emit(payload, args.format)
    return 0


def cmd_eval_metrics(args, cfg: Config) -> int:
    records = read_jsonl(args.pairs)
    pairs = [(r["candidate"], list(r["references"])) for r in records]
    report = evaluate_corpus(pairs, Scheme(args.scheme))
    _emit(report.to_dict(), args.format)
    return 0


def cmd_eval_retrieval(args, cfg: Config) -> int:
    triples = [record_to_triple(r) for r in read_jsonl(args.triples)]
    provider = _provider_from_args(args, cfg)
    _emit(evaluate_retrieval(triples, provider), args.format)
    return 0


def cmd_eval_intent(args, cfg: Config) -> int:
    catalog = load_catalog(args.catalog or cfg.catalog_path)
    provider = _provider_from_args(args, cfg)
    records = read_jsonl(args.records)
    predictions: list[IntentPrediction] = []
    technique_truths: list[str] = []
    tactic_truths: list[str] = []
    for rec in records:
        predictions.append(identify_intent(
            BehaviorDescription(text=rec["behavior_text"]), catalog, provider,
            MatchConfig(k=args.k)))
        technique_truths.append(rec["truth_technique"])
        tactic_truths.append(rec.get("truth_tactic", ""))
    report: dict = {"n": len(records), "k_tactic_avg": args.k}
    for k in (1, 3, 5):
        report[f"technique_top{k}_acc"] = topk_acc(
            predictions, technique_truths, k, level="technique",
            rollup_subtechniques=args.rollup_subtechniques)
    if all(tactic_truths):
        for k in (1, 3, 5):
            report[f"tactic_top{k}_acc"] = topk_acc(
                predictions, tactic_truths, k, level="tactic")
    _emit(report, args.format)
    return 0


def cmd_serve(args, cfg: Config) -> int:
    from .service import serve
    if args.port:
        cfg.bind_port = args.port
    serve(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmdlens",
                                     description="shell-command auditing toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("parse", help="parse a command line into units")
    p.add_argument("--command", required=True)
    p.add_argument("--dialect", choices=[d.value for d in Dialect],
                   default=Dialect.UNIX_SHELL.value)
    _add_common(p)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("ingest", help="extract and chunk a directory of man pages")
    p.add_argument("--man-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rule", type=_chunk_rule, default=ChunkRule.words(200))
    _add_common(p)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("dataset", help="build labeled triples and split them")
    p.add_argument("--man-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratios", type=_ratios, default=(0.9, 0.05, 0.05))
    p.add_argument("--rule", type=_chunk_rule, default=ChunkRule.words(200))
    p.add_argument("--commands-per-utility", type=int, default=20)
    p.add_argument("--max-options", type=int, default=2)
    p.add_argument("--negatives", type=int, default=1)
    p.add_argument("--mask", action="store_true",
                   help="mask utility names in commands and chunk texts")
    _add_common(p)
    p.set_defaults(fn=cmd_dataset)

    p = sub.add_parser("index", help="embed chunks and save a search index")
    p.add_argument("--chunks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--provider", choices=("offline", "remote"), default="offline")
    p.add_argument("--dim", type=int, default=None)
    _add_common(p)
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("explain", help="one-shot explanation of a command")
    p.add_argument("--command", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("identify", help="map a behavior description to intent")
    p.add_argument("--text", required=True)
    p.add_argument("--catalog", default=None)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--provider", choices=("offline", "remote"), default="offline")
    p.add_argument("--dim", type=int, default=None)
    _add_common(p)
    p.set_defaults(fn=cmd_identify)

    p = sub.add_parser("eval", help="evaluation harnesses")
    eval_sub = p.add_subparsers(dest="eval_kind", required=True)

    q = eval_sub.add_parser("metrics", help="text metrics over candidate/reference pairs")
    q.add_argument("--pairs", required=True)
    q.add_argument("--scheme", choices=[s.value for s in Scheme],
                   default=Scheme.WHITESPACE.value)
    _add_common(q)
    q.set_defaults(fn=cmd_eval_metrics)

    q = eval_sub.add_parser("retrieval", help="AUC-ROC over labeled triples")
    q.add_argument("--triples", required=True)
    q.add_argument("--provider", choices=("offline", "remote"), default="offline")
    q.add_argument("--dim", type=int, default=None)
    _add_common(q)
    q.set_defaults(fn=cmd_eval_retrieval)

    q = eval_sub.add_parser("intent", help="top-k accuracy over behavior records")
    q.add_argument("--records", required=True)
    q.add_argument("--catalog", default=None)
    q.add_argument("--k", type=int, default=3)
    q.add_argument("--rollup-subtechniques", action="store_true")
    q.add_argument("--provider", choices=("offline", "remote"), default="offline")
    q.add_argument("--dim", type=int, default=None)
    _add_common(q)
    q.set_defaults(fn=cmd_eval_intent)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=None)
    _add_common(p)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = load_config(args.config)
        return args.fn(args, cfg)
    except E.CmdlensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

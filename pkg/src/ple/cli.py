"""Command-line stages: features -> graph -> train -> infer/denoise -> evaluate.

Every stage reads and writes files, and ``pipeline`` simply runs the stage
functions back to back on those files, so its outputs match running the
stages one at a time. Set ``PLE_LOG_LEVEL`` (e.g. INFO, DEBUG) for logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig, load_config, write_config
from .corpus import KBFacts, LabeledCorpus, load_corpus, load_hierarchy, load_kb_facts, load_type_map, write_corpus
from .errors import ConfigError, InputFileError, PLEError, SchemaError
from .features import build_vocabulary, load_vocabulary, write_vocabulary
from .graph import build_graph, load_graph, normalize_variant, write_graph
from .inference import denoise_from_paths, infer_all, random_candidate_paths, retrain_loop
from .metrics import evaluate, format_table
from .pruning import PRUNERS, noise_stats
from .synthetic import SyntheticConfig, generate
from .trainer import load_model, save_model, train, write_log

logger = logging.getLogger("ple")

FEATURES_FILE = "features.tsv"
MODEL_FILE = "model.tsv"
LOG_FILE = "log.jsonl"
PATHS_FILE = "paths.jsonl"
DENOISED_FILE = "denoised.jsonl"
DROPPED_FILE = "dropped.json"


# ---------------------------------------------------------------- loading

def _require(value, flag):
    if value is None:
        raise ConfigError(f"{flag} is required for this command")
    return value


def _hierarchy(args):
    return load_hierarchy(_require(args.hierarchy, "--hierarchy"))


def _corpus(args, hierarchy) -> LabeledCorpus:
    return load_corpus(_require(args.corpus, "--corpus"), hierarchy)


def _kb(args, hierarchy) -> KBFacts | None:
    if args.kb_facts is None:
        return None
    type_map = load_type_map(args.type_map) if args.type_map else None
    return load_kb_facts(args.kb_facts, hierarchy, type_map)


def _effective_config(args, variant=None) -> PipelineConfig:
    cfg = load_config(args.config)
    cfg = cfg.override("training", variant=args.variant or variant, seed=args.seed,
                       deterministic=args.deterministic, threads=args.threads)
    return cfg.override("inference", eta=getattr(args, "eta", None))


def _out(args) -> Path:
    out = Path(_require(args.out_dir, "--out-dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_paths(path, corpus: LabeledCorpus, paths) -> None:
    h = corpus.hierarchy
    with open(path, "w", encoding="utf-8") as fh:
        for m, p in zip(corpus.mentions, paths):
            fh.write(json.dumps({"id": m.id, "path": [h.names[k] for k in p]}) + "\n")


def read_paths(path, hierarchy) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"no such file: {path}")
    out = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[rec["id"]] = frozenset(hierarchy.id_of(n) for n in rec["path"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise SchemaError(f"{path}:{lineno}: expected {{'id': ..., 'path': [...]}}") from exc
    return out


# ---------------------------------------------------------------- stages

def stage_extract(corpus_path, hierarchy_path, cfg: PipelineConfig, out_dir) -> Path:
    corpus = load_corpus(corpus_path, load_hierarchy(hierarchy_path))
    vocab = build_vocabulary(corpus, cfg.features)
    out_dir = Path(out_dir)
    write_vocabulary(vocab, out_dir / FEATURES_FILE)
    write_config(cfg, out_dir)
    return out_dir / FEATURES_FILE


def stage_graph(corpus_path, hierarchy_path, vocab_path, kb_path, type_map_path,
                cfg: PipelineConfig, out_dir) -> Path:
    hierarchy = load_hierarchy(hierarchy_path)
    corpus = load_corpus(corpus_path, hierarchy)
    kb = None
    if kb_path is not None:
        kb = load_kb_facts(kb_path, hierarchy, load_type_map(type_map_path) if type_map_path else None)
    graph = build_graph(corpus, load_vocabulary(vocab_path), cfg.training.variant, kb, cfg.features)
    write_graph(graph, out_dir)
    write_config(cfg, out_dir)
    return Path(out_dir)


def stage_train(graph_dir, cfg: PipelineConfig, out_dir) -> Path:
    result = train(load_graph(graph_dir), cfg.training)
    out_dir = Path(out_dir)
    save_model(result.embeddings, out_dir / MODEL_FILE)
    write_log(result.log, out_dir / LOG_FILE)
    write_config(cfg, out_dir)
    last = result.log[-1]
    logger.info("trained %d iterations (converged=%s), final O=%.4f", last.iter, result.converged, last.O)
    return out_dir / MODEL_FILE


def stage_infer(corpus_path, hierarchy_path, model_path, cfg: PipelineConfig, out_dir) -> Path:
    corpus = load_corpus(corpus_path, load_hierarchy(hierarchy_path))
    paths = infer_all(load_model(model_path), corpus, cfg.inference)
    out_dir = Path(out_dir)
    write_paths(out_dir / PATHS_FILE, corpus, paths)
    write_config(cfg, out_dir)
    return out_dir / PATHS_FILE


def _write_denoised(corpus, paths, out_dir):
    result = denoise_from_paths(corpus, paths)
    write_corpus(result.corpus, out_dir / DENOISED_FILE)
    report = {"mentions": corpus.N, "dropped": len(result.dropped), "drop_rate": result.drop_rate,
              "dropped_ids": [corpus.mentions[i].id for i in result.dropped]}
    (out_dir / DROPPED_FILE).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return result


def stage_denoise(corpus_path, hierarchy_path, model_path, cfg: PipelineConfig, out_dir) -> Path:
    corpus = load_corpus(corpus_path, load_hierarchy(hierarchy_path))
    paths = infer_all(load_model(model_path), corpus, cfg.inference)
    out_dir = Path(out_dir)
    _write_denoised(corpus, paths, out_dir)
    write_config(cfg, out_dir)
    return out_dir / DENOISED_FILE


def _gold_map(corpus: LabeledCorpus) -> dict:
    if not corpus.gold or all(g is None for g in corpus.gold):
        raise SchemaError("the corpus carries no gold labels to evaluate against")
    return {m.id: g for m, g in zip(corpus.mentions, corpus.gold) if g is not None}


def stage_evaluate(corpus_path, hierarchy_path, predictions_path, cfg: PipelineConfig, out_dir,
                   baselines: bool = True) -> Path:
    hierarchy = load_hierarchy(hierarchy_path)
    corpus = load_corpus(corpus_path, hierarchy)
    gold = _gold_map(corpus)
    preds = read_paths(predictions_path, hierarchy)
    unknown = set(preds) - {m.id for m in corpus.mentions}
    if unknown:
        raise SchemaError(f"predictions for {len(unknown)} ids not in the corpus, e.g. {sorted(unknown, key=str)[:3]}")
    preds = {k: v for k, v in preds.items() if k in gold}
    rows = [("model", evaluate(preds, gold, hierarchy))]
    if baselines:
        ids = [m.id for m in corpus.mentions]
        raw = {i: c for i, c in zip(ids, corpus.candidates) if i in gold}
        rng = np.random.default_rng(cfg.training.seed)
        rand = {i: frozenset(p) for i, p in zip(ids, random_candidate_paths(corpus, rng)) if i in gold}
        rows += [("assume-all", evaluate(raw, gold, hierarchy)),
                 ("random-path", evaluate(rand, gold, hierarchy))]
    out_dir = Path(out_dir)
    report = {name: r.as_dict() for name, r in rows}
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    table = format_table(rows)
    (out_dir / "report.txt").write_text(table + "\n", encoding="utf-8")
    write_config(cfg, out_dir)
    print(table)
    return out_dir / "report.json"


# ---------------------------------------------------------------- commands

def cmd_extract_features(args):
    stage_extract(_require(args.corpus, "--corpus"), _require(args.hierarchy, "--hierarchy"),
                  _effective_config(args), _out(args))


def cmd_build_graph(args):
    out = _out(args)
    features = args.features or out / FEATURES_FILE
    stage_graph(_require(args.corpus, "--corpus"), _require(args.hierarchy, "--hierarchy"), features,
                args.kb_facts, args.type_map, _effective_config(args), out)


def _graph_dir(args, cfg, out) -> Path:
    """An existing ``--graph`` directory, or one built into ``out`` from the raw inputs."""
    if args.graph:
        return Path(args.graph)
    corpus, hierarchy = _require(args.corpus, "--corpus"), _require(args.hierarchy, "--hierarchy")
    stage_extract(corpus, hierarchy, cfg, out)
    return stage_graph(corpus, hierarchy, out / FEATURES_FILE, args.kb_facts, args.type_map, cfg, out)


def _graph_variant(args):
    if args.graph and args.variant is None:
        meta = Path(args.graph) / "graph.json"
        if meta.is_file():
            return normalize_variant(json.loads(meta.read_text())["variant"])
    return None


def cmd_train(args):
    cfg = _effective_config(args, _graph_variant(args))
    out = _out(args)
    stage_train(_graph_dir(args, cfg, out), cfg, out)


def cmd_infer(args):
    stage_infer(_require(args.corpus, "--corpus"), _require(args.hierarchy, "--hierarchy"),
                _require(args.model, "--model"), _effective_config(args), _out(args))


def cmd_denoise(args):
    stage_denoise(_require(args.corpus, "--corpus"), _require(args.hierarchy, "--hierarchy"),
                  _require(args.model, "--model"), _effective_config(args), _out(args))


def cmd_evaluate(args):
    stage_evaluate(_require(args.corpus, "--corpus"), _require(args.hierarchy, "--hierarchy"),
                   _require(args.predictions, "--predictions"), _effective_config(args), _out(args),
                   baselines=not args.no_baselines)


def cmd_prune(args):
    corpus = _corpus(args, _hierarchy(args))
    if args.method == "sib":
        result = PRUNERS["sib"](corpus, keep_one=args.keep_one)
    else:
        result = PRUNERS[args.method](corpus)
    out = _out(args)
    write_corpus(result.corpus, out / f"pruned_{args.method}.jsonl")
    report = {"method": args.method, "mentions": corpus.N, "discarded": len(result.discarded),
              "deleted_fraction": result.deleted_fraction,
              "discarded_ids": [corpus.mentions[i].id for i in result.discarded]}
    (out / f"pruned_{args.method}.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


def cmd_stats(args):
    stats = noise_stats(_corpus(args, _hierarchy(args)))
    if args.out_dir:
        out = _out(args)
        (out / "stats.json").write_text(json.dumps(stats.as_dict(), indent=2) + "\n", encoding="utf-8")
    print(stats.table())


def cmd_pipeline(args):
    cfg = _effective_config(args)
    out = _out(args)
    corpus, hierarchy = _require(args.corpus, "--corpus"), _require(args.hierarchy, "--hierarchy")
    dirs = {name: out / name for name in ("features", "graph", "model", "infer", "denoise", "evaluate")}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    vocab = stage_extract(corpus, hierarchy, cfg, dirs["features"])
    stage_graph(corpus, hierarchy, vocab, args.kb_facts, args.type_map, cfg, dirs["graph"])
    model = stage_train(dirs["graph"], cfg, dirs["model"])
    paths = stage_infer(corpus, hierarchy, model, cfg, dirs["infer"])
    stage_denoise(corpus, hierarchy, model, cfg, dirs["denoise"])
    if load_corpus(corpus, load_hierarchy(hierarchy)).gold:
        stage_evaluate(corpus, hierarchy, paths, cfg, dirs["evaluate"])
    else:
        logger.info("no gold labels; skipping evaluation")


def cmd_retrain_loop(args):
    cfg = _effective_config(args, _graph_variant(args))
    out = _out(args)
    graph_dir = _graph_dir(args, cfg, out)
    corpus = _corpus(args, _hierarchy(args))

    def save_round(r, result, paths):
        d = out / f"round_{r + 1}"
        d.mkdir(exist_ok=True)
        save_model(result.embeddings, d / MODEL_FILE)
        write_log(result.log, d / LOG_FILE)
        write_paths(d / PATHS_FILE, corpus, paths)
        write_config(cfg, d)

    rounds = retrain_loop(load_graph(graph_dir), corpus, cfg.training, cfg.inference, args.iters, save_round)
    _write_denoised(corpus, rounds[-1][1], out)
    write_config(cfg, out)


def cmd_make_synthetic(args):
    out = _out(args)
    ds = generate(SyntheticConfig(seed=args.seed if args.seed is not None else 0,
                                  n_mentions=args.mentions))
    ds.write(out)
    cfg = PipelineConfig(features=ds.feature_config).override("training", d=20)
    write_config(cfg, out)
    print(f"wrote {ds.corpus.N} mentions to {out}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--corpus", help="mention corpus (jsonl)")
    common.add_argument("--hierarchy", help="type hierarchy (child<TAB>parent)")
    common.add_argument("--kb-facts", help="entity<TAB>type facts for KB type correlation")
    common.add_argument("--type-map", help="kb_type<TAB>target_type mapping")
    common.add_argument("--config", help="TOML or JSON config with [features]/[training]/[inference]")
    common.add_argument("--variant", choices=["ple", "ple-coh", "ple-noco"])
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir")
    common.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None,
                        help="sequential reproducible training (default on)")
    common.add_argument("--threads", type=int, help="worker threads when not deterministic")

    parser = argparse.ArgumentParser(prog="ple", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    add("extract-features", cmd_extract_features, "build the feature vocabulary")
    add("build-graph", cmd_build_graph, "build G_MY, G_MF and G_YY").add_argument(
        "--features", help=f"feature vocabulary (default: OUT_DIR/{FEATURES_FILE})")
    add("train", cmd_train, "train embeddings").add_argument("--graph", help="graph directory")
    for name, func, text in (("infer", cmd_infer, "infer a type-path per mention"),
                             ("denoise", cmd_denoise, "write the corpus relabelled by inferred paths")):
        p = add(name, func, text)
        p.add_argument("--model", help="trained model file")
        p.add_argument("--eta", type=float, help="score threshold")
    p = add("evaluate", cmd_evaluate, "score predicted paths against gold labels")
    p.add_argument("--predictions", help=f"predicted paths ({PATHS_FILE})")
    p.add_argument("--no-baselines", action="store_true", help="skip the assume-all and random-path rows")
    p = add("prune", cmd_prune, "heuristic pruning baselines")
    p.add_argument("--method", choices=sorted(PRUNERS), default="all")
    p.add_argument("--keep-one", action="store_true", help="sib: keep the first sibling of each group")
    add("stats", cmd_stats, "candidate-noise statistics")
    add("pipeline", cmd_pipeline, "all stages end to end").add_argument("--eta", type=float)
    p = add("retrain-loop", cmd_retrain_loop, "re-train on inferred labels repeatedly")
    p.add_argument("--graph", help="graph directory")
    p.add_argument("--iters", type=int, default=1, help="number of training rounds")
    p.add_argument("--eta", type=float)
    add("make-synthetic", cmd_make_synthetic, "write a planted synthetic dataset").add_argument(
        "--mentions", type=int, default=500)
    return parser


def _setup_logging():
    level = os.environ.get("PLE_LOG_LEVEL", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except PLEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``botscope <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from .classify import FileBotScores
from .coordination import ActionKind
from .events import Adapter, Platform, read_log, write_log
from .graph import GraphError
from .synthetic import generate_synthetic_log, load_spec, reference_spec, write_synthetic, write_x_export


def _out(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_events(path: str):
    with open(path, encoding="utf-8") as fh:
        return read_log(fh)


def _windows(text: str | None, platform: Platform) -> list[float]:
    if not text:
        return list(pl.X_WINDOWS if platform is Platform.X else pl.REDDIT_WINDOWS)
    return [float(w) if "." in w else int(w) for w in text.split(",") if w.strip()]


def _report(stage: str, counts: dict, paths) -> None:
    print(json.dumps({"stage": stage, "counts": counts, "outputs": [str(p) for p in paths]},
                     indent=2, sort_keys=True, default=str))


def cmd_ingest(args) -> None:
    inputs = [pl.InputSpec(p, args.adapter, args.community) for p in args.inputs]
    log, counts = pl.ingest(inputs, args.query or "")
    out = _out(args.out)
    with open(out / "events.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        write_log(log, fh)
    (out / "events.stats.json").write_text(json.dumps(counts, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    _report("ingest", counts, [out / "events.jsonl", out / "events.stats.json"])


def cmd_graph(args) -> None:
    log = _load_events(args.events)
    classes = pl.read_classes(args.classes)[0] if args.classes else None
    _, counts, paths = pl.graph_stage(log, Platform(args.platform), args.k_core, args.seed,
                                      _out(args.out), args.format, classes=classes)
    _report("graph", counts, paths)


def cmd_classify(args) -> None:
    log = _load_events(args.events)
    platform = Platform(args.platform)
    out = _out(args.out)
    if args.stance_labels:
        stance = {"source": "labels", "path": args.stance_labels}
        graphs = {}
    elif args.seeds:
        stance = {"source": "partition", "seeds": args.seeds}
        graphs, _, _ = pl.graph_stage(log, platform, args.k_core, args.seed, out)
    else:
        raise SystemExit("classify needs --stance-labels or --seeds")
    _, counts, paths = pl.classify_stage(log, graphs, FileBotScores(args.bot_scores), stance,
                                         args.threshold, out)
    _report("classify", counts, paths)


def cmd_cascade(args) -> None:
    log = _load_events(args.events)
    classes = pl.read_classes(args.classes)[0]
    counts, paths = pl.cascade_stage(log, Platform(args.platform), classes, _out(args.out))
    _report("cascades", counts, paths)


def cmd_coord(args) -> None:
    log = _load_events(args.events)
    platform = Platform(args.platform)
    classes = pl.read_classes(args.classes)[0] if args.classes else {}
    kinds = [ActionKind(args.kind)] if args.kind else None
    counts, paths = pl.coordination_stage(log, platform, _windows(args.windows, platform), classes,
                                          _out(args.out), args.min_weight, args.dedup, args.format,
                                          kinds=kinds)
    _report("coordination", counts, paths)


def cmd_engage(args) -> None:
    log = _load_events(args.events)
    classes = pl.read_classes(args.classes)[0]
    counts, paths = pl.engagement_stage(log, Platform(args.platform), classes, _out(args.out),
                                        per_faction=args.per_faction)
    _report("engagement", counts, paths)


def cmd_stats(args) -> None:
    log = _load_events(args.events)
    classes = pl.read_classes(args.classes)[0]
    counts, paths = pl.stats_stage(log, classes, _out(args.out), args.maxlag, args.alpha,
                                   args.difference)
    _report("stats", counts, paths)


def cmd_toxicity(args) -> None:
    log = _load_events(args.events)
    classes, communities = pl.read_classes(args.classes)
    scorer = pl.make_scorer({"scorer": args.scorer, "lexicon": args.lexicon,
                             "endpoint": args.endpoint, "qps": args.qps, "cache": args.cache})
    counts, paths = pl.toxicity_stage(log, scorer, classes, communities, _out(args.out), args.jobs)
    _report("toxicity", counts, paths)


def cmd_synth(args) -> None:
    spec = load_spec(args.spec) if args.spec else reference_spec()
    if args.seed is not None:
        spec.seed = args.seed
    data = generate_synthetic_log(spec)
    paths = write_synthetic(data, _out(args.out))
    if args.x_export:
        write_x_export(data.log, Path(args.out) / "x_export.jsonl")
    _report("synth", {"events": len(data.log), "actors": len(data.truth.classes)}, paths.values())


def cmd_run(args) -> None:
    config = pl.PipelineConfig.load(args.config)
    if args.jobs is not None:
        config.jobs = args.jobs
    result = pl.run_pipeline(config, out_dir=args.out)
    stages = ", ".join(f"{s['name']}={s['status']}" for s in result.manifest["stages"])
    print(f"report written to {result.out_dir} ({stages})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="botscope", description="Bot role analysis pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, events=True, classes=None, platform=False):
        p = sub.add_parser(name, help=help_text)
        if events:
            p.add_argument("--events", required=True, help="canonical event log (JSONL)")
        if classes is not None:
            p.add_argument("--classes", required=classes, help="classes.csv from the classify step")
        if platform:
            p.add_argument("--platform", choices=[x.value for x in Platform], default="X")
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(fn=fn)
        return p

    p = add("ingest", cmd_ingest, "parse exports into a canonical event log", events=False)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--adapter", choices=[a.value for a in Adapter] + [pl.CANONICAL], required=True)
    p.add_argument("--community", default="")
    p.add_argument("--query", default="")

    p = add("graph", cmd_graph, "interaction network, k-core and partition", classes=False,
            platform=True)
    p.add_argument("--k-core", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["GEXF", "EDGE_CSV"], default="GEXF")

    p = add("classify", cmd_classify, "agency x stance classes", platform=True)
    p.add_argument("--bot-scores", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--stance-labels")
    g.add_argument("--seeds")
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--k-core", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    add("cascade", cmd_cascade, "cascade size/depth, CCDFs and class tests", classes=True,
        platform=True)

    p = add("coord", cmd_coord, "co-action network window sweep", classes=False, platform=True)
    p.add_argument("--kind", choices=[k.value for k in ActionKind])
    p.add_argument("--windows", help="comma separated seconds")
    p.add_argument("--min-weight", type=int, default=1)
    p.add_argument("--dedup", action="store_true")
    p.add_argument("--format", choices=["GEXF", "EDGE_CSV"], default="GEXF")

    p = add("engage", cmd_engage, "human-to-bot engagement rates", classes=True, platform=True)
    p.add_argument("--per-faction", action=argparse.BooleanOptionalAction, default=True)

    p = add("stats", cmd_stats, "daily series, correlation and Granger tests", classes=True)
    p.add_argument("--maxlag", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--difference", action="store_true")

    p = add("toxicity", cmd_toxicity, "per-user toxicity and class comparisons", classes=True)
    p.add_argument("--scorer", choices=["stub", "http"], default="stub")
    p.add_argument("--lexicon")
    p.add_argument("--endpoint")
    p.add_argument("--qps", type=float, default=1.0)
    p.add_argument("--cache")
    p.add_argument("--jobs", type=int, default=1)

    p = add("synth", cmd_synth, "generate a planted synthetic dataset", events=False)
    p.add_argument("--spec", help="JSON spec file (default: reference spec)")
    p.add_argument("--seed", type=int)
    p.add_argument("--x-export", action="store_true", help="also write the log as X_EXPORT records")

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    p.set_defaults(fn=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except pl.PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (pl.ConfigError, GraphError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

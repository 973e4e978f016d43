"""End-to-end runner: config file in, report bundle out.

Stages run in a fixed order and each writes its tables under the output directory.
``manifest.json`` records the config hash, per-stage status and counts and the
sha256 of every output. Wall-clock timings go to ``timings.json``, which is kept
out of the manifest so the bundle stays byte-identical across reruns.
"""

from __future__ import annotations

import contextlib
import csv
import gc
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .cascades import ccdf, class_distribution_report, influencer_metrics
from .classify import (DEFAULT_THRESHOLD, KNOWN_CLASSES, BotScoreProvider, FileBotScores,
                       HttpBotScores, Stance, UserClass, build_profiles, load_seed_labels,
                       load_stance_labels, stance_from_partition, summarize_classes)
from .coordination import REDDIT_WINDOWS, X_WINDOWS, ActionKind, window_sweep
from .engagement import engagement_metrics
from .events import (Adapter, EventLog, Kind, Platform, filter_query, normalize_log,
                     parse_events, read_log, write_log)
from .graph import (InteractionGraph, Partition, build_interaction_network, export_graph,
                    k_core, louvain_partition, node_metrics, write_gexf)
from .stats import (GrangerResult, MetricKind, StatsError, build_daily_series, day_grid,
                    granger_test, pearson_test)
from .toxicity import (LexiconScorer, PerspectiveScorer, ScoreCache, Scorer,
                       toxicity_report, score_all_users)

logger = logging.getLogger(__name__)

STAGES = ("ingest", "graph", "classify", "cascades", "coordination", "engagement", "stats",
          "toxicity")
CANONICAL = "CANONICAL"  # input already in the canonical event-log format
BOT_SCORE_KEY_ENV = "BOTSCOPE_BOTSCORE_KEY"


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str, manifest: Optional[dict] = None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.manifest = manifest


# -- config ---------------------------------------------------------------------

@dataclass
class InputSpec:
    path: str
    adapter: str = CANONICAL
    community: str = ""


@dataclass
class PipelineConfig:
    inputs: list[InputSpec]
    out_dir: str = "report"
    platform: str = "X"
    query: str = ""
    bot_scores: dict = field(default_factory=dict)  # {"source": "file"|"http", ...}
    stance: dict = field(default_factory=dict)  # {"source": "partition"|"labels", ...}
    threshold: float = DEFAULT_THRESHOLD
    k_core: int = 3
    seed: int = 0
    x_windows: list[float] = field(default_factory=lambda: list(X_WINDOWS))
    reddit_windows: list[float] = field(default_factory=lambda: list(REDDIT_WINDOWS))
    min_weight: int = 1
    dedup: bool = False
    maxlag: int = 5
    alpha: float = 0.05
    difference: bool = False
    toxicity: dict = field(default_factory=lambda: {"scorer": "none"})
    graph_format: str = "GEXF"
    jobs: int = 1

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: str | Path = ".") -> "PipelineConfig":
        d = dict(d)
        base = Path(base_dir)

        def resolve(p: Optional[str]) -> Optional[str]:
            if p is None:
                return None
            return str(p) if Path(p).is_absolute() else str(base / p)

        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d["inputs"] = [InputSpec(resolve(i["path"]), i.get("adapter", CANONICAL), i.get("community", ""))
                       for i in d.get("inputs", [])]
        for key in ("bot_scores", "stance", "toxicity"):
            sub = dict(d.get(key) or {})
            for pk in ("path", "seeds", "lexicon", "cache"):
                if sub.get(pk):
                    sub[pk] = resolve(sub[pk])
            d[key] = sub
        if "out_dir" in d:
            d["out_dir"] = resolve(d["out_dir"])
        cfg = cls(**d)
        if not cfg.toxicity:
            cfg.toxicity = {"scorer": "none"}
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """Content hash of the analysis settings.

        Referenced files enter by content rather than location, so a relocated dataset
        hashes the same. Output location, job count and the score cache are excluded.
        """
        d = self.to_dict()
        d.pop("out_dir")
        d.pop("jobs")
        d["toxicity"].pop("cache", None)

        def digest(p: str) -> str:
            return _sha256(Path(p)) if Path(p).is_file() else f"missing:{Path(p).name}"

        for i in d["inputs"]:
            i["path"] = digest(i["path"])
        for key in ("bot_scores", "stance", "toxicity"):
            for pk in ("path", "seeds", "lexicon"):
                if d[key].get(pk):
                    d[key][pk] = digest(d[key][pk])
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def windows(self) -> list[float]:
        return self.x_windows if self.platform == "X" else self.reddit_windows

    def check(self) -> None:
        """Static checks that do not touch the file system."""
        if not self.inputs:
            raise ConfigError("no inputs configured")
        try:
            Platform(self.platform)
        except ValueError:
            raise ConfigError(f"unknown platform {self.platform!r}") from None
        for i in self.inputs:
            if i.adapter != CANONICAL and i.adapter not in Adapter.__members__:
                raise ConfigError(f"unknown adapter {i.adapter!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must lie in [0, 1]")
        if self.k_core < 1:
            raise ConfigError("k_core must be >= 1")
        for name in ("x_windows", "reddit_windows"):
            w = getattr(self, name)
            if not w or any(v <= 0 for v in w) or any(b <= a for a, b in zip(w, w[1:])):
                raise ConfigError(f"{name} must be positive and strictly increasing")
        if self.maxlag < 1 or not 0 < self.alpha < 1:
            raise ConfigError("maxlag must be >= 1 and alpha in (0, 1)")
        if self.bot_scores.get("source") not in ("file", "http"):
            raise ConfigError("bot_scores.source must be 'file' or 'http'")
        if self.stance.get("source") not in ("partition", "labels"):
            raise ConfigError("stance.source must be 'partition' or 'labels'")
        if self.toxicity.get("scorer", "none") not in ("none", "stub", "http"):
            raise ConfigError("toxicity.scorer must be 'none', 'stub' or 'http'")
        if self.graph_format.upper() not in ("GEXF", "EDGE_CSV"):
            raise ConfigError("graph_format must be GEXF or EDGE_CSV")

    def missing_files(self) -> list[tuple[str, str]]:
        """``(stage, path)`` for every referenced input file that does not exist."""
        out = [("ingest", i.path) for i in self.inputs if not Path(i.path).is_file()]
        if self.bot_scores.get("source") == "file":
            out.append(("classify", self.bot_scores.get("path") or ""))
        key = "seeds" if self.stance.get("source") == "partition" else "path"
        out.append(("classify", self.stance.get(key) or ""))
        if self.toxicity.get("lexicon"):
            out.append(("toxicity", self.toxicity["lexicon"]))
        return [(stage, p) for stage, p in out if not (p and Path(p).is_file())]


# -- table helpers ---------------------------------------------------------------

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Enum):
        return str(v.value)
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_classes(path: str | Path) -> tuple[dict[str, UserClass], dict[str, str]]:
    """Read a classes table (``actor_id,community,...,class``)."""
    classes: dict[str, UserClass] = {}
    communities: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            classes[row["actor_id"]] = UserClass(row["class"])
            communities[row["actor_id"]] = row.get("community", "")
    return classes, communities


def _communities(log: EventLog) -> list[str]:
    return sorted(log.community_counts)


# -- stage bodies (also used by the CLI subcommands) --------------------------------

@contextlib.contextmanager
def _bulk_load():
    """Pause cyclic GC while loading, then freeze the loaded objects.

    Events are acyclic, so refcounting still frees them; freezing only stops later
    collections from rescanning a million long-lived objects.
    """
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()
        gc.freeze()


def ingest(inputs: Sequence[InputSpec], query: str = "") -> tuple[EventLog, dict]:
    with _bulk_load():
        return _ingest(inputs, query)


def _ingest(inputs: Sequence[InputSpec], query: str) -> tuple[EventLog, dict]:
    events = []
    lines = errors = 0
    first_errors = []
    for spec in inputs:
        with open(spec.path, "rb") as fh:
            if spec.adapter == CANONICAL:
                log = read_log(line.decode("utf-8") for line in fh)
                events.extend(log.events)
                lines += len(log.events)
                continue
            result = parse_events(fh, spec.adapter, community=spec.community)
        events.extend(result.events)
        lines += result.lines
        errors += len(result.errors)
        first_errors.extend(f"{spec.path}:{e.line_no}: {e.message}" for e in result.errors[:5])
    log = normalize_log(events)
    parsed = len(log)
    if query:
        log = filter_query(log, query)
    stats = {"lines": lines, "parse_errors": errors, "events_parsed": parsed,
             "events": len(log), **log.stats()}
    if first_errors:
        stats["first_errors"] = first_errors[:5]
    return log, stats


def edge_kind(platform: Platform) -> Kind:
    return Kind.RETWEET if platform is Platform.X else Kind.REPLY


@dataclass
class CommunityGraph:
    community: str
    graph: InteractionGraph
    core: InteractionGraph
    partition: Optional[Partition]


def graph_stage(log: EventLog, platform: Platform, k: int, seed: int, out: Path,
                fmt_name: str = "GEXF", classes: Optional[Mapping[str, UserClass]] = None
                ) -> tuple[dict[str, CommunityGraph], dict, list[Path]]:
    kind = edge_kind(platform)
    result: dict[str, CommunityGraph] = {}
    counts: dict[str, dict] = {}
    paths: list[Path] = []
    for comm in _communities(log):
        g = build_interaction_network(log.for_community(comm), kind)
        core = k_core(g, k)
        part = louvain_partition(core, seed=seed) if core.nodes else None
        result[comm] = CommunityGraph(comm, g, core, part)
        counts[comm] = {"nodes": len(g.nodes), "edges": len(g.edges), "skipped": g.skipped,
                        "core_nodes": len(core.nodes), "core_edges": len(core.edges),
                        "communities": len(part.communities()) if part else 0,
                        "modularity": part.modularity if part else None}
        stem = f"graph_{comm or 'all'}_{kind.value.lower()}"
        ext = ".gexf" if fmt_name.upper() == "GEXF" else ".csv"
        paths.append(export_graph(core, out / f"{stem}_core{ext}", fmt_name, classes=classes))
        metrics = node_metrics(g)
        assign = part.assignment if part else {}
        paths.append(write_table(
            out / f"{stem}_nodes.csv",
            ["actor_id", "indegree", "outdegree", "degree_centrality", "clustering", "in_core",
             "partition"],
            [(n, m["indegree"], m["outdegree"], m["degree_centrality"],
              m["clustering_coefficient"], n in core.nodes, assign.get(n))
             for n, m in metrics.items()]))
    return result, counts, paths


def make_bot_provider(cfg: Mapping) -> BotScoreProvider:
    if cfg.get("source") == "http":
        return HttpBotScores(cfg["endpoint"], api_key=os.environ.get(cfg.get("key_env", BOT_SCORE_KEY_ENV)),
                             batch_size=int(cfg.get("batch_size", 100)))
    return FileBotScores(cfg["path"])


@dataclass
class Classification:
    classes: dict[str, UserClass]
    communities: dict[str, str]
    scores: dict[str, Optional[float]]
    stances: dict[str, Stance]


def classify_stage(log: EventLog, graphs: Mapping[str, CommunityGraph], provider: BotScoreProvider,
                   stance_cfg: Mapping, threshold: float, out: Path) -> tuple[Classification, dict, list[Path]]:
    """Bot score agency x stance per community; an actor is classified in the first
    community (sorted) in which it appears."""
    if stance_cfg.get("source") == "labels":
        labels = load_stance_labels(stance_cfg["path"])
        seeds = None
    else:
        labels = None
        seeds = load_seed_labels(stance_cfg["seeds"])
    classes: dict[str, UserClass] = {}
    communities: dict[str, str] = {}
    scores: dict[str, Optional[float]] = {}
    stances: dict[str, Stance] = {}
    rows = []
    counts: dict[str, dict] = {}
    for comm in _communities(log):
        sub = log.for_community(comm)
        actors = sorted({e.actor_id for e in sub.events} - set(classes))
        if labels is not None:
            comm_stance = {a: labels.get(a, Stance.UNKNOWN) for a in actors}
        else:
            part = graphs[comm].partition if comm in graphs else None
            comm_stance = stance_from_partition(part, seeds) if part else {}
        profiles = build_profiles(actors, provider, comm_stance, threshold)
        for p in profiles:
            classes[p.actor_id] = p.user_class
            communities[p.actor_id] = comm
            scores[p.actor_id] = p.bot_score
            stances[p.actor_id] = p.stance
            rows.append((p.actor_id, comm, p.bot_score, p.score_kind, p.agency, p.stance,
                         p.user_class))
        summary = summarize_classes({p.actor_id: p.user_class for p in profiles})
        counts[comm] = {"actors": len(profiles), "scored": sum(p.bot_score is not None for p in profiles),
                        **{c.value: summary.counts.get(c, 0) for c in UserClass}}
    paths = [write_table(out / "classes.csv",
                         ["actor_id", "community", "bot_score", "score_kind", "agency", "stance", "class"],
                         rows)]
    share_rows = []
    for comm in _communities(log) + ["ALL"]:
        sel = {a: c for a, c in classes.items() if comm == "ALL" or communities[a] == comm}
        summary = summarize_classes(sel)
        for c in UserClass:
            share_rows.append((comm, c, summary.counts.get(c, 0), summary.shares.get(c, 0.0)))
    paths.append(write_table(out / "class_summary.csv", ["community", "class", "count", "share"],
                             share_rows))
    counts["classified"] = sum(c is not UserClass.UNKNOWN for c in classes.values())
    kinds = sorted({fmt(r[3]) for r in rows if r[3] is not None})
    if len(kinds) > 1:
        counts["caveat"] = (f"threshold {threshold} applied across score kinds {kinds}; "
                            "their comparability is not established")
    return Classification(classes, communities, scores, stances), counts, paths


def cascade_stage(log: EventLog, platform: Platform, classes: Mapping[str, UserClass],
                  out: Path) -> tuple[dict, list[Path]]:
    summary_rows, ccdf_rows, test_rows = [], [], []
    counts = {}
    for comm in _communities(log):
        influence = influencer_metrics(log.for_community(comm), platform)
        report = class_distribution_report(influence, classes)
        counts[comm] = {"influencers": len(influence)}
        for (metric, cls), dist in report.distributions.items():
            s = dist.summary
            summary_rows.append((comm, cls, metric, s["n"], s["mean"], s["median"], s["max"],
                                 s["mean_log10"]))
            if dist.values:
                ccdf_rows.extend((comm, cls, metric, x, p) for x, p in ccdf(dist.values))
        for t in report.tests:
            test_rows.append((f"{comm}:{t.metric}:{t.class_a.value}~{t.class_b.value}", t.method,
                              t.statistic, t.p_value, t.df, f"{t.n[0]};{t.n[1]}", t.note))
    paths = [
        write_table(out / "cascade_summary.csv",
                    ["community", "class", "metric", "n", "mean", "median", "max", "mean_log10"],
                    summary_rows),
        write_table(out / "cascade_ccdf.csv", ["community", "class", "metric", "x", "survival"],
                    ccdf_rows),
        write_table(out / "cascade_tests.csv", ["pair", "method", "statistic", "p", "df", "n", "note"],
                    test_rows),
    ]
    return counts, paths


def action_kinds(platform: Platform) -> tuple[ActionKind, ...]:
    if platform is Platform.X:
        return (ActionKind.CO_RETWEET, ActionKind.CO_REPLY)
    return (ActionKind.CO_REPLY,)


def coordination_stage(log: EventLog, platform: Platform, windows: Sequence[float],
                       classes: Mapping[str, UserClass], out: Path, min_weight: int = 1,
                       dedup: bool = False, fmt_name: str = "GEXF",
                       kinds: Optional[Sequence[ActionKind]] = None) -> tuple[dict, list[Path]]:
    sweep_rows, profile_rows = [], []
    paths: list[Path] = []
    counts: dict[str, dict] = {}
    for comm in _communities(log):
        sub = log.for_community(comm)
        for kind in kinds or action_kinds(platform):
            sweep = window_sweep(sub, kind, windows, min_weight=min_weight, dedup=dedup,
                                 classes=classes)
            for ws in sweep.windows:
                net = ws.network
                sweep_rows.append((comm, kind, ws.window_seconds, ws.n_nodes, ws.n_edges,
                                   *(net.composition.get(c, 0) for c in UserClass)))
                for actor in sorted(ws.profile):
                    cent, clus = ws.profile[actor]
                    profile_rows.append((comm, kind, ws.window_seconds, actor,
                                         classes.get(actor, UserClass.UNKNOWN), cent, clus))
                stem = f"coord_{comm or 'all'}_{kind.value.lower()}_{fmt(ws.window_seconds)}"
                if fmt_name.upper() == "GEXF":
                    path = out / f"{stem}.gexf"
                    write_gexf(net.nodes, net.edges, path, classes=classes, directed=False)
                else:
                    path = out / f"{stem}.csv"
                    write_table(path, ["src", "dst", "weight"],
                                [(s, d, w) for (s, d), w in sorted(net.edges.items())])
                paths.append(path)
                counts[f"{comm}:{kind.value}:{fmt(ws.window_seconds)}"] = {
                    "nodes": ws.n_nodes, "edges": ws.n_edges}
    paths.insert(0, write_table(
        out / "coord_sweep.csv",
        ["community", "action", "window", "nodes", "edges", *(c.value for c in UserClass)], sweep_rows))
    paths.insert(1, write_table(
        out / "coord_profile.csv",
        ["community", "action", "window", "actor_id", "class", "degree_centrality", "clustering"],
        profile_rows))
    return counts, paths


def engagement_stage(log: EventLog, platform: Platform, classes: Mapping[str, UserClass],
                     out: Path, per_faction: bool = True) -> tuple[dict, list[Path]]:
    report = engagement_metrics(log, classes, platform, per_faction=per_faction)
    path = write_table(out / "engagement.csv",
                       ["community", "faction", "metric", "numerator", "denominator", "value"],
                       [(r.community, r.faction, r.metric, r.numerator, r.denominator, r.value)
                        for r in report.rates])
    return {"rates": len(report.rates)}, [path]


STATS_METRICS = (MetricKind.UNIQUE_USERS, MetricKind.CASCADE_SIZE, MetricKind.CASCADE_DEPTH)


def stats_stage(log: EventLog, classes: Mapping[str, UserClass], out: Path, maxlag: int = 5,
                alpha: float = 0.05, difference: bool = False) -> tuple[dict, list[Path]]:
    """Daily series per community, class and metric; Pearson and both Granger
    directions for every pair of communities."""
    grid = day_grid(log)
    comms = _communities(log)
    series = {}
    for comm in comms:
        for metric in STATS_METRICS:
            for cls in (None, *KNOWN_CLASSES):
                s = build_daily_series(log, classes, metric, community=comm, user_class=cls, dates=grid)
                series[s.label] = s
    series_rows = [(label, d.isoformat(), int(v)) for label, s in series.items()
                   for d, v in zip(s.dates, s.counts)]
    corr_rows, granger_rows, skipped = [], [], []
    for metric in STATS_METRICS:
        for cls in (None, *KNOWN_CLASSES):
            for i, a in enumerate(comms):
                for b in comms[i + 1:]:
                    sa = series[_label(a, cls, metric)]
                    sb = series[_label(b, cls, metric)]
                    try:
                        r = pearson_test(sa.counts, sb.counts)
                        corr_rows.append((f"{sa.label}~{sb.label}", r.method, r.statistic, r.p_value,
                                          r.df, r.n[0]))
                    except StatsError as exc:
                        skipped.append(f"pearson {sa.label}~{sb.label}: {exc}")
                    for cause, effect in ((sa, sb), (sb, sa)):
                        try:
                            g: GrangerResult = granger_test(cause.counts, effect.counts, maxlag, alpha,
                                                            difference=difference, cause=cause.label,
                                                            effect=effect.label)
                        except StatsError as exc:
                            skipped.append(f"granger {cause.label}->{effect.label}: {exc}")
                            continue
                        for lag in g.lags:
                            granger_rows.append((f"{g.cause}->{g.effect}", lag.lag, lag.f, lag.p_value,
                                                 lag.df_num, lag.df_den, lag.significant))
    paths = [
        write_table(out / "daily_series.csv", ["series", "date", "count"], series_rows),
        write_table(out / "correlations.csv", ["pair", "method", "statistic", "p", "df", "n"], corr_rows),
        write_table(out / "granger.csv", ["direction", "lag", "F", "p", "df_num", "df_den", "verdict"],
                    granger_rows),
    ]
    counts = {"days": len(grid), "series": len(series), "granger_rows": len(granger_rows),
              "skipped_tests": len(skipped), "differenced": difference}
    if skipped:
        counts["skipped_detail"] = skipped
    if not difference:
        counts["caveat"] = "raw daily counts, no stationarity adjustment"
    return counts, paths


def _label(comm: str, cls: Optional[UserClass], metric: MetricKind) -> str:
    return f"{comm or 'ALL'}:{cls.value if cls else 'ALL'}:{metric.value}"


def make_scorer(cfg: Mapping) -> Optional[Scorer]:
    kind = cfg.get("scorer", "none")
    if kind == "stub":
        if cfg.get("lexicon"):
            return LexiconScorer.from_file(cfg["lexicon"])
        return LexiconScorer()
    if kind == "http":
        cache = ScoreCache(cfg["cache"]) if cfg.get("cache") else None
        return PerspectiveScorer(cfg["endpoint"], qps=float(cfg.get("qps", 1.0)), cache=cache)
    return None


def toxicity_stage(log: EventLog, scorer: Scorer, classes: Mapping[str, UserClass],
                   communities: Mapping[str, str], out: Path, jobs: int = 1
                   ) -> tuple[dict, list[Path]]:
    known = [a for a, c in classes.items() if c is not UserClass.UNKNOWN]
    scores = score_all_users(log, scorer, actors=known, jobs=jobs)
    report = toxicity_report(scores, classes, communities)
    paths = [
        write_table(out / "toxicity_scores.csv",
                    ["actor_id", "community", "class", "score", "scorer_id", "text_chars"],
                    [(a, communities.get(a, ""), classes.get(a, UserClass.UNKNOWN), s.score,
                      s.scorer_id, s.text_chars) for a, s in scores.items()]),
        write_table(out / "toxicity_tests.csv",
                    ["group_a", "group_b", "scope", "t", "p", "df", "note"],
                    [(f"{c.group_a[0]}:{c.group_a[1].value}", f"{c.group_b[0]}:{c.group_b[1].value}",
                      c.scope, c.t, c.p_value, c.df, c.note) for c in report.comparisons]),
    ]
    counts = {"scored": len(scores), "groups": len(report.groups),
              "excluded": [f"{g[0]}:{g[1].value}" for g in report.excluded]}
    return counts, paths


# -- runner ------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunResult:
    out_dir: Path
    manifest: dict
    log: EventLog
    classification: Optional[Classification]


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_pipeline(config: PipelineConfig, out_dir: Optional[str | Path] = None,
                 scorer: Optional[Scorer] = None,
                 bot_provider: Optional[BotScoreProvider] = None) -> RunResult:
    """Run every stage and write the report bundle.

    ``scorer`` and ``bot_provider`` override the ones built from the config. A fatal
    error raises :class:`PipelineError` after writing a manifest that marks the
    failing stage.
    """
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    platform = Platform(config.platform)
    manifest = {"config_hash": config.hash(), "platform": platform.value, "stages": [],
                "counts": {}, "outputs": []}
    timings: dict[str, float] = {}
    outputs: list[Path] = []
    state: dict = {}

    def finish(status: str) -> None:
        manifest["status"] = status
        manifest["outputs"] = [{"file": p.name, "sha256": _sha256(p)} for p in outputs]
        _write_json(out / "manifest.json", manifest)
        _write_json(out / "timings.json", {k: round(v, 6) for k, v in timings.items()})

    def fail(stage: str, exc: BaseException) -> PipelineError:
        manifest["stages"].append({"name": stage, "status": "failed", "error": str(exc)})
        manifest["error"] = {"stage": stage, "message": str(exc)}
        finish("failed")
        return PipelineError(stage, str(exc), manifest)

    # referenced files are checked up front; the error is tagged with the stage that reads them
    for stage, path in config.missing_files():
        overridden = (stage == "toxicity" and scorer is not None) or (
            stage == "classify" and bot_provider is not None and path == config.bot_scores.get("path"))
        if not overridden:
            raise fail(stage, FileNotFoundError(f"referenced file does not exist: {path or '(unset)'}"))

    def run(stage: str, fn) -> None:
        t0 = time.perf_counter()
        try:
            result = fn()
        except (PipelineError, KeyboardInterrupt):
            raise
        except Exception as exc:
            raise fail(stage, exc) from exc
        timings[stage] = time.perf_counter() - t0
        if result is None:
            return
        counts, paths = result
        manifest["counts"][stage] = counts
        outputs.extend(paths)
        manifest["stages"].append({"name": stage, "status": "completed"})

    def skip(stage: str, reason: str) -> None:
        manifest["stages"].append({"name": stage, "status": "skipped", "reason": reason})

    def do_ingest():
        log, counts = ingest(config.inputs, config.query)
        state["log"] = log
        events_path = out / "events.jsonl"
        with open(events_path, "w", encoding="utf-8", newline="\n") as fh:
            write_log(log, fh)
        return counts, [events_path]

    def do_graph():
        graphs, counts, paths = graph_stage(state["log"], platform, config.k_core, config.seed, out,
                                            config.graph_format)
        state["graphs"] = graphs
        return counts, paths

    def do_classify():
        provider = bot_provider or make_bot_provider(config.bot_scores)
        cls, counts, paths = classify_stage(state["log"], state["graphs"], provider, config.stance,
                                            config.threshold, out)
        state["classification"] = cls
        return counts, paths

    run("ingest", do_ingest)
    log: EventLog = state["log"]
    run("graph", do_graph)
    run("classify", do_classify)
    cls: Classification = state["classification"]
    run("cascades", lambda: cascade_stage(log, platform, cls.classes, out))
    run("coordination", lambda: coordination_stage(log, platform, config.windows, cls.classes, out,
                                                   config.min_weight, config.dedup,
                                                   config.graph_format))
    run("engagement", lambda: engagement_stage(log, platform, cls.classes, out))
    if not log.events:
        skip("stats", "empty log")
    else:
        run("stats", lambda: stats_stage(log, cls.classes, out, config.maxlag, config.alpha,
                                         config.difference))
    active_scorer = scorer or make_scorer(config.toxicity)
    if active_scorer is None:
        skip("toxicity", "no scorer configured")
    else:
        run("toxicity", lambda: toxicity_stage(log, active_scorer, cls.classes, cls.communities, out,
                                               config.jobs))
    n_actors = len({e.actor_id for e in log.events} | {e.target_actor_id for e in log.events
                                                       if e.target_actor_id})
    manifest["counts"]["totals"] = {
        "events": len(log), "actors": n_actors, "classified_actors": len(cls.classes),
        "known_class_actors": sum(c is not UserClass.UNKNOWN for c in cls.classes.values())}
    finish("completed")
    return RunResult(out, manifest, log, cls)

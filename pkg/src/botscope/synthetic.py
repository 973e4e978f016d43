"""Planted-structure event logs with exact ground truth.

Each community holds four actor classes. Retweets stay on the retweeter's side
except for a small bridging share, so the retweet network splits into the two
factions. Daily retweet volume in the effect community is a lagged, scaled copy of
the cause community's volume plus noise. A cluster of bots re-shares leader
retweets within a few seconds every day, and texts mix toxic lexicon tokens at a
per-class rate.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .classify import KNOWN_CLASSES, Stance, UserClass
from .events import Event, EventLog, Kind, Platform, normalize_log, write_log
from .toxicity import DEFAULT_LEXICON

DAY = 86_400
START_TS = 1_648_425_600  # 2022-03-28T00:00:00Z

NEUTRAL_WORDS = ("news", "report", "today", "city", "people", "video", "update", "photo",
                 "statement", "official", "source", "read", "thread", "world", "see", "more")


class SyntheticError(ValueError):
    pass


@dataclass
class CoordinationSpec:
    community: str = "en"
    user_class: UserClass = UserClass.A_BOT
    n_members: int = 6
    jitter_seconds: float = 5.0
    actions_per_day: int = 4


@dataclass
class LeadLagSpec:
    cause: str = "en"
    effect: str = "ja"
    lag_days: int = 1
    coefficient: float = 0.8
    noise_sd: float = 8.0


@dataclass
class SyntheticSpec:
    seed: int = 7
    n_actors: dict[UserClass, int] = field(default_factory=lambda: {
        UserClass.A_BOT: 40, UserClass.A_HUMAN: 30, UserClass.B_BOT: 20, UserClass.B_HUMAN: 10})
    communities: tuple[str, ...] = ("en", "ja")
    n_days: int = 40
    posts_per_actor_per_day: float = 0.5
    replies_per_actor_per_day: float = 0.3
    retweets_per_day: float = 300.0  # mean daily volume of a non-effect community
    volume_sigma: float = 0.5  # lognormal day-to-day spread of that volume
    bridge_share: float = 0.02
    bot_retweet_weight: float = 3.0
    coordination: Optional[CoordinationSpec] = field(default_factory=CoordinationSpec)
    lead_lag: Optional[LeadLagSpec] = field(default_factory=LeadLagSpec)
    toxicity_means: dict[UserClass, float] = field(default_factory=lambda: {
        UserClass.A_BOT: 0.30, UserClass.A_HUMAN: 0.12, UserClass.B_BOT: 0.22, UserClass.B_HUMAN: 0.05})
    tokens_per_text: int = 12
    seeds_per_side: int = 3
    start_ts: int = START_TS

    def validate(self) -> None:
        if sum(self.n_actors.get(c, 0) for c in KNOWN_CLASSES) <= 0:
            raise SyntheticError("spec has zero actors")
        if any(v < 0 for v in self.n_actors.values()):
            raise SyntheticError("negative actor count")
        rates = (self.posts_per_actor_per_day, self.replies_per_actor_per_day, self.retweets_per_day)
        if any(r < 0 for r in rates):
            raise SyntheticError("rates must be non-negative")
        if self.n_days < 1:
            raise SyntheticError("n_days must be >= 1")
        if self.coordination and self.coordination.jitter_seconds < 0:
            raise SyntheticError("jitter must be non-negative")
        if self.lead_lag and self.lead_lag.lag_days < 1:
            raise SyntheticError("lag_days must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_actors"] = {k.value: v for k, v in self.n_actors.items()}
        d["toxicity_means"] = {k.value: v for k, v in self.toxicity_means.items()}
        if self.coordination:
            d["coordination"]["user_class"] = self.coordination.user_class.value
        d["communities"] = list(self.communities)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        if "n_actors" in d:
            d["n_actors"] = {UserClass(k): int(v) for k, v in d["n_actors"].items()}
        if "toxicity_means" in d:
            d["toxicity_means"] = {UserClass(k): float(v) for k, v in d["toxicity_means"].items()}
        if d.get("coordination") is not None:
            c = dict(d["coordination"])
            if "user_class" in c:
                c["user_class"] = UserClass(c["user_class"])
            d["coordination"] = CoordinationSpec(**c)
        if d.get("lead_lag") is not None:
            d["lead_lag"] = LeadLagSpec(**d["lead_lag"])
        if "communities" in d:
            d["communities"] = tuple(d["communities"])
        return cls(**d)


def reference_spec(seed: int = 7) -> SyntheticSpec:
    return SyntheticSpec(seed=seed)


def performance_spec(seed: int = 11) -> SyntheticSpec:
    """Roughly one million events."""
    return SyntheticSpec(
        seed=seed,
        n_actors={UserClass.A_BOT: 1500, UserClass.A_HUMAN: 1500,
                  UserClass.B_BOT: 1000, UserClass.B_HUMAN: 1000},
        n_days=30,
        posts_per_actor_per_day=0.8,
        replies_per_actor_per_day=0.5,
        retweets_per_day=12_500.0,
        coordination=CoordinationSpec(n_members=20, actions_per_day=50),
        lead_lag=LeadLagSpec(noise_sd=300.0),
    )


@dataclass
class GroundTruth:
    classes: dict[str, UserClass]
    communities: dict[str, str]
    bot_scores: dict[str, float]
    seeds: dict[str, Stance]
    planted_pairs: set[tuple[str, str]]
    planted_series: dict[str, np.ndarray]
    toxicity_rates: dict[str, float]


@dataclass
class SyntheticData:
    log: EventLog
    truth: GroundTruth


def _volumes(spec: SyntheticSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    ll = spec.lead_lag
    lag = ll.lag_days if ll else 0
    vols = {}
    for comm in spec.communities:
        if ll and comm == ll.effect:
            continue
        raw = spec.retweets_per_day * rng.lognormal(-spec.volume_sigma ** 2 / 2, spec.volume_sigma,
                                                   size=spec.n_days + lag)
        vols[comm] = raw
    if ll and ll.effect in spec.communities:
        if ll.cause not in vols:
            raise SyntheticError("lead-lag cause community missing")
        cause = vols[ll.cause]
        noise = rng.normal(0.0, ll.noise_sd, size=spec.n_days)
        vols[ll.effect] = np.concatenate([np.zeros(lag), ll.coefficient * cause[:spec.n_days] + noise])
    return {c: np.maximum(0, np.rint(v[lag:])).astype(np.int64) for c, v in vols.items()}


class _Builder:
    def __init__(self, spec: SyntheticSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        # scalar draws go through the stdlib generator; numpy's per-call overhead dominates here
        self.py = random.Random(int(rng.integers(0, 2 ** 63)))
        self.events: list[Event] = []
        self.counter = 0
        self.toxic = sorted(DEFAULT_LEXICON)
        self.neutral = list(NEUTRAL_WORDS)

    def next_id(self, comm: str) -> str:
        self.counter += 1
        return f"{comm}{self.counter:09d}"

    def text(self, rate: float) -> str:
        r, choice = self.py.random, self.py.choice
        return " ".join(choice(self.toxic) if r() < rate else choice(self.neutral)
                        for _ in range(self.spec.tokens_per_text))


def generate_synthetic_log(spec: SyntheticSpec) -> SyntheticData:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    b = _Builder(spec, rng)
    classes: dict[str, UserClass] = {}
    comm_of: dict[str, str] = {}
    bot_scores: dict[str, float] = {}
    seeds: dict[str, Stance] = {}
    tox: dict[str, float] = {}
    planted_pairs: set[tuple[str, str]] = set()
    volumes = _volumes(spec, rng)
    day0 = spec.start_ts

    for comm in spec.communities:
        actors: list[str] = []
        for cls in KNOWN_CLASSES:
            for i in range(spec.n_actors.get(cls, 0)):
                a = f"{comm}_{cls.value.lower()}_{i:05d}"
                actors.append(a)
                classes[a] = cls
                comm_of[a] = comm
                tox[a] = spec.toxicity_means.get(cls, 0.0)
                lo, hi = (0.75, 1.0) if cls.is_bot else (0.0, 0.65)
                bot_scores[a] = round(float(rng.uniform(lo, hi)), 6)
        n_act = len(actors)
        if n_act == 0:
            continue
        side = np.array([classes[a].stance is Stance.SIDE_A for a in actors])
        is_bot = np.array([classes[a].is_bot for a in actors])
        for s, flag in ((Stance.SIDE_A, True), (Stance.SIDE_B, False)):
            members = [a for a, f in zip(actors, side) if f == flag]
            for a in members[:spec.seeds_per_side]:
                seeds[a] = s

        # original posts: Poisson per actor per day, uniform within the day
        urls: list[list[str]] = [[] for _ in actors]
        counts = rng.poisson(spec.posts_per_actor_per_day, size=(n_act, spec.n_days))
        if spec.posts_per_actor_per_day > 0:
            counts[:, 0] += 1  # everyone has something to be retweeted
        post_actor = np.repeat(np.arange(n_act), counts.sum(axis=1))
        post_day = np.concatenate([np.repeat(np.arange(spec.n_days), row) for row in counts])
        post_ts = day0 + post_day * DAY + rng.integers(0, DAY, post_day.size)
        for ai, ts in zip(post_actor.tolist(), post_ts.tolist()):
            a = actors[ai]
            eid = b.next_id(comm)
            url = f"https://example.org/{comm}/{eid}"
            urls[ai].append(url)
            b.events.append(Event(eid, Platform.X, Kind.POST, a, float(ts), comm, None, url,
                                  b.text(tox[a])))

        side_idx = {True: np.flatnonzero(side), False: np.flatnonzero(~side)}
        weights = np.where(is_bot, spec.bot_retweet_weight, 1.0)
        p_spreader = weights / weights.sum()

        def pick_targets(spreaders: np.ndarray) -> np.ndarray:
            own = side[spreaders]
            cross = rng.random(spreaders.size) < spec.bridge_share
            want_a = np.where(cross, ~own, own)
            out = np.empty(spreaders.size, dtype=np.int64)
            for flag in (True, False):
                mask = want_a == flag
                pool = side_idx[flag]
                if pool.size == 0:
                    pool = side_idx[not flag]
                out[mask] = pool[rng.integers(0, pool.size, mask.sum())]
            # no self-targets: move to the next actor on the same side
            clash = out == spreaders
            if clash.any():
                for k in np.flatnonzero(clash):
                    pool = side_idx[bool(side[out[k]])]
                    if pool.size > 1:
                        pos = int(np.searchsorted(pool, out[k]))
                        out[k] = pool[(pos + 1) % pool.size]
            return out

        def url_of(target: int) -> Optional[str]:
            if not urls[target]:
                return None
            return b.py.choice(urls[target])

        # background retweets with planted daily volume
        vol = volumes.get(comm, np.zeros(spec.n_days, dtype=np.int64))
        for day in range(spec.n_days):
            n = int(vol[day])
            if n == 0 or n_act < 2:
                continue
            spreaders = rng.choice(n_act, size=n, p=p_spreader)
            targets = pick_targets(spreaders)
            times = np.sort(rng.uniform(0, DAY, n).astype(np.int64))
            for s_i, t_i, ts in zip(spreaders.tolist(), targets.tolist(), times.tolist()):
                if s_i == t_i:
                    continue
                url = url_of(t_i)
                if url is None:
                    continue
                b.events.append(Event(b.next_id(comm), Platform.X, Kind.RETWEET, actors[s_i],
                                      float(day0 + day * DAY + ts), comm, actors[t_i], url))

        # replies
        n_rep = rng.poisson(spec.replies_per_actor_per_day, size=(n_act, spec.n_days))
        if n_act >= 2 and n_rep.any():
            rep_actor = np.repeat(np.arange(n_act), n_rep.sum(axis=1))
            rep_day = np.concatenate([np.repeat(np.arange(spec.n_days), row) for row in n_rep])
            rep_ts = day0 + rep_day * DAY + rng.integers(0, DAY, rep_day.size)
            rep_target = pick_targets(rep_actor)
            for ai, t_i, ts in zip(rep_actor.tolist(), rep_target.tolist(), rep_ts.tolist()):
                url = url_of(t_i) if t_i != ai else None
                if url is None:
                    continue
                b.events.append(Event(b.next_id(comm), Platform.X, Kind.REPLY, actors[ai],
                                      float(ts), comm, actors[t_i], url, b.text(tox[actors[ai]])))

        # coordinated re-sharing: a fixed number of leader actions per day
        co = spec.coordination
        if co and co.community == comm:
            members = [a for a in actors if classes[a] is co.user_class][:co.n_members]
            if len(members) >= 2:
                midx = [actors.index(m) for m in members]
                for i, u in enumerate(members):
                    for v in members[i + 1:]:
                        planted_pairs.add((u, v) if u < v else (v, u))
                margin = int(np.ceil(co.jitter_seconds)) + 1
                for day in range(spec.n_days):
                    for _ in range(co.actions_per_day):
                        t0 = int(rng.integers(0, DAY - margin))
                        pool = side_idx[bool(side[midx[0]])]
                        pool = np.array([p for p in pool.tolist() if p not in midx]) if pool.size > len(midx) else pool
                        target = int(pool[rng.integers(0, pool.size)])
                        url = url_of(target)
                        if url is None:
                            continue
                        for m in midx:
                            if m == target:
                                continue
                            # whole-second jitter keeps every pair within jitter_seconds
                            ts = t0 + int(rng.integers(0, int(co.jitter_seconds) + 1)) if co.jitter_seconds else t0
                            b.events.append(Event(b.next_id(comm), Platform.X, Kind.RETWEET, actors[m],
                                                  float(day0 + day * DAY + ts), comm, actors[target], url))

    if not b.events and not classes:
        raise SyntheticError("spec produced no actors")
    truth = GroundTruth(classes, comm_of, bot_scores, seeds, planted_pairs,
                        {c: v.astype(float) for c, v in volumes.items()}, tox)
    return SyntheticData(normalize_log(b.events), truth)


def write_synthetic(data: SyntheticData, out_dir: str | Path) -> dict[str, Path]:
    """Write the canonical log and ground-truth CSVs; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out / "events.jsonl",
        "bot_scores": out / "bot_scores.csv",
        "seeds": out / "seeds.csv",
        "classes": out / "truth_classes.csv",
        "pairs": out / "truth_pairs.csv",
        "series": out / "truth_series.csv",
    }
    with open(paths["events"], "w", encoding="utf-8") as fh:
        write_log(data.log, fh)
    t = data.truth

    def table(path, header, rows):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    # English accounts carry CAP scores, other languages the universal score
    table(paths["bot_scores"], ["actor_id", "score", "score_kind"],
          [(a, repr(s), "CAP" if t.communities[a] == "en" else "UNIVERSAL")
           for a, s in sorted(t.bot_scores.items())])
    table(paths["seeds"], ["actor_id", "stance"], [(a, s.value) for a, s in sorted(t.seeds.items())])
    table(paths["classes"], ["actor_id", "community", "class"],
          [(a, t.communities[a], c.value) for a, c in sorted(t.classes.items())])
    table(paths["pairs"], ["actor_a", "actor_b"], sorted(t.planted_pairs))
    comms = sorted(t.planted_series)
    n = len(next(iter(t.planted_series.values()))) if comms else 0
    table(paths["series"], ["day"] + comms,
          [[d] + [int(t.planted_series[c][d]) for c in comms] for d in range(n)])
    return paths


def x_export_record(e: Event) -> dict:
    """The event as an X_EXPORT adapter record."""
    rec = {"id": e.event_id, "author": e.actor_id, "ts": e.timestamp, "lang": e.community}
    if e.text is not None:
        rec["text"] = e.text
    if e.kind is Kind.RETWEET:
        rec["retweeted_author"] = e.target_actor_id
        rec["url"] = e.object_id
    elif e.kind is Kind.REPLY:
        rec["in_reply_to_author"] = e.target_actor_id
        rec["in_reply_to_id"] = e.object_id
    else:
        rec["url"] = e.object_id
    return rec


def write_x_export(log: EventLog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in log.events:
            fh.write(json.dumps(x_export_record(e), ensure_ascii=False))
            fh.write("\n")


def load_spec(path: str | Path) -> SyntheticSpec:
    return SyntheticSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

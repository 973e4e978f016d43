"""Per-user toxicity of aggregated text, behind a pluggable scorer.

A scorer maps one document to a score in [0, 1]. :class:`LexiconScorer` is the
offline stand-in used by tests; :class:`PerspectiveScorer` talks to a
Perspective-style HTTP endpoint and caches answers on disk by content hash.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import logging
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol

from .classify import UserClass
from .events import EventLog, tokenize
from .stats import StatsError, welch_t

logger = logging.getLogger(__name__)

API_KEY_ENV = "BOTSCOPE_TOXICITY_KEY"
DEFAULT_LEXICON = ("idiot", "stupid", "moron", "liar", "scum", "traitor", "hate", "kill",
                   "trash", "pathetic", "disgusting", "fool")


class ToxicityError(RuntimeError):
    pass


class ScorerTransportError(ToxicityError):
    """Raised by a scorer when a request could not be completed; retried by callers."""


class Scorer(Protocol):
    scorer_id: str
    max_length: int

    def score(self, document: str) -> float: ...


class LexiconScorer:
    """Share of tokens that appear in the lexicon."""

    def __init__(self, lexicon: Iterable[str] = DEFAULT_LEXICON, max_length: int = 20_000):
        self.lexicon = frozenset(w.casefold() for w in lexicon)
        self.max_length = max_length
        digest = hashlib.sha1("\n".join(sorted(self.lexicon)).encode()).hexdigest()[:8]
        self.scorer_id = f"lexicon-{digest}"

    @classmethod
    def from_file(cls, path: str | Path, **kw) -> "LexiconScorer":
        words = [w.strip() for w in Path(path).read_text(encoding="utf-8").splitlines()]
        return cls([w for w in words if w and not w.startswith("#")], **kw)

    def score(self, document: str) -> float:
        tokens = tokenize(document)
        if not tokens:
            return 0.0
        hits = sum(t in self.lexicon for t in tokens)
        return min(1.0, max(0.0, hits / len(tokens)))


class ScoreCache:
    """Append-only CSV of ``content_hash,scorer_id,score``."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._table: dict[tuple[str, str], float] = {}
        if self.path.exists():
            with open(self.path, newline="", encoding="utf-8") as fh:
                for row in csv.reader(fh):
                    if len(row) == 3:
                        try:
                            self._table[(row[0], row[1])] = float(row[2])
                        except ValueError:
                            continue

    @staticmethod
    def key(document: str) -> str:
        return hashlib.sha256(document.encode("utf-8")).hexdigest()

    def get(self, document: str, scorer_id: str) -> Optional[float]:
        return self._table.get((self.key(document), scorer_id))

    def put(self, document: str, scorer_id: str, score: float) -> None:
        k = (self.key(document), scorer_id)
        with self._lock:
            if k in self._table:
                return
            self._table[k] = score
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", newline="", encoding="utf-8") as fh:
                csv.writer(fh, lineterminator="\n").writerow([k[0], k[1], repr(score)])


class _RateLimiter:
    def __init__(self, qps: float):
        self.interval = 1.0 / qps if qps > 0 else 0.0
        self._next = 0.0
        self._lock = threading.Lock()

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next - now
            self._next = max(now, self._next) + self.interval
        if delay > 0:
            time.sleep(delay)


class PerspectiveScorer:
    """Client for a Perspective-style ``comments:analyze`` endpoint.

    The key is read from ``$BOTSCOPE_TOXICITY_KEY`` unless given explicitly.
    Responses for 429 and 5xx are treated as transport failures.
    """

    scorer_id = "perspective-toxicity"

    def __init__(self, endpoint: str, api_key: Optional[str] = None, qps: float = 1.0,
                 max_length: int = 20_000, cache: Optional[ScoreCache] = None, client=None):
        import httpx

        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.max_length = max_length
        self.cache = cache
        self.limiter = _RateLimiter(qps)
        self.client = client or httpx.Client(timeout=30.0)

    def _request(self, document: str) -> float:
        import httpx

        body = {"comment": {"text": document}, "languages": ["en"],
                "requestedAttributes": {"TOXICITY": {}}}
        params = {"key": self.api_key} if self.api_key else None
        self.limiter.wait()
        try:
            resp = self.client.post(self.endpoint, json=body, params=params)
        except httpx.HTTPError as exc:
            raise ScorerTransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise ScorerTransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ToxicityError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            value = resp.json()["attributeScores"]["TOXICITY"]["summaryScore"]["value"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ToxicityError(f"unexpected response: {exc}") from exc
        return min(1.0, max(0.0, float(value)))

    def score(self, document: str) -> float:
        if self.cache is not None:
            hit = self.cache.get(document, self.scorer_id)
            if hit is not None:
                return hit
        value = self._request(document)
        if self.cache is not None:
            self.cache.put(document, self.scorer_id, value)
        return value


def chunk_document(document: str, max_length: int) -> list[str]:
    """Split at the last whitespace before each ``max_length`` boundary (hard cut if none)."""
    if max_length <= 0:
        raise ValueError("max_length must be positive")
    chunks = []
    rest = document
    while len(rest) > max_length:
        cut = max(rest.rfind(" ", 0, max_length + 1), rest.rfind("\n", 0, max_length + 1))
        if cut <= 0:
            cut = max_length
        head, rest = rest[:cut], rest[cut:].lstrip()
        if head.strip():
            chunks.append(head)
    if rest.strip():
        chunks.append(rest)
    return chunks


def score_document(document: str, scorer: Scorer, retries: int = 3, backoff: float = 0.5) -> float:
    """Length-weighted mean of chunk scores; transport failures retried ``retries`` times."""
    chunks = chunk_document(document, scorer.max_length)
    if not chunks:
        raise ToxicityError("no scorable text")
    total, weight = 0.0, 0
    for chunk in chunks:
        for attempt in itertools.count():
            try:
                s = scorer.score(chunk)
                break
            except ScorerTransportError as exc:
                if attempt >= retries:
                    raise ToxicityError(f"scorer failed after {retries} retries: {exc}") from exc
                time.sleep(backoff * 2 ** attempt)
        total += s * len(chunk)
        weight += len(chunk)
    return total / weight


@dataclass(frozen=True)
class ToxicityScore:
    actor_id: str
    score: float
    scorer_id: str
    text_chars: int


def user_document(log: EventLog, actor_id: str) -> str:
    # log.events is already in timestamp order
    return "\n".join(e.text for e in log.events if e.actor_id == actor_id and e.text and e.text.strip())


def score_user_toxicity(log: EventLog, actor_id: str, scorer: Scorer, retries: int = 3,
                        backoff: float = 0.5, document: Optional[str] = None) -> ToxicityScore:
    doc = document if document is not None else user_document(log, actor_id)
    if not doc.strip():
        raise ToxicityError(f"no scorable text for {actor_id}")
    value = score_document(doc, scorer, retries=retries, backoff=backoff)
    return ToxicityScore(actor_id, value, scorer.scorer_id, len(doc))


def score_all_users(log: EventLog, scorer: Scorer, actors: Optional[Iterable[str]] = None,
                    jobs: int = 1, retries: int = 3, backoff: float = 0.5) -> dict[str, ToxicityScore]:
    """Score every actor that has text, with at most ``jobs`` requests in flight."""
    docs: dict[str, list[str]] = {}
    wanted = set(actors) if actors is not None else None
    for e in log.events:
        if e.text and e.text.strip() and (wanted is None or e.actor_id in wanted):
            docs.setdefault(e.actor_id, []).append(e.text)
    order = sorted(docs)

    def one(actor: str) -> ToxicityScore:
        return score_user_toxicity(log, actor, scorer, retries, backoff, "\n".join(docs[actor]))

    if jobs <= 1:
        return {a: one(a) for a in order}
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return dict(zip(order, pool.map(one, order)))


# -- report ----------------------------------------------------------------------

@dataclass(frozen=True)
class ToxicityComparison:
    group_a: tuple[str, UserClass]
    group_b: tuple[str, UserClass]
    scope: str  # "intra" (same community) or "inter"
    t: float
    p_value: float
    df: float
    note: str = ""


@dataclass
class ToxicityReport:
    groups: dict[tuple[str, UserClass], list[float]]
    comparisons: list[ToxicityComparison]
    excluded: list[tuple[str, UserClass]]


def toxicity_report(scores: Mapping[str, ToxicityScore | float], classes: Mapping[str, UserClass],
                    communities: Mapping[str, str]) -> ToxicityReport:
    """Welch t for every ordered pair of (community, class) groups with >= 2 users."""
    groups: dict[tuple[str, UserClass], list[float]] = {}
    for actor in sorted(scores):
        cls = classes.get(actor, UserClass.UNKNOWN)
        if cls is UserClass.UNKNOWN:
            continue
        s = scores[actor]
        value = s.score if isinstance(s, ToxicityScore) else float(s)
        groups.setdefault((communities.get(actor, ""), cls), []).append(value)
    groups = dict(sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value)))
    excluded = [g for g, v in groups.items() if len(v) < 2]
    usable = [g for g in groups if g not in excluded]
    comps = []
    for ga, gb in itertools.permutations(usable, 2):
        scope = "intra" if ga[0] == gb[0] else "inter"
        try:
            r = welch_t(groups[ga], groups[gb])
            comps.append(ToxicityComparison(ga, gb, scope, r.statistic, r.p_value, r.df))
        except StatsError as exc:
            comps.append(ToxicityComparison(ga, gb, scope, math.nan, math.nan, math.nan, str(exc)))
    return ToxicityReport(groups, comps, excluded)

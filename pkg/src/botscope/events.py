"""Event records, platform adapters and the normalized event log.

Two archived export formats are understood:

X_EXPORT
    one JSON object per line with ``id``, ``author``, ``ts`` (epoch seconds)
    or ``created_at`` (ISO 8601), optional ``text``, ``url``, ``lang``.
    A retweet carries ``retweeted_author`` (and optionally ``retweeted_id``);
    a reply carries ``in_reply_to_author`` (and optionally ``in_reply_to_id``).
    Quote tweets are treated as plain posts.

REDDIT_DUMP
    Pushshift-style objects with ``id``, ``author``, ``created_utc`` or ``ts``,
    and either ``parent_id`` + ``body`` (a comment) or ``title`` (a submission).
    ``parent_author`` is used when present; otherwise the replied-to author is
    resolved from the log during :func:`normalize_log`.

Unrecognized fields are ignored.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import IO, Iterable, Iterator, Optional, Sequence


class Platform(str, Enum):
    X = "X"
    REDDIT = "REDDIT"


class Kind(str, Enum):
    POST = "POST"
    RETWEET = "RETWEET"
    REPLY = "REPLY"


_PLATFORMS = {p.value: p for p in Platform}
_KINDS = {k.value: k for k in Kind}


class Adapter(str, Enum):
    X_EXPORT = "X_EXPORT"
    REDDIT_DUMP = "REDDIT_DUMP"


class EventError(ValueError):
    """Raised when an event violates its invariants."""


@dataclass(frozen=True, slots=True)
class Event:
    event_id: str
    platform: Platform
    kind: Kind
    actor_id: str
    timestamp: float
    community: str = ""
    target_actor_id: Optional[str] = None
    object_id: Optional[str] = None
    text: Optional[str] = None

    def __post_init__(self):
        if self.timestamp < 0:
            raise EventError(f"negative timestamp on event {self.event_id}")
        if self.kind is Kind.RETWEET:
            if self.target_actor_id is None or self.object_id is None:
                raise EventError(f"retweet {self.event_id} lacks target or object")
        # Reddit replies may arrive without the parent author; normalize_log resolves it.
        if self.kind is Kind.REPLY and self.target_actor_id is None and self.platform is Platform.X:
            raise EventError(f"reply {self.event_id} lacks target")

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "platform": self.platform.value,
            "kind": self.kind.value,
            "actor_id": self.actor_id,
            "timestamp": self.timestamp,
            "community": self.community,
            "target_actor_id": self.target_actor_id,
            "object_id": self.object_id,
            "text": self.text,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        return cls(
            event_id=str(d["event_id"]),
            platform=_PLATFORMS[d["platform"]],
            kind=_KINDS[d["kind"]],
            actor_id=str(d["actor_id"]),
            timestamp=float(d["timestamp"]),
            community=d.get("community") or "",
            target_actor_id=d.get("target_actor_id"),
            object_id=d.get("object_id"),
            text=d.get("text"),
        )


@dataclass(frozen=True)
class ParseError:
    line_no: int
    message: str


@dataclass
class ParseResult:
    events: list[Event] = field(default_factory=list)
    errors: list[ParseError] = field(default_factory=list)
    lines: int = 0


def _timestamp(rec: dict) -> float:
    for key in ("ts", "created_utc", "timestamp"):
        if rec.get(key) is not None:
            return float(rec[key])
    if rec.get("created_at"):
        dt = datetime.fromisoformat(str(rec["created_at"]).replace("Z", "+00:00"))
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.timestamp()
    raise KeyError("timestamp")


def _opt_str(v) -> Optional[str]:
    if v is None or v == "":
        return None
    return str(v)


def _from_x(rec: dict, community: str) -> Event:
    eid = str(rec["id"])
    comm = rec.get("lang") or rec.get("community") or community
    common = dict(
        event_id=eid,
        platform=Platform.X,
        actor_id=str(rec["author"]),
        timestamp=_timestamp(rec),
        community=comm,
        text=_opt_str(rec.get("text")),
    )
    url = _opt_str(rec.get("url"))
    if rec.get("retweeted_author"):
        obj = url or _opt_str(rec.get("retweeted_id")) or eid
        return Event(kind=Kind.RETWEET, target_actor_id=str(rec["retweeted_author"]),
                     object_id=obj, **common)
    if rec.get("in_reply_to_author"):
        obj = _opt_str(rec.get("in_reply_to_id")) or url or eid
        return Event(kind=Kind.REPLY, target_actor_id=str(rec["in_reply_to_author"]),
                     object_id=obj, **common)
    return Event(kind=Kind.POST, object_id=url or eid, **common)


def _from_reddit(rec: dict, community: str) -> Event:
    eid = str(rec["id"])
    comm = rec.get("lang") or rec.get("community") or community
    common = dict(
        event_id=eid,
        platform=Platform.REDDIT,
        actor_id=str(rec["author"]),
        timestamp=_timestamp(rec),
        community=comm,
    )
    if rec.get("parent_id"):
        return Event(kind=Kind.REPLY, object_id=str(rec["parent_id"]),
                     target_actor_id=_opt_str(rec.get("parent_author")),
                     text=_opt_str(rec.get("body")), **common)
    text = " ".join(t for t in (rec.get("title"), rec.get("selftext"), rec.get("body")) if t)
    return Event(kind=Kind.POST, object_id="t3_" + eid, text=text or None, **common)


_ADAPTERS = {Adapter.X_EXPORT: _from_x, Adapter.REDDIT_DUMP: _from_reddit}


def parse_events(lines: Iterable[bytes | str], adapter: Adapter | str,
                 community: str = "") -> ParseResult:
    """Parse one export, collecting a per-line error record for every bad line."""
    try:
        convert = _ADAPTERS[Adapter(adapter)]
    except ValueError:
        raise ValueError(f"unknown adapter {adapter!r}") from None
    result = ParseResult()
    for no, line in enumerate(lines, start=1):
        result.lines += 1
        if isinstance(line, bytes):
            line = line.decode("utf-8", errors="replace")
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ValueError("record is not a JSON object")
            result.events.append(convert(rec, community))
        except (ValueError, KeyError, TypeError) as exc:
            msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            result.errors.append(ParseError(no, msg))
    return result


@dataclass(frozen=True)
class EventLog:
    """Deduplicated, time-sorted events. Build it with :func:`normalize_log`."""

    events: tuple[Event, ...]
    kind_counts: dict[str, int]
    community_counts: dict[str, int]

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def stats(self) -> dict:
        return {
            "events": len(self.events),
            "actors": len({e.actor_id for e in self.events}),
            "kinds": dict(self.kind_counts),
            "communities": dict(self.community_counts),
        }

    def for_community(self, community: str) -> "EventLog":
        return _build_log([e for e in self.events if e.community == community])


def _build_log(events: list[Event]) -> EventLog:
    kinds = Counter(e.kind.value for e in events)
    comms = Counter(e.community for e in events)
    return EventLog(
        events=tuple(events),
        kind_counts={k: kinds[k] for k in sorted(kinds)},
        community_counts={c: comms[c] for c in sorted(comms)},
    )


def _resolve_reddit_targets(events: list[Event]) -> list[Event]:
    authors = {e.event_id: e.actor_id for e in events if e.platform is Platform.REDDIT}
    out = []
    for e in events:
        if (e.kind is Kind.REPLY and e.target_actor_id is None and e.object_id
                and e.object_id[:3] in ("t1_", "t3_")):
            author = authors.get(e.object_id[3:])
            if author is not None:
                e = Event(e.event_id, e.platform, e.kind, e.actor_id, e.timestamp,
                          e.community, author, e.object_id, e.text)
        out.append(e)
    return out


def normalize_log(events: Iterable[Event]) -> EventLog:
    seen: set[str] = set()
    unique = []
    for e in events:
        if e.event_id not in seen:
            seen.add(e.event_id)
            unique.append(e)
    unique.sort(key=lambda e: (e.timestamp, e.event_id))
    if any(e.platform is Platform.REDDIT for e in unique):
        unique = _resolve_reddit_targets(unique)
    return _build_log(unique)


def write_log(log: EventLog, fh: IO[str]) -> None:
    for e in log.events:
        fh.write(json.dumps(e.to_dict(), ensure_ascii=False, sort_keys=True))
        fh.write("\n")


def read_log(fh: Iterable[str]) -> EventLog:
    """Load a canonical event log written by :func:`write_log`."""
    return normalize_log(Event.from_dict(json.loads(line)) for line in fh if line.strip())


# -- keyword queries ---------------------------------------------------------

class QueryError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


_TOKEN_RE = re.compile(r"\w+")
_QUOTES = {'"': '"', "“": "”", "'": "'"}


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.casefold())


def _lex(query: str) -> list[tuple[str, object, int]]:
    toks = []
    i, n = 0, len(query)
    while i < n:
        ch = query[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            toks.append((ch, ch, i))
            i += 1
        elif ch in _QUOTES:
            close = query.find(_QUOTES[ch], i + 1)
            if close < 0:
                raise QueryError("unterminated quote", i)
            words = tokenize(query[i + 1:close])
            if not words:
                raise QueryError("empty term", i)
            toks.append(("TERM", tuple(words), i))
            i = close + 1
        else:
            m = re.compile(r"[^\s()\"'“]+").match(query, i)
            word = m.group(0)
            if word.upper() in ("AND", "OR"):
                toks.append((word.upper(), word, i))
            else:
                words = tokenize(word)
                if not words:
                    raise QueryError(f"unexpected {word!r}", i)
                toks.append(("TERM", tuple(words), i))
            i = m.end()
    return toks


class _Parser:
    # expr := and_expr (OR and_expr)* ; and_expr := atom (AND atom)* ; atom := TERM | ( expr )
    def __init__(self, toks, length):
        self.toks, self.i, self.length = toks, 0, length

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def expect_end(self):
        tok = self.peek()
        if tok is not None:
            raise QueryError(f"unexpected {tok[1]!r}", tok[2])

    def expr(self):
        node = self.and_expr()
        while (tok := self.peek()) and tok[0] == "OR":
            self.i += 1
            node = ("OR", node, self.and_expr())
        return node

    def and_expr(self):
        node = self.atom()
        while (tok := self.peek()) and tok[0] == "AND":
            self.i += 1
            node = ("AND", node, self.atom())
        return node

    def atom(self):
        tok = self.peek()
        if tok is None:
            raise QueryError("unexpected end of query", self.length)
        if tok[0] == "TERM":
            self.i += 1
            return ("TERM", tok[1])
        if tok[0] == "(":
            self.i += 1
            node = self.expr()
            close = self.peek()
            if close is None or close[0] != ")":
                raise QueryError("missing ')'", close[2] if close else self.length)
            self.i += 1
            return node
        raise QueryError(f"unexpected {tok[1]!r}", tok[2])


def compile_query(query: str):
    """Parse a boolean keyword query into a predicate over text (None for empty)."""
    if query is None or not query.strip():
        return None
    parser = _Parser(_lex(query), len(query))
    tree = parser.expr()
    parser.expect_end()

    def has_phrase(tokens: list[str], tokset: set[str], phrase: tuple[str, ...]) -> bool:
        if len(phrase) == 1:
            return phrase[0] in tokset
        k = len(phrase)
        return any(tuple(tokens[i:i + k]) == phrase for i in range(len(tokens) - k + 1))

    def ev(node, tokens, tokset):
        op = node[0]
        if op == "TERM":
            return has_phrase(tokens, tokset, node[1])
        if op == "AND":
            return ev(node[1], tokens, tokset) and ev(node[2], tokens, tokset)
        return ev(node[1], tokens, tokset) or ev(node[2], tokens, tokset)

    def predicate(text: Optional[str]) -> bool:
        if not text:
            return False
        tokens = tokenize(text)
        return ev(tree, tokens, set(tokens))

    return predicate


def filter_query(log: EventLog, query: str) -> EventLog:
    pred = compile_query(query)
    if pred is None:
        return log
    return _build_log([e for e in log.events if pred(e.text)])


def filter_community(log: EventLog, communities: Sequence[str]) -> EventLog:
    wanted = set(communities)
    return _build_log([e for e in log.events if e.community in wanted])

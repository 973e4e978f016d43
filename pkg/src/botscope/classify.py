"""Agency (bot/human) and stance (faction) assignment, the four user classes, and kappa."""

from __future__ import annotations

import csv
import logging
import time
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .graph import Partition

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.7


class ScoreKind(str, Enum):
    CAP = "CAP"
    UNIVERSAL = "UNIVERSAL"
    HEURISTIC = "HEURISTIC"
    IMPORTED = "IMPORTED"


class Agency(str, Enum):
    BOT = "BOT"
    HUMAN = "HUMAN"
    UNKNOWN = "UNKNOWN"


class Stance(str, Enum):
    SIDE_A = "SIDE_A"
    SIDE_B = "SIDE_B"
    UNKNOWN = "UNKNOWN"


class UserClass(str, Enum):
    A_BOT = "A_BOT"
    A_HUMAN = "A_HUMAN"
    B_BOT = "B_BOT"
    B_HUMAN = "B_HUMAN"
    UNKNOWN = "UNKNOWN"

    @property
    def is_bot(self) -> bool:
        return self in (UserClass.A_BOT, UserClass.B_BOT)

    @property
    def is_human(self) -> bool:
        return self in (UserClass.A_HUMAN, UserClass.B_HUMAN)

    @property
    def stance(self) -> Stance:
        if self in (UserClass.A_BOT, UserClass.A_HUMAN):
            return Stance.SIDE_A
        if self in (UserClass.B_BOT, UserClass.B_HUMAN):
            return Stance.SIDE_B
        return Stance.UNKNOWN


KNOWN_CLASSES = (UserClass.A_BOT, UserClass.A_HUMAN, UserClass.B_BOT, UserClass.B_HUMAN)


def user_class(agency: Agency, stance: Stance) -> UserClass:
    if agency is Agency.UNKNOWN or stance is Stance.UNKNOWN:
        return UserClass.UNKNOWN
    side = "A" if stance is Stance.SIDE_A else "B"
    return UserClass(f"{side}_{agency.value}")


class ClassificationError(ValueError):
    pass


@dataclass(frozen=True)
class ActorProfile:
    actor_id: str
    bot_score: Optional[float] = None
    score_kind: ScoreKind = ScoreKind.IMPORTED
    agency: Agency = Agency.UNKNOWN
    stance: Stance = Stance.UNKNOWN

    def __post_init__(self):
        if self.bot_score is not None and not 0.0 <= self.bot_score <= 1.0:
            raise ClassificationError(f"bot score {self.bot_score} for {self.actor_id} outside [0, 1]")

    @property
    def user_class(self) -> UserClass:
        return user_class(self.agency, self.stance)


def assign_agency(profiles: Iterable[ActorProfile],
                  threshold: float = DEFAULT_THRESHOLD) -> list[ActorProfile]:
    """BOT iff score is strictly larger than ``threshold``; unscored actors stay UNKNOWN."""
    if not 0.0 <= threshold <= 1.0:
        raise ClassificationError("threshold must lie in [0, 1]")
    out = []
    for p in profiles:
        if p.bot_score is None:
            agency = Agency.UNKNOWN
        else:
            agency = Agency.BOT if p.bot_score > threshold else Agency.HUMAN
        out.append(replace(p, agency=agency))
    return out


@dataclass
class SeedLabels:
    stances: dict[str, Stance]
    provenance: dict[str, str]

    def __post_init__(self):
        for actor, s in self.stances.items():
            if s not in (Stance.SIDE_A, Stance.SIDE_B):
                raise ClassificationError(f"seed {actor} must be SIDE_A or SIDE_B")

    @classmethod
    def from_mapping(cls, stances: Mapping[str, Stance | str], note: str = "") -> "SeedLabels":
        return cls({a: Stance(s) for a, s in stances.items()}, {a: note for a in stances})


def stance_from_partition(partition: Partition, seeds: SeedLabels) -> dict[str, Stance]:
    """Map the two largest communities to the faction holding most of their seeds.

    Ties between community sizes are broken by the sorted member list so the result
    does not depend on community numbering.
    """
    if not partition.assignment:
        raise ClassificationError("empty partition")
    if not seeds.stances:
        raise ClassificationError("no seed labels")
    comms = partition.communities()
    ranked = sorted(comms.values(), key=lambda members: (-len(members), sorted(members)))
    result = {a: Stance.UNKNOWN for a in partition.assignment}
    for members in ranked[:2]:
        votes = Counter(seeds.stances[a] for a in members if a in seeds.stances)
        a_votes, b_votes = votes[Stance.SIDE_A], votes[Stance.SIDE_B]
        if a_votes == b_votes:
            reason = "no seeds" if a_votes == 0 else "seed tie"
            logger.warning("community of %d members left UNKNOWN (%s)", len(members), reason)
            continue
        side = Stance.SIDE_A if a_votes > b_votes else Stance.SIDE_B
        for a in members:
            result[a] = side
    return result


def load_stance_labels(path: str | Path) -> dict[str, Stance]:
    """Read ``actor_id,stance`` rows; a later duplicate overrides an earlier one."""
    out: dict[str, Stance] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if line_no == 1 and row[0].strip().lower() == "actor_id":
                continue
            if len(row) < 2:
                raise ClassificationError(f"line {line_no}: expected actor_id,stance")
            actor, token = row[0].strip(), row[1].strip()
            try:
                stance = Stance(token)
            except ValueError:
                raise ClassificationError(f"line {line_no}: unknown stance {token!r}") from None
            if actor in out:
                logger.warning("line %d: duplicate stance for %s, keeping the later one", line_no, actor)
            out[actor] = stance
    return out


def load_seed_labels(path: str | Path) -> SeedLabels:
    stances = load_stance_labels(path)
    seeds = {a: s for a, s in stances.items() if s is not Stance.UNKNOWN}
    return SeedLabels(seeds, {a: str(path) for a in seeds})


# -- Reddit heuristic ---------------------------------------------------------

@dataclass(frozen=True)
class RedditBotFeatures:
    account_age_days: float
    karma: int
    verified: bool
    employee: bool
    post_interval_variance: float
    content_variance: float


@dataclass(frozen=True)
class HeuristicConfig:
    max_age_days: float = 180.0
    max_karma: int = 100
    max_interval_variance: float = 60.0
    max_content_variance: float = 0.1
    weights: tuple[float, ...] = (1 / 6,) * 6  # age, karma, unverified, employee, interval, content

    def __post_init__(self):
        if len(self.weights) != 6 or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ClassificationError("heuristic needs six weights summing to 1")


def reddit_flags(f: RedditBotFeatures, cfg: HeuristicConfig) -> tuple[int, ...]:
    """Six bot-like flags. Employment is never bot-like, so its flag is always 0."""
    return (
        int(f.account_age_days < cfg.max_age_days),
        int(f.karma < cfg.max_karma),
        int(not f.verified),
        0,
        int(f.post_interval_variance < cfg.max_interval_variance),
        int(f.content_variance < cfg.max_content_variance),
    )


def reddit_bot_heuristic(features: RedditBotFeatures,
                         config: HeuristicConfig = HeuristicConfig()) -> float:
    if features.employee:
        return 0.0
    score = sum(w * x for w, x in zip(config.weights, reddit_flags(features, config)))
    return min(1.0, max(0.0, score))


# -- classes -----------------------------------------------------------------

@dataclass
class ClassSummary:
    counts: dict[UserClass, int]
    total: int

    @property
    def shares(self) -> dict[UserClass, float]:
        if self.total == 0:
            return {c: 0.0 for c in self.counts}
        return {c: n / self.total for c, n in self.counts.items()}


def classify_actors(profiles: Iterable[ActorProfile]) -> dict[str, UserClass]:
    return {p.actor_id: p.user_class for p in profiles}


def summarize_classes(classes: Mapping[str, UserClass]) -> ClassSummary:
    c = Counter(classes.values())
    return ClassSummary({k: c[k] for k in UserClass}, len(classes))


# -- agreement ----------------------------------------------------------------

# Landis-Koch ranges; upper bounds are inclusive.
_BANDS = (
    (0.2, "slight agreement"),
    (0.4, "fair agreement"),
    (0.6, "moderate agreement"),
    (0.8, "substantial agreement"),
    (1.0, "near perfect agreement"),
)


def kappa_band(kappa: float) -> str:
    if kappa < 0:
        return "poor agreement"
    for upper, label in _BANDS:
        if kappa <= upper:
            return label
    return _BANDS[-1][1]


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    band: str
    observed: float
    expected: float
    note: str = ""


def cohen_kappa(labels_a: Sequence, labels_b: Sequence) -> KappaResult:
    if len(labels_a) != len(labels_b):
        raise ClassificationError("label sequences differ in length")
    n = len(labels_a)
    if n == 0:
        raise ClassificationError("need at least one label pair")
    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    ca, cb = Counter(labels_a), Counter(labels_b)
    p_e = sum(ca[k] * cb[k] for k in ca) / (n * n)
    if p_e == 1.0:
        return KappaResult(1.0, kappa_band(1.0), p_o, p_e,
                           note="both raters constant and identical; kappa set to 1 by convention")
    k = (p_o - p_e) / (1 - p_e)
    return KappaResult(k, kappa_band(k), p_o, p_e)


# -- bot score providers -------------------------------------------------------

class BotScoreProvider:
    """Returns ``{actor_id: (score, score_kind)}`` for the actors it knows."""

    def scores(self, actor_ids: Sequence[str]) -> dict[str, tuple[float, ScoreKind]]:
        raise NotImplementedError


class FileBotScores(BotScoreProvider):
    """CSV with columns ``actor_id,score[,score_kind]``."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not self.path.exists():
            raise FileNotFoundError(f"bot score file not found: {self.path}")
        self._table: dict[str, tuple[float, ScoreKind]] = {}
        with open(self.path, newline="", encoding="utf-8") as fh:
            for line_no, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if line_no == 1 and row[0].strip().lower() == "actor_id":
                    continue
                try:
                    score = float(row[1])
                    kind = ScoreKind(row[2].strip()) if len(row) > 2 and row[2].strip() else ScoreKind.IMPORTED
                except (IndexError, ValueError) as exc:
                    raise ClassificationError(f"{self.path}:{line_no}: {exc}") from None
                if not 0.0 <= score <= 1.0:
                    raise ClassificationError(f"{self.path}:{line_no}: score {score} outside [0, 1]")
                self._table[row[0].strip()] = (score, kind)

    def scores(self, actor_ids):
        return {a: self._table[a] for a in actor_ids if a in self._table}


class StubBotScores(BotScoreProvider):
    def __init__(self, table: Mapping[str, float], kind: ScoreKind = ScoreKind.IMPORTED):
        self.table = dict(table)
        self.kind = kind

    def scores(self, actor_ids):
        return {a: (self.table[a], self.kind) for a in actor_ids if a in self.table}


class HttpBotScores(BotScoreProvider):
    """Generic JSON scoring service.

    POSTs ``{"ids": [...]}`` to ``endpoint`` and expects
    ``{"scores": {actor_id: score}}`` back. Transport errors and 429/5xx answers are
    retried with exponential backoff.
    """

    def __init__(self, endpoint: str, api_key: Optional[str] = None, batch_size: int = 100,
                 retries: int = 3, backoff: float = 0.5, score_kind: ScoreKind = ScoreKind.IMPORTED,
                 client=None):
        import httpx

        self.endpoint = endpoint
        self.batch_size = batch_size
        self.retries = retries
        self.backoff = backoff
        self.score_kind = score_kind
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = client or httpx.Client(timeout=30.0, headers=headers)

    def _post(self, ids: list[str]) -> dict:
        import httpx

        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.client.post(self.endpoint, json={"ids": ids})
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise httpx.HTTPStatusError("retryable status", request=resp.request, response=resp)
                resp.raise_for_status()
                return resp.json()
            except httpx.HTTPError as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * 2 ** attempt)
        raise ClassificationError(f"bot score service failed after {self.retries + 1} attempts: {last}")

    def scores(self, actor_ids):
        out = {}
        ids = list(actor_ids)
        for i in range(0, len(ids), self.batch_size):
            payload = self._post(ids[i:i + self.batch_size])
            for a, s in payload.get("scores", {}).items():
                if s is not None:
                    out[a] = (float(s), self.score_kind)
        return out


def build_profiles(actor_ids: Iterable[str], provider: BotScoreProvider,
                   stances: Mapping[str, Stance], threshold: float = DEFAULT_THRESHOLD
                   ) -> list[ActorProfile]:
    ids = sorted(set(actor_ids))
    scored = provider.scores(ids)
    profiles = [
        ActorProfile(a, bot_score=scored[a][0] if a in scored else None,
                     score_kind=scored[a][1] if a in scored else ScoreKind.IMPORTED,
                     stance=stances.get(a, Stance.UNKNOWN))
        for a in ids
    ]
    return assign_agency(profiles, threshold)

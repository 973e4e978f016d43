"""Human-to-bot engagement rates: RTP, RR and H2BR on X, RR_reddit on Reddit.

Each rate is the share of human retweets/replies whose target is a bot. Per-faction
rows restrict both the humans and the targeted bots to one side; the ``ALL`` rows
count every human and every bot.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Optional

from .classify import Stance, UserClass
from .events import EventLog, Kind, Platform

ALL = "ALL"


@dataclass(frozen=True)
class Rate:
    community: str
    faction: str
    metric: str
    numerator: int
    denominator: int

    @property
    def value(self) -> Optional[float]:
        """``None`` when the denominator is zero (undefined, not 0)."""
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator


@dataclass
class EngagementReport:
    platform: Platform
    rates: list[Rate]

    def get(self, metric: str, faction: str = ALL, community: str = ALL) -> Rate:
        for r in self.rates:
            if (r.metric, r.faction, r.community) == (metric, faction, community):
                return r
        raise KeyError((metric, faction, community))


def _tally(log: EventLog, classes: Mapping[str, UserClass]):
    # counts[(community, faction)][kind] = [bot-targeted, total]
    counts: dict[tuple[str, str], dict[Kind, list[int]]] = defaultdict(
        lambda: {Kind.RETWEET: [0, 0], Kind.REPLY: [0, 0]})
    for e in log.events:
        if e.kind is Kind.POST:
            continue
        actor = classes.get(e.actor_id, UserClass.UNKNOWN)
        if not actor.is_human:
            continue
        target = classes.get(e.target_actor_id, UserClass.UNKNOWN) if e.target_actor_id else UserClass.UNKNOWN
        side = actor.stance.value
        for comm in (e.community, ALL):
            overall = counts[(comm, ALL)][e.kind]
            overall[1] += 1
            overall[0] += target.is_bot
            same_side = counts[(comm, side)][e.kind]
            same_side[1] += 1
            same_side[0] += target.is_bot and target.stance is actor.stance
    return counts


def engagement_metrics(log: EventLog, classes: Mapping[str, UserClass],
                       platform: Platform | str = Platform.X, per_faction: bool = True
                       ) -> EngagementReport:
    platform = Platform(platform)
    counts = _tally(log, classes)
    communities = sorted({e.community for e in log.events}) + [ALL]
    factions = [ALL] + ([Stance.SIDE_A.value, Stance.SIDE_B.value] if per_faction else [])
    rates = []
    for comm in communities:
        for fac in factions:
            c = counts.get((comm, fac), {Kind.RETWEET: [0, 0], Kind.REPLY: [0, 0]})
            rt, rp = c[Kind.RETWEET], c[Kind.REPLY]
            if platform is Platform.X:
                rates.append(Rate(comm, fac, "RTP", rt[0], rt[1]))
                rates.append(Rate(comm, fac, "RR", rp[0], rp[1]))
                rates.append(Rate(comm, fac, "H2BR", rt[0] + rp[0], rt[1] + rp[1]))
            else:
                rates.append(Rate(comm, fac, "RR_reddit", rp[0], rp[1]))
    return EngagementReport(platform, rates)

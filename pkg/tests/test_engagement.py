import pytest
from hypothesis import given
from hypothesis import strategies as st

from botscope.classify import UserClass
from botscope.engagement import ALL, engagement_metrics
from botscope.events import Event, Kind, Platform, normalize_log
from factories import ev

C = {"H1": UserClass.A_HUMAN, "H2": UserClass.A_HUMAN, "B1": UserClass.A_BOT,
     "HB": UserClass.B_HUMAN, "BB": UserClass.B_BOT}


def test_hand_built_log():
    log = normalize_log([ev("RETWEET", "H1", 0, "B1"), ev("RETWEET", "H1", 1, "H2"),
                         ev("REPLY", "H2", 2, "B1", "x"), ev("REPLY", "H2", 3, "H1", "y")])
    rep = engagement_metrics(log, C)
    for metric in ("RTP", "RR", "H2BR"):
        assert rep.get(metric).value == 0.5


def test_rtp_arithmetic():
    events = [ev("RETWEET", "H1", i, "B1" if i < 4 else "H2") for i in range(10)]
    assert engagement_metrics(normalize_log(events), C).get("RTP").value == pytest.approx(0.4)


def test_no_human_events_is_undefined():
    rep = engagement_metrics(normalize_log([ev("RETWEET", "B1", 0, "H1")]), C)
    for r in rep.rates:
        assert r.value is None and r.denominator == 0


def test_factions_use_same_side_pairs():
    log = normalize_log([ev("RETWEET", "HB", 0, "B1"), ev("RETWEET", "HB", 1, "BB"),
                         ev("RETWEET", "H1", 2, "BB")])
    rep = engagement_metrics(log, C)
    assert rep.get("RTP").value == 1.0
    side_b = rep.get("RTP", faction="SIDE_B")
    assert (side_b.numerator, side_b.denominator) == (1, 2)
    side_a = rep.get("RTP", faction="SIDE_A")
    assert (side_a.numerator, side_a.denominator) == (0, 1)


def test_per_community_rows():
    log = normalize_log([ev("RETWEET", "H1", 0, "B1", community="en"),
                         ev("RETWEET", "H1", 1, "H2", community="ja")])
    rep = engagement_metrics(log, C, per_faction=False)
    assert rep.get("RTP", community="en").value == 1.0
    assert rep.get("RTP", community="ja").value == 0.0
    assert rep.get("RTP", community=ALL).value == 0.5
    with pytest.raises(KeyError):
        rep.get("RTP", faction="SIDE_A")


def test_reddit_metric():
    log = normalize_log([
        Event("p", Platform.REDDIT, Kind.POST, "B1", 0.0, object_id="t3_p"),
        Event("c1", Platform.REDDIT, Kind.REPLY, "H1", 1.0, object_id="t3_p"),
        Event("c2", Platform.REDDIT, Kind.REPLY, "H2", 2.0, object_id="t1_c1"),
    ])
    rep = engagement_metrics(log, C, Platform.REDDIT)
    assert {r.metric for r in rep.rates} == {"RR_reddit"}
    assert rep.get("RR_reddit").value == 0.5


_actors = st.sampled_from(sorted(C) + ["X?"])


@given(st.lists(st.tuples(st.sampled_from([Kind.RETWEET, Kind.REPLY]), _actors, _actors), max_size=50))
def test_h2br_is_sum_of_parts(rows):
    log = normalize_log([ev(k, a, i, b, "o") for i, (k, a, b) in enumerate(rows)])
    rep = engagement_metrics(log, C)
    for r in rep.rates:
        if r.metric != "H2BR":
            continue
        rtp = rep.get("RTP", r.faction, r.community)
        rr = rep.get("RR", r.faction, r.community)
        assert r.numerator == rtp.numerator + rr.numerator
        assert r.denominator == rtp.denominator + rr.denominator
        assert r.value is None or 0.0 <= r.value <= 1.0
    # dropping every bot-targeted event drives all rates to 0 (or undefined)
    kept = normalize_log([e for e in log.events if not C.get(e.target_actor_id, UserClass.UNKNOWN).is_bot])
    assert all(r.value in (None, 0.0) for r in engagement_metrics(kept, C).rates)
    # order does not matter
    shuffled = normalize_log([ev(k, a, 100 - i, b, "o") for i, (k, a, b) in enumerate(rows)])
    assert engagement_metrics(shuffled, C).rates == rep.rates

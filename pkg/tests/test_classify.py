import json
import logging

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from botscope.classify import (KNOWN_CLASSES, ActorProfile, Agency, ClassificationError,
                               FileBotScores, HeuristicConfig, HttpBotScores, RedditBotFeatures,
                               ScoreKind, SeedLabels, Stance, StubBotScores, UserClass,
                               assign_agency, build_profiles, classify_actors, cohen_kappa,
                               kappa_band, load_seed_labels, load_stance_labels, reddit_bot_heuristic,
                               reddit_flags, stance_from_partition, summarize_classes, user_class)
from botscope.graph import Partition


class TestAgency:
    @pytest.mark.parametrize("score,agency", [(0.71, Agency.BOT), (0.70, Agency.HUMAN),
                                              (0.80, Agency.BOT), (0.0, Agency.HUMAN)])
    def test_strict_threshold(self, score, agency):
        (p,) = assign_agency([ActorProfile("u", score)])
        assert p.agency is agency

    def test_missing_score_is_unknown(self):
        (p,) = assign_agency([ActorProfile("u")])
        assert p.agency is Agency.UNKNOWN and p.user_class is UserClass.UNKNOWN

    def test_score_range_checked(self):
        with pytest.raises(ClassificationError):
            ActorProfile("u", 1.2)
        with pytest.raises(ClassificationError):
            assign_agency([], threshold=1.5)

    @given(st.lists(st.floats(0, 1), max_size=20), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_threshold(self, scores, t1, t2):
        lo, hi = sorted((t1, t2))
        profiles = [ActorProfile(f"u{i}", s) for i, s in enumerate(scores)]
        at_lo = assign_agency(profiles, lo)
        at_hi = assign_agency(profiles, hi)
        for a, b in zip(at_lo, at_hi):
            assert not (a.agency is Agency.HUMAN and b.agency is Agency.BOT)


class TestClasses:
    def test_product_rule(self):
        assert user_class(Agency.BOT, Stance.SIDE_A) is UserClass.A_BOT
        assert user_class(Agency.HUMAN, Stance.SIDE_B) is UserClass.B_HUMAN
        assert user_class(Agency.HUMAN, Stance.UNKNOWN) is UserClass.UNKNOWN
        assert user_class(Agency.UNKNOWN, Stance.SIDE_A) is UserClass.UNKNOWN

    def test_planted_shares(self):
        split = {UserClass.A_BOT: 60, UserClass.A_HUMAN: 20, UserClass.B_BOT: 15, UserClass.B_HUMAN: 5}
        profiles = []
        for cls, n in split.items():
            for i in range(n):
                profiles.append(ActorProfile(f"{cls.value}{i}", 0.9 if cls.is_bot else 0.1,
                                             stance=cls.stance))
        classes = classify_actors(assign_agency(profiles))
        shares = summarize_classes(classes).shares
        assert [shares[c] for c in KNOWN_CLASSES] == [0.60, 0.20, 0.15, 0.05]
        assert sum(shares.values()) == pytest.approx(1.0)

    def test_class_properties(self):
        assert UserClass.B_BOT.is_bot and not UserClass.B_BOT.is_human
        assert UserClass.A_HUMAN.stance is Stance.SIDE_A
        assert UserClass.UNKNOWN.stance is Stance.UNKNOWN


def _partition(groups: dict[int, list[str]]) -> Partition:
    return Partition({a: c for c, members in groups.items() for a in members}, 0.0)


class TestStanceFromPartition:
    def test_majority_of_one(self):
        part = _partition({0: ["u1", "u2", "sA"], 1: ["u3", "sB"]})
        seeds = SeedLabels.from_mapping({"sA": "SIDE_A", "sB": "SIDE_B"})
        got = stance_from_partition(part, seeds)
        assert got == {"u1": Stance.SIDE_A, "u2": Stance.SIDE_A, "sA": Stance.SIDE_A,
                       "u3": Stance.SIDE_B, "sB": Stance.SIDE_B}

    def test_tie_leaves_unknown_and_warns(self, caplog):
        part = _partition({0: ["a", "s1", "s2"], 1: ["b", "s3"]})
        seeds = SeedLabels.from_mapping({"s1": "SIDE_A", "s2": "SIDE_B", "s3": "SIDE_B"})
        with caplog.at_level(logging.WARNING):
            got = stance_from_partition(part, seeds)
        assert got["a"] is Stance.UNKNOWN and got["b"] is Stance.SIDE_B
        assert "seed tie" in caplog.text

    def test_only_two_largest_are_mapped(self):
        groups = {0: [f"x{i}" for i in range(10)], 1: [f"y{i}" for i in range(8)],
                  2: ["z0", "z1"]}
        seeds = SeedLabels.from_mapping({"x0": "SIDE_A", "y0": "SIDE_B", "z0": "SIDE_A"})
        got = stance_from_partition(_partition(groups), seeds)
        assert all(got[f"x{i}"] is Stance.SIDE_A for i in range(10))
        assert all(got[f"y{i}"] is Stance.SIDE_B for i in range(8))
        assert got["z0"] is Stance.UNKNOWN and got["z1"] is Stance.UNKNOWN

    def test_errors(self):
        with pytest.raises(ClassificationError):
            stance_from_partition(Partition({}, 0.0), SeedLabels.from_mapping({"a": "SIDE_A"}))
        with pytest.raises(ClassificationError):
            stance_from_partition(_partition({0: ["a"]}), SeedLabels({}, {}))
        with pytest.raises(ClassificationError):
            SeedLabels.from_mapping({"a": "UNKNOWN"})

    @given(st.permutations(range(4)))
    def test_invariant_under_relabeling(self, perm):
        groups = {0: ["a", "b", "c", "s1"], 1: ["d", "e", "s2"], 2: ["f", "s3"], 3: ["g"]}
        seeds = SeedLabels.from_mapping({"s1": "SIDE_A", "s2": "SIDE_B", "s3": "SIDE_B"})
        base = stance_from_partition(_partition(groups), seeds)
        relabeled = _partition({perm[c]: m for c, m in groups.items()})
        assert stance_from_partition(relabeled, seeds) == base


class TestLabelFiles:
    def test_parse_and_last_wins(self, tmp_path, caplog):
        p = tmp_path / "labels.csv"
        p.write_text("actor_id,stance\nu9,SIDE_A\nu8,UNKNOWN\nu9,SIDE_B\n")
        with caplog.at_level(logging.WARNING):
            assert load_stance_labels(p) == {"u9": Stance.SIDE_B, "u8": Stance.UNKNOWN}
        assert "duplicate" in caplog.text

    def test_headerless(self, tmp_path):
        p = tmp_path / "labels.csv"
        p.write_text("u9,SIDE_A\n")
        assert load_stance_labels(p) == {"u9": Stance.SIDE_A}

    def test_bad_token_names_line(self, tmp_path):
        p = tmp_path / "labels.csv"
        p.write_text("actor_id,stance\nu1,SIDE_A\nu9,PRO_X\n")
        with pytest.raises(ClassificationError, match="line 3"):
            load_stance_labels(p)

    def test_seed_file_drops_unknown(self, tmp_path):
        p = tmp_path / "seeds.csv"
        p.write_text("a,SIDE_A\nb,UNKNOWN\n")
        assert load_seed_labels(p).stances == {"a": Stance.SIDE_A}


class TestRedditHeuristic:
    cfg = HeuristicConfig()

    def test_employee_override(self):
        f = RedditBotFeatures(1, 1, False, True, 0.0, 0.0)
        assert reddit_bot_heuristic(f) == 0.0

    def test_all_human_like(self):
        f = RedditBotFeatures(1000, 5000, True, False, 3600.0, 0.8)
        assert reddit_flags(f, self.cfg) == (0,) * 6
        assert reddit_bot_heuristic(f) == 0.0

    def test_age_and_karma_only(self):
        f = RedditBotFeatures(10, 3, True, False, 3600.0, 0.8)
        assert reddit_bot_heuristic(f) == pytest.approx(1 / 3)

    def test_weights_validated(self):
        with pytest.raises(ClassificationError):
            HeuristicConfig(weights=(0.5, 0.5, 0.5, 0, 0, 0))

    @given(st.floats(0, 1e4), st.integers(-100, 10**5), st.booleans(), st.booleans(),
           st.floats(0, 1e5), st.floats(0, 1))
    def test_score_in_unit_interval(self, age, karma, verified, employee, iv, cv):
        s = reddit_bot_heuristic(RedditBotFeatures(age, karma, verified, employee, iv, cv))
        assert 0.0 <= s <= 1.0


class TestKappa:
    def test_identical(self):
        assert cohen_kappa("xyxy", "xyxy").kappa == 1.0

    def test_chance_level(self):
        r = cohen_kappa(["x", "x", "y", "y"], ["x", "y", "x", "y"])
        assert (r.observed, r.expected, r.kappa) == (0.5, 0.5, 0.0)

    def test_constant_raters(self):
        r = cohen_kappa("aaa", "aaa")
        assert r.kappa == 1.0 and r.note

    @pytest.mark.parametrize("k,band", [(0.70, "substantial agreement"), (0.1, "slight agreement"),
                                        (0.95, "near perfect agreement"), (-0.2, "poor agreement"),
                                        (0.5, "moderate agreement"), (0.3, "fair agreement")])
    def test_bands(self, k, band):
        assert kappa_band(k) == band

    def test_length_mismatch(self):
        with pytest.raises(ClassificationError):
            cohen_kappa("ab", "a")
        with pytest.raises(ClassificationError):
            cohen_kappa("", "")

    @given(st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from("abc")), min_size=1, max_size=30))
    def test_range_and_self_agreement(self, pairs):
        a, b = [p[0] for p in pairs], [p[1] for p in pairs]
        assert -1.0 <= cohen_kappa(a, b).kappa <= 1.0
        if len(set(a)) >= 2:
            assert cohen_kappa(a, a).kappa == pytest.approx(1.0)


class TestProviders:
    def test_file_scores(self, tmp_path):
        p = tmp_path / "scores.csv"
        p.write_text("actor_id,score,score_kind\na,0.9,CAP\nb,0.2,\n")
        got = FileBotScores(p).scores(["a", "b", "c"])
        assert got == {"a": (0.9, ScoreKind.CAP), "b": (0.2, ScoreKind.IMPORTED)}

    def test_file_missing_and_bad(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            FileBotScores(tmp_path / "nope.csv")
        p = tmp_path / "bad.csv"
        p.write_text("a,1.5\n")
        with pytest.raises(ClassificationError):
            FileBotScores(p)

    def test_http_batches_and_retries(self):
        calls = []

        def handler(request: httpx.Request) -> httpx.Response:
            calls.append(request)
            if len(calls) == 1:
                return httpx.Response(503)
            ids = json.loads(request.content)["ids"]
            return httpx.Response(200, json={"scores": {i: 0.8 for i in ids}})

        client = httpx.Client(transport=httpx.MockTransport(handler))
        provider = HttpBotScores("http://scores.test/v1", batch_size=2, backoff=0.0,
                                 score_kind=ScoreKind.UNIVERSAL, client=client)
        got = provider.scores(["a", "b", "c"])
        assert got == {k: (0.8, ScoreKind.UNIVERSAL) for k in "abc"}
        assert len(calls) == 3  # one retry plus two batches

    def test_http_gives_up(self):
        client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(500)))
        provider = HttpBotScores("http://scores.test", retries=2, backoff=0.0, client=client)
        with pytest.raises(ClassificationError, match="3 attempts"):
            provider.scores(["a"])

    def test_build_profiles(self):
        profiles = build_profiles(["b", "a", "c"], StubBotScores({"a": 0.9, "b": 0.1}),
                                  {"a": Stance.SIDE_B, "b": Stance.SIDE_A})
        assert [(p.actor_id, p.user_class) for p in profiles] == [
            ("a", UserClass.B_BOT), ("b", UserClass.A_HUMAN), ("c", UserClass.UNKNOWN)]

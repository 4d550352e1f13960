import json
import random
from enum import Enum

import pytest

from rgrewards.annotation import (
    AnnotationGraph,
    parse_report_annotation,
    serialize_report_annotation,
)
from rgrewards.failure import AlignmentFailure, UsageFailure
from rgrewards.rewards import (
    PRF,
    RelationScope,
    RewardVariant,
    ScoreSet,
    build_set,
    confused_labels,
    corpus_rg,
    f_score,
    label_breakdown,
    rg_reward,
)
from tests.helper import (
    OPACITY,
    OPACITY_E,
    OPACITY_ER,
    OPACITY_ER_BAR,
    OBS_DP,
    opacity_report,
    random_graph,
    shuffled,
    without_relation,
)
from tests.oracles import naive_set_f1, naive_sets

VARIANTS = list(RewardVariant)


def plain(element):
    if isinstance(element, Enum):
        return element.value
    if isinstance(element, tuple):
        return tuple(plain(part) for part in element)
    return element


def random_pairs(seed, n=1000):
    rng = random.Random(seed)
    return [(random_graph(rng), random_graph(rng)) for _ in range(n)]


@pytest.mark.parametrize(
    "variant, expected",
    [("e", OPACITY_E), ("er", OPACITY_ER), ("er_bar", OPACITY_ER_BAR)],
)
def test_opacity_report_sets(variant, expected):
    score_set = build_set(opacity_report(), variant)
    assert score_set.variant is RewardVariant(variant)
    assert set(score_set) == expected


def test_opacity_report_set_sizes():
    assert [len(build_set(opacity_report(), v)) for v in VARIANTS] == [7, 7, 8]


def test_single_entity_against_opacity_report():
    hyp = ScoreSet(RewardVariant.E, frozenset({("opacity", OBS_DP)}))
    score = f_score(hyp, build_set(opacity_report(), "e"))
    assert score.precision == 1
    assert score.recall == pytest.approx(1 / 7)
    assert score.f1 == pytest.approx(0.25)


@pytest.mark.parametrize(
    "variant, f1", [("e", 1.0), ("er", 6 / 7), ("er_bar", 7 / 8)]
)
def test_missing_relation(variant, f1):
    hyp = without_relation(opacity_report(), "increased", "opacity")
    score = rg_reward(hyp, opacity_report(), variant)
    assert score.f1 == pytest.approx(f1)
    assert score.precision == pytest.approx(f1)
    assert score.recall == pytest.approx(f1)


@pytest.mark.parametrize("variant", VARIANTS)
def test_empty_graphs(variant):
    empty = AnnotationGraph()
    assert rg_reward(empty, empty, variant).f1 == 1.0
    assert rg_reward(empty, opacity_report(), variant).f1 == 0.0
    assert rg_reward(opacity_report(), empty, variant).f1 == 0.0


def test_prf_conventions():
    assert PRF.from_counts(0, 0, 0).f1 == 1.0
    assert PRF.from_counts(0, 3, 0).f1 == 0.0
    assert PRF.from_counts(0, 3, 4).f1 == 0.0


def test_f_score_rejects_mixed_variants():
    with pytest.raises(ValueError, match="Cannot compare"):
        f_score(build_set(opacity_report(), "e"), build_set(opacity_report(), "er"))


def test_corpus_mean():
    result = corpus_rg([opacity_report(), AnnotationGraph()], [opacity_report(), opacity_report()], "e")
    assert result.f1 == pytest.approx(0.5)
    assert result.count == 2
    assert result.items is None


def test_corpus_per_example():
    result = corpus_rg(
        [opacity_report(), AnnotationGraph()], [opacity_report(), opacity_report()], "er", per_example=True
    )
    assert [item.f1 for item in result.items] == [1.0, 0.0]


def test_corpus_misaligned():
    with pytest.raises(AlignmentFailure, match="one item but the references have two items"):
        corpus_rg([opacity_report()], [opacity_report(), opacity_report()], "e")


def test_corpus_empty():
    with pytest.raises(UsageFailure, match="empty corpus"):
        corpus_rg([], [], "e")


def test_corpus_jobs_do_not_change_result():
    pairs = random_pairs(5, n=40)
    hyps, refs = zip(*pairs)
    serial = corpus_rg(hyps, refs, "er_bar", per_example=True)
    parallel = corpus_rg(hyps, refs, "er_bar", per_example=True, jobs=2)
    assert serial == parallel


@pytest.mark.parametrize("variant", VARIANTS)
def test_sets_match_oracle(variant):
    index = VARIANTS.index(variant)
    rng = random.Random(17)
    for _ in range(300):
        graph = random_graph(rng)
        raw = json.loads(json.dumps(serialize_report_annotation(graph)))
        assert {plain(el) for el in build_set(graph, variant)} == naive_sets(raw)[index]


@pytest.mark.parametrize("variant", VARIANTS)
def test_scores_match_oracle(variant):
    index = VARIANTS.index(variant)
    for hyp, ref in random_pairs(19, n=300):
        expected = naive_set_f1(
            naive_sets(serialize_report_annotation(hyp))[index],
            naive_sets(serialize_report_annotation(ref))[index],
        )
        score = rg_reward(hyp, ref, variant)
        assert (score.precision, score.recall, score.f1) == pytest.approx(expected)


def test_properties_on_random_pairs():
    rng = random.Random(23)
    for hyp, ref in random_pairs(29):
        scores = {v: rg_reward(hyp, ref, v) for v in VARIANTS}
        for variant, score in scores.items():
            swapped = rg_reward(ref, hyp, variant)
            assert swapped.f1 == pytest.approx(score.f1, rel=0, abs=1e-12)
            assert swapped.precision == score.recall
            assert swapped.recall == score.precision
            for value in (score.precision, score.recall, score.f1):
                assert 0.0 <= value <= 1.0
            assert rg_reward(shuffled(hyp, rng), shuffled(ref, rng), variant) == score
            assert rg_reward(hyp, hyp, variant).f1 == 1.0

        assert scores[RewardVariant.ER].f1 <= scores[RewardVariant.E].f1 + 1e-12


def test_adding_a_reference_element_never_hurts():
    for hyp, ref in random_pairs(31, n=300):
        for variant in VARIANTS:
            hyp_set, ref_set = build_set(hyp, variant), build_set(ref, variant)
            missing = sorted(ref_set.elements - hyp_set.elements, key=repr)
            if not missing:
                continue
            before = f_score(hyp_set, ref_set)
            after = f_score(hyp_set.add(missing[0]), ref_set)
            assert after.recall > before.recall
            assert after.precision >= before.precision
            assert after.f1 > before.f1


def test_incident_scope():
    er = build_set(opacity_report(), "er", relation_scope=RelationScope.INCIDENT)
    flags = {tokens: flag for tokens, _, flag in er}
    assert flags == {
        "increased": 1,
        "opacity": 1,
        "right": 1,
        "lower": 1,
        "lobe": 1,
        "infection": 1,
        "pneumothorax": 0,
    }

    er_bar = build_set(opacity_report(), "er_bar", relation_scope="incident")
    assert len(er_bar) == 6
    assert [el for el in er_bar if len(el) == 2] == [("pneumothorax", "OBS-DA")]


def test_label_breakdown():
    hyp = without_relation(opacity_report(), "increased", "opacity")
    breakdown = label_breakdown([hyp], [opacity_report()])

    assert breakdown["OBS-DP"].f1 == 1.0
    assert breakdown["OBS-U"].f1 == 1.0
    assert breakdown["located_at"].f1 == 1.0
    assert breakdown["modify"].precision == 1.0
    assert breakdown["modify"].recall == pytest.approx(2 / 3)
    assert breakdown["modify"].hyp_count == 2


def test_confused_labels():
    raw = json.loads(json.dumps(OPACITY))
    raw["entities"]["7"]["label"] = "OBS-U"
    hyp = parse_report_annotation(raw)

    assert confused_labels([hyp], [opacity_report()]) == {"OBS-DA -> OBS-U": 1}
    assert confused_labels([opacity_report()], [opacity_report()]) == {}

import json

import pytest

from rgrewards.annotation import graph_stats
from rgrewards.failure import ParseFailure, TrainingFailure
from rgrewards.metrics.nlg import tokenize
from rgrewards.rewards import build_set
from rgrewards.scst.annotator import LexiconAnnotator
from rgrewards.scst.policy import ToyPolicy, greedy_sequence
from rgrewards.scst.training import (
    CURVE_COLUMNS,
    CompositeReward,
    ReferenceReport,
    SCSTConfig,
    ToyTask,
    attainable_maximum,
    search_space,
    train_scst,
)
from tests.helper import EXAMPLE_DIR, OPACITY_E, OPACITY_ER, OPACITY_ER_BAR, opacity_report

OPACITY_TEXT = "Increased opacity in the right lower lobe concerning for infection. No pneumothorax."


@pytest.fixture(scope="module")
def annotator():
    return LexiconAnnotator.default()


@pytest.fixture(scope="module")
def task():
    return ToyTask.from_json()


def test_default_task(task):
    assert task.reference == "right lobe opacity"
    assert task.max_len == 4
    assert task.vocabulary.words == ("no", "right", "lobe", "opacity", "effusion")


def test_annotator_reproduces_opacity_report(annotator):
    graph = annotator.annotate(tokenize(OPACITY_TEXT))

    assert set(build_set(graph, "e")) == OPACITY_E
    assert set(build_set(graph, "er")) == OPACITY_ER
    assert set(build_set(graph, "er_bar")) == OPACITY_ER_BAR
    assert graph_stats([graph]) == graph_stats([opacity_report()])
    assert annotator.annotate(tokenize(OPACITY_TEXT)) == graph


def test_annotator_small_report(annotator):
    graph = annotator.annotate("right lobe opacity".split())
    assert [(r.source, r.target, r.label.value) for r in graph.relations] == [
        ("0", "1", "modify"),
        ("2", "1", "located_at"),
    ]


@pytest.mark.parametrize(
    "text, label",
    [("no effusion", "OBS-DA"), ("possible effusion", "OBS-U"), ("effusion", "OBS-DP")],
)
def test_annotator_presence(annotator, text, label):
    graph = annotator.annotate(text.split())
    assert [e.label.value for e in graph.entities] == [label]


def test_annotator_bad_lexicon():
    with pytest.raises(ParseFailure, match="Invalid annotator lexicon"):
        LexiconAnnotator.from_dict({"lexicon": {"opacity": "OBS-MAYBE"}})


def test_composite_reward_rejects_negative_weights():
    with pytest.raises(ValueError, match="non-negative"):
        CompositeReward(-0.1, 0.5, 0.5)


def test_reward_terms_of_reference(annotator, task):
    reward = CompositeReward()
    reference = ReferenceReport.from_text(task.reference, annotator)
    policy = ToyPolicy.delta(task.vocabulary, reference.tokens, max_len=task.max_len)

    terms = reward.terms(greedy_sequence(policy), reference, annotator)
    assert terms.rg == 1.0
    assert terms.rouge == pytest.approx(1.0)
    assert terms.likelihood == 0.0
    assert terms.total == pytest.approx(0.99)


def test_attainable_maximum(task):
    value, tokens = attainable_maximum(task, SCSTConfig().reward)
    assert value == pytest.approx(0.99)
    assert tokens == ("right", "lobe", "opacity")


def test_config_from_example_file():
    config = SCSTConfig.from_json(EXAMPLE_DIR / "scst_config.json")
    assert config.weights == (0.495, 0.495, 0.01)
    assert config.iterations == 500
    assert config.output == "scst_curve.csv"


def test_config_parameters():
    assert "learning_rate" in SCSTConfig.parameters
    assert SCSTConfig.from_dict(SCSTConfig().to_dict()) == SCSTConfig()


@pytest.mark.parametrize(
    "raw, message",
    [
        ({"lr": 0.1}, "Unknown SCST config keys lr"),
        ({"variant": "rouge"}, "Invalid SCST config"),
        ({"weights": [1, 0]}, "three values"),
        ({"learning_rate": -1}, "non-negative"),
        ({"warm_start": -1.0}, "non-negative logit bonus"),
        ([], "should be a JSON object"),
    ],
)
def test_config_errors(raw, message):
    with pytest.raises(ParseFailure, match=message):
        SCSTConfig.from_dict(raw)


def test_config_malformed_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{")
    with pytest.raises(ParseFailure, match="Malformed JSON"):
        SCSTConfig.from_json(path)


def test_zero_learning_rate_keeps_greedy_flat():
    curve = train_scst(SCSTConfig(learning_rate=0.0, iterations=10, batch_size=4))

    assert len(curve.points) == 11
    assert len({p.greedy_reward for p in curve.points}) == 1
    assert (curve.policy.logits == 0).all()


def test_delta_start_scores_full_reward(task):
    policy = ToyPolicy.delta(task.vocabulary, tokenize(task.reference), max_len=task.max_len)
    curve = train_scst(SCSTConfig(iterations=0), policy=policy)

    first = curve.points[0]
    assert first.rg_term == 1.0
    assert first.rouge_term == pytest.approx(1.0)
    assert first.nll_term == 0.0
    assert first.sample_reward == pytest.approx(0.99)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_training_reaches_attainable_maximum(task, seed):
    config = SCSTConfig(seed=seed)
    maximum, _ = attainable_maximum(task, config.reward)

    curve = train_scst(config, task=task)

    assert len(curve.points) == config.iterations + 1
    assert curve.final.greedy_reward >= 0.9 * maximum


def test_learning_curve_is_reproducible():
    config = SCSTConfig(seed=3, iterations=15, batch_size=8)
    first = train_scst(config).to_csv()
    second = train_scst(config).to_csv()

    assert first == second
    assert first.splitlines()[0] == ",".join(CURVE_COLUMNS)
    assert len(first.splitlines()) == 17


def test_write_csv(tmp_path):
    path = tmp_path / "curve.csv"
    curve = train_scst(SCSTConfig(iterations=2, batch_size=2))
    curve.write_csv(path)
    assert path.read_text() == curve.to_csv()


def test_diverging_update_raises():
    config = SCSTConfig(learning_rate=float("inf"), iterations=3, batch_size=4)
    with pytest.raises(TrainingFailure, match="overflowed at iteration 0"):
        train_scst(config)


def test_custom_task_file(tmp_path, annotator):
    path = tmp_path / "task.json"
    path.write_text(
        json.dumps({"vocabulary": ["no", "effusion"], "reference": "no effusion", "max_len": 2})
    )
    task = ToyTask.from_json(path)
    value, tokens = attainable_maximum(task, CompositeReward(), annotator)
    assert tokens == ("no", "effusion")
    assert value == pytest.approx(0.99)


def test_task_with_unknown_reference_token(tmp_path):
    path = tmp_path / "task.json"
    path.write_text(json.dumps({"vocabulary": ["no"], "reference": "effusion", "max_len": 2}))
    with pytest.raises(ParseFailure, match="not in the vocabulary"):
        ToyTask.from_json(path)


def test_report_task_uses_annotator_vocabulary(annotator):
    task = ToyTask.from_json("report")

    assert task.vocabulary.words == annotator.vocabulary
    assert 30 <= len(task.vocabulary) <= 60
    assert {"the", "in", "concerning", "."} <= set(task.vocabulary.words)
    assert search_space(task) > 10 ** 20


def test_search_space_of_default_task(task):
    assert search_space(task) == 1 + 5 + 25 + 125 + 625


def test_warm_start_decodes_reference():
    # Given
    config = SCSTConfig(task="report", warm_start=1000.0, iterations=2, batch_size=4)

    # When
    curve = train_scst(config)

    # Then
    assert " ".join(curve.final_greedy.tokens) == ToyTask.from_json("report").reference
    for point in curve.points:
        assert point.rg_term == 1.0
        assert point.rouge_term == pytest.approx(1.0)
        assert point.nll_term == 0.0
        assert point.sample_reward == pytest.approx(0.99)


def test_training_on_report_task():
    config = SCSTConfig(task="report", iterations=3, batch_size=4, seed=5)
    curve = train_scst(config)

    frame = curve.to_frame()
    assert len(frame) == 4
    assert frame.notna().all().all()
    assert (frame["greedy_reward"] <= 0.99 + 1e-9).all()
    assert (frame["nll_term"] <= 0).all()


def test_soft_warm_start_leans_towards_reference(task):
    config = SCSTConfig(warm_start=3.0, iterations=0)
    curve = train_scst(config, task=task)
    assert curve.final_greedy.tokens == ("right", "lobe", "opacity")
    assert curve.final.nll_term < 0


def test_warm_start_needs_a_bigram_reference(tmp_path):
    path = tmp_path / "task.json"
    path.write_text(
        json.dumps(
            {"vocabulary": ["right", "lobe"], "reference": "right lobe right", "max_len": 4}
        )
    )
    config = SCSTConfig(task=str(path), warm_start=5.0, iterations=1)
    with pytest.raises(TrainingFailure, match="Cannot warm start"):
        train_scst(config)


def test_missing_task_file(tmp_path):
    with pytest.raises(ParseFailure, match="Cannot read toy task"):
        ToyTask.from_json(tmp_path / "absent.json")

"""Self-critical sequence training of a toy policy against RG rewards.

Each iteration samples a batch from the policy, decodes greedily once,
annotates every decode with the lexicon annotator and scores it with
the composite reward. The greedy reward is the baseline of every
sample; the logits move along the summed sample gradients.
"""
import itertools
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from rgrewards.annotation import AnnotationGraph
from rgrewards.failure import ParseFailure, TrainingFailure
from rgrewards.metrics.nlg import ROUGE_BETA, TokenizedText, rouge_l_pair, tokenize
from rgrewards.rewards import RelationScope, RewardVariant, rg_reward
from rgrewards.scst.annotator import LexiconAnnotator
from rgrewards.scst.policy import (
    Generation,
    ToyPolicy,
    ToyVocabulary,
    greedy_sequence,
    log_prob_gradient,
    sample_sequence,
)
from rgrewards.utils import parameters_attr

logger = logging.getLogger(__name__)

DEFAULT_TASK = Path(__file__).with_name("toy_task.json")
REPORT_TASK = Path(__file__).with_name("report_task.json")
BUNDLED_TASKS = {"toy": DEFAULT_TASK, "report": REPORT_TASK}
DEFAULT_WEIGHTS = (0.495, 0.495, 0.01)
SEARCH_LIMIT = 200_000

CURVE_COLUMNS = [
    "iteration",
    "sample_reward",
    "greedy_reward",
    "rg_term",
    "rouge_term",
    "nll_term",
]


@dataclass(frozen=True)
class ToyTask:
    vocabulary: ToyVocabulary
    reference: str
    max_len: int

    def __post_init__(self):
        unknown = [t for t in tokenize(self.reference) if t not in self.vocabulary]
        if unknown:
            raise ValueError("Reference tokens {} are not in the vocabulary".format(unknown))
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")

    @classmethod
    def from_json(
        cls,
        path: Union[str, Path, None] = None,
        annotator: Optional[LexiconAnnotator] = None,
    ) -> "ToyTask":
        """Load a task file.

        ``path`` may also name a bundled task, ``toy`` or ``report``. A
        task without a ``vocabulary`` uses every token the annotator knows.
        """
        path = Path(BUNDLED_TASKS.get(str(path), path) if path else DEFAULT_TASK)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
            if "vocabulary" in raw:
                words = raw["vocabulary"]
            else:
                words = (annotator or LexiconAnnotator.default()).vocabulary
            return cls(
                ToyVocabulary.from_words(words),
                raw["reference"],
                int(raw["max_len"]),
            )
        except OSError as e:
            raise ParseFailure.from_message(
                "Cannot read toy task `{{ path }}`: {{ error }}.",
                path=str(path),
                error=e.strerror or str(e),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ParseFailure.from_message(
                "Invalid toy task `{{ path }}`: {{ error }}.", path=str(path), error=str(e)
            )


@dataclass(frozen=True)
class ReferenceReport:
    tokens: TokenizedText
    graph: AnnotationGraph

    @classmethod
    def from_text(cls, text: str, annotator: LexiconAnnotator) -> "ReferenceReport":
        tokens = tokenize(text)
        return cls(tokens, annotator.annotate(tokens, report_id="reference"))


@dataclass(frozen=True)
class RewardTerms:
    rg: float
    rouge: float
    likelihood: float
    total: float


@dataclass(frozen=True)
class CompositeReward:
    """Weighted sum of an RG reward, ROUGE-L and the average log-likelihood.

    The likelihood term is the per-decision average log-probability of
    the decode under the policy that produced it. It is treated as a
    plain reward; no gradient flows through it.
    """

    rg_weight: float = DEFAULT_WEIGHTS[0]
    similarity_weight: float = DEFAULT_WEIGHTS[1]
    likelihood_weight: float = DEFAULT_WEIGHTS[2]
    variant: RewardVariant = RewardVariant.ER
    relation_scope: RelationScope = RelationScope.OUTGOING
    beta: float = ROUGE_BETA

    def __post_init__(self):
        weights = (self.rg_weight, self.similarity_weight, self.likelihood_weight)
        if any(w < 0 for w in weights):
            raise ValueError("Reward weights must be non-negative, got {}".format(weights))
        object.__setattr__(self, "variant", RewardVariant(self.variant))
        object.__setattr__(self, "relation_scope", RelationScope(self.relation_scope))

    def deterministic(
        self,
        tokens: Sequence[str],
        reference: ReferenceReport,
        annotator: LexiconAnnotator,
    ) -> Tuple[float, float]:
        """The RG and ROUGE-L terms, which depend on the tokens only."""
        graph = annotator.annotate(tokens)
        rg = rg_reward(graph, reference.graph, self.variant, self.relation_scope).f1
        rouge = rouge_l_pair(tuple(tokens), reference.tokens, self.beta)
        return rg, rouge

    def terms(
        self,
        generation: Generation,
        reference: ReferenceReport,
        annotator: LexiconAnnotator,
    ) -> RewardTerms:
        rg, rouge = self.deterministic(generation.tokens, reference, annotator)
        likelihood = generation.mean_log_prob
        total = (
            self.rg_weight * rg
            + self.similarity_weight * rouge
            + self.likelihood_weight * likelihood
        )
        return RewardTerms(rg, rouge, likelihood, total)


@parameters_attr
@dataclass(frozen=True)
class SCSTConfig:
    variant: str = RewardVariant.ER.value
    weights: Tuple[float, float, float] = DEFAULT_WEIGHTS
    learning_rate: float = 0.1
    iterations: int = 500
    batch_size: int = 32
    seed: int = 0
    temperature: float = 1.0
    max_len: Optional[int] = None
    relation_scope: str = RelationScope.OUTGOING.value
    task: Optional[str] = None
    output: Optional[str] = None
    log_every: int = 50
    warm_start: Optional[float] = None

    def __post_init__(self):
        RewardVariant(self.variant)
        RelationScope(self.relation_scope)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != 3:
            raise ValueError("`weights` needs three values: rg, similarity, likelihood")
        if self.learning_rate < 0:
            raise ValueError("`learning_rate` must be non-negative")
        if self.iterations < 0 or self.batch_size < 1:
            raise ValueError("`iterations` must be >= 0 and `batch_size` >= 1")
        if self.warm_start is not None and not self.warm_start >= 0:
            raise ValueError("`warm_start` must be a non-negative logit bonus")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "SCSTConfig":
        if not isinstance(raw, Mapping):
            raise ParseFailure.from_message("The SCST config should be a JSON object.")
        unknown = sorted(set(raw) - set(cls.parameters))
        if unknown:
            raise ParseFailure.from_message(
                "Unknown SCST config keys {{ keys }}; expected some of {{ known }}.",
                keys=", ".join(unknown),
                known=", ".join(cls.parameters),
            )
        try:
            return cls(**raw)
        except (TypeError, ValueError) as e:
            raise ParseFailure.from_message("Invalid SCST config: {{ error }}.", error=str(e))

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "SCSTConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParseFailure.from_message(
                "Malformed JSON in `{{ path }}`: {{ error }}.", path=str(path), error=str(e)
            )
        return cls.from_dict(raw)

    @property
    def reward(self) -> CompositeReward:
        return CompositeReward(
            *self.weights, variant=self.variant, relation_scope=self.relation_scope
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CurvePoint:
    iteration: int
    sample_reward: float
    greedy_reward: float
    rg_term: float
    rouge_term: float
    nll_term: float


@dataclass
class LearningCurve:
    points: List[CurvePoint] = field(default_factory=list)
    policy: Optional[ToyPolicy] = None

    @property
    def final(self) -> CurvePoint:
        return self.points[-1]

    @property
    def final_greedy(self) -> Generation:
        return greedy_sequence(self.policy)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(p) for p in self.points], columns=CURVE_COLUMNS)

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, float_format="%.10f")

    def write_csv(self, path: Union[str, Path]):
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _starting_policy(
    config: SCSTConfig, task: ToyTask, reference: ReferenceReport
) -> ToyPolicy:
    max_len = config.max_len or task.max_len
    if not config.warm_start:
        return ToyPolicy.uniform(
            task.vocabulary, temperature=config.temperature, max_len=max_len
        )
    try:
        return ToyPolicy.delta(
            task.vocabulary,
            reference.tokens,
            max_len=max_len,
            strength=config.warm_start,
            temperature=config.temperature,
        )
    except ValueError as e:
        raise TrainingFailure.from_message(
            "Cannot warm start from the reference: {{ error }}.", error=str(e)
        )


def train_scst(
    config: SCSTConfig,
    task: Optional[ToyTask] = None,
    reference: Optional[ReferenceReport] = None,
    policy: Optional[ToyPolicy] = None,
    annotator: Optional[LexiconAnnotator] = None,
) -> LearningCurve:
    """Run SCST and record one curve point per iteration.

    Point ``i`` describes the policy before update ``i``; the last point
    describes the trained policy, so the curve has ``iterations + 1``
    points.

    Args:
        task: vocabulary, reference text and length limit; the bundled
            toy task by default.
        reference: overrides the task's reference.
        policy: starting policy. By default it is uniform over the task
            vocabulary, or leans towards the reference when the config
            sets ``warm_start``.

    Raises:
        TrainingFailure: a gradient or the updated logits stop being finite.
    """
    task = task or ToyTask.from_json(config.task)
    annotator = annotator or LexiconAnnotator.default()
    reference = reference or ReferenceReport.from_text(task.reference, annotator)
    policy = policy or _starting_policy(config, task, reference)
    reward = config.reward

    if not reference.graph.entities:
        logger.warning(
            "The reference `%s` has no entities; the RG term only rewards empty graphs",
            " ".join(reference.tokens),
        )

    rng = np.random.default_rng(config.seed)
    curve = LearningCurve()

    for iteration in range(config.iterations + 1):
        greedy = greedy_sequence(policy)
        baseline = reward.terms(greedy, reference, annotator)
        samples = [sample_sequence(policy, rng) for _ in range(config.batch_size)]
        sample_rewards = [reward.terms(s, reference, annotator).total for s in samples]

        curve.points.append(
            CurvePoint(
                iteration,
                float(np.mean(sample_rewards)),
                baseline.total,
                baseline.rg,
                baseline.rouge,
                baseline.likelihood,
            )
        )
        if iteration % config.log_every == 0:
            logger.info(
                "iteration %d: sample reward %.4f, greedy reward %.4f (%s)",
                iteration,
                curve.points[-1].sample_reward,
                baseline.total,
                " ".join(greedy.tokens) or "<empty>",
            )
        if iteration == config.iterations:
            break

        gradient = np.zeros_like(policy.logits)
        for sample, sample_reward in zip(samples, sample_rewards):
            advantage = sample_reward - baseline.total
            if advantage != 0:
                gradient += advantage * log_prob_gradient(policy, sample)

        if not np.all(np.isfinite(gradient)):
            raise TrainingFailure.from_message(
                "The policy gradient is not finite at iteration {{ iteration }}.",
                iteration=iteration,
            )
        logits = policy.logits + config.learning_rate * gradient
        if not np.all(np.isfinite(logits)):
            raise TrainingFailure.from_message(
                "The policy logits overflowed at iteration {{ iteration }}; "
                "lower the learning rate.",
                iteration=iteration,
            )
        policy = policy.with_logits(logits)

    curve.policy = policy
    return curve


def search_space(task: ToyTask) -> int:
    """Number of bodies ``attainable_maximum`` scores for ``task``."""
    words = len(task.vocabulary.words)
    return sum(words ** length for length in range(task.max_len + 1))


def attainable_maximum(
    task: ToyTask,
    reward: CompositeReward,
    annotator: Optional[LexiconAnnotator] = None,
    reference: Optional[ReferenceReport] = None,
) -> Tuple[float, Tuple[str, ...]]:
    """Best deterministic reward over every body of at most ``max_len`` tokens.

    The likelihood term is left out: it depends on the policy, and it
    is never positive.
    Returns the value and the first body reaching it (shortest first).
    """
    annotator = annotator or LexiconAnnotator.default()
    reference = reference or ReferenceReport.from_text(task.reference, annotator)

    best, best_tokens = -np.inf, ()
    for length in range(task.max_len + 1):
        for tokens in itertools.product(task.vocabulary.words, repeat=length):
            rg, rouge = reward.deterministic(tokens, reference, annotator)
            value = reward.rg_weight * rg + reward.similarity_weight * rouge
            if value > best:
                best, best_tokens = value, tokens
    return float(best), best_tokens

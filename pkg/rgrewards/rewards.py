"""Entity and relation graph rewards.

A report graph is turned into a set of tuples, and hypothesis and
reference sets are compared with an F-score. Three set constructions
are available:

- ``e``: ``(tokens, label)`` for every node.
- ``er``: ``(tokens, label, has_relation)``; ``has_relation`` is 1 when
  a node with that identity is the source of a relation.
- ``er_bar``: ``(tokens, label, (source_tokens, target_tokens), relation)``
  for every relation, and ``(tokens, label)`` for nodes that are the
  source of no relation.
"""
import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from rgrewards.annotation import AnnotationGraph, EntityLabel, RelationLabel
from rgrewards.failure import AlignmentFailure, UsageFailure
from rgrewards.utils import parallel_map
from rgrewards.utils_messaging import plural

logger = logging.getLogger(__name__)


class RewardVariant(str, Enum):
    E = "e"
    ER = "er"
    ER_BAR = "er_bar"

    def __str__(self):
        return self.value


class RelationScope(str, Enum):
    """Which relations count for the relation flag and the short tuples."""

    OUTGOING = "outgoing"
    INCIDENT = "incident"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ScoreSet:
    variant: RewardVariant
    elements: FrozenSet[tuple]

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, element):
        return element in self.elements

    def add(self, *elements: tuple) -> "ScoreSet":
        return ScoreSet(self.variant, self.elements.union(elements))


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    match_count: int = 0
    hyp_count: int = 0
    ref_count: int = 0

    @classmethod
    def from_counts(cls, match_count: int, hyp_count: int, ref_count: int) -> "PRF":
        """Set F-score from counts.

        Two empty sets agree perfectly; one empty set scores zero.

        :Example:

            >>> PRF.from_counts(1, 1, 7).f1
            0.25
        """
        match_count, hyp_count, ref_count = (
            int(match_count),
            int(hyp_count),
            int(ref_count),
        )
        if hyp_count == 0 and ref_count == 0:
            return cls(1.0, 1.0, 1.0, 0, 0, 0)
        if hyp_count == 0 or ref_count == 0:
            return cls(0.0, 0.0, 0.0, 0, hyp_count, ref_count)

        precision = match_count / hyp_count
        recall = match_count / ref_count
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        return cls(precision, recall, f1, match_count, hyp_count, ref_count)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "match_count": self.match_count,
            "hyp_count": self.hyp_count,
            "ref_count": self.ref_count,
        }


@dataclass(frozen=True)
class MacroPRF:
    """Unweighted mean of per-item precision, recall and F1."""

    precision: float
    recall: float
    f1: float
    count: int
    items: Optional[Tuple[PRF, ...]] = None

    @classmethod
    def from_items(cls, items: Sequence[PRF], keep_items: bool = False) -> "MacroPRF":
        if not items:
            raise UsageFailure.from_message("Cannot average over an empty corpus.")
        scores = np.array([[p.precision, p.recall, p.f1] for p in items])
        precision, recall, f1 = scores.mean(axis=0)
        return cls(
            float(precision),
            float(recall),
            float(f1),
            len(items),
            tuple(items) if keep_items else None,
        )

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "count": self.count,
        }


def _relation_counts(graph: AnnotationGraph, scope: RelationScope) -> Counter:
    counts = Counter(r.source for r in graph.relations)
    if scope is RelationScope.INCIDENT:
        counts.update(r.target for r in graph.relations)
    return counts


def build_set(
    graph: AnnotationGraph,
    variant: Union[RewardVariant, str],
    relation_scope: Union[RelationScope, str] = RelationScope.OUTGOING,
) -> ScoreSet:
    """Build the tuple set of a graph for one reward variant.

    Nodes are identified by ``(tokens, label)``; a token span repeated
    with the same label counts once. Relation tuples name their source
    and target by tokens only.

    Args:
        graph: a validated report graph.
        variant: ``e``, ``er`` or ``er_bar``.
        relation_scope: ``outgoing`` counts only relations a node is the
            source of; ``incident`` also counts relations it is the
            target of.
    """
    variant = RewardVariant(variant)
    scope = RelationScope(relation_scope)

    if variant is RewardVariant.E:
        return ScoreSet(variant, frozenset(e.key for e in graph.entities))

    related = _relation_counts(graph, scope)

    if variant is RewardVariant.ER:
        connected = {e.key for e in graph.entities if related[e.id]}
        return ScoreSet(
            variant,
            frozenset(
                (*e.key, int(e.key in connected)) for e in graph.entities
            ),
        )

    elements = set()
    for relation in graph.relations:
        source = graph.entity(relation.source)
        target = graph.entity(relation.target)
        elements.add((*source.key, (source.tokens, target.tokens), relation.label))
    elements.update(e.key for e in graph.entities if not related[e.id])
    return ScoreSet(variant, frozenset(elements))


def f_score(hyp: ScoreSet, ref: ScoreSet) -> PRF:
    if hyp.variant is not ref.variant:
        raise ValueError(
            "Cannot compare a `{}` set with a `{}` set".format(hyp.variant, ref.variant)
        )
    return PRF.from_counts(len(hyp.elements & ref.elements), len(hyp), len(ref))


def rg_reward(
    hyp: AnnotationGraph,
    ref: AnnotationGraph,
    variant: Union[RewardVariant, str],
    relation_scope: Union[RelationScope, str] = RelationScope.OUTGOING,
) -> PRF:
    """F-score between the tuple sets of a hypothesis and a reference graph."""
    return f_score(
        build_set(hyp, variant, relation_scope),
        build_set(ref, variant, relation_scope),
    )


def _score_pair(pair, variant, relation_scope) -> PRF:
    return rg_reward(pair[0], pair[1], variant, relation_scope)


def corpus_rg(
    hyps: Sequence[AnnotationGraph],
    refs: Sequence[AnnotationGraph],
    variant: Union[RewardVariant, str],
    per_example: bool = False,
    relation_scope: Union[RelationScope, str] = RelationScope.OUTGOING,
    jobs: int = 1,
) -> MacroPRF:
    """Macro-average ``rg_reward`` over index-aligned graphs.

    Args:
        per_example: keep the per-pair scores in ``items``.
        jobs: worker processes; the result does not depend on it.

    Raises:
        AlignmentFailure: the corpora differ in length.
        UsageFailure: the corpora are empty.
    """
    check_aligned(hyps, refs)
    logger.info("Scoring %d report pairs with RG_%s", len(hyps), variant)
    scores = parallel_map(
        partial(
            _score_pair,
            variant=RewardVariant(variant),
            relation_scope=RelationScope(relation_scope),
        ),
        list(zip(hyps, refs)),
        jobs=jobs,
    )
    return MacroPRF.from_items(scores, keep_items=per_example)


def check_aligned(hyps: Sequence, refs: Sequence):
    if len(hyps) != len(refs):
        raise AlignmentFailure.from_message(
            "The hypotheses have {{ n_hyps }} but the references have {{ n_refs }}.",
            n_hyps=plural(len(hyps), "item"),
            n_refs=plural(len(refs), "item"),
        )
    if not hyps:
        raise UsageFailure.from_message("Cannot score an empty corpus.")


def label_breakdown(
    hyps: Sequence[AnnotationGraph], refs: Sequence[AnnotationGraph]
) -> Dict[str, PRF]:
    """Precision and recall per entity label and per relation label.

    Entity labels are scored on the ``e`` sets, relation labels on the
    relation tuples of the ``er_bar`` sets. Counts are pooled over the
    corpus.
    """
    check_aligned(hyps, refs)
    counts = {label.value: [0, 0, 0] for label in [*EntityLabel, *RelationLabel]}

    def tally(hyp_set: ScoreSet, ref_set: ScoreSet, key):
        for label, count in counts.items():
            hyp_part = {el for el in hyp_set if key(el) == label}
            ref_part = {el for el in ref_set if key(el) == label}
            count[0] += len(hyp_part & ref_part)
            count[1] += len(hyp_part)
            count[2] += len(ref_part)

    for hyp, ref in zip(hyps, refs):
        tally(
            build_set(hyp, RewardVariant.E),
            build_set(ref, RewardVariant.E),
            lambda el: el[1].value,
        )
        tally(
            build_set(hyp, RewardVariant.ER_BAR),
            build_set(ref, RewardVariant.ER_BAR),
            lambda el: el[3].value if len(el) == 4 else None,
        )

    return {label: PRF.from_counts(*count) for label, count in counts.items()}


def confused_labels(
    hyps: Iterable[AnnotationGraph], refs: Iterable[AnnotationGraph]
) -> Dict[str, int]:
    """Count reference nodes the hypothesis mentions under another label.

    Keys read ``"<reference label> -> <hypothesis label>"``, e.g. an
    uncertain finding reported as definitely present counts towards
    ``"OBS-U -> OBS-DP"``.
    """
    confusions = Counter()
    for hyp, ref in zip(hyps, refs):
        hyp_labels = {}
        for entity in hyp.entities:
            hyp_labels.setdefault(entity.tokens, set()).add(entity.label)
        for tokens, label in {e.key for e in ref.entities}:
            others = hyp_labels.get(tokens, set())
            if label in others:
                continue
            for other in sorted(others, key=list(EntityLabel).index):
                confusions["{} -> {}".format(label.value, other.value)] += 1
    return dict(sorted(confusions.items()))

"""Report annotations as directed labeled graphs.

An annotation lists the entities of one report and, per entity, its
outgoing relations::

    {"id": "r1",
     "entities": {"1": {"tokens": "opacity", "label": "OBS-DP",
                        "start_ix": 1, "end_ix": 1,
                        "relations": [["located_at", "4"]]},
                  ...}}

End indices are inclusive. Overlapping spans are accepted.
"""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from jinja2 import Environment

from rgrewards.failure import ParseFailure, failure_context
from rgrewards.utils import read_jsonl
from rgrewards.utils_messaging import get_ord

logger = logging.getLogger(__name__)


class EntityLabel(str, Enum):
    ANAT_DP = "ANAT-DP"
    OBS_DP = "OBS-DP"
    OBS_U = "OBS-U"
    OBS_DA = "OBS-DA"

    @property
    def is_anatomy(self) -> bool:
        return self is EntityLabel.ANAT_DP

    @property
    def is_observation(self) -> bool:
        return not self.is_anatomy

    def __str__(self):
        return self.value


class RelationLabel(str, Enum):
    SUGGESTIVE_OF = "suggestive_of"
    LOCATED_AT = "located_at"
    MODIFY = "modify"

    @classmethod
    def normalize(cls, value: str) -> "RelationLabel":
        """Look up a relation label, treating spaces and underscores alike.

        ``"suggestive of"`` and ``"suggestive_of"`` give the same label.
        """
        return cls("_".join(value.replace("_", " ").split()))

    def __str__(self):
        return self.value


def normalize_tokens(text: Union[str, Sequence[str]]) -> str:
    """Lowercase a span and collapse its whitespace to single spaces."""
    if not isinstance(text, str):
        text = " ".join(text)
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class Entity:
    id: str
    tokens: str
    label: EntityLabel
    start_ix: int
    end_ix: int

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("Entity %s has no tokens" % self.id)
        if not 0 <= self.start_ix <= self.end_ix:
            raise ValueError(
                "Entity %s spans %s..%s" % (self.id, self.start_ix, self.end_ix)
            )

    @property
    def key(self) -> Tuple[str, EntityLabel]:
        """Node identity used when graphs are compared."""
        return self.tokens, self.label


@dataclass(frozen=True)
class Relation:
    source: str
    target: str
    label: RelationLabel


@dataclass(frozen=True)
class AnnotationGraph:
    entities: Tuple[Entity, ...] = ()
    relations: Tuple[Relation, ...] = ()
    report_id: Optional[str] = None
    _by_id: Dict[str, Entity] = field(
        default=None, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        by_id = {}
        for entity in self.entities:
            if entity.id in by_id:
                raise ValueError("Duplicate entity id %s" % entity.id)
            by_id[entity.id] = entity

        seen = set()
        for relation in self.relations:
            if relation.source not in by_id or relation.target not in by_id:
                raise ValueError("Dangling relation %r" % (relation,))
            if relation.source == relation.target:
                raise ValueError("Self-loop on entity %s" % relation.source)
            if relation in seen:
                raise ValueError("Duplicate relation %r" % (relation,))
            seen.add(relation)

        # relations are kept grouped by source, in entity order
        position = {entity_id: i for i, entity_id in enumerate(by_id)}
        relations = sorted(self.relations, key=lambda r: position[r.source])

        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "relations", tuple(relations))
        object.__setattr__(self, "_by_id", by_id)

    def entity(self, entity_id: str) -> Entity:
        return self._by_id[entity_id]

    def outgoing(self, entity_id: str) -> Tuple[Relation, ...]:
        return tuple(r for r in self.relations if r.source == entity_id)

    def __len__(self):
        return len(self.entities)


def _reject_duplicate_keys(pairs):
    result = {}
    for key, value in pairs:
        if key in result:
            raise ParseFailure.from_message(
                "Key `{{ key }}` appears twice in the same object; entity ids must be unique.",
                key=key,
            )
        result[key] = value
    return result


def _require_index(eid: str, record: Mapping, key: str) -> int:
    value = record.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseFailure.from_message(
            "Entity `{{ eid }}` needs an integer `{{ key }}`, got `{{ value }}`.",
            eid=eid,
            key=key,
            value=value,
        )
    return value


def _parse_entity(eid: str, record) -> Entity:
    if not isinstance(record, Mapping):
        raise ParseFailure.from_message(
            "Entity `{{ eid }}` should be an object.", eid=eid
        )

    tokens = record.get("tokens")
    if isinstance(tokens, list) and all(isinstance(t, str) for t in tokens):
        tokens = normalize_tokens(tokens)
    elif isinstance(tokens, str):
        tokens = normalize_tokens(tokens)
    else:
        tokens = ""
    if not tokens:
        raise ParseFailure.from_message(
            "Entity `{{ eid }}` has no `tokens`.", eid=eid
        )

    try:
        label = EntityLabel(record.get("label"))
    except ValueError:
        raise ParseFailure.from_message(
            "Unknown entity label `{{ label }}` for entity `{{ eid }}`; "
            "expected one of {{ expected }}.",
            label=record.get("label"),
            eid=eid,
            expected=", ".join(label.value for label in EntityLabel),
        )

    start_ix = _require_index(eid, record, "start_ix")
    end_ix = _require_index(eid, record, "end_ix")
    if not 0 <= start_ix <= end_ix:
        raise ParseFailure.from_message(
            "Entity `{{ eid }}` has `start_ix` {{ start }} and `end_ix` {{ end }}; "
            "indices are 0-based and inclusive.",
            eid=eid,
            start=start_ix,
            end=end_ix,
        )

    return Entity(eid, tokens, label, start_ix, end_ix)


def _parse_relations(eid: str, record: Mapping, entity_ids) -> List[Relation]:
    raw_relations = record.get("relations", [])
    if not isinstance(raw_relations, list):
        raise ParseFailure.from_message(
            "`relations` of entity `{{ eid }}` should be a list.", eid=eid
        )

    relations = []
    for i, raw in enumerate(raw_relations, start=1):
        context = dict(eid=eid, ord=get_ord(i))
        if not (isinstance(raw, (list, tuple)) and len(raw) == 2):
            raise ParseFailure.from_message(
                "The {{ ord }} relation of entity `{{ eid }}` should be a "
                "[label, target] pair.",
                **context
            )
        raw_label, target = raw
        try:
            label = RelationLabel.normalize(str(raw_label))
        except ValueError:
            raise ParseFailure.from_message(
                "Unknown relation label `{{ label }}` in the {{ ord }} relation "
                "of entity `{{ eid }}`.",
                label=raw_label,
                **context
            )
        target = str(target)
        if target not in entity_ids:
            raise ParseFailure.from_message(
                "The {{ ord }} relation of entity `{{ eid }}` points to "
                "`{{ target }}`, which is not an entity of this report.",
                target=target,
                **context
            )
        if target == eid:
            raise ParseFailure.from_message(
                "The {{ ord }} relation of entity `{{ eid }}` is a self-loop.",
                **context
            )
        relation = Relation(eid, target, label)
        if relation in relations:
            raise ParseFailure.from_message(
                "The {{ ord }} relation of entity `{{ eid }}` repeats "
                "`{{ label }}` to `{{ target }}`.",
                label=label.value,
                target=target,
                **context
            )
        relations.append(relation)

    return relations


def parse_report_annotation(
    raw: Union[str, bytes, Mapping], report_id: Optional[str] = None
) -> AnnotationGraph:
    """Parse and validate the annotation of one report.

    Args:
        raw: a JSON document or an already decoded mapping.
        report_id: id to use when the annotation has no ``id`` key.

    Returns:
        the validated graph, token text lowercased.

    Raises:
        ParseFailure: naming the offending key for malformed JSON,
            unknown labels, dangling relation targets, duplicate entity
            ids and self-loops.

    :Example:

        >>> g = parse_report_annotation('{"entities": {}}')
        >>> len(g.entities), len(g.relations)
        (0, 0)
    """
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw, object_pairs_hook=_reject_duplicate_keys)
        except json.JSONDecodeError as e:
            raise ParseFailure.from_message("Malformed JSON: {{ error }}.", error=str(e))

    if not isinstance(raw, Mapping):
        raise ParseFailure.from_message("A report annotation should be a JSON object.")
    if "entities" not in raw:
        raise ParseFailure.from_message("The annotation has no `entities` key.")
    raw_entities = raw["entities"]
    if not isinstance(raw_entities, Mapping):
        raise ParseFailure.from_message("`entities` should map entity ids to entities.")

    if raw.get("id") is not None:
        report_id = str(raw["id"])

    entities = [_parse_entity(str(eid), record) for eid, record in raw_entities.items()]
    entity_ids = {entity.id for entity in entities}
    relations = [
        relation
        for eid, record in raw_entities.items()
        for relation in _parse_relations(str(eid), record, entity_ids)
    ]

    return AnnotationGraph(tuple(entities), tuple(relations), report_id)


def serialize_report_annotation(graph: AnnotationGraph) -> dict:
    """Inverse of ``parse_report_annotation``."""
    entities = {}
    for entity in graph.entities:
        entities[entity.id] = {
            "tokens": entity.tokens,
            "label": entity.label.value,
            "start_ix": entity.start_ix,
            "end_ix": entity.end_ix,
            "relations": [
                [relation.label.value, relation.target]
                for relation in graph.outgoing(entity.id)
            ],
        }

    payload = {"entities": entities}
    if graph.report_id is not None:
        payload = {"id": graph.report_id, **payload}
    return payload


def load_annotation_corpus(path: Union[str, Path]) -> List[AnnotationGraph]:
    """Read a JSONL file with one report annotation per line.

    Reports without an ``id`` get their line number as id.
    """
    graphs = []
    for line_number, line in read_jsonl(path):
        with failure_context(
            "In `{{ path }}` line {{ line }}: ", path=str(path), line=line_number
        ):
            graphs.append(parse_report_annotation(line, report_id=str(line_number)))

    logger.info("Read %d report annotations from %s", len(graphs), path)
    return graphs


def _dot_id(value) -> str:
    return '"{}"'.format(str(value).replace("\\", "\\\\").replace('"', '\\"'))


_dot_environment = Environment(keep_trailing_newline=True, autoescape=False)
_dot_environment.filters["dot_id"] = _dot_id

DOT_TEMPLATE = _dot_environment.from_string(
    """digraph {{ name | dot_id }} {
  node [shape=box];
{% for entity in graph.entities %}  {{ entity.id | dot_id }} [label={{ (entity.tokens ~ " [" ~ entity.label.value ~ "]") | dot_id }}];
{% endfor %}{% for relation in graph.relations %}  {{ relation.source | dot_id }} -> {{ relation.target | dot_id }} [label={{ relation.label.value | dot_id }}];
{% endfor %}}
"""
)


def export_dot(graph: AnnotationGraph) -> str:
    """Render the graph in Graphviz DOT, nodes in input order.

    Node labels read ``tokens [LABEL]``, edge labels are relation labels.
    """
    return DOT_TEMPLATE.render(graph=graph, name=graph.report_id or "report")


def graph_stats(corpus: Iterable[AnnotationGraph]) -> Dict[str, int]:
    """Count entities per entity label and relations per relation label."""
    counts = Counter()
    for graph in corpus:
        counts.update(entity.label.value for entity in graph.entities)
        counts.update(relation.label.value for relation in graph.relations)

    return {
        label.value: counts[label.value]
        for label in [*EntityLabel, *RelationLabel]
    }

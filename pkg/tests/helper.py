import random
from pathlib import Path

from rgrewards.annotation import (
    AnnotationGraph,
    Entity,
    EntityLabel,
    Relation,
    RelationLabel,
    parse_report_annotation,
)

EXAMPLE_DIR = Path(__file__).resolve().parent.parent / "example"

ANAT = EntityLabel.ANAT_DP
OBS_DP = EntityLabel.OBS_DP
OBS_DA = EntityLabel.OBS_DA
MODIFY = RelationLabel.MODIFY
LOCATED_AT = RelationLabel.LOCATED_AT
SUGGESTIVE_OF = RelationLabel.SUGGESTIVE_OF

# "Increased opacity in the right lower lobe concerning for infection. No pneumothorax."
OPACITY = {
    "id": "opacity",
    "entities": {
        "1": {
            "tokens": "Increased",
            "label": "OBS-DP",
            "start_ix": 0,
            "end_ix": 0,
            "relations": [["modify", "2"]],
        },
        "2": {
            "tokens": "opacity",
            "label": "OBS-DP",
            "start_ix": 1,
            "end_ix": 1,
            "relations": [["located_at", "5"], ["suggestive_of", "6"]],
        },
        "3": {
            "tokens": "right",
            "label": "ANAT-DP",
            "start_ix": 4,
            "end_ix": 4,
            "relations": [["modify", "5"]],
        },
        "4": {
            "tokens": "lower",
            "label": "ANAT-DP",
            "start_ix": 5,
            "end_ix": 5,
            "relations": [["modify", "5"]],
        },
        "5": {
            "tokens": "lobe",
            "label": "ANAT-DP",
            "start_ix": 6,
            "end_ix": 6,
            "relations": [],
        },
        "6": {
            "tokens": "infection",
            "label": "OBS-DP",
            "start_ix": 9,
            "end_ix": 9,
            "relations": [],
        },
        "7": {
            "tokens": "pneumothorax",
            "label": "OBS-DA",
            "start_ix": 12,
            "end_ix": 12,
            "relations": [],
        },
    },
}

OPACITY_E = {
    ("lower", ANAT),
    ("infection", OBS_DP),
    ("right", ANAT),
    ("lobe", ANAT),
    ("opacity", OBS_DP),
    ("pneumothorax", OBS_DA),
    ("increased", OBS_DP),
}

OPACITY_ER = {
    ("lower", ANAT, 1),
    ("infection", OBS_DP, 0),
    ("right", ANAT, 1),
    ("lobe", ANAT, 0),
    ("opacity", OBS_DP, 1),
    ("pneumothorax", OBS_DA, 0),
    ("increased", OBS_DP, 1),
}

OPACITY_ER_BAR = {
    ("lower", ANAT, ("lower", "lobe"), MODIFY),
    ("infection", OBS_DP),
    ("right", ANAT, ("right", "lobe"), MODIFY),
    ("lobe", ANAT),
    ("opacity", OBS_DP, ("opacity", "infection"), SUGGESTIVE_OF),
    ("opacity", OBS_DP, ("opacity", "lobe"), LOCATED_AT),
    ("pneumothorax", OBS_DA),
    ("increased", OBS_DP, ("increased", "opacity"), MODIFY),
}

WORDS = ["opacity", "effusion", "lobe", "right", "base", "edema"]


def opacity_report() -> AnnotationGraph:
    return parse_report_annotation(OPACITY)


def without_relation(graph: AnnotationGraph, source: str, target: str) -> AnnotationGraph:
    """Copy of ``graph`` without the relations between two token spans."""
    tokens = {e.id: e.tokens for e in graph.entities}
    return AnnotationGraph(
        graph.entities,
        tuple(
            r
            for r in graph.relations
            if (tokens[r.source], tokens[r.target]) != (source, target)
        ),
        graph.report_id,
    )


def random_graph(rng: random.Random, max_entities: int = 6) -> AnnotationGraph:
    n = rng.randint(0, max_entities)
    entities = [
        Entity(str(i), rng.choice(WORDS), rng.choice(list(EntityLabel)), i, i + rng.randint(0, 2))
        for i in range(n)
    ]
    relations = []
    if n >= 2:
        for _ in range(rng.randint(0, 2 * n)):
            source, target = rng.sample(range(n), 2)
            relations.append(
                Relation(str(source), str(target), rng.choice(list(RelationLabel)))
            )
    return AnnotationGraph(tuple(entities), tuple(dict.fromkeys(relations)))


def shuffled(graph: AnnotationGraph, rng: random.Random) -> AnnotationGraph:
    entities = list(graph.entities)
    relations = list(graph.relations)
    rng.shuffle(entities)
    rng.shuffle(relations)
    return AnnotationGraph(tuple(entities), tuple(relations), graph.report_id)

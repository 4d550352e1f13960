"""Factual companion metrics over precomputed extractions.

Entity bags come from any entity extractor, label vectors from a
CheXpert-style labeler; neither model runs here.
"""
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from rgrewards.annotation import normalize_tokens
from rgrewards.failure import ParseFailure, UsageFailure, failure_context
from rgrewards.rewards import PRF, MacroPRF, check_aligned
from rgrewards.utils import read_jsonl

logger = logging.getLogger(__name__)

CHEXPERT_OBSERVATIONS = (
    "No Finding",
    "Enlarged Cardiomediastinum",
    "Cardiomegaly",
    "Lung Lesion",
    "Lung Opacity",
    "Edema",
    "Consolidation",
    "Pneumonia",
    "Atelectasis",
    "Pneumothorax",
    "Pleural Effusion",
    "Pleural Other",
    "Fracture",
    "Support Devices",
)

HEADLINE_OBSERVATIONS = (
    "Atelectasis",
    "Cardiomegaly",
    "Consolidation",
    "Edema",
    "Pleural Effusion",
)


class LabelStatus(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNCERTAIN = "uncertain"
    UNSPECIFIED = "unspecified"

    @classmethod
    def parse(cls, value) -> "LabelStatus":
        """Read a status name or the labeler's numeric code.

        ``1`` positive, ``0`` negative, ``-1`` uncertain, blank unspecified.
        """
        text = str(value).strip().lower()
        codes = {
            "": cls.UNSPECIFIED,
            "nan": cls.UNSPECIFIED,
            "1": cls.POSITIVE,
            "1.0": cls.POSITIVE,
            "0": cls.NEGATIVE,
            "0.0": cls.NEGATIVE,
            "-1": cls.UNCERTAIN,
            "-1.0": cls.UNCERTAIN,
        }
        if text in codes:
            return codes[text]
        return cls(text)

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LabelVector:
    statuses: Tuple[LabelStatus, ...]
    report_id: Optional[str] = None

    def __post_init__(self):
        if len(self.statuses) != len(CHEXPERT_OBSERVATIONS):
            raise ValueError(
                "A label vector has {} slots, got {}".format(
                    len(CHEXPERT_OBSERVATIONS), len(self.statuses)
                )
            )
        object.__setattr__(
            self, "statuses", tuple(LabelStatus(s) for s in self.statuses)
        )

    @classmethod
    def from_mapping(
        cls, statuses: Dict[str, Union[LabelStatus, str]], report_id: Optional[str] = None
    ) -> "LabelVector":
        """Build a vector from observation names; missing ones are unspecified."""
        unknown = set(statuses) - set(CHEXPERT_OBSERVATIONS)
        if unknown:
            raise ValueError("Unknown observations: {}".format(sorted(unknown)))
        return cls(
            tuple(
                LabelStatus.parse(statuses.get(name, LabelStatus.UNSPECIFIED.value))
                for name in CHEXPERT_OBSERVATIONS
            ),
            report_id,
        )

    def status(self, observation: str) -> LabelStatus:
        return self.statuses[CHEXPERT_OBSERVATIONS.index(observation)]

    def positives(
        self, classes: Sequence[str], uncertain_as_positive: bool = False
    ) -> np.ndarray:
        accepted = {LabelStatus.POSITIVE}
        if uncertain_as_positive:
            accepted.add(LabelStatus.UNCERTAIN)
        return np.array([self.status(c) in accepted for c in classes], dtype=bool)


@dataclass(frozen=True)
class EntityBag:
    entities: FrozenSet[str]
    report_id: Optional[str] = None

    @classmethod
    def from_strings(
        cls, strings: Iterable[str], report_id: Optional[str] = None
    ) -> "EntityBag":
        normalized = (normalize_tokens(s) for s in strings)
        return cls(frozenset(s for s in normalized if s), report_id)


def entity_set_f1(hyp: EntityBag, ref: EntityBag) -> PRF:
    """Set F-score between the entities of two reports.

    :Example:

        >>> entity_set_f1(
        ...     EntityBag.from_strings(["effusion", "opacity"]),
        ...     EntityBag.from_strings(["opacity"]),
        ... ).f1
        0.6666666666666666
    """
    return PRF.from_counts(
        len(hyp.entities & ref.entities), len(hyp.entities), len(ref.entities)
    )


def corpus_entity_f1(
    hyps: Sequence[EntityBag], refs: Sequence[EntityBag], per_example: bool = False
) -> MacroPRF:
    check_aligned(hyps, refs)
    return MacroPRF.from_items(
        [entity_set_f1(hyp, ref) for hyp, ref in zip(hyps, refs)],
        keep_items=per_example,
    )


def resolve_classes(classes: Optional[Sequence[str]] = None) -> Tuple[str, ...]:
    """Validate observation names; ``None`` means the five headline ones."""
    if classes is None:
        return HEADLINE_OBSERVATIONS
    lookup = {name.lower(): name for name in CHEXPERT_OBSERVATIONS}
    resolved = []
    for name in classes:
        key = " ".join(name.split()).lower()
        if key not in lookup:
            raise UsageFailure.from_message(
                "Unknown observation `{{ name }}`; choose from {{ known }}.",
                name=name,
                known=", ".join(CHEXPERT_OBSERVATIONS),
            )
        if lookup[key] not in resolved:
            resolved.append(lookup[key])
    if not resolved:
        raise UsageFailure.from_message("Select at least one observation.")
    return tuple(resolved)


@dataclass(frozen=True)
class ChexbertResult:
    classes: Tuple[str, ...]
    per_class: Dict[str, PRF]
    micro: PRF
    macro: MacroPRF

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "micro": self.micro.to_dict(),
            "macro": self.macro.to_dict(),
            "per_class": {name: prf.to_dict() for name, prf in self.per_class.items()},
        }


def chexbert_f1(
    hyps: Sequence[LabelVector],
    refs: Sequence[LabelVector],
    classes: Optional[Sequence[str]] = None,
    uncertain_as_positive: bool = False,
) -> ChexbertResult:
    """F1 between the labels of generated and reference reports.

    Each slot is binarized as positive against everything else (the
    uncertain status too, unless ``uncertain_as_positive``). Counts are
    pooled over the corpus per class; the micro score pools them over
    the classes as well. A class that no report is positive on scores 1.

    Raises:
        AlignmentFailure: the sequences differ in length.
        UsageFailure: an unknown class name or an empty corpus.
    """
    classes = resolve_classes(classes)
    check_aligned(hyps, refs)

    hyp_pos = np.stack([v.positives(classes, uncertain_as_positive) for v in hyps])
    ref_pos = np.stack([v.positives(classes, uncertain_as_positive) for v in refs])

    tp = np.sum(hyp_pos & ref_pos, axis=0)
    fp = np.sum(hyp_pos & ~ref_pos, axis=0)
    fn = np.sum(~hyp_pos & ref_pos, axis=0)

    per_class = {
        name: PRF.from_counts(tp[i], tp[i] + fp[i], tp[i] + fn[i])
        for i, name in enumerate(classes)
    }
    micro = PRF.from_counts(tp.sum(), tp.sum() + fp.sum(), tp.sum() + fn.sum())
    macro = MacroPRF.from_items(list(per_class.values()))
    return ChexbertResult(classes, per_class, micro, macro)


def load_label_csv(path: Union[str, Path]) -> List[LabelVector]:
    """Read a label CSV: a report id column and the 14 observation columns.

    The id column is the one column that is not an observation.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseFailure.from_message(
            "Cannot read `{{ path }}` as CSV: {{ error }}.", path=str(path), error=str(e)
        )
    extra = [c for c in frame.columns if c not in CHEXPERT_OBSERVATIONS]
    missing = [c for c in CHEXPERT_OBSERVATIONS if c not in frame.columns]
    if missing:
        raise ParseFailure.from_message(
            "`{{ path }}` lacks the observation columns {{ missing }}.",
            path=str(path),
            missing=", ".join(missing),
        )
    if len(extra) != 1:
        raise ParseFailure.from_message(
            "`{{ path }}` should have one report id column besides the "
            "observations, found {{ extra }}.",
            path=str(path),
            extra=", ".join(extra) or "none",
        )
    id_column = extra[0]

    vectors = []
    for row_number, values in enumerate(frame.to_dict(orient="records"), start=2):
        statuses = []
        for name in CHEXPERT_OBSERVATIONS:
            try:
                statuses.append(LabelStatus.parse(values[name]))
            except ValueError:
                raise ParseFailure.from_message(
                    "In `{{ path }}` line {{ line }}: `{{ value }}` is not a label "
                    "status for `{{ column }}`.",
                    path=str(path),
                    line=row_number,
                    value=values[name],
                    column=name,
                )
        vectors.append(LabelVector(tuple(statuses), str(values[id_column])))

    logger.info("Read %d label vectors from %s", len(vectors), path)
    return vectors


def load_entity_bags(path: Union[str, Path]) -> List[EntityBag]:
    """Read JSONL entity bags: ``{"id": ..., "entities": [...]}`` per line."""
    bags = []
    for line_number, line in read_jsonl(path):
        with failure_context(
            "In `{{ path }}` line {{ line }}: ", path=str(path), line=line_number
        ):
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseFailure.from_message(
                    "Malformed JSON: {{ error }}.", error=str(e)
                )
            entities = raw.get("entities") if isinstance(raw, dict) else None
            if not isinstance(entities, list) or not all(
                isinstance(e, str) for e in entities
            ):
                raise ParseFailure.from_message(
                    "`entities` should be a list of strings."
                )
            report_id = raw.get("id")
            bags.append(
                EntityBag.from_strings(
                    entities, str(report_id if report_id is not None else line_number)
                )
            )
    return bags

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

from rgrewards.annotation import (
    AnnotationGraph,
    Entity,
    EntityLabel,
    Relation,
    RelationLabel,
    normalize_tokens,
)
from rgrewards.failure import ParseFailure

DEFAULT_LEXICON = Path(__file__).with_name("lexicon.json")


@dataclass(frozen=True)
class LexiconAnnotator:
    """Deterministic rule-based annotator for short generated reports.

    Every lexicon token becomes a one-token entity; the rules below add
    relations. ``window`` bounds how far a rule looks, and no rule looks
    across a sentence end.

    - consecutive anatomy tokens each ``modify`` the last one of the run
    - an observation directly followed by an observation ``modify`` it
    - an observation is ``located_at`` the first anatomy run that starts
      within ``window`` tokens after it, or else the anatomy run that
      ends right before it
    - a suggestive cue links the last observation before it with the
      first observation within ``window`` tokens after it
      (``suggestive_of``)
    - a negation cue within ``window`` tokens before an observation
      makes it definitely absent, an uncertainty cue makes it uncertain

    :Example:

        >>> annotator = LexiconAnnotator.default()
        >>> graph = annotator.annotate("right lobe opacity".split())
        >>> [(r.source, r.target, r.label.value) for r in graph.relations]
        [('0', '1', 'modify'), ('2', '1', 'located_at')]
    """

    lexicon: Mapping[str, EntityLabel]
    window: int = 3
    negation_cues: FrozenSet[str] = frozenset()
    uncertainty_cues: FrozenSet[str] = frozenset()
    suggestive_cues: FrozenSet[str] = frozenset()
    connectives: Tuple[str, ...] = ()
    sentence_end: str = "."

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("The rule window must be at least 1 token")

    @classmethod
    def from_dict(cls, raw: Mapping) -> "LexiconAnnotator":
        try:
            lexicon = {
                normalize_tokens(token): EntityLabel(label)
                for token, label in raw["lexicon"].items()
            }
            return cls(
                lexicon=lexicon,
                window=int(raw.get("window", 3)),
                negation_cues=frozenset(raw.get("negation_cues", [])),
                uncertainty_cues=frozenset(raw.get("uncertainty_cues", [])),
                suggestive_cues=frozenset(raw.get("suggestive_cues", [])),
                connectives=tuple(raw.get("connectives", [])),
                sentence_end=raw.get("sentence_end", "."),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise ParseFailure.from_message(
                "Invalid annotator lexicon: {{ error }}.", error=repr(e)
            )

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "LexiconAnnotator":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParseFailure.from_message(
                "Malformed JSON in `{{ path }}`: {{ error }}.", path=str(path), error=str(e)
            )
        return cls.from_dict(raw)

    @classmethod
    def default(cls) -> "LexiconAnnotator":
        return cls.from_json(DEFAULT_LEXICON)

    @property
    def vocabulary(self) -> Tuple[str, ...]:
        """Every token the rules know, in a fixed order."""
        words = [
            *self.lexicon,
            *sorted(self.negation_cues),
            *sorted(self.uncertainty_cues),
            *sorted(self.suggestive_cues),
            *self.connectives,
        ]
        return tuple(dict.fromkeys(words))

    def annotate(
        self, tokens: Sequence[str], report_id: Optional[str] = None
    ) -> AnnotationGraph:
        tokens = [normalize_tokens(token) for token in tokens]
        sentence = self._sentence_numbers(tokens)

        labels = {}  # type: Dict[int, EntityLabel]
        for i, token in enumerate(tokens):
            label = self.lexicon.get(token)
            if label is not None and label.is_observation:
                label = self._presence(tokens, sentence, i, label)
            if label is not None:
                labels[i] = label

        def is_anatomy(j):
            return j in labels and labels[j].is_anatomy

        def is_observation(j):
            return j in labels and labels[j].is_observation

        def in_window(i, j):
            return 0 <= j < len(tokens) and sentence[j] == sentence[i]

        def run_head(j):
            while is_anatomy(j + 1):
                j += 1
            return j

        relations = {}  # type: Dict[Tuple[int, int, RelationLabel], None]

        for i in sorted(labels):
            if is_anatomy(i) and is_anatomy(i + 1):
                relations[i, run_head(i), RelationLabel.MODIFY] = None

            if not is_observation(i):
                continue
            if is_observation(i + 1):
                relations[i, i + 1, RelationLabel.MODIFY] = None
                continue

            forward = [
                j
                for j in range(i + 1, i + self.window + 1)
                if in_window(i, j) and is_anatomy(j)
            ]
            if forward:
                relations[i, run_head(forward[0]), RelationLabel.LOCATED_AT] = None
            elif in_window(i, i - 1) and is_anatomy(i - 1):
                relations[i, i - 1, RelationLabel.LOCATED_AT] = None

        for c, token in enumerate(tokens):
            if token not in self.suggestive_cues:
                continue
            before = [j for j in range(c) if in_window(c, j) and is_observation(j)]
            after = [
                j
                for j in range(c + 1, c + self.window + 1)
                if in_window(c, j) and is_observation(j)
            ]
            if before and after:
                target = after[0]
                while is_observation(target + 1):
                    target += 1
                relations[before[-1], target, RelationLabel.SUGGESTIVE_OF] = None

        entities = [
            Entity(str(i), tokens[i], label, i, i) for i, label in sorted(labels.items())
        ]
        return AnnotationGraph(
            tuple(entities),
            tuple(Relation(str(s), str(t), label) for s, t, label in relations),
            report_id,
        )

    def _sentence_numbers(self, tokens: List[str]) -> List[int]:
        numbers, current = [], 0
        for token in tokens:
            numbers.append(current)
            if token == self.sentence_end:
                current += 1
        return numbers

    def _presence(
        self, tokens: List[str], sentence: List[int], i: int, label: EntityLabel
    ) -> EntityLabel:
        cues = {
            tokens[j]
            for j in range(max(0, i - self.window), i)
            if sentence[j] == sentence[i]
        }
        if cues & self.negation_cues:
            return EntityLabel.OBS_DA
        if cues & self.uncertainty_cues:
            return EntityLabel.OBS_U
        return label

"""Tabular bigram policy for the SCST demonstrator.

The policy holds one row of logits per previous token, plus a start row,
and one column per candidate token. Sampling stops at the end marker or
after ``max_len`` body tokens, whichever comes first; a sequence cut at
``max_len`` makes no end-marker decision.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import log_softmax

END_OF_SEQUENCE = "<eos>"

# Logit gap large enough for exp(-gap) to underflow to exactly 0
DELTA_STRENGTH = 1000.0


@dataclass(frozen=True)
class ToyVocabulary:
    tokens: Tuple[str, ...]
    end_marker: str = END_OF_SEQUENCE
    _index: Dict[str, int] = field(
        default=None, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        tokens = tuple(self.tokens)
        if len(set(tokens)) != len(tokens):
            raise ValueError("Vocabulary tokens must be unique")
        if self.end_marker not in tokens:
            raise ValueError(
                "The vocabulary needs the end marker {}".format(self.end_marker)
            )
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(tokens)})

    @classmethod
    def from_words(
        cls, words: Sequence[str], end_marker: str = END_OF_SEQUENCE
    ) -> "ToyVocabulary":
        """Vocabulary with the end marker first, then ``words`` in order."""
        return cls((end_marker, *(w for w in dict.fromkeys(words) if w != end_marker)), end_marker)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self._index

    @property
    def end_index(self) -> int:
        return self._index[self.end_marker]

    @property
    def words(self) -> Tuple[str, ...]:
        """Tokens other than the end marker."""
        return tuple(t for t in self.tokens if t != self.end_marker)

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise ValueError("`{}` is not in the vocabulary".format(token))

    def encode(self, tokens: Sequence[str]) -> Tuple[int, ...]:
        return tuple(self.index(t) for t in tokens)

    def decode(self, indices: Sequence[int]) -> Tuple[str, ...]:
        return tuple(self.tokens[i] for i in indices)


@dataclass(frozen=True)
class Generation:
    """A decoded body, without the end marker, and its log-probability."""

    indices: Tuple[int, ...]
    tokens: Tuple[str, ...]
    log_prob: float
    terminated: bool
    start_row: int
    end_index: int

    @property
    def decisions(self) -> List[Tuple[int, int]]:
        """``(row, chosen column)`` for every sampling step."""
        rows = [self.start_row, *self.indices]
        choices = [*self.indices, *([self.end_index] if self.terminated else [])]
        return list(zip(rows, choices))

    @property
    def mean_log_prob(self) -> float:
        """Per-decision average log-likelihood; 0 for an empty decision list."""
        decisions = len(self.decisions)
        return self.log_prob / decisions if decisions else 0.0


@dataclass
class ToyPolicy:
    vocabulary: ToyVocabulary
    logits: np.ndarray
    temperature: float = 1.0
    max_len: int = 8

    def __post_init__(self):
        self.logits = np.array(self.logits, dtype=float)
        expected = (len(self.vocabulary) + 1, len(self.vocabulary))
        if self.logits.shape != expected:
            raise ValueError(
                "Logits should have shape {}, got {}".format(expected, self.logits.shape)
            )
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("Logits must be finite")
        if not self.temperature > 0:
            raise ValueError("Temperature must be positive")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")

    @classmethod
    def uniform(
        cls, vocabulary: ToyVocabulary, temperature: float = 1.0, max_len: int = 8
    ) -> "ToyPolicy":
        return cls(
            vocabulary,
            np.zeros((len(vocabulary) + 1, len(vocabulary))),
            temperature,
            max_len,
        )

    @classmethod
    def delta(
        cls,
        vocabulary: ToyVocabulary,
        sequence: Sequence[str],
        max_len: Optional[int] = None,
        strength: float = DELTA_STRENGTH,
        temperature: float = 1.0,
    ) -> "ToyPolicy":
        """Policy that decodes ``sequence`` (then the end marker) with probability 1.

        Every step of the sequence gets logit ``strength`` and every other
        choice 0; a small ``strength`` only tilts the policy towards it.

        Raises:
            ValueError: the sequence needs two different successors for
                the same token, which a bigram table cannot express.
        """
        indices = vocabulary.encode(sequence)
        if max_len is None:
            max_len = len(indices) + 1
        policy = cls.uniform(vocabulary, temperature=temperature, max_len=max_len)
        rows = [policy.start_row, *indices]
        choices = [*indices, vocabulary.end_index]
        chosen = {}
        for row, choice in zip(rows, choices):
            if chosen.setdefault(row, choice) != choice:
                raise ValueError(
                    "`{}` cannot be followed by two different tokens".format(
                        vocabulary.tokens[row] if row < len(vocabulary) else "start"
                    )
                )
            policy.logits[row, choice] = strength
        return policy

    @property
    def start_row(self) -> int:
        return len(self.vocabulary)

    def log_probs(self, row: int) -> np.ndarray:
        return log_softmax(self.logits[row] / self.temperature)

    def with_logits(self, logits: np.ndarray) -> "ToyPolicy":
        return ToyPolicy(self.vocabulary, logits, self.temperature, self.max_len)

    def log_prob_of(self, generation: Generation) -> float:
        """Log-probability of a decoded sequence under this policy."""
        return float(
            sum(self.log_probs(row)[choice] for row, choice in generation.decisions)
        )


def _decode(policy: ToyPolicy, choose: Callable[[np.ndarray], int]) -> Generation:
    end = policy.vocabulary.end_index
    indices = []
    log_prob = 0.0
    row = policy.start_row
    terminated = False

    while len(indices) < policy.max_len:
        log_probs = policy.log_probs(row)
        choice = choose(log_probs)
        log_prob += float(log_probs[choice])
        if choice == end:
            terminated = True
            break
        indices.append(choice)
        row = choice

    return Generation(
        tuple(indices),
        policy.vocabulary.decode(indices),
        log_prob,
        terminated,
        policy.start_row,
        end,
    )


def sample_sequence(
    policy: ToyPolicy, rng: Union[int, np.random.Generator, None] = None
) -> Generation:
    """Sample a sequence token by token.

    Args:
        rng: a seed or a generator; the same seed gives the same sequence.
    """
    rng = np.random.default_rng(rng)
    return _decode(
        policy,
        lambda log_probs: int(rng.choice(len(log_probs), p=np.exp(log_probs))),
    )


def greedy_sequence(policy: ToyPolicy) -> Generation:
    """Decode the most probable token at each step; ties go to the lowest index."""
    return _decode(policy, lambda log_probs: int(np.argmax(log_probs)))


def log_prob_gradient(policy: ToyPolicy, generation: Generation) -> np.ndarray:
    """Gradient of ``log p(generation)`` with respect to the logits."""
    gradient = np.zeros_like(policy.logits)
    for row, choice in generation.decisions:
        gradient[row] -= np.exp(policy.log_probs(row))
        gradient[row, choice] += 1.0
    return gradient / policy.temperature


def policy_gradient(
    policy: ToyPolicy, generation: Generation, advantage: float
) -> np.ndarray:
    if advantage == 0:
        return np.zeros_like(policy.logits)
    return advantage * log_prob_gradient(policy, generation)


def scst_gradient(
    policy: ToyPolicy,
    sample: Generation,
    greedy: Generation,
    reward_fn: Callable[[Generation], float],
) -> np.ndarray:
    """Self-critical policy gradient of one sample.

    The greedy decode's reward is the baseline. The result is the ascent
    direction ``(r(sample) - r(greedy)) * grad log p(sample)``, the
    negative gradient of the surrogate loss
    ``-(r(sample) - r(greedy)) * log p(sample)``.
    """
    return policy_gradient(policy, sample, reward_fn(sample) - reward_fn(greedy))

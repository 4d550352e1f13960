"""Corpus BLEU-4, ROUGE-L and CIDEr-D over single-reference corpora.

All metrics take token tuples produced by :func:`tokenize`: text is
lowercased and split into runs of word characters and runs of
punctuation, so ``"Effusion."`` becomes ``("effusion", ".")``.
"""
import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
from nltk.tokenize import wordpunct_tokenize
from nltk.translate.bleu_score import corpus_bleu, modified_precision
from nltk.util import ngrams
from pycocoevalcap.cider.cider_scorer import CiderScorer
from pycocoevalcap.rouge.rouge import Rouge

from rgrewards.rewards import check_aligned

logger = logging.getLogger(__name__)

TokenizedText = Tuple[str, ...]

MAX_ORDER = 4
ROUGE_BETA = 1.2
CIDER_SIGMA = 6.0


def tokenize(text: str) -> TokenizedText:
    return tuple(wordpunct_tokenize(text.lower()))


@dataclass(frozen=True)
class NgramProfile:
    """n-gram counts of one text, orders 1 to ``n``."""

    n: int
    counts: Dict[Tuple[str, ...], int] = field(default_factory=dict)

    @classmethod
    def from_tokens(cls, tokens: TokenizedText, n: int = MAX_ORDER) -> "NgramProfile":
        counts = Counter()
        for order in range(1, n + 1):
            counts.update(ngrams(tokens, order))
        return cls(n, dict(counts))

    def __bool__(self):
        return bool(self.counts)


def reference_idf(refs: Sequence[TokenizedText], n: int = MAX_ORDER) -> Dict[Tuple[str, ...], float]:
    """Inverse document frequency of every reference n-gram.

    ``log(N) - log(df)``: an n-gram found in every reference weighs 0.
    """
    document_frequency = Counter()
    for ref in refs:
        document_frequency.update(NgramProfile.from_tokens(ref, n).counts.keys())
    log_n = math.log(len(refs)) if refs else 0.0
    return {gram: log_n - math.log(df) for gram, df in document_frequency.items()}


def bleu4(hyps: Sequence[TokenizedText], refs: Sequence[TokenizedText]) -> float:
    """Corpus BLEU with uniform weights over 1- to 4-grams.

    No smoothing: a corpus without a single match for some n-gram order
    scores exactly 0.

    :Example:

        >>> round(bleu4([tokenize("a b c d")], [tokenize("a b c d e")]), 4)
        0.7788
        >>> bleu4([tokenize("the cat sat")], [tokenize("the dog sat")])
        0.0
    """
    check_aligned(hyps, refs)
    references = [[list(ref)] for ref in refs]
    hypotheses = [list(hyp) for hyp in hyps]

    # nltk stands in a tiny positive precision for an unmatched order
    for order in range(1, MAX_ORDER + 1):
        matches = sum(
            modified_precision(ref, hyp, order).numerator
            for ref, hyp in zip(references, hypotheses)
        )
        if matches == 0:
            return 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        score = corpus_bleu(references, hypotheses, weights=(1 / MAX_ORDER,) * MAX_ORDER)
    return float(score)


def rouge_l_pair(hyp: TokenizedText, ref: TokenizedText, beta: float = ROUGE_BETA) -> float:
    scorer = Rouge()
    scorer.beta = beta
    return float(scorer.calc_score([" ".join(hyp)], [" ".join(ref)]))


def rouge_l_scores(
    hyps: Sequence[TokenizedText], refs: Sequence[TokenizedText], beta: float = ROUGE_BETA
) -> np.ndarray:
    check_aligned(hyps, refs)
    return np.array([rouge_l_pair(hyp, ref, beta) for hyp, ref in zip(hyps, refs)])


def rouge_l(
    hyps: Sequence[TokenizedText], refs: Sequence[TokenizedText], beta: float = ROUGE_BETA
) -> float:
    """Mean LCS F-measure; ``beta`` weighs recall over precision."""
    return float(rouge_l_scores(hyps, refs, beta).mean())


def cider_d_scores(
    hyps: Sequence[TokenizedText],
    refs: Sequence[TokenizedText],
    sigma: float = CIDER_SIGMA,
) -> np.ndarray:
    """Per-example CIDEr-D, idf taken from the reference corpus.

    Scores are clipped tf-idf cosines averaged over 1- to 4-grams, with a
    gaussian length penalty, times 10. Length is measured the way the
    COCO scorer measures it.

    An n-gram found in every reference weighs nothing, so a corpus of
    one line, or of identical references, scores 0 throughout.
    """
    check_aligned(hyps, refs)
    if not any(NgramProfile.from_tokens(ref) for ref in refs):
        logger.warning("All references are empty; CIDEr-D is 0 for every example")
        return np.zeros(len(hyps))
    if not any(reference_idf(refs).values()):
        logger.warning(
            "Every reference n-gram occurs in all %d references, so its idf is 0; "
            "CIDEr-D is 0 for every example",
            len(refs),
        )
        return np.zeros(len(hyps))

    scorer = CiderScorer(n=MAX_ORDER, sigma=sigma)
    for hyp, ref in zip(hyps, refs):
        scorer += (" ".join(hyp), [" ".join(ref)])
    _, scores = scorer.compute_score()
    return np.asarray(scores, dtype=float)


def cider_d(
    hyps: Sequence[TokenizedText],
    refs: Sequence[TokenizedText],
    sigma: float = CIDER_SIGMA,
) -> float:
    return float(cider_d_scores(hyps, refs, sigma).mean())


NLG_METRICS = {"bleu4": bleu4, "rougel": rouge_l, "ciderd": cider_d}

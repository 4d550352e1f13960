from rgrewards.scst.annotator import LexiconAnnotator
from rgrewards.scst.policy import (
    ToyPolicy,
    ToyVocabulary,
    greedy_sequence,
    sample_sequence,
    scst_gradient,
)
from rgrewards.scst.training import (
    CompositeReward,
    SCSTConfig,
    ToyTask,
    attainable_maximum,
    train_scst,
)

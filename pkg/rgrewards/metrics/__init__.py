from rgrewards.metrics.nlg import bleu4, cider_d, rouge_l, tokenize
from rgrewards.metrics.factual import chexbert_f1, entity_set_f1

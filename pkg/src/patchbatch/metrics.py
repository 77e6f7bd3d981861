"""Ranking metrics."""
import numpy as np
from scipy.stats import rankdata

from .errors import DomainError


def auc(scores, labels):
    """Area under the ROC curve for distance-like scores.

    Returns ``P(score_nonmatch > score_match)`` with ties counted as one
    half, i.e. the normalised Mann-Whitney U of the non-matching class.
    Label 1 marks non-matching pairs, label 0 matching ones.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DomainError("scores and labels must be equal-length vectors")
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = labels.size - n1
    if n0 == 0 or n1 == 0:
        raise DomainError("AUC needs both matching and non-matching samples")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n0 * n1))

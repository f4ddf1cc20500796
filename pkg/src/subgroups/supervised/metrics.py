import numpy as np
from scipy.stats import rankdata

from ..errors import SingleClass


def auc_roc(scores, labels) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic; tied scores count one half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n1 = int(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise SingleClass("AUC needs both positive and negative labels")
    ranks = rankdata(s)  # average ranks for ties
    u = ranks[y].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def accuracy(predicted, labels) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(labels)))

"""
Classification losses over [N x 2] logits.
"""

import numpy as np

from . import autodiff as ad


def cross_entropy(logits, labels, class_weights=None):
    """
    Mean negative log-likelihood of the labels under softmax(logits),
    computed through log-sum-exp.

    :param logits: an [N x K] Tensor.
    :param labels: N integer labels in [0, K).
    :param class_weights: optional length-K weights; with weights the mean
                          is taken as sum(w_y * nll) / sum(w_y).
    :return: a scalar Tensor.
    """
    logits = ad.as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ad.ShapeError(f"logits {logits.shape} and labels {labels.shape} disagree")
    if labels.size == 0:
        raise ValueError("cross_entropy of an empty batch")
    num_classes = logits.shape[1]
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError(f"labels must be in [0, {num_classes}), got {labels.tolist()}")

    picked = ad.log_softmax(logits, axis=-1)[np.arange(len(labels)), labels]
    if class_weights is None:
        return -ad.reduce_mean(picked)
    w = np.asarray(class_weights, dtype=np.float64)[labels]
    return -ad.reduce_sum(picked * w) / float(w.sum())


def balanced_class_weights(labels, num_classes=2):
    """
    Weights inversely proportional to class frequency, normalized so a
    balanced label set gets weight 1 for every class. Absent classes get 0.
    """
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_classes)
    total = counts.sum()
    weights = np.zeros(num_classes, dtype=np.float64)
    present = counts > 0
    weights[present] = total / (present.sum() * counts[present])
    return weights

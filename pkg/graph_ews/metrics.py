"""
Confusion matrices and precision / recall / F1 / accuracy under either
choice of positive class.

A metric whose denominator is zero is undefined and returned as None.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Label

METRIC_NAMES = ("precision", "recall", "f1", "accuracy")

CONTEXT_COLUMNS = ("model", "w", "ws", "S", "T", "network", "seed")

METRIC_COLUMNS = CONTEXT_COLUMNS + (
    "positive_class",
    "precision",
    "recall",
    "f1",
    "accuracy",
    "n_test",
    "n_undefined",
)

POSITIVE_CLASS_NAMES = {Label.RECOVERY: "Recovery", Label.COLLAPSE: "Collapse"}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int
    positive_class: Label = Label.RECOVERY

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"confusion count {name} must be >= 0, got {getattr(self, name)}")

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self):
        other = Label.COLLAPSE if self.positive_class is Label.RECOVERY else Label.RECOVERY
        return ConfusionMatrix(
            tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp, positive_class=other
        )


@dataclass(frozen=True)
class MetricReport:
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    accuracy: Optional[float]
    positive_class: Label
    n_test: int = 0

    @property
    def n_undefined(self):
        return sum(getattr(self, m) is None for m in METRIC_NAMES)

    def to_dict(self):
        return dict(
            positive_class=POSITIVE_CLASS_NAMES[self.positive_class],
            precision=self.precision,
            recall=self.recall,
            f1=self.f1,
            accuracy=self.accuracy,
            n_test=self.n_test,
            n_undefined=self.n_undefined,
        )


def _check_inputs(predictions, labels):
    predictions = np.asarray(predictions, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(predictions) != len(labels):
        raise ValueError(
            f"{len(predictions)} predictions but {len(labels)} labels"
        )
    if len(labels) == 0:
        raise ValueError("cannot score an empty prediction set")
    allowed = (int(Label.RECOVERY), int(Label.COLLAPSE))
    if not (np.isin(predictions, allowed).all() and np.isin(labels, allowed).all()):
        raise ValueError("predictions and labels must be 0 (Recovery) or 1 (Collapse)")
    return predictions, labels


def confusion(predictions, labels, positive_class=Label.RECOVERY):
    predictions, labels = _check_inputs(predictions, labels)
    pos = int(positive_class)
    pred_pos = predictions == pos
    true_pos = labels == pos
    return ConfusionMatrix(
        tp=int((pred_pos & true_pos).sum()),
        fp=int((pred_pos & ~true_pos).sum()),
        tn=int((~pred_pos & ~true_pos).sum()),
        fn=int((~pred_pos & true_pos).sum()),
        positive_class=Label(positive_class),
    )


def _ratio(num, den):
    return None if den == 0 else num / den


def precision(cm: ConfusionMatrix):
    return _ratio(cm.tp, cm.tp + cm.fp)


def recall(cm: ConfusionMatrix):
    return _ratio(cm.tp, cm.tp + cm.fn)


def f1(cm: ConfusionMatrix):
    return _ratio(cm.tp, cm.tp + 0.5 * (cm.fp + cm.fn))


def accuracy(cm: ConfusionMatrix):
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def report(cm: ConfusionMatrix):
    return MetricReport(
        precision=precision(cm),
        recall=recall(cm),
        f1=f1(cm),
        accuracy=accuracy(cm),
        positive_class=cm.positive_class,
        n_test=cm.total,
    )


def dual_report(predictions, labels):
    """
    :return: (recovery-positive report, collapse-positive report).
    """
    cm = confusion(predictions, labels, Label.RECOVERY)
    return report(cm), report(cm.swapped())


def undefined_reports(n_test=0):
    """
    Reports for a cell that could not be scored, e.g. a single-class
    dataset.
    """
    return tuple(
        MetricReport(None, None, None, None, positive_class=label, n_test=n_test)
        for label in (Label.RECOVERY, Label.COLLAPSE)
    )


def report_rows(reports, context):
    """
    Flatten reports into CSV rows.

    :param reports: iterable of MetricReport.
    :param context: dict with the CONTEXT_COLUMNS keys (model, w, ws, S, T,
                    network, seed).
    """
    missing = [c for c in CONTEXT_COLUMNS if c not in context]
    if missing:
        raise ValueError(f"report context is missing {missing}")
    rows = []
    for r in reports:
        row = {c: context[c] for c in CONTEXT_COLUMNS}
        row.update(r.to_dict())
        rows.append(row)
    return rows


def _as_float(v):
    return None if v is None or v == "undefined" else float(v)


def aggregate(rows, keys=("model", "w", "ws", "S", "T", "network", "positive_class")):
    """
    Mean and standard deviation of every metric across the rows sharing
    `keys` (usually the seed replicates). Undefined values are skipped and
    counted in n_undefined; a metric with no defined value stays None.
    The standard deviation uses ddof=1 and is 0 for a single value.
    """
    groups = {}
    for row in rows:
        groups.setdefault(tuple(str(row[k]) for k in keys), []).append(row)

    out = []
    for group_key, members in groups.items():
        agg = dict(zip(keys, (members[0][k] for k in keys)))
        n_undefined = 0
        for m in METRIC_NAMES:
            values = [_as_float(r[m]) for r in members]
            defined = [v for v in values if v is not None]
            n_undefined += len(values) - len(defined)
            if defined:
                agg[f"{m}_mean"] = float(np.mean(defined))
                agg[f"{m}_std"] = float(np.std(defined, ddof=1)) if len(defined) > 1 else 0.0
            else:
                agg[f"{m}_mean"] = None
                agg[f"{m}_std"] = None
        agg["n_rows"] = len(members)
        agg["n_undefined"] = n_undefined
        out.append(agg)
    return out


def aggregate_columns(keys=("model", "w", "ws", "S", "T", "network", "positive_class")):
    cols = list(keys)
    for m in METRIC_NAMES:
        cols += [f"{m}_mean", f"{m}_std"]
    return cols + ["n_rows", "n_undefined"]

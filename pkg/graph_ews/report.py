"""
Plot-ready long-format tables derived from an experiment's ReportTable.

    fig6          accuracy by network x S x T x w x ws x model
    fig6f         accuracy averaged over models per (w, ws)
    fig7          accuracy by S / T per model and window
    fig7_models   fig7 averaged over windows
    fig7_windows  fig7 averaged over models
    fig8          outcome statistics and accuracy per (network, w)
    fig9 / fig10  precision / recall / F1 with recovery / collapse as the
                  positive class, with class fractions
"""

import blobfile as bf
import numpy as np

from .harness import ReportTable
from .utils import create_folders, write_csv

FIGURES = ("fig6", "fig6f", "fig7", "fig7_models", "fig7_windows", "fig8", "fig9", "fig10")

_CELL = ("network", "S", "T", "w", "ws")


def _num(v):
    return None if v is None or v == "undefined" else float(v)


def _distinct(rows, key):
    return {str(r[key]) for r in rows}


def _require(figure_id, table: ReportTable, axes):
    if not table.rows:
        raise ValueError(f"{figure_id} needs metric rows; the table is empty")
    missing = [a for a in axes if len(_distinct(table.rows, a)) < 2]
    if missing:
        raise ValueError(
            f"{figure_id} needs axes missing from the table: {', '.join(missing)}"
        )


def _mean_std(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None, 0
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), std, len(values)


def _group(rows, keys):
    groups = {}
    for r in rows:
        groups.setdefault(tuple(str(r[k]) for k in keys), []).append(r)
    return groups


def _accuracy_rows(table):
    # Accuracy does not depend on the positive class.
    return [r for r in table.rows if r["positive_class"] == "Recovery"]


def _seed_means(rows, keys, metric):
    """
    Average `metric` within each (keys, seed) group first, so the spread
    is taken over replicates.
    """
    per_seed = {}
    for k, members in _group(rows, keys + ("seed",)).items():
        mean, _, _ = _mean_std([_num(r[metric]) for r in members])
        per_seed.setdefault(k[:-1], []).append(mean)
    return per_seed


def fig6(table):
    out = []
    for k, members in _group(_accuracy_rows(table), _CELL + ("model",)).items():
        mean, std, count = _mean_std([_num(r["accuracy"]) for r in members])
        row = dict(zip(_CELL + ("model",), k))
        row.update(accuracy_mean=mean, accuracy_std=std, n_replicates=count)
        out.append(row)
    return out, list(_CELL) + ["model", "accuracy_mean", "accuracy_std", "n_replicates"]


def fig6f(table):
    per_model, _ = fig6(table)
    out = []
    for k, members in _group(per_model, _CELL).items():
        mean, _, count = _mean_std([_num(r["accuracy_mean"]) for r in members])
        out.append(dict(zip(_CELL, k), accuracy_mean=mean, n_models=count))
    return out, list(_CELL) + ["accuracy_mean", "n_models"]


def _fig7_by(table, keys):
    out = []
    for k, means in _seed_means(_accuracy_rows(table), keys, "accuracy").items():
        mean, std, count = _mean_std(means)
        out.append(dict(zip(keys, k), accuracy_mean=mean, accuracy_std=std, n_replicates=count))
    return out, list(keys) + ["accuracy_mean", "accuracy_std", "n_replicates"]


def fig7(table):
    _require("fig7", table, [])
    if len(_distinct(table.rows, "S")) < 2 and len(_distinct(table.rows, "T")) < 2:
        raise ValueError("fig7 needs axes missing from the table: S or T")
    return _fig7_by(table, ("network", "w", "S", "T", "model", "ws"))


def fig7_models(table):
    fig7(table)
    return _fig7_by(table, ("network", "w", "S", "T", "model"))


def fig7_windows(table):
    fig7(table)
    return _fig7_by(table, ("network", "w", "S", "T", "ws"))


def fig8(table):
    _require("fig8", table, ["network"])
    keys = ("network", "w")
    acc = _seed_means(_accuracy_rows(table), keys, "accuracy")
    outcomes = _group(table.outcomes, keys)
    out = []
    for k in sorted(acc, key=lambda k: (k[0], float(k[1]))):
        members = outcomes.get(k, [])
        row = dict(zip(keys, k))
        for name in ("p_collapse", "mean_recovery_time", "mean_collapse_time"):
            mean, std, _ = _mean_std([_num(r.get(name)) for r in members])
            row[f"{name}_mean"] = mean
            row[f"{name}_std"] = std
        row["accuracy_mean"], row["accuracy_std"], row["n_replicates"] = _mean_std(acc[k])
        out.append(row)
    columns = list(keys)
    for name in ("p_collapse", "mean_recovery_time", "mean_collapse_time", "accuracy"):
        columns += [f"{name}_mean", f"{name}_std"]
    return out, columns + ["n_replicates"]


def _prf_panel(table, positive_class):
    rows = [r for r in table.rows if r["positive_class"] == positive_class]
    fractions = _group(table.outcomes, ("network", "S", "T", "w"))
    out = []
    for k, members in _group(rows, _CELL + ("model",)).items():
        row = dict(zip(_CELL + ("model",), k))
        for m in ("precision", "recall", "f1"):
            values = [_num(r[m]) for r in members]
            mean, std, _ = _mean_std(values)
            row[f"{m}_mean"] = mean
            row[f"{m}_std"] = std
        row["n_undefined"] = sum(int(r["n_undefined"]) for r in members)
        outcome = fractions.get(k[:4], [])
        row["recovery_fraction"], _, _ = _mean_std([_num(o.get("recovery_fraction")) for o in outcome])
        row["collapse_fraction"], _, _ = _mean_std([_num(o.get("collapse_fraction")) for o in outcome])
        out.append(row)
    columns = list(_CELL) + ["model"]
    for m in ("precision", "recall", "f1"):
        columns += [f"{m}_mean", f"{m}_std"]
    return out, columns + ["n_undefined", "recovery_fraction", "collapse_fraction"]


def fig9(table):
    _require("fig9", table, [])
    return _prf_panel(table, "Recovery")


def fig10(table):
    _require("fig10", table, [])
    return _prf_panel(table, "Collapse")


_BUILDERS = dict(
    fig6=fig6,
    fig6f=fig6f,
    fig7=fig7,
    fig7_models=fig7_models,
    fig7_windows=fig7_windows,
    fig8=fig8,
    fig9=fig9,
    fig10=fig10,
)


def build(table: ReportTable, figure_id):
    """
    :return: (rows, columns) for one figure table.
    """
    if figure_id not in _BUILDERS:
        raise NotImplementedError(f"unknown figure: {figure_id}")
    if figure_id in ("fig6", "fig6f"):
        _require(figure_id, table, [])
    return _BUILDERS[figure_id](table)


def report(table: ReportTable, figure_id, output_dir):
    """
    Write <output_dir>/<figure_id>.csv.

    :return: the path written.
    """
    rows, columns = build(table, figure_id)
    create_folders(output_dir)
    path = bf.join(output_dir, f"{figure_id}.csv")
    write_csv(rows, path, columns)
    return path

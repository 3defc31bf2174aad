import itertools

import pytest

from graph_ews import report
from graph_ews.harness import ReportTable


def metric_rows(networks=("small-world",), S=("-1.0",), T=("2.0",), models=("SeqLstm", "TextCnn")):
    rows = []
    grid = itertools.product(networks, S, T, ("0.01", "0.1"), ("30", "50"), models, ("0", "1"))
    for i, (network, s, t, w, ws, model, seed) in enumerate(grid):
        acc = 0.5 + (i % 5) / 10
        for positive in ("Recovery", "Collapse"):
            rows.append(
                dict(
                    model=model,
                    w=w,
                    ws=ws,
                    S=s,
                    T=t,
                    network=network,
                    seed=seed,
                    positive_class=positive,
                    precision=str(acc) if positive == "Recovery" else None,
                    recall="1.0",
                    f1="0.5",
                    accuracy=str(acc),
                    n_test="10",
                    n_undefined="0" if positive == "Recovery" else "1",
                )
            )
    return rows


def outcome_rows(networks=("small-world",)):
    rows = []
    for network, w, seed in itertools.product(networks, ("0.01", "0.1"), ("0", "1")):
        p = 0.2 if seed == "0" else 0.4
        rows.append(
            dict(
                network=network,
                w=w,
                S="-1.0",
                T="2.0",
                seed=seed,
                p_collapse=str(p),
                mean_recovery_time="100.0",
                mean_collapse_time=None,
                recovery_fraction=str(1 - p),
                collapse_fraction=str(p),
            )
        )
    return rows


def test_fig8_needs_network_axis():
    table = ReportTable(rows=metric_rows(), outcomes=outcome_rows())
    with pytest.raises(ValueError, match="network"):
        report.build(table, "fig8")


def test_fig8_rows():
    networks = ("small-world", "random")
    table = ReportTable(rows=metric_rows(networks=networks), outcomes=outcome_rows(networks))
    rows, columns = report.build(table, "fig8")
    assert len(rows) == 4
    assert set(rows[0]) == set(columns)
    for row in rows:
        assert row["p_collapse_mean"] == pytest.approx(0.3)
        assert row["p_collapse_std"] == pytest.approx(0.1414, abs=1e-4)
        assert row["mean_collapse_time_mean"] is None
        assert row["n_replicates"] == 2


def test_fig6f_is_mean_of_fig6():
    table = ReportTable(rows=metric_rows())
    per_model, _ = report.build(table, "fig6")
    averaged, _ = report.build(table, "fig6f")
    assert len(per_model) == 8 and len(averaged) == 4
    for row in averaged:
        members = [
            r["accuracy_mean"]
            for r in per_model
            if (r["w"], r["ws"]) == (row["w"], row["ws"])
        ]
        assert len(members) == 2 == row["n_models"]
        assert row["accuracy_mean"] == pytest.approx(sum(members) / 2)


def test_fig7_needs_game_axis():
    with pytest.raises(ValueError, match="S or T"):
        report.build(ReportTable(rows=metric_rows()), "fig7")
    table = ReportTable(rows=metric_rows(S=("-1.0", "0.0")))
    rows, _ = report.build(table, "fig7")
    assert len(rows) == 2 * 2 * 2 * 2
    by_model, _ = report.build(table, "fig7_models")
    by_window, _ = report.build(table, "fig7_windows")
    assert len(by_model) == len(by_window) == 2 * 2 * 2


def test_precision_recall_panels():
    table = ReportTable(rows=metric_rows(), outcomes=outcome_rows())
    recovery, _ = report.build(table, "fig9")
    collapse, _ = report.build(table, "fig10")
    assert all(r["precision_mean"] is not None for r in recovery)
    assert all(r["precision_mean"] is None for r in collapse)
    assert all(r["n_undefined"] == 2 for r in collapse)
    assert recovery[0]["collapse_fraction"] == pytest.approx(0.3)


def test_empty_and_unknown():
    with pytest.raises(ValueError, match="empty"):
        report.build(ReportTable(), "fig6")
    with pytest.raises(NotImplementedError):
        report.build(ReportTable(rows=metric_rows()), "fig99")


def test_report_writes_csv(tmp_path):
    path = report.report(ReportTable(rows=metric_rows()), "fig6", str(tmp_path / "figs"))
    lines = open(path).read().splitlines()
    assert lines[0].startswith("network,S,T,w,ws,model,accuracy_mean")
    assert len(lines) == 9

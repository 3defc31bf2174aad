"""
Grid sweeps of the whole pipeline: simulate, window, split, train every
model kind and score it under both positive classes.

A cell is one (network, w, S, T, ws) point. Cells that differ only in ws
share one batch of simulated trajectories per replicate seed. Every
finished cell leaves cell.json, dataset.jsonl, metrics.csv and its own
training log (log.txt, progress.csv) under <output_dir>/cells/<hash>/,
and is skipped when the sweep is re-run.
"""

import json
import multiprocessing
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import blobfile as bf
from tqdm import tqdm

from . import logger
from .dataset import make_dataset, read_jsonl, split, write_jsonl
from .evodyn import GameMatrix, OutcomeStats, SimParams, aggregate_outcomes, run_many
from .metrics import (
    METRIC_COLUMNS,
    aggregate,
    aggregate_columns,
    dual_report,
    report_rows,
    undefined_reports,
)
from .netgen import NetworkKind, NetworkSpec, degree_stats, make_network
from .seq_models import ModelKind, ModelSpec
from .train_util import SingleClassError, TrainConfig, evaluate, train
from .utils import content_hash, create_folders, read_csv, write_csv

OUTCOME_COLUMNS = (
    "network",
    "w",
    "S",
    "T",
    "seed",
    "p_collapse",
    "mean_recovery_time",
    "mean_collapse_time",
    "n_runs",
    "n_collapse",
    "n_unabsorbed",
    "recovery_fraction",
    "collapse_fraction",
    "degree_mean",
    "degree_variance",
)

DEFAULT_DEGREES = {
    NetworkKind.SMALL_WORLD: 4,
    NetworkKind.RANDOM: 4,
    NetworkKind.SCALE_FREE: 2,
}


@dataclass(frozen=True)
class CellParams:
    network: NetworkKind
    w: float
    S: float
    T: float
    ws: int
    n: int = 100
    eta: float = 0.1
    R: float = 1.0
    P: float = 0.0
    degree_param: int = 4
    rewire_beta: float = 0.1
    max_steps: int = 10 ** 6

    def game(self):
        return GameMatrix(R=self.R, S=self.S, T=self.T, P=self.P)

    def network_spec(self, seed):
        return NetworkSpec(
            kind=self.network,
            n=self.n,
            degree_param=self.degree_param,
            rewire_beta=self.rewire_beta,
            seed=seed,
        )

    def sim_params(self, seed, record_frames=None):
        return SimParams(
            game=self.game(),
            w=self.w,
            eta=self.eta,
            network=self.network_spec(seed),
            max_steps=self.max_steps,
            seed=seed,
            record_frames=record_frames if record_frames is not None else self.ws,
        )

    def to_dict(self):
        d = asdict(self)
        d["network"] = self.network.value
        return d

    def sim_key(self):
        """
        The parameters that determine the simulated trajectories.
        """
        d = self.to_dict()
        del d["ws"]
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    w: Tuple[float, ...] = (0.001, 0.005, 0.01, 0.05, 0.1)
    ws: Tuple[int, ...] = (30, 50, 100, 500, 1000)
    S: Tuple[float, ...] = (-1.0,)
    T: Tuple[float, ...] = (2.0,)
    networks: Tuple[NetworkKind, ...] = (NetworkKind.SMALL_WORLD,)
    models: Tuple[ModelKind, ...] = tuple(ModelKind)
    runs_per_cell: int = 2000
    seeds: Tuple[int, ...] = (0, 1, 2)
    output_dir: str = "results"
    n: int = 100
    eta: float = 0.1
    R: float = 1.0
    P: float = 0.0
    degrees: Dict[NetworkKind, int] = field(default_factory=lambda: dict(DEFAULT_DEGREES))
    rewire_beta: float = 0.1
    max_steps: int = 10 ** 6
    test_fraction: float = 0.2
    exclude_absorbed: bool = False
    train: TrainConfig = TrainConfig()
    model_overrides: Dict[str, object] = field(default_factory=dict)
    sim_workers: Optional[int] = None
    cell_workers: int = 1

    def __post_init__(self):
        for name in ("w", "ws", "S", "T", "networks", "models", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"experiment grid axis '{name}' is empty")
        if self.runs_per_cell < 1:
            raise ValueError(f"runs_per_cell must be >= 1, got {self.runs_per_cell}")
        if self.runs_per_cell < 100:
            logger.warn(
                f"runs_per_cell={self.runs_per_cell} is too small for statistical comparisons"
            )
        if self.cell_workers < 1:
            raise ValueError(f"cell_workers must be >= 1, got {self.cell_workers}")
        for kind in self.models:
            for ws in self.ws:
                self.model_spec(kind, ws, seed=0)

    def sim_groups(self):
        """
        Cells grouped by shared simulation, in deterministic grid order.
        """
        groups = []
        for kind in self.networks:
            for S in self.S:
                for T in self.T:
                    for w in self.w:
                        groups.append(
                            [
                                CellParams(
                                    network=kind,
                                    w=w,
                                    S=S,
                                    T=T,
                                    ws=ws,
                                    n=self.n,
                                    eta=self.eta,
                                    R=self.R,
                                    P=self.P,
                                    degree_param=self.degrees.get(kind, DEFAULT_DEGREES[kind]),
                                    rewire_beta=self.rewire_beta,
                                    max_steps=self.max_steps,
                                )
                                for ws in self.ws
                            ]
                        )
        return groups

    def cells(self):
        return [cell for group in self.sim_groups() for cell in group]

    def model_spec(self, kind, ws, seed):
        return ModelSpec(kind=kind, ws=ws, seed=seed, **self.model_overrides)

    def train_config(self, seed):
        return replace(self.train, seed=seed)


@dataclass
class ReportTable:
    rows: List[dict] = field(default_factory=list)
    aggregates: List[dict] = field(default_factory=list)
    outcomes: List[dict] = field(default_factory=list)

    def write(self, output_dir):
        create_folders(output_dir)
        write_csv(self.rows, bf.join(output_dir, "metrics.csv"), METRIC_COLUMNS)
        write_csv(self.aggregates, bf.join(output_dir, "aggregates.csv"), aggregate_columns())
        write_csv(self.outcomes, bf.join(output_dir, "outcomes.csv"), OUTCOME_COLUMNS)

    @classmethod
    def read(cls, output_dir):
        outcomes_path = bf.join(output_dir, "outcomes.csv")
        return cls(
            rows=read_csv(bf.join(output_dir, "metrics.csv")),
            aggregates=read_csv(bf.join(output_dir, "aggregates.csv")),
            outcomes=read_csv(outcomes_path) if bf.exists(outcomes_path) else [],
        )


def _master_seed(cell: CellParams, seed):
    return int(content_hash(dict(sim=cell.sim_key(), seed=seed))[:15], 16)


def _simulate(cell: CellParams, runs, seed, record_frames, workers=None):
    params = cell.sim_params(seed, record_frames=record_frames)
    graph = make_network(params.network)
    trajectories, failures = run_many(
        params, runs, _master_seed(cell, seed), graph=graph, workers=workers
    )
    if not trajectories:
        raise RuntimeError(f"all {runs} runs of cell {cell.to_dict()} failed to absorb")
    stats = aggregate_outcomes(trajectories, n_unabsorbed=len(failures))
    return graph, params, trajectories, stats


def _write_cell_dataset(cell_dir, cell: CellParams, seed, dataset):
    create_folders(cell_dir)
    write_jsonl(bf.join(cell_dir, "dataset.jsonl"), dataset)
    with bf.BlobFile(bf.join(cell_dir, "cell.json"), "w") as f:
        f.write(json.dumps(dict(cell=cell.to_dict(), seed=seed), sort_keys=True))


def run_cell(
    cell: CellParams, runs, seed, workers=None, output_dir=None, exclude_absorbed=False
):
    """
    Simulate one cell and window its trajectories.

    :param output_dir: if given, dataset.jsonl, cell.json and outcome.json
                       are written there.
    :return: (DatasetFile, OutcomeStats).
    """
    graph, params, trajectories, stats = _simulate(cell, runs, seed, cell.ws, workers)
    dataset = make_dataset(
        trajectories, cell.ws, params, graph.n, graph.edge_count, exclude_absorbed=exclude_absorbed
    )
    if output_dir is not None:
        _write_cell_dataset(output_dir, cell, seed, dataset)
        with bf.BlobFile(bf.join(output_dir, "outcome.json"), "w") as f:
            f.write(json.dumps(_outcome_row(cell, seed, stats, graph), sort_keys=True))
    return dataset, stats


def cell_key(cell: CellParams, config: ExperimentConfig, seed):
    return content_hash(
        dict(
            cell=cell.to_dict(),
            models=[m.value for m in config.models],
            model_overrides=config.model_overrides,
            train={k: v for k, v in asdict(config.train).items() if k != "seed"},
            seed=seed,
            runs=config.runs_per_cell,
            test_fraction=config.test_fraction,
            exclude_absorbed=config.exclude_absorbed,
        )
    )


def _cell_dir(config, cell, seed):
    return bf.join(config.output_dir, "cells", cell_key(cell, config, seed))


def _context(cell: CellParams, model, seed):
    return dict(
        model=model.value,
        w=cell.w,
        ws=cell.ws,
        S=cell.S,
        T=cell.T,
        network=cell.network.value,
        seed=seed,
    )


def evaluate_cell(cell: CellParams, dataset, config: ExperimentConfig, seed):
    """
    Split, train every model kind and score it.

    :return: metric rows, two per model.
    """
    specs = [config.model_spec(kind, cell.ws, seed) for kind in config.models]
    train_config = config.train_config(seed)
    rows = []
    missing = [k for k, v in dataset.label_counts().items() if v == 0]
    if missing:
        logger.warn(
            f"cell {cell.to_dict()} seed={seed}: no {','.join(missing)} records; "
            "metrics undefined"
        )
        for kind in config.models:
            rows.extend(report_rows(undefined_reports(), _context(cell, kind, seed)))
        return rows

    parts = split(dataset, test_fraction=config.test_fraction, seed=seed, stratified=True)
    for spec in specs:
        context = _context(cell, spec.kind, seed)
        try:
            model, _ = train(spec, parts.train, train_config, log_context=context)
        except SingleClassError as e:
            logger.warn(f"{spec.kind.value} on ws={cell.ws} seed={seed}: {e}; metrics undefined")
            reports = undefined_reports(len(parts.test))
        else:
            predictions, labels = evaluate(model, parts.test)
            reports = dual_report(predictions, labels)
        rows.extend(report_rows(reports, context))
    return rows


def _init_cell_worker(log_dir):
    logger.configure(dir=log_dir, format_strs=[])


def _evaluate_job(job):
    cell, config, seed, cell_dir = job
    dataset = read_jsonl(bf.join(cell_dir, "dataset.jsonl"))
    with logger.scoped_configure(dir=cell_dir, format_strs=["log", "csv"]):
        rows = evaluate_cell(cell, dataset, config, seed)
    write_csv(rows, bf.join(cell_dir, "metrics.csv"), METRIC_COLUMNS)
    return rows


def _outcome_row(cell, seed, stats: OutcomeStats, graph):
    degrees = degree_stats(graph)
    row = dict(network=cell.network.value, w=cell.w, S=cell.S, T=cell.T, seed=seed)
    row.update(stats.to_dict())
    row["recovery_fraction"] = 1.0 - stats.p_collapse
    row["collapse_fraction"] = stats.p_collapse
    row["degree_mean"] = degrees["mean"]
    row["degree_variance"] = degrees["variance"]
    return row


def _run_group(group, config: ExperimentConfig, seed):
    """
    Simulate once for all window sizes of a group, then evaluate the cells
    that are not cached yet.
    """
    dirs = [_cell_dir(config, cell, seed) for cell in group]
    outcome_path = bf.join(
        config.output_dir,
        "sims",
        content_hash(dict(sim=group[0].sim_key(), seed=seed, runs=config.runs_per_cell)),
        "outcome.json",
    )
    pending = [
        (cell, d) for cell, d in zip(group, dirs) if not bf.exists(bf.join(d, "metrics.csv"))
    ]

    if pending or not bf.exists(outcome_path):
        record = max(cell.ws for cell in group)
        graph, params, trajectories, stats = _simulate(
            group[0], config.runs_per_cell, seed, record, config.sim_workers
        )
        outcome = _outcome_row(group[0], seed, stats, graph)
        logger.log(
            f"{group[0].network.value} w={group[0].w} S={group[0].S} T={group[0].T} "
            f"seed={seed}: p_collapse={stats.p_collapse:.4f} "
            f"({stats.n_unabsorbed} unabsorbed)"
        )
        for cell, d in pending:
            dataset = make_dataset(
                trajectories,
                cell.ws,
                params,
                graph.n,
                graph.edge_count,
                exclude_absorbed=config.exclude_absorbed,
            )
            _write_cell_dataset(d, cell, seed, dataset)
        create_folders(bf.dirname(outcome_path))
        with bf.BlobFile(outcome_path, "w") as f:
            f.write(json.dumps(outcome, sort_keys=True))
    else:
        with bf.BlobFile(outcome_path, "r") as f:
            outcome = json.load(f)

    jobs = [(cell, config, seed, d) for cell, d in pending]
    if config.cell_workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(
            min(config.cell_workers, len(jobs)),
            initializer=_init_cell_worker,
            initargs=(config.output_dir,),
        ) as pool:
            pool.map(_evaluate_job, jobs)
    else:
        for job in jobs:
            _evaluate_job(job)

    rows = []
    for d in dirs:
        rows.extend(read_csv(bf.join(d, "metrics.csv")))
    return rows, outcome


def run_experiment(config: ExperimentConfig):
    """
    Run every cell of the grid for every replicate seed and write
    metrics.csv, aggregates.csv and outcomes.csv into config.output_dir.

    :return: a ReportTable.
    """
    create_folders(config.output_dir)
    groups = config.sim_groups()
    logger.log(
        f"experiment: {len(groups) * len(config.ws)} cells x {len(config.seeds)} seeds, "
        f"{len(config.models)} models, {config.runs_per_cell} runs per cell"
    )
    table = ReportTable()
    jobs = [(group, seed) for group in groups for seed in config.seeds]
    for group, seed in tqdm(jobs, desc="cells"):
        rows, outcome = _run_group(group, config, seed)
        table.rows.extend(rows)
        table.outcomes.append(outcome)
    table.aggregates = aggregate(table.rows)
    table.write(config.output_dir)
    return table

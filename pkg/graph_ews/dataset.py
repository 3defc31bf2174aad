"""
Windowed 5-channel training sequences built from trajectories, and their
JSON-lines persistence.

A dataset file is one header line followed by one line per record:

    {"schema_version": 1, "ws": 30, "n": 100, "edge_count": 200,
     "sim_params": {...}, "num_records": 2, "label_counts": {...}}
    {"run_id": 0, "label": "AllC", "frames": [[90, 10, 160, 36, 4], ...]}
"""

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional

import blobfile as bf
import numpy as np

from .evodyn import NUM_CHANNELS, Outcome, PopulationState, Trajectory
from .netgen import Graph

SCHEMA_VERSION = 1


class DatasetFormatError(ValueError):
    """
    Malformed or inconsistent dataset file; lineno is 1-based.
    """

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class Label(enum.IntEnum):
    RECOVERY = 0  # AllC
    COLLAPSE = 1  # AllD

    @classmethod
    def from_outcome(cls, outcome: Outcome):
        return cls.RECOVERY if outcome is Outcome.ALL_C else cls.COLLAPSE

    def to_outcome(self):
        return Outcome.ALL_C if self is Label.RECOVERY else Outcome.ALL_D


class FeatureFrame(NamedTuple):
    c_count: int
    d_count: int
    cc_edges: int
    cd_edges: int
    dd_edges: int


@dataclass(eq=False)
class FeatureSequence:
    frames: np.ndarray  # [ws x 5] integer counts
    label: Label
    run_id: int = 0

    @property
    def ws(self):
        return self.frames.shape[0]


@dataclass(eq=False)
class DatasetFile:
    ws: int
    n: int
    edge_count: int
    sim_params: dict = field(default_factory=dict)
    records: List[FeatureSequence] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def __len__(self):
        return len(self.records)

    def label_counts(self):
        counts = {Outcome.ALL_C.value: 0, Outcome.ALL_D.value: 0}
        for r in self.records:
            counts[r.label.to_outcome().value] += 1
        return counts

    def with_records(self, records):
        return replace(self, records=list(records))


class HeldOutDataset(DatasetFile):
    """
    The test side of a split. Training refuses these.
    """


class Split(NamedTuple):
    train: DatasetFile
    test: HeldOutDataset


def extract_frame(g: Graph, state: PopulationState):
    """
    Count nodes by strategy and undirected edges by endpoint strategies.
    """
    s = state.strategies
    d = int(s.sum())
    edges = g.edges()
    if len(edges):
        ends = s[edges[:, 0]].astype(np.int64) + s[edges[:, 1]]
        cc = int((ends == 0).sum())
        cd = int((ends == 1).sum())
        dd = int((ends == 2).sum())
    else:
        cc = cd = dd = 0
    return FeatureFrame(g.n - d, d, cc, cd, dd)


def window(traj: Trajectory, ws):
    """
    Frames t = 0..ws-1 of a trajectory. Runs frozen before ws repeat their
    frozen frame for the remaining steps.

    :return: an [ws x 5] integer array.
    """
    if ws < 1:
        raise ValueError(f"ws must be >= 1, got {ws}")
    frames = traj.frames
    if ws <= len(frames):
        return frames[:ws].copy()
    if traj.absorption_step + 1 > len(frames):
        raise ValueError(
            f"run {traj.run_id}: only {len(frames)} frames recorded, window needs {ws}"
        )
    pad = np.tile(traj.frozen_frame(), (ws - len(frames), 1))
    return np.concatenate([frames, pad], axis=0)


def _scale(n, edge_count):
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if edge_count < 1:
        raise ValueError(f"edge_count must be >= 1, got {edge_count}")
    return np.array([n, n, edge_count, edge_count, edge_count], dtype=np.float64)


def normalize(frames, n, edge_count):
    """
    Node channels divided by n, edge channels by edge_count.
    """
    return np.asarray(frames, dtype=np.float64) / _scale(n, edge_count)


def denormalize(matrix, n, edge_count):
    return np.rint(np.asarray(matrix) * _scale(n, edge_count)).astype(np.int64)


def make_dataset(trajectories, ws, sim_params, n, edge_count, exclude_absorbed=False):
    """
    Window and label every trajectory.

    :param sim_params: SimParams (or its dict echo) stored in the header.
    :param exclude_absorbed: drop runs frozen before the window ends.
    """
    records = []
    for traj in trajectories:
        if exclude_absorbed and traj.absorption_step < ws:
            continue
        records.append(
            FeatureSequence(
                frames=window(traj, ws),
                label=Label.from_outcome(traj.outcome),
                run_id=traj.run_id,
            )
        )
    echo = sim_params.to_dict() if hasattr(sim_params, "to_dict") else dict(sim_params)
    return DatasetFile(ws=ws, n=n, edge_count=edge_count, sim_params=echo, records=records)


def to_arrays(dataset: DatasetFile):
    """
    :return: (X, y) with X an [b x ws x 5] normalized float64 array and y
             the integer labels (0 = Recovery, 1 = Collapse).
    """
    if not dataset.records:
        return (
            np.zeros((0, dataset.ws, NUM_CHANNELS), dtype=np.float64),
            np.zeros((0,), dtype=np.int64),
        )
    X = np.stack([r.frames for r in dataset.records])
    X = normalize(X, dataset.n, dataset.edge_count)
    y = np.array([int(r.label) for r in dataset.records], dtype=np.int64)
    return X, y


def class_fractions(dataset: DatasetFile):
    total = len(dataset)
    counts = dataset.label_counts()
    if total == 0:
        return dict(recovery=None, collapse=None)
    return dict(
        recovery=counts[Outcome.ALL_C.value] / total,
        collapse=counts[Outcome.ALL_D.value] / total,
    )


def _header(dataset: DatasetFile):
    return dict(
        schema_version=dataset.schema_version,
        ws=dataset.ws,
        n=dataset.n,
        edge_count=dataset.edge_count,
        sim_params=dataset.sim_params,
        num_records=len(dataset),
        label_counts=dataset.label_counts(),
    )


def write_jsonl(path, dataset: DatasetFile):
    lines = [json.dumps(_header(dataset))]
    for r in dataset.records:
        if r.ws != dataset.ws:
            raise DatasetFormatError(f"record {r.run_id} has ws={r.ws}, expected {dataset.ws}")
        lines.append(
            json.dumps(
                dict(
                    run_id=int(r.run_id),
                    label=r.label.to_outcome().value,
                    frames=r.frames.tolist(),
                )
            )
        )
    with bf.BlobFile(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _parse_record(line, lineno, ws):
    try:
        obj = json.loads(line)
        run_id = int(obj["run_id"])
        label = Label.from_outcome(Outcome(obj["label"]))
        frames = np.array(obj["frames"], dtype=np.int64)
    except (ValueError, KeyError, TypeError) as e:
        raise DatasetFormatError(f"malformed record: {e}", lineno) from e
    if frames.ndim != 2 or frames.shape[1] != NUM_CHANNELS:
        raise DatasetFormatError(f"frames must be [ws x {NUM_CHANNELS}]", lineno)
    if frames.shape[0] != ws:
        raise DatasetFormatError(
            f"record has ws={frames.shape[0]}, header says {ws}", lineno
        )
    return FeatureSequence(frames=frames, label=label, run_id=run_id)


def read_jsonl(path, expected_version: Optional[int] = SCHEMA_VERSION):
    with bf.BlobFile(path, "r") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetFormatError("empty file", 1)
    try:
        header = json.loads(lines[0])
        ws = int(header["ws"])
        version = int(header["schema_version"])
    except (ValueError, KeyError, TypeError) as e:
        raise DatasetFormatError(f"malformed header: {e}", 1) from e
    if expected_version is not None and version != expected_version:
        raise DatasetFormatError(
            f"schema version {version}, expected {expected_version}", 1
        )
    records = [
        _parse_record(line, lineno, ws)
        for lineno, line in enumerate(lines[1:], start=2)
        if line.strip()
    ]
    dataset = DatasetFile(
        ws=ws,
        n=int(header["n"]),
        edge_count=int(header["edge_count"]),
        sim_params=header.get("sim_params", {}),
        records=records,
        schema_version=version,
    )
    if "label_counts" in header and header["label_counts"] != dataset.label_counts():
        raise DatasetFormatError("label counts do not match header", 1)
    return dataset


def split(dataset: DatasetFile, test_fraction=0.2, seed=0, stratified=True):
    """
    Disjoint train/test partition, deterministic per seed. With
    stratification each label contributes round(test_fraction * count)
    records to the test side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    labels = np.array([int(r.label) for r in dataset.records], dtype=np.int64)
    if stratified:
        test_idx = []
        for label in Label:
            idx = np.flatnonzero(labels == int(label))
            if len(idx) == 0:
                raise ValueError(
                    f"cannot stratify: no {label.to_outcome().value} records"
                )
            k = int(math.floor(test_fraction * len(idx) + 0.5))
            test_idx.extend(rng.permutation(idx)[:k].tolist())
    else:
        k = int(math.floor(test_fraction * len(labels) + 0.5))
        test_idx = rng.permutation(len(labels))[:k].tolist()
    test_set = set(test_idx)
    train = [r for i, r in enumerate(dataset.records) if i not in test_set]
    test = [r for i, r in enumerate(dataset.records) if i in test_set]
    held_out = HeldOutDataset(
        ws=dataset.ws,
        n=dataset.n,
        edge_count=dataset.edge_count,
        sim_params=dataset.sim_params,
        records=test,
        schema_version=dataset.schema_version,
    )
    return Split(train=dataset.with_records(train), test=held_out)


def write_trajectories(path, trajectories, sim_params, n, edge_count):
    """
    Trajectory stream in the dataset layout: a header line, then one line
    per run with its outcome, absorption step and recorded frames.
    """
    trajectories = list(trajectories)
    echo = sim_params.to_dict() if hasattr(sim_params, "to_dict") else dict(sim_params)
    header = dict(
        schema_version=SCHEMA_VERSION,
        kind="trajectories",
        n=n,
        edge_count=edge_count,
        sim_params=echo,
        num_records=len(trajectories),
    )
    lines = [json.dumps(header)]
    for t in trajectories:
        lines.append(
            json.dumps(
                dict(
                    run_id=int(t.run_id),
                    outcome=t.outcome.value,
                    absorption_step=int(t.absorption_step),
                    frames=t.frames.tolist(),
                )
            )
        )
    with bf.BlobFile(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_trajectories(path):
    """
    :return: (trajectories, header dict).
    """
    with bf.BlobFile(path, "r") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetFormatError("empty file", 1)
    try:
        header = json.loads(lines[0])
        n, edge_count = int(header["n"]), int(header["edge_count"])
    except (ValueError, KeyError, TypeError) as e:
        raise DatasetFormatError(f"malformed header: {e}", 1) from e
    if header.get("kind") != "trajectories":
        raise DatasetFormatError("not a trajectory file", 1)
    trajectories = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            frames = np.array(obj["frames"], dtype=np.int64).reshape(-1, NUM_CHANNELS)
            trajectories.append(
                Trajectory(
                    frames=frames,
                    outcome=Outcome(obj["outcome"]),
                    absorption_step=int(obj["absorption_step"]),
                    n=n,
                    edge_count=edge_count,
                    run_id=int(obj["run_id"]),
                )
            )
        except (ValueError, KeyError, TypeError) as e:
            raise DatasetFormatError(f"malformed trajectory: {e}", lineno) from e
    return trajectories, header

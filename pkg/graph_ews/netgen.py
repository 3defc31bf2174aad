"""
Population topologies: small-world, random and scale-free networks.

All generators return connected, undirected simple graphs with node ids
0..n-1 and ascending neighbour lists, and are pure functions of their
arguments and seed.
"""

import enum
import json
import random
from dataclasses import dataclass
from typing import Tuple

import blobfile as bf
import networkx as nx
import numpy as np

# Resampling cap for generators that can produce disconnected graphs.
MAX_CONNECT_ATTEMPTS = 1000


class GraphGenerationError(RuntimeError):
    """
    Raised when a generator cannot produce a connected graph.
    """


class NetworkKind(enum.Enum):
    SMALL_WORLD = "small-world"
    RANDOM = "random"
    SCALE_FREE = "scale-free"


@dataclass(frozen=True)
class Graph:
    n: int
    adjacency: Tuple[Tuple[int, ...], ...]
    edge_count: int

    @classmethod
    def from_networkx(cls, g):
        n = g.number_of_nodes()
        adjacency = tuple(tuple(sorted(g.neighbors(x))) for x in range(n))
        return cls(n=n, adjacency=adjacency, edge_count=g.number_of_edges())

    @classmethod
    def from_edges(cls, n, edges):
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from(edges)
        return cls.from_networkx(g)

    def degree(self, x):
        return len(self.adjacency[x])

    def degrees(self):
        return np.array([len(nb) for nb in self.adjacency], dtype=np.int64)

    def edges(self):
        """
        Undirected edges as an [E x 2] integer array with u < v, in
        ascending (u, v) order.
        """
        pairs = [(u, v) for u, nb in enumerate(self.adjacency) for v in nb if u < v]
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(map(tuple, self.edges()))
        return g

    def validate(self):
        """
        Check simplicity, symmetry, edge count and connectivity.
        """
        if len(self.adjacency) != self.n:
            raise ValueError("adjacency length does not match n")
        for x, nb in enumerate(self.adjacency):
            if x in nb:
                raise ValueError(f"self-loop at node {x}")
            if len(set(nb)) != len(nb):
                raise ValueError(f"duplicate edge at node {x}")
            if list(nb) != sorted(nb):
                raise ValueError(f"neighbour list of node {x} is not sorted")
            for y in nb:
                if x not in self.adjacency[y]:
                    raise ValueError(f"asymmetric edge ({x}, {y})")
        if sum(len(nb) for nb in self.adjacency) != 2 * self.edge_count:
            raise ValueError("edge_count does not match adjacency")
        if self.n > 0 and not nx.is_connected(self.to_networkx()):
            raise ValueError("graph is not connected")
        return self


@dataclass(frozen=True)
class NetworkSpec:
    kind: NetworkKind
    n: int
    degree_param: int
    rewire_beta: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"n must be >= 3, got {self.n}")
        if self.degree_param < 1:
            raise ValueError(f"degree_param must be >= 1, got {self.degree_param}")
        if self.degree_param >= self.n:
            raise ValueError("degree_param must be smaller than n")
        if not 0.0 <= self.rewire_beta <= 1.0:
            raise ValueError(f"rewire_beta must be in [0, 1], got {self.rewire_beta}")

    def to_dict(self):
        return dict(
            kind=self.kind.value,
            n=self.n,
            degree_param=self.degree_param,
            rewire_beta=self.rewire_beta,
            seed=self.seed,
        )

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=NetworkKind(d["kind"]),
            n=int(d["n"]),
            degree_param=int(d["degree_param"]),
            rewire_beta=float(d["rewire_beta"]),
            seed=int(d["seed"]),
        )


def _sample_connected(sample, what):
    for _ in range(MAX_CONNECT_ATTEMPTS):
        g = sample()
        if nx.is_connected(g):
            return Graph.from_networkx(g)
    raise GraphGenerationError(
        f"no connected {what} graph after {MAX_CONNECT_ATTEMPTS} attempts"
    )


def gen_random(n, mean_degree, seed):
    """
    Erdős–Rényi G(n, p) with p = mean_degree / (n - 1), resampled until
    connected.

    :param n: number of nodes.
    :param mean_degree: expected degree, 1 <= mean_degree < n.
    :param seed: integer seed; equal seeds give equal graphs.
    """
    if not 1 <= mean_degree < n:
        raise ValueError(f"mean_degree must be in [1, n), got {mean_degree}")
    p = mean_degree / (n - 1)
    rnd = random.Random(seed)
    return _sample_connected(lambda: nx.gnp_random_graph(n, p, seed=rnd), "random")


def gen_small_world(n, k, beta, seed):
    """
    Watts–Strogatz ring lattice of degree k with rewiring probability beta,
    resampled until connected. Rewiring preserves the n*k/2 edge count.
    """
    if k % 2 != 0 or k < 2:
        raise ValueError(f"k must be a positive even number, got {k}")
    if k >= n:
        raise ValueError(f"k must be smaller than n, got k={k}, n={n}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    rnd = random.Random(seed)
    return _sample_connected(
        lambda: nx.watts_strogatz_graph(n, k, beta, seed=rnd), "small-world"
    )


def gen_scale_free(n, m, seed):
    """
    Barabási–Albert preferential attachment grown from a clique of m + 1
    nodes; every new node brings m distinct edges, so the result is always
    connected with C(m+1, 2) + (n - m - 1) * m edges.
    """
    if not 1 <= m < n:
        raise ValueError(f"m must be in [1, n), got {m}")
    rnd = random.Random(seed)
    g = nx.barabasi_albert_graph(
        n, m, seed=rnd, initial_graph=nx.complete_graph(m + 1)
    )
    return Graph.from_networkx(g)


def make_network(spec: NetworkSpec):
    if spec.kind is NetworkKind.RANDOM:
        return gen_random(spec.n, spec.degree_param, spec.seed)
    elif spec.kind is NetworkKind.SMALL_WORLD:
        return gen_small_world(spec.n, spec.degree_param, spec.rewire_beta, spec.seed)
    elif spec.kind is NetworkKind.SCALE_FREE:
        return gen_scale_free(spec.n, spec.degree_param, spec.seed)
    raise NotImplementedError(f"unknown network kind: {spec.kind}")


def cycle_graph(n):
    return Graph.from_networkx(nx.cycle_graph(n))


def complete_graph(n):
    return Graph.from_networkx(nx.complete_graph(n))


def degree_stats(g: Graph):
    degrees = g.degrees()
    return dict(
        mean=float(degrees.mean()),
        variance=float(degrees.var()),
        min=int(degrees.min()),
        max=int(degrees.max()),
    )


def write_edgelist(path, g: Graph):
    """
    Header line "n=<n>" followed by one "u v" line per edge, u < v.
    """
    lines = [f"n={g.n}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    with bf.BlobFile(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_edgelist(path):
    with bf.BlobFile(path, "r") as f:
        lines = [line.strip() for line in f.read().splitlines() if line.strip()]
    if not lines or not lines[0].startswith("n="):
        raise ValueError(f"{path}: missing 'n=<n>' header")
    n = int(lines[0][2:])
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
        u, v = int(parts[0]), int(parts[1])
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"{path}:{lineno}: node id out of range")
        edges.append((u, v))
    g = Graph.from_edges(n, edges)
    if g.edge_count != len(edges):
        raise ValueError(f"{path}: duplicate edges")
    return g.validate()


def _spec_path(path):
    return path + ".spec.json"


def write_network(path, g: Graph, spec: NetworkSpec):
    """
    Edge list plus a <path>.spec.json sidecar holding the generating spec.
    """
    write_edgelist(path, g)
    with bf.BlobFile(_spec_path(path), "w") as f:
        f.write(json.dumps(spec.to_dict(), sort_keys=True))


def read_network(path):
    """
    :return: (Graph, NetworkSpec or None when the file has no spec sidecar).
    """
    g = read_edgelist(path)
    if not bf.exists(_spec_path(path)):
        return g, None
    with bf.BlobFile(_spec_path(path), "r") as f:
        spec = NetworkSpec.from_dict(json.load(f))
    if spec.n != g.n:
        raise ValueError(f"{path}: spec says n={spec.n}, edge list has n={g.n}")
    return g, spec

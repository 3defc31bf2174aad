"""
Prisoner's Dilemma on a graph under death-birth updating.

A run starts from a cooperative population with a fraction eta of defectors
and applies one death-birth event per step until the population is frozen
in AllC (recovery of cooperation) or AllD (collapse of cooperation).
"""

import enum
import math
import multiprocessing
import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import logger
from .netgen import Graph, NetworkSpec, make_network

# Frame columns: #C, #D, #CC, #CD, #DD.
NUM_CHANNELS = 5

# Node draws are made in blocks to amortise generator overhead.
_DRAW_BLOCK = 4096


class FrozenStateError(ValueError):
    """
    Raised when a death-birth step is requested on an absorbed population.
    """


class UnabsorbedError(RuntimeError):
    """
    Raised when a run hits max_steps without reaching AllC or AllD.
    """

    def __init__(self, run_id, max_steps):
        super().__init__(run_id, max_steps)
        self.run_id = run_id
        self.max_steps = max_steps

    def __str__(self):
        return f"run {self.run_id} not absorbed after {self.max_steps} steps"


class Strategy(enum.IntEnum):
    C = 0
    D = 1


class Outcome(enum.Enum):
    ALL_C = "AllC"  # recovery of cooperation
    ALL_D = "AllD"  # collapse of cooperation


@dataclass(frozen=True)
class GameMatrix:
    R: float = 1.0
    S: float = -1.0
    T: float = 2.0
    P: float = 0.0

    def __post_init__(self):
        if not self.T > self.R > self.P > self.S:
            raise ValueError(
                f"payoffs must satisfy T > R > P > S, got "
                f"T={self.T}, R={self.R}, P={self.P}, S={self.S}"
            )

    def matrix(self):
        """
        2x2 payoff table indexed [own strategy][opponent strategy].
        """
        return np.array([[self.R, self.S], [self.T, self.P]], dtype=np.float64)

    def to_dict(self):
        return dict(R=self.R, S=self.S, T=self.T, P=self.P)


@dataclass(frozen=True)
class SimParams:
    game: GameMatrix
    w: float
    eta: float
    network: NetworkSpec
    max_steps: int = 10 ** 6
    seed: int = 0
    # Frames beyond this many are not stored; None keeps the full trajectory.
    record_frames: Optional[int] = None

    def __post_init__(self):
        if self.w < 0:
            raise ValueError(f"selection strength w must be >= 0, got {self.w}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.record_frames is not None and self.record_frames < 1:
            raise ValueError("record_frames must be >= 1 when given")

    def to_dict(self):
        return dict(
            game=self.game.to_dict(),
            w=self.w,
            eta=self.eta,
            network=self.network.to_dict(),
            max_steps=self.max_steps,
            seed=self.seed,
        )

    @classmethod
    def from_dict(cls, d):
        return cls(
            game=GameMatrix(**{k: float(v) for k, v in d["game"].items()}),
            w=float(d["w"]),
            eta=float(d["eta"]),
            network=NetworkSpec.from_dict(d["network"]),
            max_steps=int(d["max_steps"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True, eq=False)
class PopulationState:
    strategies: np.ndarray
    step: int = 0

    @classmethod
    def from_list(cls, strategies, step=0):
        return cls(np.asarray([int(s) for s in strategies], dtype=np.int8), step)

    @property
    def n(self):
        return len(self.strategies)

    def count_defectors(self):
        return int(self.strategies.sum())

    def is_frozen(self):
        d = self.count_defectors()
        return d == 0 or d == self.n


@dataclass(eq=False)
class Trajectory:
    """
    frames holds one row (#C, #D, #CC, #CD, #DD) per recorded step starting
    at t=0; it ends with the first frozen frame unless record_frames cut it
    short.
    """

    frames: np.ndarray
    outcome: Outcome
    absorption_step: int
    n: int
    edge_count: int
    run_id: int = 0

    def frozen_frame(self):
        if self.outcome is Outcome.ALL_C:
            return np.array([self.n, 0, self.edge_count, 0, 0], dtype=np.int64)
        return np.array([0, self.n, 0, 0, self.edge_count], dtype=np.int64)


@dataclass(frozen=True)
class OutcomeStats:
    p_collapse: float
    mean_recovery_time: Optional[float]
    mean_collapse_time: Optional[float]
    n_runs: int = 0
    n_collapse: int = 0
    n_unabsorbed: int = 0

    def to_dict(self):
        return dict(
            p_collapse=self.p_collapse,
            mean_recovery_time=self.mean_recovery_time,
            mean_collapse_time=self.mean_collapse_time,
            n_runs=self.n_runs,
            n_collapse=self.n_collapse,
            n_unabsorbed=self.n_unabsorbed,
        )


def pair_payoff(sx, sy, game: GameMatrix):
    """
    Payoff to a player using sx against a neighbour using sy.
    """
    if sx == Strategy.C:
        return game.R if sy == Strategy.C else game.S
    return game.T if sy == Strategy.C else game.P


def node_payoff(g: Graph, state: PopulationState, x, game: GameMatrix):
    if not 0 <= x < g.n:
        raise ValueError(f"node {x} out of range for n={g.n}")
    sx = state.strategies[x]
    return sum(pair_payoff(sx, state.strategies[y], game) for y in g.adjacency[x])


def fitness(payoff, w):
    """
    f = 1 + w * (payoff - 1), clamped at zero so that fitness-proportional
    replacement stays a valid probability for exploited hubs.
    """
    if w < 0:
        raise ValueError(f"selection strength w must be >= 0, got {w}")
    return max(0.0, 1.0 + w * (payoff - 1.0))


def replacement_prob_C(g: Graph, state: PopulationState, x, params: SimParams):
    """
    Probability that vacated node x is refilled by a cooperator: the
    cooperators' share of total neighbour fitness. If every neighbour has
    zero fitness the share of cooperating neighbours is used instead.
    """
    return _prob_c(g, state, x, params.game, params.w)


def _prob_c(g, state, x, game, w):
    neighbours = g.adjacency[x]
    if not neighbours:
        raise ValueError(f"node {x} has no neighbours")
    total = 0.0
    coop = 0.0
    n_coop = 0
    for y in neighbours:
        f = fitness(node_payoff(g, state, y, game), w)
        total += f
        if state.strategies[y] == Strategy.C:
            coop += f
            n_coop += 1
    if total == 0.0:
        return n_coop / len(neighbours)
    return coop / total


def step(g: Graph, state: PopulationState, params: SimParams, rng):
    """
    One death-birth event: a uniformly random node is vacated and refilled
    with C with probability replacement_prob_C, otherwise with D.

    :param rng: a numpy Generator; the node is drawn before the strategy.
    :return: the successor PopulationState (the input is not modified).
    """
    if state.is_frozen():
        raise FrozenStateError(f"population is frozen at step {state.step}")
    x = int(rng.integers(g.n))
    p_c = replacement_prob_C(g, state, x, params)
    strategies = state.strategies.copy()
    strategies[x] = Strategy.C if rng.random() < p_c else Strategy.D
    return PopulationState(strategies, state.step + 1)


def initial_state(n, eta, rng):
    """
    floor(eta * n) defectors placed on distinct uniformly chosen nodes.
    """
    k = int(math.floor(eta * n + 1e-9))
    strategies = np.zeros(n, dtype=np.int8)
    if k > 0:
        strategies[rng.choice(n, size=k, replace=False)] = Strategy.D
    return PopulationState(strategies, 0)


class _Simulator:
    """
    Incremental death-birth engine. Tracks, per node, how many neighbours
    cooperate so payoffs are O(1), and keeps the five frame counts current
    as single nodes flip.
    """

    def __init__(self, g: Graph, game: GameMatrix, w, strategies):
        self.g = g
        self.adj = [list(nb) for nb in g.adjacency]
        self.deg = [len(nb) for nb in self.adj]
        self.w = w
        self.table = game.matrix().tolist()
        self.s = [int(v) for v in strategies]
        self.c_nbrs = [
            sum(1 for y in self.adj[x] if self.s[y] == Strategy.C) for x in range(g.n)
        ]
        self.d_count = sum(self.s)
        cc = dd = 0
        for u, v in g.edges():
            if self.s[u] == self.s[v]:
                if self.s[u] == Strategy.C:
                    cc += 1
                else:
                    dd += 1
        self.cc = cc
        self.dd = dd

    def frame(self):
        n = self.g.n
        cd = self.g.edge_count - self.cc - self.dd
        return (n - self.d_count, self.d_count, self.cc, cd, self.dd)

    def frozen(self):
        return self.d_count == 0 or self.d_count == self.g.n

    def _fitness(self, y):
        row = self.table[self.s[y]]
        c = self.c_nbrs[y]
        payoff = c * row[0] + (self.deg[y] - c) * row[1]
        f = 1.0 + self.w * (payoff - 1.0)
        return f if f > 0.0 else 0.0

    def prob_c(self, x):
        total = 0.0
        coop = 0.0
        for y in self.adj[x]:
            f = self._fitness(y)
            total += f
            if self.s[y] == Strategy.C:
                coop += f
        if total == 0.0:
            return self.c_nbrs[x] / self.deg[x]
        return coop / total

    def set(self, x, new):
        old = self.s[x]
        if old == new:
            return
        self.s[x] = new
        c = self.c_nbrs[x]
        d = self.deg[x] - c
        if new == Strategy.D:
            self.d_count += 1
            # CC edges to cooperating neighbours become CD; CD edges to
            # defecting neighbours become DD.
            self.cc -= c
            self.dd += d
            for y in self.adj[x]:
                self.c_nbrs[y] -= 1
        else:
            self.d_count -= 1
            self.cc += c
            self.dd -= d
            for y in self.adj[x]:
                self.c_nbrs[y] += 1


def run(params: SimParams, graph: Optional[Graph] = None, run_id=0):
    """
    Simulate one population from its initial state to absorption.

    :param params: game, selection strength, eta, network and seed.
    :param graph: optional prebuilt graph; otherwise built from
                  params.network (the same graph for the same spec).
    :param run_id: identifier carried into the Trajectory and errors.
    :return: a Trajectory.
    :raises UnabsorbedError: if max_steps pass without absorption.
    """
    g = graph if graph is not None else make_network(params.network)
    rng = np.random.default_rng(params.seed)
    state = initial_state(g.n, params.eta, rng)
    sim = _Simulator(g, params.game, params.w, state.strategies)

    limit = params.record_frames
    frames = [sim.frame()]
    t = 0
    nodes = us = ()
    k = 0
    while not sim.frozen():
        if t >= params.max_steps:
            raise UnabsorbedError(run_id, params.max_steps)
        if k == len(nodes):
            nodes = rng.integers(0, g.n, size=_DRAW_BLOCK).tolist()
            us = rng.random(size=_DRAW_BLOCK).tolist()
            k = 0
        x = nodes[k]
        u = us[k]
        k += 1
        sim.set(x, Strategy.C if u < sim.prob_c(x) else Strategy.D)
        t += 1
        if limit is None or len(frames) < limit:
            frames.append(sim.frame())

    outcome = Outcome.ALL_C if sim.d_count == 0 else Outcome.ALL_D
    return Trajectory(
        frames=np.array(frames, dtype=np.int64).reshape(-1, NUM_CHANNELS),
        outcome=outcome,
        absorption_step=t,
        n=g.n,
        edge_count=g.edge_count,
        run_id=run_id,
    )


def derive_seed(master_seed, run_index):
    """
    Independent per-run seed from (master_seed, run_index).
    """
    ss = np.random.SeedSequence([int(master_seed), int(run_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_indexed(job):
    params, graph, run_id = job
    try:
        return run(params, graph=graph, run_id=run_id)
    except UnabsorbedError as e:
        return e


def num_workers():
    return int(os.environ.get("EWS_WORKERS", os.cpu_count() or 1))


def run_many(params: SimParams, runs, master_seed, graph=None, workers=None):
    """
    Simulate `runs` independent populations on one graph.

    :return: (trajectories, failures) in ascending run order; failures are
             the UnabsorbedError instances of runs that hit max_steps.
    """
    g = graph if graph is not None else make_network(params.network)
    jobs = [
        (replace(params, seed=derive_seed(master_seed, i)), g, i) for i in range(runs)
    ]
    workers = num_workers() if workers is None else workers
    if workers > 1 and runs > 1:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_run_indexed, jobs, chunksize=max(1, runs // (4 * workers)))
    else:
        results = [_run_indexed(job) for job in jobs]
    trajectories = [r for r in results if isinstance(r, Trajectory)]
    failures = [r for r in results if isinstance(r, UnabsorbedError)]
    if failures:
        logger.warn(f"{len(failures)} of {runs} runs not absorbed")
    return trajectories, failures


def aggregate_outcomes(trajectories, n_unabsorbed=0):
    """
    Collapse probability and mean recovery / collapse times; a mean over an
    empty subset is None.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("aggregate_outcomes needs at least one trajectory")
    rec = [t.absorption_step for t in trajectories if t.outcome is Outcome.ALL_C]
    col = [t.absorption_step for t in trajectories if t.outcome is Outcome.ALL_D]
    return OutcomeStats(
        p_collapse=len(col) / len(trajectories),
        mean_recovery_time=float(np.mean(rec)) if rec else None,
        mean_collapse_time=float(np.mean(col)) if col else None,
        n_runs=len(trajectories),
        n_collapse=len(col),
        n_unabsorbed=n_unabsorbed,
    )


def transition_matrix(g: Graph, game: GameMatrix, w):
    """
    Death-birth transition matrix over all 2**n strategy states; bit x of a
    state index is 1 when node x defects.
    """
    n = g.n
    if n > 12:
        raise ValueError(f"exact solve enumerates 2**n states, n={n} is too large")
    size = 1 << n
    P = np.zeros((size, size), dtype=np.float64)
    for s in range(size):
        strategies = np.array([(s >> x) & 1 for x in range(n)], dtype=np.int8)
        state = PopulationState(strategies)
        if state.is_frozen():
            P[s, s] = 1.0
            continue
        for x in range(n):
            p_c = _prob_c(g, state, x, game, w)
            P[s, s & ~(1 << x)] += p_c / n
            P[s, s | (1 << x)] += (1.0 - p_c) / n
    return P


def exact_absorption(g: Graph, game: GameMatrix, w, initial_defectors):
    """
    Solve the absorbing chain exactly: (I - Q) B = R for absorption
    probabilities and (I - Q) t = 1 for expected steps to absorption.

    :param initial_defectors: iterable of node ids that start as D.
    :return: dict with p_alld and mean_steps from the given initial state.
    """
    n = g.n
    P = transition_matrix(g, game, w)
    full = (1 << n) - 1
    start = 0
    for x in initial_defectors:
        start |= 1 << int(x)
    if start in (0, full):
        return dict(p_alld=float(start == full), mean_steps=0.0)
    transient = [s for s in range(1 << n) if s not in (0, full)]
    Q = P[np.ix_(transient, transient)]
    R = P[np.ix_(transient, [0, full])]
    A = np.eye(len(transient)) - Q
    B = np.linalg.solve(A, R)
    steps = np.linalg.solve(A, np.ones(len(transient)))
    i = transient.index(start)
    return dict(p_alld=float(B[i, 1]), mean_steps=float(steps[i]))


def exact_fixation(g: Graph, game: GameMatrix, w, initial_defectors):
    return exact_absorption(g, game, w, initial_defectors)["p_alld"]

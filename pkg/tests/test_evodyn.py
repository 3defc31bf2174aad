import math
import pickle
from dataclasses import replace

import numpy as np
import pytest

from graph_ews.evodyn import (
    FrozenStateError,
    GameMatrix,
    Outcome,
    PopulationState,
    Strategy,
    Trajectory,
    UnabsorbedError,
    aggregate_outcomes,
    derive_seed,
    exact_absorption,
    exact_fixation,
    fitness,
    initial_state,
    node_payoff,
    pair_payoff,
    replacement_prob_C,
    run,
    run_many,
    step,
)
from graph_ews.netgen import Graph, complete_graph, cycle_graph, make_network


def _traj(outcome, t):
    return Trajectory(
        frames=np.zeros((1, 5), dtype=np.int64), outcome=outcome, absorption_step=t, n=3, edge_count=3
    )


def test_game_matrix_ordering():
    GameMatrix(R=1, S=-2, T=3, P=0)
    with pytest.raises(ValueError):
        GameMatrix(R=1, S=-1, T=0.5, P=0)


def test_pair_payoffs():
    game = GameMatrix()
    assert pair_payoff(Strategy.C, Strategy.C, game) == 1
    assert pair_payoff(Strategy.C, Strategy.D, game) == -1
    assert pair_payoff(Strategy.D, Strategy.C, game) == 2
    assert pair_payoff(Strategy.D, Strategy.D, game) == 0


def test_fitness_is_clamped():
    assert fitness(1.0, 0.5) == 1.0
    assert fitness(-10.0, 0.5) == 0.0
    with pytest.raises(ValueError):
        fitness(0.0, -0.1)


def test_replacement_probability_on_k3(k3, make_params):
    state = PopulationState.from_list([Strategy.D, Strategy.C, Strategy.C])
    params = make_params(w=0.1, n=3, degree=2)
    assert node_payoff(k3, state, 0, params.game) == 4
    assert replacement_prob_C(k3, state, 1, params) == pytest.approx(0.9 / 2.2, abs=1e-12)


def test_replacement_probability_neutral(make_params):
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    state = PopulationState.from_list([Strategy.C, Strategy.C, Strategy.C, Strategy.D])
    params = make_params(w=0.0, n=4, degree=2)
    assert replacement_prob_C(star, state, 0, params) == pytest.approx(2 / 3)


def test_replacement_probability_all_cooperating_neighbours(k3, make_params):
    state = PopulationState.from_list([Strategy.C, Strategy.D, Strategy.C])
    params = make_params(w=0.1, n=3, degree=2)
    # node 1 is the only defector; its neighbours 0 and 2 cooperate
    assert replacement_prob_C(k3, state, 1, params) == 1.0


def test_step_changes_at_most_one_node(make_params, rng):
    params = make_params(w=0.1, n=20)
    g = make_network(params.network)
    state = initial_state(g.n, 0.5, rng)
    for _ in range(50):
        if state.is_frozen():
            break
        nxt = step(g, state, params, rng)
        assert np.sum(nxt.strategies != state.strategies) <= 1
        assert nxt.step == state.step + 1
        state = nxt


def test_step_is_deterministic(make_params):
    params = make_params(w=0.1, n=20)
    g = make_network(params.network)
    state = initial_state(g.n, 0.3, np.random.default_rng(0))
    a = step(g, state, params, np.random.default_rng(5))
    b = step(g, state, params, np.random.default_rng(5))
    assert np.array_equal(a.strategies, b.strategies)


def test_step_on_frozen_state(k3, make_params, rng):
    state = PopulationState.from_list([0, 0, 0])
    with pytest.raises(FrozenStateError):
        step(k3, state, make_params(n=3, degree=2), rng)


def test_initial_state_counts(rng):
    assert initial_state(100, 0.1, rng).count_defectors() == 10
    assert initial_state(10, 0.25, rng).count_defectors() == 2
    assert initial_state(10, 0.0, rng).count_defectors() == 0


@pytest.mark.parametrize("eta,outcome", [(0.0, Outcome.ALL_C), (1.0, Outcome.ALL_D)])
def test_run_frozen_start(make_params, eta, outcome):
    traj = run(make_params(eta=eta, n=20))
    assert traj.outcome is outcome
    assert traj.absorption_step == 0
    assert len(traj.frames) == 1


def test_run_conservation(make_params):
    params = make_params(w=0.1, n=30)
    g = make_network(params.network)
    for seed in range(20):
        traj = run(replace(params, seed=seed), graph=g)
        f = traj.frames
        assert np.all(f[:, 0] + f[:, 1] == g.n)
        assert np.all(f[:, 2:].sum(axis=1) == g.edge_count)
        assert np.all(np.abs(np.diff(f[:, 1])) <= 1)
        assert len(f) == traj.absorption_step + 1
        assert np.array_equal(f[-1], traj.frozen_frame())


@pytest.mark.slow
def test_run_conservation_full_size(make_params):
    params = make_params(w=0.001, eta=0.1, n=100)
    g = make_network(params.network)
    trajectories, failures = run_many(params, 100, master_seed=0, graph=g)
    assert not failures and len(trajectories) == 100
    max_degree = int(g.degrees().max())
    for traj in trajectories:
        f = traj.frames
        assert np.all(f[:, 0] + f[:, 1] == g.n)
        assert np.all(f[:, 2:].sum(axis=1) == g.edge_count)
        # one replaced node changes #D by at most 1 and touches only its own edges
        assert np.all(np.abs(np.diff(f[:, 1])) <= 1)
        assert np.all(np.abs(np.diff(f[:, 2:], axis=0)) <= max_degree)


def test_run_record_limit(make_params):
    params = make_params(w=0.1, n=30, eta=0.5, seed=3)
    full = run(params)
    cut = run(replace(params, record_frames=5))
    assert cut.absorption_step == full.absorption_step
    assert cut.outcome is full.outcome
    assert np.array_equal(cut.frames, full.frames[:5])


def test_run_unabsorbed(make_params):
    params = make_params(w=0.0, n=50, eta=0.5, max_steps=3)
    with pytest.raises(UnabsorbedError) as info:
        run(params, run_id=7)
    assert info.value.run_id == 7
    assert info.value.max_steps == 3


def test_run_many_order_and_workers(make_params):
    params = make_params(w=0.1, n=20, eta=0.2)
    serial, failures = run_many(params, 8, master_seed=42, workers=1)
    pooled, _ = run_many(params, 8, master_seed=42, workers=2)
    assert not failures
    assert [t.run_id for t in serial] == list(range(8))
    for a, b in zip(serial, pooled):
        assert a.outcome is b.outcome
        assert np.array_equal(a.frames, b.frames)


@pytest.mark.parametrize("workers", [1, 2])
def test_run_many_collects_failures(make_params, workers):
    params = make_params(w=0.0, n=50, eta=0.5, max_steps=2)
    trajectories, failures = run_many(params, 4, master_seed=0, workers=workers)
    assert trajectories == []
    assert [f.run_id for f in failures] == [0, 1, 2, 3]
    assert all(f.max_steps == 2 for f in failures)


def test_unabsorbed_error_pickles():
    err = pickle.loads(pickle.dumps(UnabsorbedError(3, 2)))
    assert (err.run_id, err.max_steps) == (3, 2)
    assert str(err) == "run 3 not absorbed after 2 steps"


def test_derive_seed_distinct():
    seeds = {derive_seed(0, i) for i in range(100)}
    assert len(seeds) == 100
    assert derive_seed(1, 0) == derive_seed(1, 0)


def test_aggregate_outcomes():
    stats = aggregate_outcomes([_traj(Outcome.ALL_C, 10), _traj(Outcome.ALL_D, 20)])
    assert stats.p_collapse == 0.5
    assert stats.mean_recovery_time == 10
    assert stats.mean_collapse_time == 20

    stats = aggregate_outcomes([_traj(Outcome.ALL_C, 4)])
    assert stats.p_collapse == 0
    assert stats.mean_collapse_time is None
    with pytest.raises(ValueError):
        aggregate_outcomes([])


@pytest.mark.parametrize("n", [3, 4, 5])
def test_exact_neutral_fixation_is_one_over_n(n):
    for g in (complete_graph(n), cycle_graph(n)):
        assert exact_fixation(g, GameMatrix(), 0.0, [0]) == pytest.approx(1 / n, abs=1e-10)


def test_exact_absorption_trivial_states(k3):
    assert exact_absorption(k3, GameMatrix(), 0.1, []) == dict(p_alld=0.0, mean_steps=0.0)
    assert exact_absorption(k3, GameMatrix(), 0.1, [0, 1, 2])["p_alld"] == 1.0


def test_exact_selection_favours_defection_when_well_mixed():
    k4 = complete_graph(4)
    weak = exact_fixation(k4, GameMatrix(), 0.0, [0])
    strong = exact_fixation(k4, GameMatrix(), 0.5, [0])
    assert strong > weak


@pytest.mark.slow
@pytest.mark.parametrize("graph", [complete_graph(3), cycle_graph(4)])
def test_empirical_fixation_matches_exact(graph, make_params):
    runs = 20000
    eta = 1.0 / graph.n
    params = make_params(w=0.0, eta=eta, n=graph.n, degree=2)
    trajectories, failures = run_many(params, runs, master_seed=2024, graph=graph)
    assert not failures
    p = exact_fixation(graph, params.game, 0.0, [0])
    p_hat = aggregate_outcomes(trajectories).p_collapse
    assert abs(p_hat - p) < 3 * math.sqrt(p * (1 - p) / runs)


@pytest.mark.slow
def test_selection_facilitates_collapse(make_params):
    weak, _ = run_many(make_params(w=0.001), 300, master_seed=1)
    strong, _ = run_many(make_params(w=0.1), 300, master_seed=1)
    assert aggregate_outcomes(strong).p_collapse > aggregate_outcomes(weak).p_collapse

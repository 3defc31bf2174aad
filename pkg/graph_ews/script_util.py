import argparse
from dataclasses import replace

from .evodyn import GameMatrix, SimParams
from .harness import DEFAULT_DEGREES, ExperimentConfig
from .netgen import NetworkKind, NetworkSpec
from .seq_models import ModelKind, ModelSpec
from .train_util import TrainConfig
from .utils import parse_float_list, parse_int_list, parse_str_list, str2bool


def network_defaults():
    """
    Defaults for population topologies.
    """
    return dict(
        network="small-world",
        n=100,
        degree_param=4,  # ring k / mean degree; scale-free uses m=2
        rewire_beta=0.1,
        net_seed=0,
    )


def game_defaults():
    return dict(R=1.0, S=-1.0, T=2.0, P=0.0)


def simulation_defaults():
    """
    Defaults for the evolutionary dynamics.
    """
    res = dict(
        w=0.001,
        eta=0.1,
        max_steps=10 ** 6,
        runs=2000,
        seed=0,
        record_frames=0,  # 0 keeps the full trajectory
    )
    res.update(game_defaults())
    res.update(network_defaults())
    return res


def dataset_defaults():
    return dict(
        ws=30,
        test_fraction=0.2,
        stratified=True,
        exclude_absorbed=False,
    )


def model_defaults():
    """
    Defaults for the sequence classifiers.
    """
    return dict(
        model="SeqLstm",
        hidden_size=64,
        lstm_layers=2,
        conv_channels=32,
        conv_kernel=3,
        conv2d_kernel="3,5",
        text_kernels="3,4,5",
        text_channels=32,
        pool_window=2,
        pool_stride=2,
        d_model=64,
        ff_size=128,
        encoder_layers=3,
        model_seed=0,
    )


def train_defaults():
    return dict(
        learning_rate=1e-3,
        batch_size=64,
        max_epochs=50,
        early_stop_patience=5,
        validation_fraction=0.1,
        train_seed=0,
        rebalance=False,
    )


def experiment_defaults():
    """
    Defaults for grid sweeps. Grid axes are comma-separated lists.
    """
    res = dict(
        w_grid="0.001,0.005,0.01,0.05,0.1",
        ws_grid="30,50,100,500,1000",
        S_grid="-1",
        T_grid="2",
        networks="small-world",
        models=",".join(k.value for k in ModelKind),
        runs_per_cell=2000,
        seeds="0,1,2",
        output_dir="results",
        n=100,
        eta=0.1,
        R=1.0,
        P=0.0,
        mean_degree=DEFAULT_DEGREES[NetworkKind.RANDOM],
        ring_k=DEFAULT_DEGREES[NetworkKind.SMALL_WORLD],
        attach_m=DEFAULT_DEGREES[NetworkKind.SCALE_FREE],
        rewire_beta=0.1,
        max_steps=10 ** 6,
        test_fraction=0.2,
        exclude_absorbed=False,
        sim_workers=0,  # 0 reads EWS_WORKERS
        cell_workers=1,
    )
    res.update({k: v for k, v in model_defaults().items() if k not in ("model", "model_seed")})
    res.update({k: v for k, v in train_defaults().items() if k != "train_seed"})
    return res


def create_network_spec(network, n, degree_param, rewire_beta, net_seed):
    return NetworkSpec(
        kind=NetworkKind(network),
        n=n,
        degree_param=degree_param,
        rewire_beta=rewire_beta,
        seed=net_seed,
    )


def create_sim_params(
    *,
    w,
    eta,
    max_steps,
    seed,
    record_frames,
    R,
    S,
    T,
    P,
    network,
    n,
    degree_param,
    rewire_beta,
    net_seed,
    runs=None,
):
    return SimParams(
        game=GameMatrix(R=R, S=S, T=T, P=P),
        w=w,
        eta=eta,
        network=create_network_spec(network, n, degree_param, rewire_beta, net_seed),
        max_steps=max_steps,
        seed=seed,
        record_frames=record_frames or None,
    )


def sim_params_for_graph(params: SimParams, graph, spec=None):
    """
    Rebind params to a network loaded from disk. Without a stored spec the
    kind and degree come from the flags and n from the graph.
    """
    if spec is None:
        spec = replace(params.network, n=graph.n)
    elif spec.n != graph.n:
        raise ValueError(f"network spec n={spec.n} does not match graph n={graph.n}")
    return replace(params, network=spec)


def _model_kwargs(
    hidden_size,
    lstm_layers,
    conv_channels,
    conv_kernel,
    conv2d_kernel,
    text_kernels,
    text_channels,
    pool_window,
    pool_stride,
    d_model,
    ff_size,
    encoder_layers,
):
    kernel2d = parse_int_list(conv2d_kernel)
    if len(kernel2d) != 2:
        raise ValueError(f"conv2d_kernel needs two sizes, got {conv2d_kernel!r}")
    return dict(
        hidden_size=hidden_size,
        lstm_layers=lstm_layers,
        conv_channels=conv_channels,
        conv_kernel=conv_kernel,
        conv2d_kernel=tuple(kernel2d),
        text_kernels=tuple(parse_int_list(text_kernels)),
        text_channels=text_channels,
        pool_window=pool_window,
        pool_stride=pool_stride,
        d_model=d_model,
        ff_size=ff_size,
        encoder_layers=encoder_layers,
    )


def create_model_spec(ws, model, model_seed, **kwargs):
    return ModelSpec(kind=ModelKind(model), ws=ws, seed=model_seed, **_model_kwargs(**kwargs))


def create_train_config(
    learning_rate,
    batch_size,
    max_epochs,
    early_stop_patience,
    validation_fraction,
    train_seed,
    rebalance,
):
    return TrainConfig(
        learning_rate=learning_rate,
        batch_size=batch_size,
        max_epochs=max_epochs,
        early_stop_patience=early_stop_patience,
        validation_fraction=validation_fraction,
        seed=train_seed,
        rebalance=rebalance,
    )


def create_experiment_config(**kwargs):
    model_keys = [k for k in model_defaults() if k not in ("model", "model_seed")]
    train_keys = [k for k in train_defaults() if k != "train_seed"]
    return ExperimentConfig(
        w=tuple(parse_float_list(kwargs["w_grid"])),
        ws=tuple(parse_int_list(kwargs["ws_grid"])),
        S=tuple(parse_float_list(kwargs["S_grid"])),
        T=tuple(parse_float_list(kwargs["T_grid"])),
        networks=tuple(NetworkKind(k) for k in parse_str_list(kwargs["networks"])),
        models=tuple(ModelKind(k) for k in parse_str_list(kwargs["models"])),
        runs_per_cell=kwargs["runs_per_cell"],
        seeds=tuple(parse_int_list(kwargs["seeds"])),
        output_dir=kwargs["output_dir"],
        n=kwargs["n"],
        eta=kwargs["eta"],
        R=kwargs["R"],
        P=kwargs["P"],
        degrees={
            NetworkKind.RANDOM: kwargs["mean_degree"],
            NetworkKind.SMALL_WORLD: kwargs["ring_k"],
            NetworkKind.SCALE_FREE: kwargs["attach_m"],
        },
        rewire_beta=kwargs["rewire_beta"],
        max_steps=kwargs["max_steps"],
        test_fraction=kwargs["test_fraction"],
        exclude_absorbed=kwargs["exclude_absorbed"],
        train=create_train_config(train_seed=0, **{k: kwargs[k] for k in train_keys}),
        model_overrides=_model_kwargs(**{k: kwargs[k] for k in model_keys}),
        sim_workers=kwargs["sim_workers"] or None,
        cell_workers=kwargs["cell_workers"],
    )


def add_dict_to_argparser(parser, default_dict):
    for k, v in default_dict.items():
        v_type = type(v)
        if v is None:
            v_type = str
        elif isinstance(v, bool):
            v_type = str2bool
        parser.add_argument(f"--{k}", default=v, type=v_type)


def args_to_dict(args, keys):
    return {k: getattr(args, k) for k in keys}


def base_argparser(description):
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--cfg", default="", type=str, help="config name under configs/")
    parser.add_argument("--log_dir", default="", type=str)
    return parser

import argparse
import json
from dataclasses import replace

import pytest

from graph_ews.netgen import NetworkKind, NetworkSpec, cycle_graph
from graph_ews.script_util import (
    add_dict_to_argparser,
    args_to_dict,
    create_experiment_config,
    create_model_spec,
    create_sim_params,
    experiment_defaults,
    model_defaults,
    sim_params_for_graph,
    simulation_defaults,
)
from graph_ews.seq_models import ModelKind
from graph_ews.utils import (
    content_hash,
    load_parameters,
    parse_float_list,
    read_csv,
    str2bool,
    write_csv,
)


def _parser(defaults):
    parser = argparse.ArgumentParser()
    parser.add_argument("--cfg", default="", type=str)
    add_dict_to_argparser(parser, defaults)
    return parser


def test_content_hash_is_key_order_independent():
    assert content_hash(dict(a=1, b=[2, 3])) == content_hash(dict(b=[2, 3], a=1))
    assert content_hash(dict(a=1)) != content_hash(dict(a=2))
    assert len(content_hash({})) == 64


def test_csv_undefined_round_trip(tmp_path):
    path = str(tmp_path / "t.csv")
    write_csv([dict(a=1, b=None), dict(a=2.5)], path, ["a", "b"])
    assert open(path).read().splitlines() == ["a,b", "1,undefined", "2.5,undefined"]
    assert read_csv(path) == [dict(a="1", b=None), dict(a="2.5", b=None)]


def test_str2bool():
    assert str2bool("yes") is True and str2bool("0") is False and str2bool(True) is True
    with pytest.raises(argparse.ArgumentTypeError):
        str2bool("maybe")


def test_parse_lists():
    assert parse_float_list("0.1, 0.5,") == [0.1, 0.5]
    assert parse_float_list([1, 2]) == [1.0, 2.0]


def test_load_parameters_coerces_to_flag_types(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(dict(w_grid=[0.01, 0.1], n="20", exclude_absorbed="true")))
    parser = _parser(experiment_defaults())
    args = parser.parse_args(["--cfg", str(cfg)])
    args.__dict__.update(load_parameters(args))
    assert args.w_grid == "0.01,0.1"
    assert args.n == 20
    assert args.exclude_absorbed is True
    assert args.cfgs_name == "run"


def test_load_parameters_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(dict(not_a_flag=1)))
    args = _parser(experiment_defaults()).parse_args(["--cfg", str(cfg)])
    with pytest.raises(ValueError, match="not_a_flag"):
        load_parameters(args)


def test_load_parameters_without_cfg():
    assert load_parameters(_parser(dict(x=1)).parse_args([])) == {}


def test_experiment_defaults_build_a_config():
    args = _parser(experiment_defaults()).parse_args(
        ["--w_grid", "0.01,0.1", "--networks", "random,scale-free", "--models", "TextCnn"]
    )
    config = create_experiment_config(**args_to_dict(args, experiment_defaults().keys()))
    assert config.w == (0.01, 0.1)
    assert config.networks == (NetworkKind.RANDOM, NetworkKind.SCALE_FREE)
    assert config.models == (ModelKind.TEXT_CNN,)
    assert config.seeds == (0, 1, 2)
    assert config.sim_workers is None
    spec = config.model_spec(ModelKind.TEXT_CNN, 30, seed=1)
    assert spec.text_kernels == (3, 4, 5)
    assert spec.conv2d_kernel == (3, 5)


def test_sim_and_model_factories():
    params = create_sim_params(**simulation_defaults())
    assert params.network.kind is NetworkKind.SMALL_WORLD
    assert params.record_frames is None
    kwargs = model_defaults()
    kwargs["conv2d_kernel"] = "3"
    with pytest.raises(ValueError, match="conv2d_kernel"):
        create_model_spec(ws=30, **kwargs)


def test_sim_params_follow_loaded_graph():
    params = create_sim_params(**simulation_defaults())
    g = cycle_graph(12)
    rebound = sim_params_for_graph(params, g)
    assert rebound.network.n == 12
    assert rebound.network.kind is params.network.kind
    assert rebound.w == params.w

    spec = NetworkSpec(kind=NetworkKind.RANDOM, n=12, degree_param=2, seed=3)
    assert sim_params_for_graph(params, g, spec).network == spec
    with pytest.raises(ValueError, match="does not match"):
        sim_params_for_graph(params, g, replace(spec, n=13))

"""
Run independent death-birth simulations on one network and write the
trajectories as JSON lines.
"""

import json

import blobfile as bf

from graph_ews import logger
from graph_ews.dataset import write_trajectories
from graph_ews.evodyn import aggregate_outcomes, run_many
from graph_ews.netgen import make_network, read_network
from graph_ews.script_util import (
    add_dict_to_argparser,
    args_to_dict,
    base_argparser,
    create_sim_params,
    sim_params_for_graph,
    simulation_defaults,
)
from graph_ews.utils import load_parameters


def main():
    args = create_argparser().parse_args()
    args.__dict__.update(load_parameters(args))
    logger.configure(dir=args.log_dir or None)

    params = create_sim_params(**args_to_dict(args, simulation_defaults().keys()))
    if args.network_file:
        logger.log(f"loading network from {args.network_file}...")
        graph, spec = read_network(args.network_file)
        if spec is None:
            logger.warn(f"{args.network_file} has no spec file; network kind taken from flags")
        params = sim_params_for_graph(params, graph, spec)
    else:
        graph = make_network(params.network)

    logger.log(
        f"simulating {args.runs} runs on {params.network.kind.value} network "
        f"n={graph.n} (w={params.w}, eta={params.eta})..."
    )
    trajectories, failures = run_many(
        params, args.runs, args.seed, graph=graph, workers=args.workers or None
    )
    stats = aggregate_outcomes(trajectories, n_unabsorbed=len(failures))
    logger.logkvs(stats.to_dict())
    logger.dumpkvs()

    write_trajectories(args.output, trajectories, params, graph.n, graph.edge_count)
    outcome = dict(stats.to_dict(), network=params.network.to_dict())
    with bf.BlobFile(args.output + ".outcome.json", "w") as f:
        f.write(json.dumps(outcome, sort_keys=True))
    logger.log(f"wrote {len(trajectories)} trajectories to {args.output}")


def create_argparser():
    defaults = dict(output="trajectories.jsonl", network_file="", workers=0)
    defaults.update(simulation_defaults())
    parser = base_argparser(__doc__)
    add_dict_to_argparser(parser, defaults)
    return parser


if __name__ == "__main__":
    main()

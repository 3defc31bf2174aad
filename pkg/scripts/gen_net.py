"""
Generate a population network and write it as an edge list, with the
generating spec next to it in <output>.spec.json.
"""

from graph_ews import logger
from graph_ews.netgen import degree_stats, make_network, write_network
from graph_ews.script_util import (
    add_dict_to_argparser,
    args_to_dict,
    base_argparser,
    create_network_spec,
    network_defaults,
)
from graph_ews.utils import load_parameters


def main():
    args = create_argparser().parse_args()
    args.__dict__.update(load_parameters(args))
    logger.configure(dir=args.log_dir or None)

    spec = create_network_spec(**args_to_dict(args, network_defaults().keys()))
    logger.log(f"generating {spec.kind.value} network with n={spec.n}...")
    g = make_network(spec)
    stats = degree_stats(g)
    logger.logkv("edges", g.edge_count)
    logger.logkvs({f"degree_{k}": v for k, v in stats.items()})
    logger.dumpkvs()

    write_network(args.output, g, spec)
    logger.log(f"wrote {args.output}")


def create_argparser():
    defaults = dict(output="network.txt")
    defaults.update(network_defaults())
    parser = base_argparser(__doc__)
    add_dict_to_argparser(parser, defaults)
    return parser


if __name__ == "__main__":
    main()

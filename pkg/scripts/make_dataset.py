"""
Window and label simulated trajectories into a training dataset.
"""

from graph_ews import logger
from graph_ews.dataset import class_fractions, make_dataset, read_trajectories, write_jsonl
from graph_ews.script_util import add_dict_to_argparser, base_argparser, dataset_defaults
from graph_ews.utils import load_parameters


def main():
    args = create_argparser().parse_args()
    args.__dict__.update(load_parameters(args))
    logger.configure(dir=args.log_dir or None)

    logger.log(f"reading trajectories from {args.trajectories}...")
    trajectories, header = read_trajectories(args.trajectories)
    dataset = make_dataset(
        trajectories,
        args.ws,
        header["sim_params"],
        header["n"],
        header["edge_count"],
        exclude_absorbed=args.exclude_absorbed,
    )
    logger.logkv("records", len(dataset))
    logger.logkvs(class_fractions(dataset))
    logger.dumpkvs()
    write_jsonl(args.output, dataset)
    logger.log(f"wrote {args.output}")


def create_argparser():
    defaults = dict(trajectories="trajectories.jsonl", output="dataset.jsonl")
    defaults.update(dataset_defaults())
    parser = base_argparser(__doc__)
    add_dict_to_argparser(parser, defaults)
    return parser


if __name__ == "__main__":
    main()

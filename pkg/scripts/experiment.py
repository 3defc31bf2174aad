"""
Run a grid sweep: simulate, window, train and score every model in every
cell, then write the requested figure tables.
"""

from graph_ews import logger
from graph_ews.harness import run_experiment
from graph_ews.report import report
from graph_ews.script_util import (
    add_dict_to_argparser,
    args_to_dict,
    base_argparser,
    create_experiment_config,
    experiment_defaults,
)
from graph_ews.utils import load_parameters, parse_str_list


def main():
    args = create_argparser().parse_args()
    args.__dict__.update(load_parameters(args))
    logger.configure(dir=args.log_dir or args.output_dir)

    config = create_experiment_config(**args_to_dict(args, experiment_defaults().keys()))
    table = run_experiment(config)
    for figure_id in parse_str_list(args.figures):
        try:
            path = report(table, figure_id, config.output_dir)
        except ValueError as e:
            logger.warn(f"skipping {figure_id}: {e}")
            continue
        logger.log(f"wrote {path}")


def create_argparser():
    defaults = dict(figures="fig6,fig6f")
    defaults.update(experiment_defaults())
    parser = base_argparser(__doc__)
    add_dict_to_argparser(parser, defaults)
    return parser


if __name__ == "__main__":
    main()

"""
Write figure tables from a finished experiment directory.
"""

from graph_ews import logger
from graph_ews.harness import ReportTable
from graph_ews.report import FIGURES, report
from graph_ews.script_util import add_dict_to_argparser, base_argparser
from graph_ews.utils import load_parameters, parse_str_list


def main():
    args = create_argparser().parse_args()
    args.__dict__.update(load_parameters(args))
    logger.configure(dir=args.log_dir or None)

    table = ReportTable.read(args.input)
    out_dir = args.output_dir or args.input
    for figure_id in parse_str_list(args.figures):
        path = report(table, figure_id, out_dir)
        logger.log(f"wrote {path}")


def create_argparser():
    defaults = dict(input="results", output_dir="", figures=",".join(FIGURES))
    parser = base_argparser(__doc__)
    add_dict_to_argparser(parser, defaults)
    return parser


if __name__ == "__main__":
    main()

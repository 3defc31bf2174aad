"""
Score a trained model on the held-out side of a dataset split (or on a
whole dataset with --use_split False) under both positive classes.
"""

from graph_ews import logger
from graph_ews.dataset import read_jsonl, split
from graph_ews.metrics import METRIC_COLUMNS, dual_report, report_rows
from graph_ews.script_util import add_dict_to_argparser, base_argparser
from graph_ews.seq_models import load_model
from graph_ews.train_util import evaluate
from graph_ews.utils import load_parameters, write_csv


def main():
    args = create_argparser().parse_args()
    args.__dict__.update(load_parameters(args))
    logger.configure(dir=args.log_dir or None)

    model = load_model(args.model)
    dataset = read_jsonl(args.dataset)
    if args.use_split:
        dataset = split(
            dataset,
            test_fraction=args.test_fraction,
            seed=args.split_seed,
            stratified=args.stratified,
        ).test
    logger.log(f"evaluating {model.spec.kind.value} on {len(dataset)} records...")

    predictions, labels = evaluate(model, dataset)
    reports = dual_report(predictions, labels)
    sim = dataset.sim_params
    context = dict(
        model=model.spec.kind.value,
        w=sim.get("w"),
        ws=dataset.ws,
        S=sim.get("game", {}).get("S"),
        T=sim.get("game", {}).get("T"),
        network=sim.get("network", {}).get("kind"),
        seed=args.split_seed,
    )
    rows = report_rows(reports, context)
    for row in rows:
        logger.logkvs({k: row[k] for k in ("positive_class", "precision", "recall", "f1", "accuracy")})
        logger.dumpkvs()
    write_csv(rows, args.output, METRIC_COLUMNS)
    logger.log(f"wrote {args.output}")


def create_argparser():
    defaults = dict(
        model="model.npz",
        dataset="dataset.jsonl",
        output="metrics.csv",
        use_split=True,
        test_fraction=0.2,
        split_seed=0,
        stratified=True,
    )
    parser = base_argparser(__doc__)
    add_dict_to_argparser(parser, defaults)
    return parser


if __name__ == "__main__":
    main()

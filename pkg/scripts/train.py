"""
Train a sequence classifier on the training side of a dataset split.
"""

import blobfile as bf

from graph_ews import logger
from graph_ews.dataset import read_jsonl, split
from graph_ews.script_util import (
    add_dict_to_argparser,
    args_to_dict,
    base_argparser,
    create_model_spec,
    create_train_config,
    dataset_defaults,
    model_defaults,
    train_defaults,
)
from graph_ews.seq_models import save_model
from graph_ews.train_util import train
from graph_ews.utils import load_parameters


def main():
    args = create_argparser().parse_args()
    args.__dict__.update(load_parameters(args))
    logger.configure(dir=args.log_dir or None)

    logger.log(f"loading dataset {args.dataset}...")
    dataset = read_jsonl(args.dataset)
    parts = split(
        dataset, test_fraction=args.test_fraction, seed=args.split_seed, stratified=args.stratified
    )
    logger.log(f"split: {len(parts.train)} train / {len(parts.test)} held out")

    spec = create_model_spec(ws=dataset.ws, **args_to_dict(args, model_defaults().keys()))
    config = create_train_config(**args_to_dict(args, train_defaults().keys()))
    model, history = train(spec, parts.train, config)

    save_model(model, args.output)
    history.write_csv(bf.join(logger.get_dir(), "history.csv"))
    logger.log(f"saved model to {args.output} (best epoch {history.best_epoch})")


def create_argparser():
    defaults = dict(dataset="dataset.jsonl", output="model.npz", split_seed=0)
    defaults.update(dataset_defaults())
    defaults.update(model_defaults())
    defaults.update(train_defaults())
    del defaults["ws"]
    parser = base_argparser(__doc__)
    add_dict_to_argparser(parser, defaults)
    return parser


if __name__ == "__main__":
    main()

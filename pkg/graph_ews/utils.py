import argparse
import csv
import hashlib
import io
import json
import os

import blobfile as bf


def load_parameters(args: argparse.Namespace, config_dir="./configs") -> dict:
    """
    loading configure json file.
    path of json file folder: ./configs/

    Every key in the file must already be a command-line flag; its value is
    coerced to the flag's default type. List values are joined with commas
    so grid axes can be written either way.
    """
    if not getattr(args, "cfg", ""):
        return {}
    if args.cfg.endswith(".json"):
        para_name = args.cfg
    else:
        para_name = args.cfg + ".json"
    para_dir = para_name if bf.exists(para_name) else bf.join(config_dir, para_name)
    cfgs_name = os.path.basename(para_dir)[:-5]
    with bf.BlobFile(para_dir, "r") as f:
        load_args = json.load(f)

    for k in load_args:
        if k not in args.__dict__:
            raise ValueError(f"Unknown parameter in {para_dir}: {k}")
        default = args.__dict__[k]
        value = load_args[k]
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        if default is None:
            load_args[k] = value if value is None else str(value)
        elif isinstance(default, bool):
            load_args[k] = str2bool(value)
        else:
            load_args[k] = type(default)(value)

    load_args["cfgs_name"] = cfgs_name
    return load_args


def str2bool(v):
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("yes", "true", "t", "y", "1"):
        return True
    elif str(v).lower() in ("no", "false", "f", "n", "0"):
        return False
    raise argparse.ArgumentTypeError("boolean value expected")


def parse_float_list(s):
    if isinstance(s, (list, tuple)):
        return [float(x) for x in s]
    return [float(x) for x in str(s).split(",") if x.strip()]


def parse_int_list(s):
    if isinstance(s, (list, tuple)):
        return [int(x) for x in s]
    return [int(x) for x in str(s).split(",") if x.strip()]


def parse_str_list(s):
    if isinstance(s, (list, tuple)):
        return [str(x) for x in s]
    return [x.strip() for x in str(s).split(",") if x.strip()]


def create_folders(f_dir):
    if not bf.exists(f_dir):
        bf.makedirs(f_dir)


def content_hash(obj) -> str:
    """
    SHA-256 of the canonical JSON encoding of `obj`.
    """
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_csv(rows, path, columns):
    """
    Write a list of dicts as CSV with a fixed column order. None is written
    as the literal "undefined".
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(
            ["undefined" if row.get(c) is None else row.get(c) for c in columns]
        )
    with bf.BlobFile(path, "w") as f:
        f.write(buf.getvalue())


def read_csv(path):
    """
    Inverse of write_csv: values come back as strings except "undefined",
    which comes back as None.
    """
    with bf.BlobFile(path, "r") as f:
        reader = csv.DictReader(io.StringIO(f.read()))
        return [
            {k: (None if v == "undefined" else v) for k, v in row.items()}
            for row in reader
        ]

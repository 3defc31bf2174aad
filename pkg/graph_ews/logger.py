"""
Key/value logger for simulations, sweeps and training runs.

Per-epoch or per-cell numbers are collected with logkv()/logkvs() and
written as one row by dumpkvs(); progress lines and warnings go through
log()/warn(). Output goes to any mix of stdout, log.txt, progress.csv and
progress.json under the configured directory.
"""

import datetime
import json
import os
import os.path as osp
import sys
import tempfile
from contextlib import contextmanager

INFO = 20
WARN = 30


class KVWriter:
    def writekvs(self, kvs):
        raise NotImplementedError

    def close(self):
        pass


class SeqWriter:
    def writeseq(self, seq):
        raise NotImplementedError


def _fmt_value(val):
    if val is None:
        return "undefined"
    if isinstance(val, float) or hasattr(val, "dtype"):
        return "%-8.4g" % val
    return str(val)


class HumanOutputFormat(KVWriter, SeqWriter):
    """
    Boxed key/value tables and plain progress lines, to a stream or a file.
    """

    max_width = 40

    def __init__(self, target):
        if isinstance(target, str):
            self.file = open(target, "wt")
            self.own_file = True
        else:
            self.file = target
            self.own_file = False

    def _clip(self, s):
        return s if len(s) <= self.max_width else s[: self.max_width - 3] + "..."

    def writekvs(self, kvs):
        if not kvs:
            return
        cells = [(self._clip(k), self._clip(_fmt_value(v))) for k, v in sorted(kvs.items())]
        kw = max(len(k) for k, _ in cells)
        vw = max(len(v) for _, v in cells)
        rule = "-" * (kw + vw + 7)
        body = [f"| {k.ljust(kw)} | {v.ljust(vw)} |" for k, v in cells]
        self.file.write("\n".join([rule] + body + [rule]) + "\n")
        self.file.flush()

    def writeseq(self, seq):
        self.file.write(" ".join(seq) + "\n")
        self.file.flush()

    def close(self):
        if self.own_file:
            self.file.close()


class JSONOutputFormat(KVWriter):
    def __init__(self, filename):
        self.file = open(filename, "wt")

    def writekvs(self, kvs):
        row = {k: float(v) if hasattr(v, "dtype") else v for k, v in sorted(kvs.items())}
        self.file.write(json.dumps(row) + "\n")
        self.file.flush()

    def close(self):
        self.file.close()


class CSVOutputFormat(KVWriter):
    """
    One row per dumpkvs(). A key seen for the first time widens the header
    and earlier rows get an empty cell for it.
    """

    def __init__(self, filename):
        self.file = open(filename, "w+t")
        self.keys = []

    def _rewrite_header(self, extra):
        self.file.seek(0)
        old = self.file.read().splitlines()
        self.keys.extend(extra)
        self.file.seek(0)
        self.file.truncate()
        self.file.write(",".join(self.keys) + "\n")
        for line in old[1:]:
            self.file.write(line + "," * len(extra) + "\n")

    def writekvs(self, kvs):
        extra = sorted(set(kvs) - set(self.keys))
        if extra:
            self._rewrite_header(extra)
        self.file.write(",".join(_csv_cell(kvs.get(k)) for k in self.keys) + "\n")
        self.file.flush()

    def close(self):
        self.file.close()


def _csv_cell(v):
    return "" if v is None else str(v)


_FORMATS = {
    "stdout": lambda d, suffix: HumanOutputFormat(sys.stdout),
    "log": lambda d, suffix: HumanOutputFormat(osp.join(d, f"log{suffix}.txt")),
    "json": lambda d, suffix: JSONOutputFormat(osp.join(d, f"progress{suffix}.json")),
    "csv": lambda d, suffix: CSVOutputFormat(osp.join(d, f"progress{suffix}.csv")),
}


def make_output_format(format, ev_dir, log_suffix=""):
    if format not in _FORMATS:
        raise ValueError(f"unknown log format: {format}")
    os.makedirs(ev_dir, exist_ok=True)
    return _FORMATS[format](ev_dir, log_suffix)


# ================================================================
# API
# ================================================================


def logkv(key, val):
    """
    Record a diagnostic for the next dumpkvs(); the last value wins.
    """
    get_current().logkv(key, val)


def logkvs(d):
    for k, v in d.items():
        logkv(k, v)


def dumpkvs():
    """
    Write every diagnostic recorded since the previous dump as one row.
    """
    return get_current().dumpkvs()


def log(*args, level=INFO):
    get_current().log(*args, level=level)


def warn(*args):
    log("WARNING:", *args, level=WARN)


def get_dir():
    return get_current().dir


# ================================================================
# Backend
# ================================================================


def get_current():
    if Logger.CURRENT is None:
        _configure_default_logger()
    return Logger.CURRENT


class Logger:
    CURRENT = None

    def __init__(self, dir, output_formats):
        self.kvs = {}
        self.level = INFO
        self.dir = dir
        self.output_formats = output_formats

    def logkv(self, key, val):
        self.kvs[key] = val

    def dumpkvs(self):
        out = dict(self.kvs)
        for fmt in self.output_formats:
            if isinstance(fmt, KVWriter):
                fmt.writekvs(out)
        self.kvs.clear()
        return out

    def log(self, *args, level=INFO):
        if level < self.level:
            return
        for fmt in self.output_formats:
            if isinstance(fmt, SeqWriter):
                fmt.writeseq(map(str, args))

    def close(self):
        for fmt in self.output_formats:
            fmt.close()


def _make_logger(dir=None, format_strs=None, log_suffix=""):
    if dir is None:
        dir = os.getenv("EWS_LOGDIR")
    if dir is None:
        dir = osp.join(
            tempfile.gettempdir(),
            datetime.datetime.now().strftime("graph-ews-%Y-%m-%d-%H-%M-%S-%f"),
        )
    dir = osp.expanduser(dir)
    os.makedirs(dir, exist_ok=True)

    if format_strs is None:
        format_strs = os.getenv("EWS_LOG_FORMAT", "stdout,log,csv").split(",")
    output_formats = [make_output_format(f, dir, log_suffix) for f in format_strs if f]
    return Logger(dir=dir, output_formats=output_formats)


def _install(new_logger):
    Logger.CURRENT = new_logger
    if new_logger.output_formats:
        log(f"Logging to {new_logger.dir}")


def configure(dir=None, format_strs=None, log_suffix=""):
    """
    Point the current logger at `dir` with the given output formats. The
    outputs of the previous logger are closed.

    :param dir: log directory; falls back to $EWS_LOGDIR, then a fresh
                timestamped folder under the system temp dir.
    :param format_strs: iterable of "stdout", "log", "csv", "json"; falls
                        back to $EWS_LOG_FORMAT (default "stdout,log,csv").
    """
    new_logger = _make_logger(dir, format_strs, log_suffix)
    if Logger.CURRENT is not None:
        Logger.CURRENT.close()
    _install(new_logger)


def _configure_default_logger():
    configure(format_strs=["stdout"])


@contextmanager
def scoped_configure(dir=None, format_strs=None):
    prevlogger = Logger.CURRENT
    _install(_make_logger(dir, format_strs))
    try:
        yield
    finally:
        Logger.CURRENT.close()
        Logger.CURRENT = prevlogger

"""Line-oriented trace records `sweep<TAB>stat<TAB>indices<TAB>value` plus run metadata."""
import json
import os
from collections import defaultdict

import numpy as np

from ..errors import ParseError

TRACE_FILE = "trace.tsv"
META_FILE = "meta.json"


def fmt_idx(idx):
    return "-" if not idx else ",".join(str(int(x)) for x in idx)


def parse_idx(text):
    return () if text == "-" else tuple(int(x) for x in text.split(","))


def format_record(sweep, stat, idx, value):
    return f"{int(sweep)}\t{stat}\t{fmt_idx(idx)}\t{float(value)!r}\n"


class Traces:
    """Recorded per-sweep statistics; `meta` carries ids, genes and schedule."""

    def __init__(self, records=None, meta=None):
        self.records = list(records or [])
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.records)

    def add(self, sweep, stat, idx, value):
        self.records.append((int(sweep), stat, tuple(idx), float(value)))

    def extend(self, sweep, recs):
        for stat, idx, value in recs:
            self.add(sweep, stat, idx, value)

    def stats(self):
        return sorted({r[1] for r in self.records})

    def sweeps(self):
        return np.array(sorted({r[0] for r in self.records}), np.int64)

    def series(self, stat):
        """idx -> values in sweep order."""
        out = defaultdict(list)
        for s, name, idx, v in self.records:
            if name == stat:
                out[idx].append((s, v))
        return {k: np.array([v for _, v in sorted(x)]) for k, x in out.items()}

    def lines(self):
        return [format_record(*r) for r in self.records]

    def write(self, directory):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, TRACE_FILE), "w") as f:
            f.writelines(self.lines())
        write_meta(directory, self.meta)

    @classmethod
    def read(cls, directory):
        path = os.path.join(directory, TRACE_FILE)
        recs = []
        with open(path) as f:
            for n, line in enumerate(f, 1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 4:
                    raise ParseError(f"{path}: expected 4 fields", n)
                try:
                    recs.append((int(parts[0]), parts[1], parse_idx(parts[2]), float(parts[3])))
                except ValueError:
                    raise ParseError(f"{path}: bad number", n) from None
        return cls(recs, read_meta(directory))


def write_meta(directory, meta):
    with open(os.path.join(directory, META_FILE), "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)


def read_meta(directory):
    path = os.path.join(directory, META_FILE)
    if not os.path.exists(path):
        return {}
    with open(path) as f:
        return json.load(f)


def truncate_trace(directory, after_sweep):
    """Drop records beyond `after_sweep` (used when resuming from a checkpoint)."""
    path = os.path.join(directory, TRACE_FILE)
    if not os.path.exists(path):
        return
    with open(path) as f:
        keep = [ln for ln in f if int(ln.split("\t", 1)[0]) <= after_sweep]
    with open(path, "w") as f:
        f.writelines(keep)

"""Function secret sharing and private neural network protocols.

Program functions return the same records as the command line tool, as
dicts (or lists of dicts for multi-record programs).
"""

import json as _json

from . import _core
from ._core import (
    ProtocolError,
    cmp_key_bytes,
    eq_key_bytes,
    eval_cmp_pair,
    eval_eq_pair,
    expected_rounds,
    op_names,
    reconstruct,
    share,
)

__all__ = [
    "ProtocolError",
    "bench",
    "cmp_key_bytes",
    "compare_exhaustive",
    "eq_key_bytes",
    "eval_cmp_pair",
    "eval_eq_pair",
    "expected_rounds",
    "fl_demo",
    "fl_mask_sweep",
    "infer",
    "op_names",
    "precision_sweep",
    "reconstruct",
    "share",
    "train",
]


def bench(op, batch, **kw):
    return _json.loads(_core.bench(op, batch, **kw))


def compare_exhaustive(n_bits):
    return _json.loads(_core.compare_exhaustive(n_bits))


def infer(task="moons", samples=1000, seed=1):
    return _json.loads(_core.infer(task, samples, seed))


def train(task="xor", epochs=None, seed=1):
    return _json.loads(_core.train(task, epochs, seed))


def precision_sweep(fss_bits, precisions=(3,), seed=1):
    return _json.loads(_core.precision_sweep(list(fss_bits), list(precisions), seed))


def fl_demo(clients=2, k=1, rounds=2, seed=1):
    return _json.loads(_core.fl_demo(clients, k, rounds, seed))


def fl_mask_sweep(max_clients=8):
    return _json.loads(_core.fl_mask_sweep(max_clients))

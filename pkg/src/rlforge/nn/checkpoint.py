"""Versioned plain-text parameter checkpoints.

Layout (one checkpoint per file, UTF-8):

    rlforge-checkpoint 1
    <param count>
    <name> <ndim> <dim0> <dim1> ...
    <row-major values separated by single spaces on one line>
    ... repeated per parameter ...

Values are written with ``repr(float)``, which round-trips IEEE-754 doubles
exactly, so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import os

import numpy as np

from rlforge.core import ConfigError, ShapeError

MAGIC = "rlforge-checkpoint"
VERSION = 1


def _named(params) -> list[tuple[str, object]]:
    named = []
    for entry in params:
        if not (isinstance(entry, tuple) and len(entry) == 2 and isinstance(entry[0], str)):
            raise ConfigError("checkpoints take (name, tensor) pairs")
        named.append(entry)
    return named


def save_params(path: str, params) -> None:
    named = _named(params)
    lines = [f"{MAGIC} {VERSION}", str(len(named))]
    for name, tensor in named:
        if " " in name or "\n" in name:
            raise ConfigError(f"parameter name {name!r} must not contain whitespace")
        arr = np.asarray(tensor.data, dtype=np.float64)
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"{name} {arr.ndim}{' ' if dims else ''}{dims}")
        lines.append(" ".join(repr(float(v)) for v in arr.reshape(-1)))
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_params(path: str, params) -> None:
    """Load values into ``params`` in place; names and shapes must match."""
    named = _named(params)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split() != [MAGIC, str(VERSION)]:
        raise ConfigError(f"{path}: not a {MAGIC} v{VERSION} file")
    count = int(lines[1])
    if count != len(named):
        raise ShapeError(f"{path}: holds {count} params, model has {len(named)}")
    cursor = 2
    for name, tensor in named:
        header = lines[cursor].split()
        cursor += 1
        if header[0] != name:
            raise ShapeError(f"{path}: expected param {name!r}, found {header[0]!r}")
        ndim = int(header[1])
        shape = tuple(int(d) for d in header[2 : 2 + ndim])
        if shape != tensor.data.shape:
            raise ShapeError(f"{path}: {name} has shape {shape}, model wants {tensor.data.shape}")
        values = np.fromiter((float(v) for v in lines[cursor].split()), dtype=np.float64)
        cursor += 1
        if values.size != int(np.prod(shape, dtype=np.int64)):
            raise ShapeError(f"{path}: {name} value count mismatch")
        tensor.data = values.reshape(shape)

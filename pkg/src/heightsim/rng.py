"""Deterministic random streams.

Stream rule: the generator for key (k1, k2, ...) under master seed s is
``Generator(SFC64(SeedSequence(entropy=s, spawn_key=(k1, k2, ...))))``.
String keys are mapped to integers with CRC-32 of their UTF-8 bytes.  A
path's stream therefore depends only on (seed, experiment tag, path index,
sub-stream), never on scheduling.

Sub-streams of one path: 0 drives the Brownian increments, 1 the mark
positions, 2 the thinning labels.
"""
from __future__ import annotations

import zlib

import numpy as np

BROWNIAN, MARKS, LABELS = 0, 1, 2


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError("stream keys must be nonnegative")
    return part


def stream(seed: int, *key) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in key))
    return np.random.Generator(np.random.SFC64(ss))


def path_streams(seed: int, tag: str, index: int, n: int = 3) -> list[np.random.Generator]:
    """The n sub-streams (Brownian, marks, labels, ...) of path ``index``."""
    return [stream(seed, tag, index, j) for j in range(n)]

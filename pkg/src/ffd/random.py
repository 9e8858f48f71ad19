"""Seed expansion: one global seed, one independent stream per labelled component."""

import zlib

import numpy as np


def label_key(label):
    return zlib.crc32(label.encode("utf-8"))


def rng_for(seed, *labels):
    """Return a Generator derived from ``seed`` and a path of string/int labels.

    The same (seed, labels) always yields the same stream, and streams for
    different labels are statistically independent.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for lab in labels:
        entropy.append(label_key(lab) if isinstance(lab, str) else int(lab))
    return np.random.default_rng(np.random.SeedSequence(entropy))

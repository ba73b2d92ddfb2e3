"""
Seed splitting.

One root seed drives every run; each sub-task (a bundle, a property clustering,
a query batch) draws its own integer seed derived from the root and stable labels.
"""

import zlib

import numpy as np


def derive_seed(root: int, *labels) -> int:
    """
    Derive a reproducible child seed.

    Args:
        root: Root seed of the run
        *labels: Sub-task identifiers (strings or ints), order-sensitive

    Returns:
        Non-negative 32-bit integer seed
    """
    entropy = [int(root) & 0xFFFFFFFF]
    for label in labels:
        entropy.append(zlib.crc32(str(label).encode("utf-8")))
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])

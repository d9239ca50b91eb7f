"""Named, independent random streams derived from one user seed.

Streams come from Philox (counter-based) keyed by ``SeedSequence(seed,
spawn_key=...)``, so a stream depends only on the seed and its name path,
never on how many other streams were drawn first. That is what lets sweep
cells run in any order or in parallel without changing results.
"""
import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode())


def stream(seed: int, *names) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.Generator(np.random.Philox(ss))

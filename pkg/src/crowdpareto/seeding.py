"""Deterministic, platform-independent RNG stream derivation.

Every Monte Carlo consumer derives its own generator from a master seed
plus a tuple of context keys (record ids, replicate indices, float
boundaries).  Streams therefore do not depend on evaluation order or on
the degree of parallelism.
"""

import hashlib
import struct

import numpy as np


def derive_seed(*keys) -> int:
    """Hash arbitrary context keys into a 64-bit seed.

    Accepts ints, strings, floats (hashed by their IEEE-754 bytes so
    -0.0 and 0.0 stay distinct from rounding noise) and bytes.
    """
    h = hashlib.sha256()
    for key in keys:
        if isinstance(key, bool):
            h.update(b"b" + (b"1" if key else b"0"))
        elif isinstance(key, (int, np.integer)):
            h.update(b"i" + str(int(key)).encode())
        elif isinstance(key, (float, np.floating)):
            h.update(b"f" + struct.pack("<d", float(key)))
        elif isinstance(key, str):
            h.update(b"s" + key.encode("utf-8"))
        elif isinstance(key, bytes):
            h.update(b"y" + key)
        else:
            raise TypeError(f"unhashable seed key type: {type(key)!r}")
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(*keys) -> np.random.Generator:
    """A fresh PCG64 generator seeded from the given context keys."""
    return np.random.default_rng(derive_seed(*keys))

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed: int, name: str) -> np.random.Generator:
    """
    Independent, reproducible random stream for one consumer.

    Streams with the same (seed, name) yield identical sequences on every
    platform; different names never share state.
    """
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(_name_key(name),))
    return np.random.Generator(np.random.SFC64(seq))


def derive_seed(seed: int, label: str) -> int:
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(_name_key(label),))
    return int(seq.generate_state(1, dtype=np.uint32)[0])

"""
Deterministic random substreams

All randomness in a run flows from one root seed. Each consumer asks for a
named substream, optionally qualified by integers (round, client id), and
gets an independent numpy Generator:

    topology                    -> network layout
    trust                       -> Beta trust scores
    partition                   -> dataset split across clients
    init                        -> initial model weights
    synthetic                   -> synthetic dataset generation
    data                        -> validation hold-out
    fading:<round>:<client>     -> per-round channel draws for one client
                                   (own fading, interferer fading or ppp field)
    channel-audit:<cell>        -> Monte Carlo draws of the channel audit grid
    train:<round>:<client>      -> mini-batch shuffling in local training

Derivation: SeedSequence(entropy=root_seed, spawn_key=(crc32(name), *ints)).
crc32 is used because Python's hash() is salted per process.
"""

import zlib
from typing import Tuple

import numpy as np

SEED_MASK = 0xFFFFFFFFFFFFFFFF


def stream_key(name: str, *qualifiers: int) -> Tuple[int, ...]:
    """Spawn key for a named substream"""
    return (zlib.crc32(name.encode("utf-8")) & 0xFFFFFFFF,) + tuple(int(q) for q in qualifiers)


def substream(seed: int, name: str, *qualifiers: int) -> np.random.Generator:
    """
    Independent generator for a named substream of a root seed

    Args:
        seed: Root seed (64-bit; larger values are masked)
        name: Stream name, e.g. "topology" or "fading"
        *qualifiers: Non-negative integers such as round and client id

    Returns:
        numpy Generator seeded only by (seed, name, qualifiers)
    """
    if any(int(q) < 0 for q in qualifiers):
        raise ValueError(f"substream qualifiers must be non-negative: {qualifiers}")
    sequence = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=stream_key(name, *qualifiers))
    return np.random.Generator(np.random.PCG64(sequence))

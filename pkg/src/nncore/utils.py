import numpy as np

Tensor = np.ndarray

FLOAT32 = np.float32
FLOAT64 = np.float64


def make_rng(seed: int) -> np.random.Generator:
    """
    Creates the generator used for every random draw in the toolkit.

    The bit generator is numpy's PCG64, whose stream is fixed for a given seed
    across runs and platforms.

    Parameters:
    seed (int): Unsigned 64-bit seed.

    Returns:
    np.random.Generator: A fresh generator.
    """
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(master_seed: int, *keys: int) -> int:
    """
    Derives an independent child seed from a master seed and integer keys.

    Parameters:
    master_seed (int): Seed of the whole run.
    *keys (int): Position of the child (split, soundscape index, scenario, stage...).

    Returns:
    int: A 64-bit seed that depends only on the inputs.
    """
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def glorot_uniform(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    fan_in: int,
    fan_out: int,
    dtype=FLOAT32,
) -> Tensor:
    """Glorot-uniform draw in U(-l, l) with l = sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)

import numpy as np

from core.exceptions import InputValidationError
from core.logging_config import setup_logger

logger = setup_logger()

SEED_MAX = 2**64


def check_seed(seed: int) -> int:
    if not 0 <= int(seed) < SEED_MAX:
        raise InputValidationError(f"seed {seed} is not a 64-bit unsigned integer")
    return int(seed)


def fresh_seed() -> int:
    """
    Draw a 64-bit seed from OS entropy and log it so the run can be replayed.

    :return: Random seed
    :rtype: int
    """
    seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
    logger.info(f"No seed supplied, using seed={seed}")
    return seed


def substream(seed: int, *keys: int) -> np.random.Generator:
    """
    Counter-based substream for (seed, *keys).

    The same keys always give the same stream, independent of which worker
    draws it or in which order chunks are evaluated.

    :param seed: Run seed
    :type seed: int
    :param keys: Stream coordinates, e.g. (side, chunk index)
    :type keys: int
    :return: Philox-backed generator
    :rtype: np.random.Generator
    """
    sequence = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(keys))
    return np.random.Generator(np.random.Philox(sequence))


def chunk_sizes(total: int, chunk_size: int) -> list[int]:
    """
    Split total items into consecutive chunks of chunk_size (last one shorter).
    """
    if chunk_size <= 0:
        raise InputValidationError(f"chunk size must be positive, got {chunk_size}")
    full, rest = divmod(total, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])

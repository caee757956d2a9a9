import hashlib
import logging
import math
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


def _purpose_key(purpose: str) -> int:
    digest = hashlib.sha256(purpose.encode('utf-8')).digest()
    return int.from_bytes(digest[:4], 'little')


def derive_seed(master: int, purpose: str, index: int = 0) -> int:
    """
    Derive a 64-bit sub-seed from a master seed.

    The result is a pure function of (master, purpose, index), so every member,
    round or sampler call can be reseeded independently of execution order.

    Args:
        master: master seed (64-bit unsigned)
        purpose: tag naming what the sub-seed is for (e.g. "member", "round")
        index: position within that purpose

    Returns:
        Sub-seed in [0, 2**64)
    """
    sequence = np.random.SeedSequence(
        entropy=int(master) & SEED_MASK,
        spawn_key=(_purpose_key(purpose), int(index)),
    )
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & SEED_MASK)


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def largest_remainder(total: int, weights: Sequence[float]) -> np.ndarray:
    """
    Split an integer total proportionally to weights so the parts sum exactly to total.

    Fractional parts are handed out largest first; ties go to the lowest index.
    """
    weights = np.asarray(weights, dtype=float)
    if total <= 0 or weights.sum() <= 0:
        return np.zeros(len(weights), dtype=np.int64)
    quotas = total * weights / weights.sum()
    parts = np.floor(quotas).astype(np.int64)
    remainder = int(total - parts.sum())
    if remainder > 0:
        order = np.argsort(-(quotas - parts), kind='stable')
        parts[order[:remainder]] += 1
    return parts


def encode_labels(values: Sequence[Any]) -> Tuple[np.ndarray, Optional[List[str]]]:
    """
    Map arbitrary discrete labels onto contiguous integer ids [0, K).

    Integer labels that already are 0..K-1 pass through unchanged (no class names).
    Anything else is sorted and encoded; the original values become class names.

    Returns:
        (codes, class_names) with class_names None when no encoding was needed
    """
    array = np.asarray(values)
    if array.size == 0:
        return np.zeros(0, dtype=np.int64), None

    if np.issubdtype(array.dtype, np.number):
        as_float = array.astype(float)
        is_integral = np.all(np.isfinite(as_float)) and np.all(as_float == np.round(as_float))
        if is_integral:
            as_int = as_float.astype(np.int64)
            uniques = np.unique(as_int)
            if uniques[0] == 0 and np.array_equal(uniques, np.arange(len(uniques))):
                return as_int, None
            uniques, codes = np.unique(as_int, return_inverse=True)
            logger.info(f"Encoded {len(uniques)} integer labels onto contiguous ids")
            return codes.astype(np.int64), [str(u) for u in uniques]

    uniques, codes = np.unique(array.astype(str), return_inverse=True)
    logger.info(f"Encoded {len(uniques)} labels onto contiguous ids: {list(uniques)}")
    return codes.astype(np.int64), [str(u) for u in uniques]

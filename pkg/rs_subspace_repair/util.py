import math
import sys
from typing import Optional, Union

import numpy as np

RngLike = Union[np.random.Generator, int, None]

# trial indices at or above these are reserved for non-trial draws
SUBSPACE_STREAM = 1 << 40
CODEWORD_STREAM = (1 << 40) + 1


def log(msg: str) -> None:
    print(f"[rs_subspace_repair] {msg}", file=sys.stderr)


def as_rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for trial `index` under master `seed` (counter based, order independent)."""
    if seed < 0 or index < 0:
        raise ValueError("seed and trial index must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def bits_for(q: int, symbols: int) -> Union[int, float]:
    bits = math.log2(q) * symbols
    if float(bits).is_integer():
        return int(bits)
    return bits


def format_bits(bits: Union[int, float], digits: Optional[int] = 3) -> str:
    if isinstance(bits, int):
        return str(bits)
    return f"{bits:.{digits}f}"

import json
import math
from typing import Any

import numpy as np

# Generator algorithm behind every sampled quantity; written into run metadata.
RNG_ALGORITHM = "PCG64"


def derive_seed(seed: int, *keys: int) -> int:
    """Per-task seed from a base seed and integer keys (SeedSequence mixing)"""
    sequence = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def fraction_to_count(fraction: float, population: int) -> int:
    """Round half up, never below one"""
    return max(1, int(math.floor(fraction * population + 0.5)))


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps(value: Any) -> str:
    """Canonical JSON: sorted keys, no whitespace drift"""
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"))

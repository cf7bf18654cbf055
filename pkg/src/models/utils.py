import hashlib

import numpy as np


def parameter_count(model) -> int:
    """Number of learnable scalars (BN running statistics and scaler excluded)."""
    return sum(param.size for _, param in model.named_parameters())


def parameter_digest(model) -> str:
    """
    SHA-256 over every parameter name, dtype and raw bytes.

    Parameters:
    model: Anything exposing ``named_parameters()``.

    Returns:
    str: Hex digest; equal digests mean bit-identical parameters.
    """
    digest = hashlib.sha256()
    for name, param in sorted(model.named_parameters(), key=lambda item: item[0]):
        digest.update(name.encode("utf-8"))
        digest.update(param.value.dtype.str.encode("ascii"))
        digest.update(np.ascontiguousarray(param.value).tobytes())
    return digest.hexdigest()

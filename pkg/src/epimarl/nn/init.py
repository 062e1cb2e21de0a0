"""Parameter initializers."""

from __future__ import annotations

import numpy as np


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float = 1.0) -> np.ndarray:
    """Orthogonal (in, out) weight matrix via the QR decomposition.

    Signs are fixed with the diagonal of R so the result is unique for a
    given random draw.
    """
    n_in, n_out = shape
    n = max(n_in, n_out)
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return gain * q[:n_in, :n_out]

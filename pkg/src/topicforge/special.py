"""Digamma, hand-rolled so the variational engine's arithmetic cost is real.

Upward recurrence psi(x) = psi(x+1) - 1/x lifts the argument to at least 6,
then the asymptotic expansion

    psi(x) ~ ln x - 1/(2x) - sum_n B_{2n} / (2n x^{2n})

with Bernoulli terms through x^-14 gives better than 1e-12 absolute error.
"""

from __future__ import annotations

import numpy as np

_RECURRENCE_FLOOR = 6.0
# B_{2n}/(2n) for n = 1..7: the Horner ladder below alternates their signs.
_C1 = 1.0 / 12.0
_C2 = 1.0 / 120.0
_C3 = 1.0 / 252.0
_C4 = 1.0 / 240.0
_C5 = 1.0 / 132.0
_C6 = 691.0 / 32760.0
_C7 = 1.0 / 12.0


def digamma(x):
    """Elementwise digamma for strictly positive arguments."""
    arr = np.array(x, dtype=np.float64, copy=True)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if arr.size and arr.min() <= 0.0:
        raise ValueError("digamma requires strictly positive arguments")
    acc = np.zeros_like(arr)
    # x > 0 reaches the floor within ceil(6) = 6 steps.
    for _ in range(int(_RECURRENCE_FLOOR)):
        small = arr < _RECURRENCE_FLOOR
        if not small.any():
            break
        acc[small] -= 1.0 / arr[small]
        arr[small] += 1.0
    t = 1.0 / (arr * arr)
    series = t * (_C1 - t * (_C2 - t * (_C3 - t * (_C4 - t * (_C5 - t * (_C6 - t * _C7))))))
    result = acc + np.log(arr) - 0.5 / arr - series
    return float(result[0]) if scalar else result

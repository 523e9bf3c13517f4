"""Matrix permanents and the Gaussian-permanent statistics the reductions use."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import BitString, CouplingMatrix, Rng, hamming_class

__all__ = [
    "permanent_ryser",
    "permanent_bruteforce",
    "submatrix_for_outcome",
    "gaussian_permanent_variance_check",
]

_RYSER_MAX = 30
_BRUTE_MAX = 9


def permanent_ryser(matrix: np.ndarray) -> float:
    """Permanent of a square real matrix by Ryser's inclusion-exclusion.

    Column subsets are walked in Gray-code order so each step updates the
    running row sums by a single column; the alternating series is
    accumulated with compensated (Kahan) summation.  Cost O(2^m * m).
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    m = a.shape[0]
    if m > _RYSER_MAX:
        raise ValueError(f"size {m} exceeds the 2^m cost guard ({_RYSER_MAX})")
    if m == 0:
        return 1.0
    cols = a.T.tolist()
    rowsums = [0.0] * m
    total = 0.0
    comp = 0.0
    for g in range(1, 1 << m):
        j = (g & -g).bit_length() - 1
        gray = g ^ (g >> 1)
        col = cols[j]
        if (gray >> j) & 1:
            for i in range(m):
                rowsums[i] += col[i]
        else:
            for i in range(m):
                rowsums[i] -= col[i]
        term = math.prod(rowsums)
        if gray.bit_count() & 1:
            term = -term
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    if m & 1:
        total = -total
    return total


def _ryser_batch(a: np.ndarray) -> np.ndarray:
    """Vectorized Ryser over a stack of matrices, shape (T, m, m) -> (T,)."""
    t_count, m, _ = a.shape
    rowsums = np.zeros((t_count, m))
    total = np.zeros(t_count)
    comp = np.zeros(t_count)
    for g in range(1, 1 << m):
        j = (g & -g).bit_length() - 1
        gray = g ^ (g >> 1)
        if (gray >> j) & 1:
            rowsums += a[:, :, j]
        else:
            rowsums -= a[:, :, j]
        term = rowsums.prod(axis=1)
        if gray.bit_count() & 1:
            term = -term
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return -total if m & 1 else total


def permanent_bruteforce(matrix: np.ndarray) -> float:
    """Permanent by direct summation over all m! permutations (test oracle)."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    m = a.shape[0]
    if m > _BRUTE_MAX:
        raise ValueError(f"size {m} exceeds the m! cost guard ({_BRUTE_MAX})")
    if m == 0:
        return 1.0
    rows = range(m)
    return math.fsum(
        math.prod(a[i, p[i]] for i in rows) for p in itertools.permutations(rows)
    )


def submatrix_for_outcome(J: CouplingMatrix, x: BitString) -> np.ndarray:
    """The m x m coupling block J_ST selected by an outcome in class m.

    Rows keep the sigma sites excited to 1, columns the tau sites flipped
    to 0, both in ascending site order.
    """
    if x.n != J.n:
        raise ValueError("bitstring size does not match coupling matrix")
    m = hamming_class(x)
    if m is None or m < 1:
        raise ValueError(f"outcome {x} is not in any class m >= 1")
    rows = [i for i, b in enumerate(x.sigma_half()) if b == 1]
    cols = [i for i, b in enumerate(x.tau_half()) if b == 0]
    return J.submatrix(rows, cols)


def gaussian_permanent_variance_check(m: int, trials: int, rng: Rng) -> float:
    """Sample mean of Per(J)^2 / m! over Gaussian draws; tends to 1."""
    if m > 8:
        raise ValueError("m above 8 makes the Monte Carlo too costly")
    if trials < 10**3:
        raise ValueError("need at least 10^3 trials for a meaningful mean")
    draws = rng.generator().standard_normal((trials, m, m))
    pers = _ryser_batch(draws)
    return float(np.mean(pers**2) / math.factorial(m))

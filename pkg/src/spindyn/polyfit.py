"""Polynomial recovery from noisy or partially corrupted samples.

Three regimes, in increasing order of adversity:

* bounded per-sample noise -> Lagrange interpolation with an explicit
  coefficient-wise error bound (`extract_coefficient`);
* a few samples arbitrarily wrong -> error-locator recovery
  (`berlekamp_welch_recover`);
* every call wrong with probability < 1/2 -> per-node medians at
  Chebyshev points (`robust_median_fit`).

All error bounds carry an implicit multiplicative constant that the
source analysis leaves unspecified; it is set to 1 throughout.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .core import Polynomial, Rng, SampleSet


class RecoveryError(RuntimeError):
    """Raised when corrupted-sample recovery cannot certify its output."""


def roots_to_coefficients(roots: Sequence[float]) -> Polynomial:
    """Expand prod_k (t - r_k) into monomial coefficients.

    Divide-and-conquer product tree; each merge is a plain convolution,
    which is plenty below degree ~500.
    """
    leaves = [np.array([-float(r), 1.0]) for r in roots]
    if not leaves:
        return Polynomial(np.array([1.0]))
    while len(leaves) > 1:
        merged = []
        for i in range(0, len(leaves) - 1, 2):
            merged.append(np.convolve(leaves[i], leaves[i + 1]))
        if len(leaves) % 2:
            merged.append(leaves[-1])
        leaves = merged
    return Polynomial(leaves[0])


def lagrange_fit(samples: SampleSet) -> Polynomial:
    """Monomial coefficients of the unique interpolant through the samples."""
    ts = samples.t
    ys = samples.y
    L = ts.size
    coeffs = np.zeros(L)
    for i in range(L):
        others = np.delete(ts, i)
        numer = roots_to_coefficients(others).coefficients
        denom = np.prod(ts[i] - others)
        coeffs += (ys[i] / denom) * numer
    return Polynomial(coeffs)


def extract_coefficient(
    samples: SampleSet,
    k: int,
    t0: float,
    delta_window: float,
    noise_delta: float,
) -> tuple[float, float]:
    """Estimate the t^k coefficient from equidistant noisy samples.

    The nodes must be the L = d+1 equidistant points spanning
    [t0(1-Delta), t0(1+Delta)].  Returns (estimate, bound) with
    bound = delta * t0^{-k} * (4/Delta)^d * C(d, k).
    """
    if not 0.0 < delta_window < 1.0:
        raise ValueError("delta_window must lie in (0, 1)")
    if t0 <= 0.0:
        raise ValueError("t0 must be positive")
    if k < 0:
        raise ValueError("coefficient index must be non-negative")
    ts = np.sort(samples.t)
    d = ts.size - 1
    lo, hi = t0 * (1 - delta_window), t0 * (1 + delta_window)
    expected = np.linspace(lo, hi, d + 1)
    scale = max(abs(lo), abs(hi))
    if np.max(np.abs(ts - expected)) > 1e-9 * scale:
        raise ValueError(
            "nodes are not the equidistant grid on [t0(1-Delta), t0(1+Delta)]"
        )
    estimate = lagrange_fit(samples).coefficient(k)
    bound = (
        noise_delta * t0 ** (-k) * (4.0 / delta_window) ** d * math.comb(d, k)
    )
    return estimate, bound


def _exact_solve(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Gaussian elimination over the rationals; free variables are set to 0.

    Raises RecoveryError if the system is inconsistent.
    """
    m = len(rows)
    ncols = len(rows[0]) if rows else 0
    aug = [row[:] + [b] for row, b in zip(rows, rhs)]
    pivot_of_col: dict[int, int] = {}
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, m) if aug[i][c] != 0), None)
        if pivot is None:
            continue
        aug[r], aug[pivot] = aug[pivot], aug[r]
        inv = 1 / aug[r][c]
        aug[r] = [v * inv for v in aug[r]]
        for i in range(m):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [v - f * w for v, w in zip(aug[i], aug[r])]
        pivot_of_col[c] = r
        r += 1
        if r == m:
            break
    for i in range(r, m):
        if all(v == 0 for v in aug[i][:ncols]) and aug[i][ncols] != 0:
            raise RecoveryError("sample system is inconsistent")
    x = [Fraction(0)] * ncols
    for c, i in pivot_of_col.items():
        x[c] = aug[i][ncols]
    return x


def _divide_exact(
    num: list[Fraction], den: list[Fraction]
) -> tuple[list[Fraction], list[Fraction]]:
    """Polynomial long division (ascending coefficients), exact remainder."""
    num = num[:]
    dd = len(den) - 1
    while den[dd] == 0 and dd > 0:
        dd -= 1
    q = [Fraction(0)] * max(len(num) - dd, 1)
    for i in range(len(num) - 1, dd - 1, -1):
        f = num[i] / den[dd]
        q[i - dd] = f
        for j in range(dd + 1):
            num[i - dd + j] -= f * den[j]
    return q, num


def berlekamp_welch_recover(
    samples: SampleSet, d: int, e_max: int, exact: bool = False
) -> Polynomial:
    """Recover a degree-d polynomial from samples with <= e_max corruptions.

    Solves Q(t_i) = y_i E(t_i) for a monic error locator E of degree
    e_max and Q of degree d + e_max, then returns Q / E.  In exact mode
    everything runs over Fraction (true exactness for rational data); in
    float mode the solve is least-squares and each certificate check is
    tolerance-gated.

    Raises RecoveryError when the corruption budget is exceeded: the
    system is inconsistent, the division leaves a remainder, or the
    result disagrees with more than e_max samples.
    """
    L = len(samples)
    if L < d + 1 + 2 * e_max:
        raise ValueError(
            f"need at least d+1+2*e_max = {d + 1 + 2 * e_max} samples, got {L}"
        )
    nq, ne = d + e_max + 1, e_max
    if exact:
        return _bw_exact(samples, d, e_max, nq, ne)
    ts, ys = samples.t, samples.y
    # columns: q_0..q_{d+e}, then e_0..e_{e-1}; rhs moves the monic term over
    powers = ts[:, None] ** np.arange(nq)
    lower = ts[:, None] ** np.arange(ne) if ne else np.zeros((L, 0))
    A = np.hstack([powers, -ys[:, None] * lower])
    rhs = ys * ts**e_max
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    scale = max(1.0, float(np.max(np.abs(ys))))
    if np.max(np.abs(A @ sol - rhs)) > 1e-6 * scale:
        raise RecoveryError("sample system is inconsistent")
    qcoef = sol[:nq]
    ecoef = np.concatenate([sol[nq:], [1.0]])
    quot, rem = _float_divide(qcoef, ecoef)
    if np.max(np.abs(rem)) > 1e-6 * max(1.0, float(np.max(np.abs(qcoef)))):
        raise RecoveryError("error locator does not divide the numerator")
    result = Polynomial(quot[: d + 1] if quot.size > d + 1 else quot)
    agree = np.sum(np.abs(result(ts) - ys) <= 1e-6 * scale)
    if agree < L - e_max:
        raise RecoveryError(
            f"recovered polynomial matches only {agree} of {L} samples"
        )
    return result


def _float_divide(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # np.polydiv wants descending coefficients
    q, r = np.polydiv(num[::-1], den[::-1])
    return np.atleast_1d(q)[::-1].astype(float), np.atleast_1d(r)[::-1].astype(float)


def _bw_exact(samples: SampleSet, d: int, e_max: int, nq: int, ne: int) -> Polynomial:
    ts = [Fraction(float(t)) for t in samples.t]
    ys = [Fraction(float(y)) for y in samples.y]
    rows = []
    rhs = []
    for t, y in zip(ts, ys):
        row = [t**a for a in range(nq)] + [-y * t**b for b in range(ne)]
        rows.append(row)
        rhs.append(y * t**e_max)
    sol = _exact_solve(rows, rhs)
    qcoef = sol[:nq]
    ecoef = sol[nq:] + [Fraction(1)]
    quot, rem = _divide_exact(qcoef, ecoef)
    if any(c != 0 for c in rem):
        raise RecoveryError("error locator does not divide the numerator")
    quot = quot[: d + 1] if len(quot) > d + 1 else quot
    agree = 0
    for t, y in zip(ts, ys):
        acc = Fraction(0)
        for c in reversed(quot):
            acc = acc * t + c
        agree += acc == y
    if agree < len(ts) - e_max:
        raise RecoveryError(
            f"recovered polynomial matches only {agree} of {len(ts)} samples"
        )
    return Polynomial(np.array([float(c) for c in quot]))


def robust_median_fit(
    oracle: Callable[[float, Rng], float],
    d: int,
    interval: tuple[float, float],
    repetitions: int,
    node_count: int | None = None,
    rng: Rng | None = None,
) -> Polynomial:
    """Fit a degree-d polynomial through per-node medians of a flaky oracle.

    The oracle is called `repetitions` times at each Chebyshev node of
    [a, b] with an independent substream, and the node value is the
    median of the calls.  If each call lands within delta of the truth
    with probability > 1/2, the medians are delta-accurate with high
    probability and the interpolant's sup-norm error stays within a
    small multiple of delta (about 2.2*delta at d = 6).

    node_count defaults to d+1, the minimum; more nodes trade the
    interpolation guarantee for least-squares averaging.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    a, b = interval
    if not b > a:
        raise ValueError("interval must satisfy a < b")
    m = node_count if node_count is not None else d + 1
    if m < d + 1:
        raise ValueError("node_count must be at least d+1")
    base = rng if rng is not None else Rng(0)
    u = np.cos((2 * np.arange(m) + 1) * np.pi / (2 * m))
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * u
    medians = np.empty(m)
    for j, s in enumerate(nodes):
        calls = [
            oracle(float(s), base.substream(j * repetitions + i))
            for i in range(repetitions)
        ]
        medians[j] = np.median(calls)
    design = np.polynomial.chebyshev.chebvander(u, d)
    c, *_ = np.linalg.lstsq(design, medians, rcond=None)
    cheb = np.polynomial.Chebyshev(c, domain=[a, b])
    return Polynomial(cheb.convert(kind=np.polynomial.Polynomial).coef)


def sum_of_coefficients_bound_check(q: Polynomial) -> tuple[float, float]:
    """(sum |a_k|, 4^d * max |q| on [-1,1]); the first never exceeds the second.

    The comparison uses a 10^4-point grid for the sup norm; a relative
    1e-6 slack absorbs the grid resolution.
    """
    lhs = float(np.sum(np.abs(q.coefficients)))
    grid = np.linspace(-1.0, 1.0, 10_000)
    rhs = float(4.0 ** q.degree() * np.max(np.abs(q(grid))))
    if lhs > rhs * (1 + 1e-6):
        raise RecoveryError(
            f"coefficient-sum bound violated: {lhs:.6g} > {rhs:.6g}"
        )
    return lhs, rhs

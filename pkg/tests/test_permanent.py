import math

import numpy as np
import pytest

from spindyn.core import BitString, CouplingMatrix, Rng
from spindyn.permanent import (
    _ryser_batch,
    gaussian_permanent_variance_check,
    permanent_bruteforce,
    permanent_ryser,
    submatrix_for_outcome,
)


def test_identity_permanent():
    assert permanent_ryser(np.eye(3)) == pytest.approx(1.0)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 6])
def test_all_ones_is_factorial(m):
    assert permanent_ryser(np.ones((m, m))) == pytest.approx(math.factorial(m))


def test_bruteforce_tiny_cases():
    assert permanent_bruteforce(np.array([[3.5]])) == pytest.approx(3.5)
    a, b, c, d = 1.2, -0.7, 2.0, 0.25
    assert permanent_bruteforce(np.array([[a, b], [c, d]])) == pytest.approx(a * d + b * c)


def test_ryser_matches_bruteforce_6x6():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((6, 6))
    assert permanent_ryser(a) == pytest.approx(permanent_bruteforce(a), rel=1e-10)


@pytest.mark.parametrize("m", range(2, 9))
def test_ryser_vs_bruteforce_random(m):
    rng = np.random.default_rng(m)
    for _ in range(100 if m <= 5 else 10):
        a = rng.standard_normal((m, m))
        truth = permanent_bruteforce(a)
        assert permanent_ryser(a) == pytest.approx(truth, rel=1e-10, abs=1e-12)


def test_batch_ryser_matches_scalar():
    rng = np.random.default_rng(7)
    stack = rng.standard_normal((50, 5, 5))
    batch = _ryser_batch(stack)
    for i in range(50):
        assert batch[i] == pytest.approx(permanent_ryser(stack[i]), rel=1e-12)


def test_permutation_invariance_exhaustive():
    import itertools

    rng = np.random.default_rng(3)
    for m in (2, 3, 4):
        a = rng.standard_normal((m, m))
        base = permanent_ryser(a)
        for p in itertools.permutations(range(m)):
            assert permanent_ryser(a[list(p), :]) == pytest.approx(base, rel=1e-10)
            assert permanent_ryser(a[:, list(p)]) == pytest.approx(base, rel=1e-10)


def test_size_guards():
    with pytest.raises(ValueError):
        permanent_ryser(np.ones((31, 31)))
    with pytest.raises(ValueError):
        permanent_bruteforce(np.ones((10, 10)))


def test_submatrix_full_matrix_for_x0():
    J = CouplingMatrix(np.arange(9.0).reshape(3, 3))
    sub = submatrix_for_outcome(J, BitString.x0(3))
    assert np.array_equal(sub, J.entries)


def test_submatrix_single_entry():
    # sigma (1,0): site 1 excited; tau (0,1): site 1 flipped to 0.
    J = CouplingMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
    sub = submatrix_for_outcome(J, BitString.from_halves((1, 0), (0, 1)))
    assert sub.shape == (1, 1)
    assert sub[0, 0] == 1.0
    # sigma site 1, tau site 2 flipped gives the off-diagonal entry
    sub = submatrix_for_outcome(J, BitString.from_halves((1, 0), (1, 0)))
    assert sub[0, 0] == 2.0


def test_submatrix_rejects_outside_class():
    J = CouplingMatrix(np.eye(2))
    with pytest.raises(ValueError):
        submatrix_for_outcome(J, BitString((1, 1, 1, 1)))
    with pytest.raises(ValueError):
        submatrix_for_outcome(J, BitString.y0(2))  # m = 0


@pytest.mark.parametrize("m", [1, 2, 4])
def test_gaussian_variance_near_one(m):
    est = gaussian_permanent_variance_check(m, 10**5, Rng(11, m))
    # standard error of the mean of Per^2/m! from the same draws
    draws = Rng(11, m).generator().standard_normal((10**5, m, m))
    vals = _ryser_batch(draws) ** 2 / math.factorial(m)
    se = float(np.std(vals) / math.sqrt(vals.size))
    assert abs(est - 1.0) <= 5 * se


def test_chebyshev_envelope():
    m = 4
    draws = Rng(5).generator().standard_normal((10**4, m, m))
    pers = _ryser_batch(draws)
    frac = float(np.mean(np.abs(pers) < 10 * math.sqrt(math.factorial(m))))
    assert frac >= 0.99

import math

import numpy as np
import pytest

from spindyn.core import (
    Basis,
    BitString,
    CouplingMatrix,
    HamiltonianSpec,
    Kind,
    Rng,
    StateVector,
    hamming_class,
    hamming_class_members,
    sample_coupling,
)
from spindyn.hamiltonian import (
    SparseAction,
    coupling_norm_bound,
    dense_matrix,
    moment,
    norm_tail_probability,
    operator_norm,
)
from spindyn.permanent import permanent_bruteforce, submatrix_for_outcome

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def op_at(op, pos, total):
    """Single-site operator on index bit `pos` (independent kron oracle)."""
    return np.kron(np.eye(1 << (total - 1 - pos)), np.kron(op, np.eye(1 << pos)))


def dense_oracle(spec):
    """H built term by term from explicit Pauli tensor products."""
    n = spec.n
    total = 2 * n
    J = spec.couplings.entries
    H = np.zeros((1 << total, 1 << total), dtype=complex)
    for i in range(n):
        for j in range(n):
            xx = op_at(SX, i, total) @ op_at(SX, n + j, total)
            yy = op_at(SY, i, total) @ op_at(SY, n + j, total)
            zz = op_at(SZ, i, total) @ op_at(SZ, n + j, total)
            if spec.kind is Kind.H1:
                H += (J[i, j] / n) * xx
            elif spec.kind is Kind.H2:
                H += (J[i, j] / n) * (xx + zz)
            elif spec.kind is Kind.H3:
                H += (J[i, j] / (2 * n)) * (xx + yy)
            else:
                H += (J[i, j] / (2 * n)) * (xx + yy + zz)
    if spec.z_fields is not None:
        h1, h2 = spec.z_fields
        for i in range(n):
            H += h1[i] * op_at(SZ, i, total)
            H += h2[i] * op_at(SZ, n + i, total)
    return H


def random_spec(kind, n, seed, fields=False):
    J = sample_coupling(n, Rng(seed))
    zf = None
    if fields:
        g = Rng(seed, 999).generator()
        zf = (g.standard_normal(n), g.standard_normal(n))
    return HamiltonianSpec(kind, J, z_fields=zf)


@pytest.mark.parametrize("kind", list(Kind))
@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("fields", [False, True])
def test_dense_matches_kron_oracle(kind, n, fields):
    spec = random_spec(kind, n, 100 * n + 7, fields=fields)
    got = dense_matrix(spec, Basis.full(n))
    want = dense_oracle(spec)
    assert np.max(np.abs(want.imag)) < 1e-12  # real in this basis
    assert np.allclose(got, want.real, atol=1e-12)


@pytest.mark.parametrize("kind", list(Kind))
def test_apply_matches_dense(kind):
    n = 2
    spec = random_spec(kind, n, 31)
    action = SparseAction(spec, Basis.full(n))
    h = dense_matrix(spec, Basis.full(n))
    g = np.random.default_rng(4)
    v = g.standard_normal(h.shape[0]) + 1j * g.standard_normal(h.shape[0])
    assert np.allclose(action.apply_array(v), h @ v, atol=1e-12)
    # batched columns too
    vs = g.standard_normal((h.shape[0], 3))
    assert np.allclose(action.apply_array(vs), h @ vs, atol=1e-12)


def test_single_term_h1():
    spec = HamiltonianSpec(Kind.H1, CouplingMatrix([[1.0]]))
    h = dense_matrix(spec, Basis.full(1))
    want = np.zeros((4, 4))
    want[
        [0, 1, 2, 3], [3, 2, 1, 0]
    ] = 1.0  # sigma_x tau_x swaps both bits
    assert np.array_equal(h, want)


def test_h1_zero_couplings():
    spec = HamiltonianSpec(Kind.H1, CouplingMatrix(np.zeros((2, 2))))
    action = SparseAction(spec, Basis.full(2))
    v = np.random.default_rng(0).standard_normal(16)
    assert np.allclose(action.apply_array(v), 0.0)


def test_h2_equals_h1_plus_zz():
    # H2 dense equals H1 dense plus an independently built z-z part
    n = 2
    J = sample_coupling(n, Rng(55))
    h2 = dense_matrix(HamiltonianSpec(Kind.H2, J), Basis.full(n))
    h1 = dense_matrix(HamiltonianSpec(Kind.H1, J), Basis.full(n))
    zz = np.zeros_like(h1)
    for i in range(n):
        for j in range(n):
            zz += (J.entries[i, j] / n) * (
                op_at(SZ, i, 2 * n) @ op_at(SZ, n + j, 2 * n)
            ).real
    assert np.allclose(h2, h1 + zz, atol=1e-12)


@pytest.mark.parametrize("kind", list(Kind))
@pytest.mark.parametrize("n", [1, 2, 3])
def test_hermiticity_on_random_vectors(kind, n):
    spec = random_spec(kind, n, 17 * n + 1, fields=True)
    action = SparseAction(spec, Basis.full(n))
    g = np.random.default_rng(n)
    dim = 1 << (2 * n)
    for _ in range(100):
        u = g.standard_normal(dim) + 1j * g.standard_normal(dim)
        v = g.standard_normal(dim) + 1j * g.standard_normal(dim)
        lhs = np.vdot(u, action.apply_array(v))
        rhs = np.conj(np.vdot(v, action.apply_array(u)))
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


@pytest.mark.parametrize("kind", [Kind.H3, Kind.H4])
def test_sector_preservation_and_restriction(kind):
    n = 3
    spec = random_spec(kind, n, 23, fields=True)
    full = dense_matrix(spec, Basis.full(n))
    states = Basis.sector(n).states()
    # H maps the sector into itself: off-sector block vanishes
    outside = np.setdiff1d(np.arange(full.shape[0]), states)
    assert np.max(np.abs(full[np.ix_(outside, states)])) < 1e-12
    # and the sector dense matrix is exactly the restriction
    sec = dense_matrix(spec, Basis.sector(n))
    assert np.allclose(sec, full[np.ix_(states, states)], atol=1e-12)


def test_sector_rejected_for_class_one():
    spec = random_spec(Kind.H1, 2, 3)
    with pytest.raises(ValueError):
        SparseAction(spec, Basis.sector(2))


def test_h3_on_y0_lands_in_class_one():
    n = 3
    spec = random_spec(Kind.H3, n, 8)
    basis = Basis.full(n)
    v = SparseAction(spec, basis).apply_array(
        StateVector.basis_state(BitString.y0(n), basis).amplitudes
    )
    support = {int(i) for i in np.nonzero(np.abs(v) > 1e-14)[0]}
    class_one = {x.index() for x in hamming_class_members(n, 1)}
    assert support and support <= class_one


def test_h1_changes_total_weight_by_two_or_zero():
    n = 3
    spec = random_spec(Kind.H1, n, 12)
    basis = Basis.full(n)
    action = SparseAction(spec, basis)
    for x in hamming_class_members(n, 1):
        v = action.apply_array(StateVector.basis_state(x, basis).amplitudes)
        for idx in np.nonzero(np.abs(v) > 1e-14)[0]:
            w = BitString.from_index(int(idx), n).weight()
            assert w in (n - 2, n, n + 2)


@pytest.mark.parametrize("kind", list(Kind))
@pytest.mark.parametrize("n", [2, 3])
def test_moment_permanent_identity(kind, n):
    for seed in range(3):
        spec = random_spec(kind, n, 1000 + seed)
        for m in range(1, n + 1):
            for x in hamming_class_members(n, m):
                for l in range(m):
                    assert abs(moment(spec, x, l)) < 1e-9
                per = permanent_bruteforce(submatrix_for_outcome(spec.couplings, x))
                want = math.factorial(m) / n**m * per
                got = moment(spec, x, m)
                assert got == pytest.approx(want, rel=1e-8, abs=1e-12)


def test_moment_trivial_and_cap():
    spec = random_spec(Kind.H3, 2, 5)
    assert moment(spec, BitString.y0(2), 0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        moment(spec, BitString.y0(2), 2 * 2 + 5)
    assert isinstance(moment(spec, BitString.y0(2), 9, max_power=9), float)


@pytest.mark.parametrize("kind", list(Kind))
def test_local_fields_leave_low_moments_unchanged(kind):
    n = 3
    base = random_spec(kind, n, 44)
    with_fields = HamiltonianSpec(
        kind, base.couplings, z_fields=(np.array([0.7, -1.1, 0.4]), np.array([0.2, 0.9, -0.5]))
    )
    for m in (1, 2, 3):
        for x in hamming_class_members(n, m)[:4]:
            for l in range(m + 1):
                assert moment(with_fields, x, l) == pytest.approx(
                    moment(base, x, l), rel=1e-9, abs=1e-12
                )


def test_operator_norm_single_term():
    spec = HamiltonianSpec(Kind.H1, CouplingMatrix([[1.0]]))
    assert operator_norm(spec) == pytest.approx(1.0)


def test_operator_norm_matches_dense_eigenvalues():
    spec = random_spec(Kind.H4, 2, 61)
    h = dense_matrix(spec, Basis.full(2))
    assert operator_norm(spec) == pytest.approx(float(np.max(np.abs(np.linalg.eigvalsh(h)))))


def test_norm_bound_holds():
    for kind in Kind:
        for seed in range(5):
            spec = random_spec(kind, 3, 70 + seed)
            assert operator_norm(spec) <= coupling_norm_bound(spec) + 1e-12


def test_power_iteration_path_agrees_with_closed_form():
    # n=7 exceeds the 4096 dense cutoff; H1's norm has a closed form
    n = 7
    J = sample_coupling(n, Rng(2))
    spec = HamiltonianSpec(Kind.H1, J)
    signs = np.array([[1 - 2 * ((k >> p) & 1) for p in range(n)] for k in range(1 << n)])
    closed = np.max(np.abs(signs @ (J.entries / n) @ signs.T))
    assert operator_norm(spec, tol=1e-10) == pytest.approx(float(closed), rel=1e-6)


def test_tail_probability_values():
    assert norm_tail_probability(3.0, 4) == pytest.approx(2**16 * math.exp(-72.0), rel=1e-12)
    assert norm_tail_probability(1e-9, 2) == 1.0
    with pytest.raises(ValueError):
        norm_tail_probability(0.0, 2)


def test_h1_norm_tail_monte_carlo():
    # no draw among 10^4 exceeds 3n at n=4 (closed form for commuting H1)
    n = 4
    draws = Rng(314).generator().standard_normal((10**4, n, n))
    signs = np.array([[1 - 2 * ((k >> p) & 1) for p in range(n)] for k in range(1 << n)])
    vals = np.einsum("si,bij,uj->bsu", signs, draws / n, signs)
    norms = np.abs(vals).max(axis=(1, 2))
    assert np.max(norms) < 3 * n
    # spot check the closed form against the dense spectral norm
    spec = HamiltonianSpec(Kind.H1, CouplingMatrix(draws[0]))
    assert operator_norm(spec) == pytest.approx(float(norms[0]), rel=1e-10)


def test_dense_guards():
    spec = random_spec(Kind.H3, 9, 1)
    with pytest.raises(ValueError):
        dense_matrix(spec, Basis.full(9))
    with pytest.raises(ValueError):
        dense_matrix(spec, Basis.sector(9))  # C(18,9) = 48620 > 20000

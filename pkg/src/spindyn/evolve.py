"""Exact time evolution e^{-iHt}|y0> and output probabilities p(x; J; t).

Class II models (H3, H4) evolve inside the weight-n sector, class I in
the full basis.  Dimensions within `dense_limit` use one eigendecomposition
of the real-symmetric matrix and reuse it for every requested time; larger
problems step with a Lanczos exponential-times-vector kernel.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import scipy.linalg

from .core import Basis, BitString, HamiltonianSpec, Kind, StateVector
from .hamiltonian import SparseAction, dense_matrix

__all__ = ["Propagator", "evolve_exact", "output_probability", "time_average"]

_KRYLOV_DIM = 30
_STEP_TOL = 1e-12
_NORM_DRIFT_TOL = 1e-9


class KrylovConvergenceError(RuntimeError):
    """Raised when the stepping kernel cannot reach its target accuracy."""


def natural_basis(spec: HamiltonianSpec) -> Basis:
    """Sector basis for the U(1) kinds, full basis otherwise."""
    if spec.kind in (Kind.H3, Kind.H4):
        return Basis.sector(spec.n)
    return Basis.full(spec.n)


def _lanczos_expm_step(action: SparseAction, v: np.ndarray, dt: float):
    """One Krylov step: approximate e^{-iH dt} v and an error estimate."""
    dim = v.shape[0]
    m = min(_KRYLOV_DIM, dim)
    Q = np.zeros((m, dim), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        return v.copy(), 0.0
    Q[0] = v / nrm
    k_used = m
    residual = 0.0
    for k in range(m):
        w = action.apply_array(Q[k])
        alpha[k] = np.vdot(Q[k], w).real
        w = w - alpha[k] * Q[k]
        if k > 0:
            w = w - beta[k - 1] * Q[k - 1]
        # full reorthogonalization: m is small and stability is cheap
        w = w - Q[: k + 1].T @ (Q[: k + 1].conj() @ w)
        b = float(np.linalg.norm(w))
        if k + 1 < m:
            beta[k] = b
            if b < 1e-14:
                k_used = k + 1
                break
            Q[k + 1] = w / b
        else:
            residual = b
    k = k_used
    T = np.diag(alpha[:k]) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
    evals, evecs = scipy.linalg.eigh(T)
    small = evecs @ (np.exp(-1j * evals * dt) * evecs[0])
    out = nrm * (Q[:k].T @ small)
    if k < m:
        return out, 0.0  # invariant subspace: the step is exact
    # residual estimate, plus a spread guard so one Krylov body is not
    # stretched over too many oscillation periods
    spread = float(np.max(np.abs(evals)))
    err = residual * abs(small[-1]) * nrm
    if spread * abs(dt) > m:
        err = max(err, _STEP_TOL * 10)
    return out, float(err)


class Propagator:
    """Reusable e^{-iHt}|y0> evaluator for one Hamiltonian."""

    def __init__(
        self,
        spec: HamiltonianSpec,
        dense_limit: int = 4096,
        basis: Basis | None = None,
    ):
        self.spec = spec
        self.basis = basis if basis is not None else natural_basis(spec)
        self.action = SparseAction(spec, self.basis)
        self._y0 = BitString.y0(spec.n)
        self._y0_pos = self.basis.index_of(self._y0)
        if self._y0_pos is None:
            raise ValueError("initial state lies outside the chosen basis")
        self.dense = self.basis.dimension <= dense_limit
        if self.dense:
            h = dense_matrix(spec, self.basis)
            self._evals, self._evecs = scipy.linalg.eigh(h)
            self._c0 = self._evecs[self._y0_pos, :].conj()

    # -- dense path helpers -------------------------------------------------
    def _dense_amplitudes(self, t: float) -> np.ndarray:
        return self._evecs @ (np.exp(-1j * self._evals * t) * self._c0)

    def all_probabilities_at(self, times: Sequence[float]) -> np.ndarray:
        """p(x; t) for every basis state, shape (dimension, len(times))."""
        ts = np.asarray(times, dtype=float)
        if not self.dense:
            cols = [self.state_at(float(t)).probabilities() for t in ts]
            return np.stack(cols, axis=1)
        phases = np.exp(-1j * np.outer(self._evals, ts))
        amps = self._evecs @ (phases * self._c0[:, None])
        return np.abs(amps) ** 2

    # -- generic evolution --------------------------------------------------
    def _krylov_evolve(self, v: np.ndarray, t: float) -> np.ndarray:
        sign = 1.0 if t >= 0 else -1.0
        remaining = abs(t)
        # start from a step the Taylor series converges fast for
        dt = remaining
        guard = 0
        while remaining > 0:
            step = min(dt, remaining)
            out, err = _lanczos_expm_step(self.action, v, sign * step)
            if err > _STEP_TOL and step > 1e-8 * abs(t):
                dt = step / 2
                guard += 1
                if guard > 200:
                    raise KrylovConvergenceError(
                        f"step size collapsed; last error estimate {err:.3e}"
                    )
                continue
            v = out
            remaining -= step
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > _NORM_DRIFT_TOL:
            raise KrylovConvergenceError(
                f"norm drift {abs(nrm - 1.0):.3e} exceeds {_NORM_DRIFT_TOL}"
            )
        return v / nrm

    def state_at(self, t: float) -> StateVector:
        if self.dense:
            amps = self._dense_amplitudes(t)
            nrm = np.linalg.norm(amps)
            if abs(nrm - 1.0) > _NORM_DRIFT_TOL:
                raise KrylovConvergenceError(
                    f"norm drift {abs(nrm - 1.0):.3e} exceeds {_NORM_DRIFT_TOL}"
                )
            return StateVector(amps / nrm, self.basis)
        v = np.zeros(self.basis.dimension, dtype=complex)
        v[self._y0_pos] = 1.0
        if t != 0.0:
            v = self._krylov_evolve(v, t)
        return StateVector(v, self.basis)

    def probability(self, x: BitString, t: float) -> float:
        return self.state_at(t).probability(x)


def evolve_exact(
    spec: HamiltonianSpec, t: float, dense_limit: int = 4096
) -> StateVector:
    """e^{-iHt}|y0> with unit norm."""
    return Propagator(spec, dense_limit=dense_limit).state_at(t)


def output_probability(
    spec: HamiltonianSpec, x: BitString, t: float, dense_limit: int = 4096
) -> float:
    """p(x; J; t) = |<x| e^{-iHt} |y0>|^2."""
    if x.n != spec.n:
        raise ValueError("bitstring size does not match the Hamiltonian")
    return Propagator(spec, dense_limit=dense_limit).probability(x, t)


def time_average(
    spec: HamiltonianSpec, x: BitString, T: float, grid: int = 4000
) -> float:
    """Trapezoid mean of p(x; t) over a uniform grid on [0, T]."""
    if grid < 100:
        raise ValueError("grid must have at least 100 points")
    if T == 0.0:
        return output_probability(spec, x, 0.0)
    prop = Propagator(spec)
    ts = np.linspace(0.0, T, grid)
    pos = prop.basis.index_of(x)
    if pos is None:
        return 0.0
    if prop.dense:
        z = prop._evecs[pos, :] * prop._c0
        amps = z @ np.exp(-1j * np.outer(prop._evals, ts))
        p = np.abs(amps) ** 2
    else:
        p = np.array([prop.probability(x, float(t)) for t in ts])
    return float(np.trapezoid(p, ts) / T)

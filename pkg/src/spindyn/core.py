"""Domain types and deterministic randomness shared by every other module.

Conventions fixed here and relied on everywhere else:

* A configuration of the 2n spins is a bit tuple (x_1, ..., x_2n).  Spins
  1..n form the sigma group, spins n+1..2n the tau group.
* The integer index of a configuration uses bit i-1 for spin i, so the
  sigma spins occupy the low n bits of the index.
* The weight-n sector basis lists its states in lexicographic order of the
  bit tuple (x_1 compared first).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "Kind",
    "BitString",
    "CouplingMatrix",
    "HamiltonianSpec",
    "Basis",
    "StateVector",
    "Polynomial",
    "SampleSet",
    "Rng",
    "sample_coupling",
    "hamming_class",
    "hamming_class_members",
    "model_class",
]


class Kind(str, Enum):
    """The four bipartite model kinds."""

    H1 = "H1"
    H2 = "H2"
    H3 = "H3"
    H4 = "H4"


def model_class(kind: Kind | str) -> str:
    """Return "I" for the Ising-like kinds (H1, H2), "II" for the U(1) kinds."""
    kind = Kind(kind)
    return "I" if kind in (Kind.H1, Kind.H2) else "II"


@dataclass(frozen=True)
class BitString:
    """A 2n-bit outcome with sigma/tau halves.

    bits[k] is spin k+1; the sigma half is bits[:n], the tau half bits[n:].
    """

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bits) == 0 or len(self.bits) % 2 != 0:
            raise ValueError("BitString length must be a positive even number")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @property
    def n(self) -> int:
        return len(self.bits) // 2

    def sigma_half(self) -> tuple[int, ...]:
        return self.bits[: self.n]

    def tau_half(self) -> tuple[int, ...]:
        return self.bits[self.n :]

    def weight(self) -> int:
        return sum(self.bits)

    def index(self) -> int:
        """Integer index of this configuration (spin i -> bit i-1)."""
        idx = 0
        for k, b in enumerate(self.bits):
            idx |= b << k
        return idx

    def hamming_class(self) -> int | None:
        return hamming_class(self)

    @classmethod
    def from_index(cls, index: int, n: int) -> "BitString":
        return cls(tuple((index >> k) & 1 for k in range(2 * n)))

    @classmethod
    def from_halves(cls, sigma: Sequence[int], tau: Sequence[int]) -> "BitString":
        if len(sigma) != len(tau):
            raise ValueError("sigma and tau halves must have equal length")
        return cls(tuple(sigma) + tuple(tau))

    @classmethod
    def y0(cls, n: int) -> "BitString":
        """The initial configuration: sigma all 0, tau all 1."""
        return cls((0,) * n + (1,) * n)

    @classmethod
    def x0(cls, n: int) -> "BitString":
        """The fully flipped configuration: sigma all 1, tau all 0."""
        return cls((1,) * n + (0,) * n)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def hamming_class(x: BitString) -> int | None:
    """Return m if x has m sigma-ones and n-m tau-ones, else None."""
    n = x.n
    m = sum(x.sigma_half())
    if sum(x.tau_half()) == n - m:
        return m
    return None


def hamming_class_members(n: int, m: int) -> list[BitString]:
    """All bitstrings with m ones in the sigma half and n-m in the tau half."""
    if not 0 <= m <= n:
        raise ValueError(f"m must lie in 0..{n}, got {m}")
    out = []
    for s_ones in itertools.combinations(range(n), m):
        sigma = [0] * n
        for i in s_ones:
            sigma[i] = 1
        for t_ones in itertools.combinations(range(n), n - m):
            tau = [0] * n
            for j in t_ones:
                tau[j] = 1
            out.append(BitString.from_halves(sigma, tau))
    return out


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CouplingMatrix:
    """An n x n real matrix of dimensionless coupling strengths."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("coupling matrix must be square and non-empty")
        if not np.all(np.isfinite(a)):
            raise ValueError("coupling matrix entries must be finite")
        object.__setattr__(self, "entries", _freeze(a))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        """The block keeping `rows` and `cols` (0-based, ascending order kept)."""
        if len(rows) != len(cols):
            raise ValueError("submatrix must be square: |rows| == |cols|")
        return self.entries[np.ix_(sorted(rows), sorted(cols))]


@dataclass(frozen=True)
class HamiltonianSpec:
    """Model kind, size and couplings, plus optional z-direction local fields."""

    kind: Kind
    couplings: CouplingMatrix
    z_fields: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.z_fields is not None:
            h1 = _freeze(np.array(self.z_fields[0], dtype=float))
            h2 = _freeze(np.array(self.z_fields[1], dtype=float))
            if h1.shape != (self.n,) or h2.shape != (self.n,):
                raise ValueError("z_fields must be a pair of length-n vectors")
            object.__setattr__(self, "z_fields", (h1, h2))

    @property
    def n(self) -> int:
        return self.couplings.n


@lru_cache(maxsize=32)
def _sector_states(n: int) -> np.ndarray:
    """Integer indices of the weight-n states, lexicographic in the bit tuple."""
    all_idx = np.arange(1 << (2 * n), dtype=np.int64)
    bits = (all_idx[:, None] >> np.arange(2 * n)) & 1
    members = all_idx[bits.sum(axis=1) == n]
    # lexicographic on (x_1, ..., x_2n): x_1 is the most significant key
    keys = ((members[:, None] >> np.arange(2 * n)) & 1) @ (
        1 << np.arange(2 * n)[::-1].astype(np.int64)
    )
    order = np.argsort(keys, kind="stable")
    return _freeze(members[order])


@lru_cache(maxsize=32)
def _sector_positions(n: int) -> dict[int, int]:
    return {int(s): i for i, s in enumerate(_sector_states(n))}


@dataclass(frozen=True)
class Basis:
    """Either the full 2^{2n}-dimensional basis or the weight-n sector."""

    kind: str  # "full" | "sector"
    n: int

    def __post_init__(self) -> None:
        if self.kind not in ("full", "sector"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def dimension(self) -> int:
        if self.kind == "full":
            return 1 << (2 * self.n)
        return math.comb(2 * self.n, self.n)

    def states(self) -> np.ndarray:
        """Integer configuration indices in basis order."""
        if self.kind == "full":
            return np.arange(self.dimension, dtype=np.int64)
        return _sector_states(self.n)

    def index_of(self, x: BitString) -> int | None:
        """Position of x in this basis, or None if x lies outside it."""
        if x.n != self.n:
            raise ValueError("bitstring size does not match basis")
        if self.kind == "full":
            return x.index()
        return _sector_positions(self.n).get(x.index())

    @classmethod
    def full(cls, n: int) -> "Basis":
        return cls("full", n)

    @classmethod
    def sector(cls, n: int) -> "Basis":
        return cls("sector", n)


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes over a Basis."""

    amplitudes: np.ndarray
    basis: Basis

    def __post_init__(self) -> None:
        a = np.array(self.amplitudes, dtype=complex)
        if a.shape != (self.basis.dimension,):
            raise ValueError(
                f"amplitude vector has length {a.shape}, "
                f"basis dimension is {self.basis.dimension}"
            )
        object.__setattr__(self, "amplitudes", _freeze(a))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probability(self, x: BitString) -> float:
        """|amplitude|^2 of configuration x (zero if outside the basis)."""
        pos = self.basis.index_of(x)
        if pos is None:
            return 0.0
        return float(abs(self.amplitudes[pos]) ** 2)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @classmethod
    def basis_state(cls, x: BitString, basis: Basis) -> "StateVector":
        pos = basis.index_of(x)
        if pos is None:
            raise ValueError(f"configuration {x} lies outside the {basis.kind} basis")
        amp = np.zeros(basis.dimension, dtype=complex)
        amp[pos] = 1.0
        return cls(amp, basis)


@dataclass(frozen=True)
class Polynomial:
    """Real coefficients a_0..a_d; coefficient of t^k sits at index k."""

    coefficients: np.ndarray

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.array(self.coefficients, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d vector")
        object.__setattr__(self, "coefficients", _freeze(c))

    def degree(self) -> int:
        """Index of the highest stored coefficient (trailing zeros permitted)."""
        return self.coefficients.size - 1

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.coefficients)

    def coefficient(self, k: int) -> float:
        """a_k, treating absent indices as zero."""
        if 0 <= k < self.coefficients.size:
            return float(self.coefficients[k])
        return 0.0


@dataclass(frozen=True)
class SampleSet:
    """Noisy evaluations (t_i, y_i) of a univariate function."""

    t: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        t = np.atleast_1d(np.array(self.t, dtype=float))
        y = np.atleast_1d(np.array(self.y, dtype=float))
        if t.shape != y.shape or t.ndim != 1:
            raise ValueError("t and y must be 1-d vectors of equal length")
        if np.unique(t).size != t.size:
            raise ValueError("sample abscissae must be distinct")
        object.__setattr__(self, "t", _freeze(t))
        object.__setattr__(self, "y", _freeze(y))

    def __len__(self) -> int:
        return self.t.size

    @property
    def points(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.t, self.y)]

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]]) -> "SampleSet":
        pts = list(points)
        return cls(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "y"])
            for a, b in zip(self.t, self.y):
                writer.writerow([repr(float(a)), repr(float(b))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "SampleSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["t", "y"]:
            raise ValueError(f"{path}: expected a two-column CSV with header t,y")
        data = [(float(r[0]), float(r[1])) for r in rows[1:]]
        return cls.from_points(data)


@dataclass(frozen=True)
class Rng:
    """Deterministic random source: a 64-bit seed plus a substream path.

    The generator algorithm is fixed to numpy's PCG64 seeded through
    SeedSequence(entropy=seed, spawn_key=stream path); normals come from
    Generator.standard_normal (ziggurat).  generator() starts a fresh
    stream every call, so an Rng behaves as a value: the same (seed,
    stream) always reproduces the same draw sequence.  Use substream(k)
    to hand independent deterministic streams to parallel tasks.
    """

    seed: int
    stream: int | tuple[int, ...] = 0

    def __post_init__(self) -> None:
        path = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        if not all(isinstance(s, int) and s >= 0 for s in path):
            raise ValueError("stream path must contain non-negative integers")
        object.__setattr__(self, "stream", path)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, k: int) -> "Rng":
        return Rng(self.seed, self.stream + (k,))

    def gaussian(self, shape: int | tuple[int, ...] | None = None) -> np.ndarray | float:
        """N(0,1) draw(s) from the start of this stream (one-shot semantics)."""
        g = self.generator()
        if shape is None:
            return float(g.standard_normal())
        return g.standard_normal(shape)

    def uniform(
        self, low: float, high: float, shape: int | tuple[int, ...] | None = None
    ) -> np.ndarray | float:
        g = self.generator()
        if shape is None:
            return float(g.uniform(low, high))
        return g.uniform(low, high, shape)


def sample_coupling(n: int, rng: Rng) -> CouplingMatrix:
    """An n x n matrix of independent standard normal couplings."""
    if n < 1:
        raise ValueError("n must be positive")
    return CouplingMatrix(rng.generator().standard_normal((n, n)))

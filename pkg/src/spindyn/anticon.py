"""Monte-Carlo anticoncentration experiments over random couplings.

Estimates the first two moments of the output probability p(x; J; t)
across an ensemble of coupling matrices, computes the threshold ratio r
(the fraction of outcomes whose moments clear the class scale), applies
the Paley-Zygmund lower bound, and traces equilibration curves.  All
estimators accumulate in draw-index order from per-draw substreams, so
identical seeds reproduce results bit for bit.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import (
    BitString,
    HamiltonianSpec,
    Kind,
    Rng,
    hamming_class_members,
    sample_coupling,
)
from .evolve import Propagator
from .hardness import anticoncentration_thresholds

# Sector dimension at n=8 is C(16,8) = 12870: still dense.  n=10 (184756)
# falls through to Krylov stepping.
_DENSE_LIMIT = 20000

_MIN_DRAWS = 16


@dataclass(frozen=True)
class MomentRecord:
    """Sample moments of p(x; J; t) over the coupling ensemble for one x."""

    x: BitString
    mean_p: float
    mean_p2: float
    samples: int
    kind: Kind
    n: int
    t: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.mean_p <= 1.0:
            raise ValueError("mean_p must lie in [0, 1]")
        if self.mean_p2 < 0.0:
            raise ValueError("mean_p2 must be non-negative")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")


@dataclass(frozen=True)
class AnticonThresholds:
    """Threshold constants (K, Lambda, theta) for the anticoncentration test.

    Defaults follow the collision-sector analysis: K = 1/2 and Lambda = 4,
    giving alpha = K/2 = 1/4 and beta = K^2/(4 Lambda) = 1/64.  The Ising
    pipeline uses Lambda = 16 (see `ising`).
    """

    K: float = 0.5
    Lambda: float = 4.0
    theta: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.K <= 1.0 <= self.Lambda:
            raise ValueError("thresholds require 0 < K <= 1 <= Lambda")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")

    @classmethod
    def ising(cls) -> "AnticonThresholds":
        return cls(K=0.5, Lambda=16.0, theta=0.5)

    @property
    def alpha(self) -> float:
        return self.K / 2.0

    @property
    def beta(self) -> float:
        return self.K**2 / (4.0 * self.Lambda)


def _validate_ensemble_args(n: int, num_J: int) -> None:
    if n < 2 or n % 2:
        raise ValueError("n must be even and at least 2 for the X_{n/2} sweep")
    if num_J < _MIN_DRAWS:
        raise ValueError(f"num_J must be at least {_MIN_DRAWS}")


def _draw_tables(
    kind: Kind, n: int, times: np.ndarray, num_J: int, rng: Rng, threads: int
) -> Iterator[np.ndarray]:
    """Per-draw p tables (members of X_{n/2} x times), yielded in draw order.

    Draws are independent substreams, so threading changes wall time only;
    the caller accumulates in the fixed order this generator provides.
    """
    members = hamming_class_members(n, n // 2)

    def one_draw(j: int) -> np.ndarray:
        spec = HamiltonianSpec(kind, sample_coupling(n, rng.substream(j)))
        prop = Propagator(spec, dense_limit=_DENSE_LIMIT)
        positions = np.array([prop.basis.index_of(x) for x in members])
        return prop.all_probabilities_at(times)[positions]

    if threads <= 1:
        yield from map(one_draw, range(num_J))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(one_draw, range(num_J))


def moment_statistics(
    kind: Kind | str, n: int, t: float, num_J: int, rng: Rng, threads: int = 1
) -> list[tuple[MomentRecord, float, float]]:
    """Per-x moment records plus standard errors of mean_p and mean_p2.

    The standard error of mean_p2 needs the fourth sample moment, which
    MomentRecord does not carry, so both are computed here alongside the
    records.  One evolution per coupling draw serves every x in X_{n/2}.
    """
    _validate_ensemble_args(n, num_J)
    kind = Kind(kind)
    members = hamming_class_members(n, n // 2)
    sums = np.zeros(len(members))
    sums2 = np.zeros(len(members))
    sums4 = np.zeros(len(members))
    times = np.array([float(t)])
    for table in _draw_tables(kind, n, times, num_J, rng, threads):
        p = table[:, 0]
        sums += p
        sums2 += p * p
        sums4 += p**4
    out = []
    for i, x in enumerate(members):
        mean_p = sums[i] / num_J
        mean_p2 = sums2[i] / num_J
        mean_p4 = sums4[i] / num_J
        se_p = math.sqrt(max(mean_p2 - mean_p**2, 0.0) / num_J)
        se_p2 = math.sqrt(max(mean_p4 - mean_p2**2, 0.0) / num_J)
        record = MomentRecord(
            x=x,
            mean_p=float(mean_p),
            mean_p2=float(mean_p2),
            samples=num_J,
            kind=kind,
            n=n,
            t=float(t),
        )
        out.append((record, se_p, se_p2))
    return out


def estimate_moments(
    kind: Kind | str, n: int, t: float, num_J: int, rng: Rng, threads: int = 1
) -> list[MomentRecord]:
    """Sample means of p and p^2 over num_J coupling draws, one record per
    x in X_{n/2}."""
    return [
        record
        for record, _, _ in moment_statistics(kind, n, t, num_J, rng, threads)
    ]


def ratio_r(
    records: Sequence[MomentRecord],
    thresholds: AnticonThresholds,
    model_class: str,
) -> float:
    """Fraction of records with mean_p >= K*scale and mean_p2 <= Lambda*scale^2.

    The scale is the class benchmark 2^{-2n} (I) or C(2n,n)^{-1} (II).
    """
    if not records:
        raise ValueError("records must be non-empty")
    n = records[0].n
    if any(r.n != n for r in records):
        raise ValueError("records mix different n")
    scale = anticoncentration_thresholds(model_class, n)
    hits = sum(
        1
        for r in records
        if r.mean_p >= thresholds.K * scale
        and r.mean_p2 <= thresholds.Lambda * scale**2
    )
    return hits / len(records)


def paley_zygmund_bound(record: MomentRecord, theta: float) -> float:
    """(1-theta)^2 mean_p^2 / mean_p2: lower bound on Pr[p > theta E p]."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if record.mean_p2 <= 0.0:
        raise ValueError("second moment is zero: bound undefined")
    return (1.0 - theta) ** 2 * record.mean_p**2 / record.mean_p2


def equilibration_curve(
    kind: Kind | str,
    n: int,
    t_grid: Sequence[float] | np.ndarray,
    num_J: int,
    rng: Rng,
    threads: int = 1,
) -> list[tuple[float, float, float]]:
    """(t, mean, stderr) rows for p averaged over x in X_{n/2} and J draws."""
    _validate_ensemble_args(n, num_J)
    kind = Kind(kind)
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0 or not np.all(np.isfinite(times)):
        raise ValueError("t_grid must be a non-empty finite 1-D grid")
    sums = np.zeros(times.size)
    sums2 = np.zeros(times.size)
    for table in _draw_tables(kind, n, times, num_J, rng, threads):
        draw_mean = table.mean(axis=0)
        sums += draw_mean
        sums2 += draw_mean * draw_mean
    out = []
    for i, t in enumerate(times):
        mean = sums[i] / num_J
        var = max(sums2[i] / num_J - mean**2, 0.0)
        out.append((float(t), float(mean), math.sqrt(var / num_J)))
    return out


def bits_label(x: BitString) -> str:
    """Compact bit label for CSV rows, sigma half first."""
    return "".join(str(b) for b in x.bits)


def write_equilibration_csv(
    path: str | Path, n: int, rows: Iterable[tuple[float, float, float]]
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "t", "mean_p", "stderr"])
        for t, mean, stderr in rows:
            writer.writerow([n, repr(float(t)), repr(float(mean)), repr(float(stderr))])


def write_moments_csv(
    path: str | Path,
    statistics: Iterable[tuple[MomentRecord, float, float]],
    model_class: str,
) -> None:
    """Moment table scaled by the class benchmark (the plot coordinates).

    Standard errors are scaled consistently with their means, so each
    column pairs with its error bar directly.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["n", "t", "x_bits", "mean_p_scaled", "mean_p2_scaled", "stderr_p", "stderr_p2"]
        )
        for record, se_p, se_p2 in statistics:
            scale = anticoncentration_thresholds(model_class, record.n)
            writer.writerow(
                [
                    record.n,
                    repr(record.t),
                    bits_label(record.x),
                    repr(record.mean_p / scale),
                    repr(record.mean_p2 / scale**2),
                    repr(se_p / scale),
                    repr(se_p2 / scale**2),
                ]
            )


def write_ratio_csv(
    path: str | Path,
    rows: Iterable[tuple[int, float, float, int, int, int]],
) -> None:
    """Rows of (n, t_over_logn, r, num_x, num_J, seed)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "t_over_logn", "r", "num_x", "num_J", "seed"])
        for n, t_over_logn, r, num_x, num_J, seed in rows:
            writer.writerow(
                [n, repr(float(t_over_logn)), repr(float(r)), num_x, num_J, seed]
            )

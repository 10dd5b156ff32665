"""Diagonal measurements, threshold policies and selection of off-diagonal targets.

A pair (i, j) is kept when its magnitude bound ``sqrt(p_i p_j)`` reaches the
threshold ``t``; each kept pair yields a real and an imaginary target.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, EmptyMeasurementError, SparsityError, TomographyError

RE = "Re"
IM = "Im"
# relative slack so sqrt(p_i p_j) == t survives rounding (e.g. t = min p_i)
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class DiagonalMeasurement:
    """Counts recorded in the computational basis.

    ``counts`` may hold real-valued pseudo-counts (exact mode). Unless
    ``lost_shots`` is set, the counts must add up to ``shots``.
    """

    d: int
    N: int
    counts: np.ndarray
    shots: float
    lost_shots: bool = False

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "counts", counts)
        if counts.shape != (self.d ** self.N,):
            raise TomographyError(
                f"expected {self.d ** self.N} diagonal counts, got shape {counts.shape}")
        if np.any(counts < 0):
            raise TomographyError("diagonal counts must be non-negative")
        if self.shots <= 0:
            raise EmptyMeasurementError("diagonal measurement has zero shots")
        total = counts.sum()
        if self.lost_shots:
            if total > self.shots * (1 + 1e-12):
                raise TomographyError(f"counts sum {total} exceeds shots {self.shots}")
        elif not np.isclose(total, self.shots, rtol=1e-9, atol=1e-9):
            raise TomographyError(f"counts sum {total} differs from shots {self.shots}")

    @classmethod
    def from_probabilities(cls, probs, d: int, N: int) -> "DiagonalMeasurement":
        probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
        return cls(d=d, N=N, counts=probs / probs.sum(), shots=1.0)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots


@dataclass(frozen=True)
class TargetElement:
    """Unknown Re or Im part of rho_ij. Sorts by (i, j) with Re before Im."""

    i: int
    j: int
    part: str
    bound: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not self.i < self.j:
            raise TomographyError(f"target needs i < j, got ({self.i}, {self.j})")
        if self.part not in (RE, IM):
            raise TomographyError(f"unknown part {self.part!r}")

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.i, self.j, self.part)

    def __lt__(self, other: "TargetElement") -> bool:
        return (self.i, self.j, self.part != RE) < (other.i, other.j, other.part != RE)


def select_targets(diag: DiagonalMeasurement, t: float,
                   skip_imaginary: bool = False) -> list[TargetElement]:
    """Targets (i, j, Re|Im) for every pair i < j with sqrt(p_i p_j) >= t."""
    if t < 0:
        raise TomographyError("threshold must be non-negative")
    if diag.shots <= 0:
        raise EmptyMeasurementError("diagonal measurement has zero shots")
    p = diag.frequencies
    bounds = np.sqrt(np.outer(p, p))
    ii, jj = np.nonzero(np.triu(bounds >= t * (1.0 - TIE_RTOL), k=1))
    parts = (RE,) if skip_imaginary else (RE, IM)
    # np.nonzero returns row-major order, i.e. sorted by (i, j)
    return [TargetElement(int(i), int(j), part, float(bounds[i, j]))
            for i, j in zip(ii, jj) for part in parts]


def count_pairs(targets) -> int:
    """E: number of distinct (i, j) pairs among the targets."""
    return len({(m.i, m.j) for m in targets})


def gini_index(c) -> float:
    """Gini sparsity index of a non-negative vector, in [0, 1 - 1/n]."""
    c = np.sort(np.asarray(c, dtype=float).ravel())
    if c.size == 0:
        raise SparsityError("Gini index of an empty vector is undefined")
    if np.any(c < 0):
        raise SparsityError("Gini index needs non-negative entries")
    total = c.sum()
    if total <= 0:
        raise SparsityError("Gini index of an all-zero vector is undefined")
    n = c.size
    k = np.arange(1, n + 1)
    return float(1.0 - 2.0 * np.sum((c / total) * ((n - k + 0.5) / n)))


def gini_threshold(diag: DiagonalMeasurement) -> float:
    n = diag.counts.size
    return gini_index(diag.frequencies) / (n - 1)


def min_nonzero_threshold(diag: DiagonalMeasurement, floor: float = 1e-12) -> float:
    """Smallest non-zero diagonal frequency; the natural choice for noiseless data."""
    p = diag.frequencies
    nz = p[p > floor]
    if nz.size == 0:
        raise EmptyMeasurementError("diagonal has no non-zero entry")
    return float(nz.min())


def noise_calibrated_threshold(noiseless_counts, noisy_runs, N: int, shots: float,
                               zero_tol: float = 0.0) -> float:
    """Circuit-specific threshold from noiseless and repeated noisy diagonal runs.

    Indices whose noiseless count is (at most ``zero_tol``) zero form the
    expected-zero set. ``c0`` is the largest count observed on that set over
    all runs, ``c1`` the smallest count observed on the expected-non-zero set.
    The threshold is ``max(c0 + N sqrt(c0), c1 - N sqrt(c1)) / shots``.
    """
    expected = np.asarray(noiseless_counts, dtype=float)
    runs = np.atleast_2d(np.asarray(noisy_runs, dtype=float))
    if runs.shape[0] == 0 or runs.size == 0:
        raise CalibrationError("at least one noisy run is required")
    if runs.shape[1] != expected.size:
        raise CalibrationError("noisy runs and noiseless counts differ in length")
    zero = expected <= zero_tol
    if zero.all():
        raise CalibrationError("noiseless counts have no non-zero entry")
    c0 = float(runs[:, zero].max()) if zero.any() else 0.0
    c1 = float(runs[:, ~zero].min())
    t_noise = c0 + N * np.sqrt(c0)
    t_signal = c1 - N * np.sqrt(max(c1, 0.0))
    return float(max(t_noise, t_signal) / shots)


@dataclass(frozen=True)
class ThresholdPolicy:
    """How to turn a diagonal into a threshold.

    mode is one of ``fixed`` (uses ``value``), ``gini``, ``min-nonzero`` or
    ``noise`` (uses ``noiseless``, ``noisy_runs`` and ``shots``).
    """

    mode: str
    value: float | None = None
    noiseless: tuple | None = None
    noisy_runs: tuple | None = None
    shots: float | None = None

    def resolve(self, diag: DiagonalMeasurement) -> float:
        if self.mode == "fixed":
            t = float(self.value)
        elif self.mode == "gini":
            t = gini_threshold(diag)
        elif self.mode == "min-nonzero":
            t = min_nonzero_threshold(diag)
        elif self.mode == "noise":
            shots = self.shots if self.shots is not None else diag.shots
            t = noise_calibrated_threshold(self.noiseless, self.noisy_runs, diag.N, shots)
        else:
            raise TomographyError(f"unknown threshold mode {self.mode!r}")
        if not 0.0 <= t <= 1.0:
            raise TomographyError(f"threshold {t} outside [0, 1]")
        return t

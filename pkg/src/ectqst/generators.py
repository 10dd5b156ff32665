"""Single-qudit observables: the off-diagonal generalized Gell-Mann matrices.

Index 0 is the diagonal (maximal abelian subgroup) representative. Indices
``1 .. d(d-1)/2`` are the real symmetric generators, one per upper-triangular
position ``(a, b)`` in row-major order, and ``d(d-1)/2 + 1 .. d(d-1)`` their
purely imaginary partners, with ``+i`` at ``(a, b)`` and ``-i`` at ``(b, a)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidDimensionError

MAS_IDENTITY = "identity"
MAS_GENERATOR = "generator"
MAS_MODES = (MAS_IDENTITY, MAS_GENERATOR)

_SQRT_HALF = np.sqrt(0.5)


def num_observables(d: int) -> int:
    """Catalog size: the MAS representative plus d(d-1) off-diagonal generators."""
    return d * (d - 1) + 1


def num_real(d: int) -> int:
    return d * (d - 1) // 2


def upper_pairs(d: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(d) for b in range(a + 1, d)]


def real_index(d: int, a: int, b: int) -> int:
    """Index of the real generator with non-zero entries at (a, b) and (b, a)."""
    if a == b:
        raise ValueError("diagonal position has no off-diagonal generator")
    if a > b:
        a, b = b, a
    # row-major enumeration of the strict upper triangle
    return a * d - a * (a + 1) // 2 + (b - a - 1) + 1


def imag_partner(d: int, k: int) -> int:
    if not 1 <= k <= num_real(d):
        raise ValueError(f"{k} is not a real generator index for d={d}")
    return k + num_real(d)


def position(d: int, k: int) -> tuple[int, int]:
    """Upper-triangular position (a, b) of off-diagonal generator k."""
    h = num_real(d)
    if not 1 <= k <= 2 * h:
        raise IndexError(f"observable index {k} out of range for d={d}")
    return upper_pairs(d)[(k - 1) % h]


def is_imaginary(d: int, k: int) -> bool:
    return k > num_real(d)


@dataclass(frozen=True)
class ObservableCatalog:
    """The d(d-1)+1 single-qudit observables and their eigensystems.

    ``matrices[k]`` is the d x d matrix of observable k. ``eigvecs[k]`` holds
    the eigenvectors as columns in canonical slot order and ``eigvals[k]`` the
    matching eigenvalues. For an off-diagonal generator at (a, b), slot a is
    the +1 eigenvector, slot b the -1 eigenvector and every other slot c is
    the computational vector |c>.
    """

    d: int
    mas: str
    matrices: np.ndarray = field(repr=False)
    eigvals: np.ndarray = field(repr=False)
    eigvecs: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.matrices.shape[0]

    def eigensystem(self, k: int) -> list[tuple[float, np.ndarray]]:
        if not 0 <= k < len(self):
            raise IndexError(f"observable index {k} out of range for d={self.d}")
        return [(float(self.eigvals[k, n]), self.eigvecs[k, :, n].copy())
                for n in range(self.d)]


def _mas_diagonal(d: int, mas: str) -> np.ndarray:
    if mas == MAS_IDENTITY:
        return np.ones(d)
    # first diagonal generator: diag(1, -1, 0, ..., 0); sigma_z for qubits
    diag = np.zeros(d)
    diag[0], diag[1] = 1.0, -1.0
    return diag


@lru_cache(maxsize=None)
def _build(d: int, mas: str) -> ObservableCatalog:
    h = num_real(d)
    count = num_observables(d)
    mats = np.zeros((count, d, d), dtype=complex)
    vals = np.zeros((count, d))
    vecs = np.zeros((count, d, d), dtype=complex)

    mas_diag = _mas_diagonal(d, mas)
    mats[0] = np.diag(mas_diag)
    vals[0] = mas_diag
    vecs[0] = np.eye(d)

    for idx, (a, b) in enumerate(upper_pairs(d)):
        kr, ki = idx + 1, idx + 1 + h
        mats[kr, a, b] = mats[kr, b, a] = 1.0
        mats[ki, a, b], mats[ki, b, a] = 1j, -1j
        for k in (kr, ki):
            vecs[k] = np.eye(d)
            vecs[k][:, a] = 0.0
            vecs[k][:, b] = 0.0
            vals[k, a], vals[k, b] = 1.0, -1.0
        vecs[kr][a, a] = vecs[kr][b, a] = _SQRT_HALF
        vecs[kr][a, b], vecs[kr][b, b] = _SQRT_HALF, -_SQRT_HALF
        vecs[ki][a, a], vecs[ki][b, a] = _SQRT_HALF, -1j * _SQRT_HALF
        vecs[ki][a, b], vecs[ki][b, b] = _SQRT_HALF, 1j * _SQRT_HALF

    for arr in (mats, vals, vecs):
        arr.setflags(write=False)
    return ObservableCatalog(d=d, mas=mas, matrices=mats, eigvals=vals, eigvecs=vecs)


def build_catalog(d: int, mas: str = MAS_IDENTITY) -> ObservableCatalog:
    """Build (or fetch the cached) observable catalog for qudit dimension ``d``.

    ``mas`` selects the diagonal representative: ``"identity"`` uses the d x d
    identity, ``"generator"`` the first diagonal generator diag(1, -1, 0, ...).
    """
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"qudit dimension must be an integer >= 2, got {d!r}")
    if mas not in MAS_MODES:
        raise ValueError(f"unknown MAS mode {mas!r}; expected one of {MAS_MODES}")
    return _build(int(d), mas)


def eigensystem(catalog: ObservableCatalog, k: int) -> list[tuple[float, np.ndarray]]:
    return catalog.eigensystem(k)

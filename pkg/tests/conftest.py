"""Shared fixtures and independent oracles.

The oracles here rebuild the physics from scratch (explicit matrices, dense
numpy.linalg.eigh bases, explicit projector sums) so they never call into the
code paths they check.
"""
from functools import reduce

import numpy as np
import pytest

from ectqst.states import SparseStateVector
from ectqst.thresholds import IM, RE, TargetElement

S2, S3, S12 = np.sqrt(2), np.sqrt(3), np.sqrt(12)

# two-qutrit golden examples
PSI_AMPS = {0: 1 / S2, 2: 1 / S3, 4: 1 / S12, 5: 1j / S12}
PHI_AMPS = {0: 1 / S2, 2: 1 / S3, 3: 1 / S12, 5: 1j / S12}
PSI_DIAG = np.array([1 / 2, 0, 1 / 3, 0, 1 / 12, 1 / 12, 0, 0, 0])

PSI_PAIRS = [(0, 2), (0, 4), (0, 5), (2, 4), (2, 5), (4, 5)]
PSI_SETTINGS = [(0, 2), (1, 1), (1, 2), (1, 3), (1, 0), (0, 3),
                (0, 5), (4, 1), (4, 2), (4, 3), (4, 0), (0, 6)]
PHI_PAIRS = [(0, 2), (0, 3), (0, 5), (2, 3), (2, 5), (3, 5)]
PHI_SETTINGS = [(0, 2), (1, 0), (1, 2), (0, 5), (4, 0), (4, 2)]

q, h = 0.25, 0.5
PSI_C = np.array([
    [h, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, q, 0, 0, h, 0, 0, 0, 0, 0, 0, 0],
    [q, 0, q, 0, q, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, q, q, q, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, h, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, h, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, h, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, q, 0, 0, h, 0],
    [q, 0, 0, 0, 0, 0, 0, 0, q, 0, q, 0],
    [0, 0, 0, 0, 0, q, 0, 0, 0, q, q, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, h, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, h],
])
PHI_C = np.array([
    [h, 0, 0, 0, 0, h, 0, 0, 0, 0, 0, 0],
    [0, h, 0, 0, h, 0, 0, 0, 0, 0, 0, 0],
    [q, q, q, q, q, q, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, h, 0, 0, 0, 0, h],
    [0, 0, 0, 0, 0, 0, 0, h, 0, 0, h, 0],
    [q, 0, 0, 0, 0, q, 0, q, q, q, q, 0],
])


def golden_targets(pairs, diag=PSI_DIAG):
    """Real parts first, then imaginary parts (reference ordering)."""
    bound = {p: float(np.sqrt(diag[p[0]] * diag[p[1]])) for p in pairs}
    return ([TargetElement(i, j, RE, bound[(i, j)]) for i, j in pairs]
            + [TargetElement(i, j, IM, bound[(i, j)]) for i, j in pairs])


@pytest.fixture
def psi_state():
    return SparseStateVector(3, 2, dict(PSI_AMPS))


@pytest.fixture
def phi_state():
    return SparseStateVector(3, 2, dict(PHI_AMPS))


# ---------------------------------------------------------------- oracles

def gell_mann_oracle(d):
    """Generators written out from their definition, index 0 = identity."""
    mats = [np.eye(d, dtype=complex)]
    pairs = [(a, b) for a in range(d) for b in range(a + 1, d)]
    for a, b in pairs:
        m = np.zeros((d, d), complex)
        m[a, b] = m[b, a] = 1
        mats.append(m)
    for a, b in pairs:
        m = np.zeros((d, d), complex)
        m[a, b], m[b, a] = 1j, -1j
        mats.append(m)
    return mats


def basis_oracle(K, d, rng=None):
    """Product eigenbasis from numpy eigh, columns optionally shuffled per qudit."""
    mats = gell_mann_oracle(d)
    factors = []
    for k in K:
        _, v = np.linalg.eigh(mats[k])
        if rng is not None:
            v = v[:, rng.permutation(d)] * np.exp(2j * np.pi * rng.random(d))
        factors.append(v)
    return reduce(np.kron, factors)


def element_op_oracle(m, dim):
    O = np.zeros((dim, dim), complex)
    if m.part == RE:
        O[m.i, m.j] = O[m.j, m.i] = 0.5
    else:
        O[m.i, m.j], O[m.j, m.i] = 0.5j, -0.5j
    return O


def overlap_oracle(settings, targets, d, N, rng=None):
    """C_sm = sum_n <phi_n|O_m|phi_n>^2 via explicit projectors."""
    C = np.zeros((len(settings), len(targets)))
    for s, K in enumerate(settings):
        U = basis_oracle(K, d, rng)
        for t, m in enumerate(targets):
            O = element_op_oracle(m, d ** N)
            A = np.einsum("an,ab,bn->n", U.conj(), O, U)
            C[s, t] = np.sum(np.abs(A) ** 2)
    return C


def random_density(dim, rank, rng):
    X = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def random_pure(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def fidelity_oracle(rho1, rho2):
    """Uhlmann fidelity via scipy.linalg.sqrtm."""
    from scipy.linalg import sqrtm

    s = sqrtm(rho1)
    return float(np.real(np.trace(sqrtm(s @ rho2 @ s))) ** 2)

"""Outcome probabilities of product-basis measurements and shot-noise sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import generators as gen
from .errors import TomographyError
from .planner import product_basis, product_eigenvalues

MODE_SAMPLED = "sampled"
MODE_EXACT = "exact"


@dataclass(frozen=True)
class ReadoutNoiseModel:
    """Independent per-qudit symbol flips applied to outcome labels.

    With probability ``epsilon`` a symbol a is read as some b != a, chosen
    with weights ``bias[b]`` (uniform when no bias is given).
    """

    epsilon: float = 0.0
    bias: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise TomographyError(f"flip probability must lie in [0, 1), got {self.epsilon}")

    def confusion(self, d: int) -> np.ndarray:
        """Row-stochastic matrix P(read b | true a)."""
        w = np.ones(d) if self.bias is None else np.asarray(self.bias, dtype=float)
        if w.shape != (d,) or np.any(w < 0):
            raise TomographyError("bias needs one non-negative weight per level")
        M = np.zeros((d, d))
        for a in range(d):
            others = np.delete(np.arange(d), a)
            tot = w[others].sum()
            M[a, others] = self.epsilon * (w[others] / tot if tot > 0 else 1.0 / (d - 1))
            M[a, a] = 1.0 - self.epsilon
        return M

    @property
    def tag(self) -> str:
        if self.epsilon == 0:
            return "none"
        return f"readout:{self.epsilon:g}" + ("" if self.bias is None else ":biased")


@dataclass
class CountsRecord:
    setting: tuple[int, ...]
    counts: np.ndarray
    shots: float
    mode: str = MODE_SAMPLED
    noise: str = "none"
    seed: int | None = None


def _rotate_diag(rho: np.ndarray, U: np.ndarray) -> np.ndarray:
    # <phi_n| rho |phi_n> for every column phi_n of U
    return np.einsum("an,ab,bn->n", U.conj(), rho, U).real


def _check_dims(rho: np.ndarray, d: int, N: int):
    if rho.shape != (d ** N, d ** N):
        raise TomographyError(f"density matrix of shape {rho.shape} does not match d={d}, N={N}")


def _clean(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    return np.clip(p / p.sum(), 0.0, 1.0)


def probabilities(rho, K, catalog: gen.ObservableCatalog) -> np.ndarray:
    """p_n = <phi_n| rho |phi_n> over the product eigenbasis of setting K."""
    rho = np.asarray(rho, dtype=complex)
    _check_dims(rho, catalog.d, len(K))
    return _clean(_rotate_diag(rho, product_basis(K, catalog)))


def setting_expectation(rho, K, catalog: gen.ObservableCatalog) -> float:
    """<s^(K)> = sum_n lambda_n p_n, with lambda_n the product of eigenvalues."""
    rho = np.asarray(rho, dtype=complex)
    _check_dims(rho, catalog.d, len(K))
    p = _rotate_diag(rho, product_basis(K, catalog))
    return float(np.dot(product_eigenvalues(K, catalog), p))


def apply_readout_noise(p: np.ndarray, d: int, N: int, noise: ReadoutNoiseModel) -> np.ndarray:
    if noise is None or noise.epsilon == 0:
        return p
    M = noise.confusion(d)
    t = p.reshape([d] * N)
    for r in range(N):
        t = np.moveaxis(np.tensordot(t, M, axes=([r], [0])), -1, r)
    return _clean(t.reshape(-1))


def infer_local_dim(rho, N: int) -> int:
    dim = np.shape(rho)[0]
    d = int(round(dim ** (1.0 / N)))
    if d < 2 or d ** N != dim:
        raise TomographyError(f"a {dim}-dimensional state is not a register of {N} qudits")
    return d


def record_rng(seed: int, K) -> np.random.Generator:
    """Independent stream per (seed, setting) so records can be drawn in any order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), len(K), *map(int, K)]))


def sample_counts(rho, K, shots: int, seed: int = 0, catalog: gen.ObservableCatalog | None = None,
                  noise: ReadoutNoiseModel | None = None, mode: str = MODE_SAMPLED,
                  d: int | None = None) -> CountsRecord:
    """Counts for one setting: a multinomial draw, or shots * p in exact mode."""
    if shots < 1:
        raise TomographyError("shots must be >= 1")
    K = tuple(int(k) for k in K)
    if catalog is None:
        catalog = gen.build_catalog(d or infer_local_dim(rho, len(K)))
    p = apply_readout_noise(probabilities(rho, K, catalog), catalog.d, len(K), noise)
    tag = noise.tag if noise is not None else "none"
    if mode == MODE_EXACT:
        return CountsRecord(K, shots * p, float(shots), MODE_EXACT, tag, seed)
    if mode != MODE_SAMPLED:
        raise TomographyError(f"unknown sampling mode {mode!r}")
    counts = record_rng(seed, K).multinomial(int(shots), p)
    return CountsRecord(K, counts, float(shots), MODE_SAMPLED, tag, seed)


def simulate_plan(rho, settings, shots: int, seed: int = 0, *, catalog=None, noise=None,
                  mode: str = MODE_SAMPLED) -> list[CountsRecord]:
    return [sample_counts(rho, K, shots, seed, catalog=catalog, noise=noise, mode=mode)
            for K in settings]


def projector_sum(K, catalog: gen.ObservableCatalog) -> np.ndarray:
    """sum_n |phi_n><phi_n|; the identity for a complete basis."""
    U = product_basis(K, catalog)
    return U @ U.conj().T

"""Measurement settings for the selected targets: overlap matrix, pruning, sorting.

A setting is a tuple ``K = (k_1, ..., k_N)`` of observable indices, qudit 1
being the most significant base-d digit of a basis index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import generators as gen
from .errors import PlanningError, SizeGuardError, TomographyError
from .thresholds import IM, RE, DiagonalMeasurement, ThresholdPolicy, TargetElement, select_targets

COVERAGE_SINGLE = "single"
COVERAGE_SUM = "sum"
COVERAGE_RULES = (COVERAGE_SINGLE, COVERAGE_SUM)

BETA_TOL = 1e-9
ZERO_TOL = 1e-12
FULL_PLAN_MAX_DIM = 4096


def digits(x: int, d: int, N: int) -> tuple[int, ...]:
    """Base-d digits of ``x``, most significant first."""
    out = []
    for _ in range(N):
        x, r = divmod(x, d)
        out.append(r)
    return tuple(reversed(out))


def digit_array(idx, d: int, N: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    powers = d ** np.arange(N - 1, -1, -1, dtype=np.int64)
    return (idx[..., None] // powers) % d


def diagonal_setting(N: int) -> tuple[int, ...]:
    return (0,) * N


def setting_for_element(m: TargetElement, d: int, N: int) -> tuple[int, ...]:
    """Setting informing on Re or Im of rho_ij.

    Qudits where i and j share a digit get the diagonal observable, the others
    the real generator linking the two digits. For Im the first differing
    qudit is switched to the imaginary partner.
    """
    if m.i == m.j:
        raise TomographyError("diagonal elements are measured by the diagonal setting")
    if not 0 <= m.i < d ** N or not 0 <= m.j < d ** N:
        raise TomographyError(f"element ({m.i}, {m.j}) outside a {d}^{N} space")
    di, dj = digits(m.i, d, N), digits(m.j, d, N)
    K = [0 if a == b else gen.real_index(d, a, b) for a, b in zip(di, dj)]
    if m.part == IM:
        r = next(r for r, k in enumerate(K) if k)
        K[r] = gen.imag_partner(d, K[r])
    return tuple(K)


def element_contribution(K, i: int, j: int, catalog: gen.ObservableCatalog) -> complex:
    """Matrix element (i, j) of the product observable s^(K)."""
    N = len(K)
    di, dj = digits(i, catalog.d, N), digits(j, catalog.d, N)
    out = 1.0 + 0.0j
    for k, a, b in zip(K, di, dj):
        out *= catalog.matrices[k, a, b]
    return complex(out)


def setting_operator(K, catalog: gen.ObservableCatalog) -> np.ndarray:
    return reduce(np.kron, [catalog.matrices[k] for k in K])


def product_basis(K, catalog: gen.ObservableCatalog) -> np.ndarray:
    """Columns are the product eigenvectors |phi_n>; digit r of n picks the slot on qudit r."""
    return reduce(np.kron, [catalog.eigvecs[k] for k in K])


def product_eigenvalues(K, catalog: gen.ObservableCatalog) -> np.ndarray:
    return reduce(np.kron, [catalog.eigvals[k] for k in K])


def element_operator(m: TargetElement, dim: int) -> np.ndarray:
    """O_m with tr(O_m rho) = Re rho_ij (or Im rho_ij)."""
    O = np.zeros((dim, dim), dtype=complex)
    if m.part == RE:
        O[m.i, m.j] = O[m.j, m.i] = 0.5
    else:
        O[m.i, m.j], O[m.j, m.i] = 0.5j, -0.5j
    return O


def overlap_tensor(K, targets, catalog: gen.ObservableCatalog) -> tuple[np.ndarray, np.ndarray]:
    """Rows A[m, n] = <phi_n| O_m |phi_n> for setting K, and C[m] = sum_n A[m, n]^2."""
    U = product_basis(K, catalog)
    A = np.empty((len(targets), U.shape[1]))
    for row, m in enumerate(targets):
        z = U[m.i].conj() * U[m.j]
        A[row] = z.real if m.part == RE else -z.imag
    return A, np.sum(A ** 2, axis=1)


def overlap_matrix(settings, targets, catalog: gen.ObservableCatalog) -> np.ndarray:
    """C[s, m] for every setting and target.

    With z_n = conj(phi_n[i]) phi_n[j] factorizing over qudits,
    sum_n (Re z_n)^2 = (sum |z|^2 + Re sum z^2) / 2 and both sums are products
    of single-qudit sums, so no d^N-long basis vector is built.
    """
    settings = [tuple(K) for K in settings]
    if not settings or not targets:
        return np.zeros((len(settings), len(targets)))
    N = len(settings[0])
    d = catalog.d
    di = digit_array([m.i for m in targets], d, N)
    dj = digit_array([m.j for m in targets], d, N)
    sign = np.array([1.0 if m.part == RE else -1.0 for m in targets])
    vecs = catalog.eigvecs
    C = np.empty((len(settings), len(targets)))
    for row, K in enumerate(settings):
        a = np.ones(len(targets))
        b = np.ones(len(targets), dtype=complex)
        for r, k in enumerate(K):
            V = vecs[k]
            z = V[di[:, r]].conj() * V[dj[:, r]]
            a *= np.sum(np.abs(z) ** 2, axis=1)
            b *= np.sum(z * z, axis=1)
        C[row] = 0.5 * (a + sign * b.real)
    return np.clip(C, 0.0, None)


def prune(C: np.ndarray, coverage: str = COVERAGE_SINGLE, tol: float = BETA_TOL) -> list[int]:
    """Greedy selection of rows of C; returns the chosen row indices in pick order.

    At each step the row with the fewest zeros over still-unsatisfied columns
    is taken (ties go to the lowest row index, so callers should pass rows in
    lexicographic setting order). Under the ``single`` rule a column counts as
    satisfied once one chosen row reaches its maximum beta_m; under ``sum``
    once the chosen rows add up to beta_m. Both guarantee sum >= beta.
    """
    if coverage not in COVERAGE_RULES:
        raise ValueError(f"unknown coverage rule {coverage!r}")
    C = np.asarray(C, dtype=float)
    n_rows, n_cols = C.shape
    if n_cols == 0:
        return []
    beta = C.max(axis=0)
    if np.any(beta <= ZERO_TOL):
        raise PlanningError("a target has no setting with positive overlap")
    nonzero = C > ZERO_TOL
    available = np.ones(n_rows, dtype=bool)
    acc = np.zeros(n_cols)
    unsatisfied = np.ones(n_cols, dtype=bool)
    chosen = []
    while unsatisfied.any():
        hits = np.where(available, nonzero[:, unsatisfied].sum(axis=1), -1)
        best = int(np.argmax(hits))
        if hits[best] <= 0:
            raise PlanningError("remaining settings cannot satisfy the open targets")
        chosen.append(best)
        available[best] = False
        if coverage == COVERAGE_SUM:
            acc += C[best]
        else:
            acc = np.maximum(acc, C[best])
        unsatisfied = acc < beta - tol
    return chosen


def setting_weights(C: np.ndarray, bounds) -> np.ndarray:
    """w_s = sum_m C[s, m] * bound_m."""
    return np.asarray(C) @ np.asarray(bounds, dtype=float)


def sort_by_weight(settings, weights) -> list[int]:
    """Order by non-increasing weight, ties by lexicographic K."""
    return sorted(range(len(settings)), key=lambda s: (-weights[s], tuple(settings[s])))


@dataclass
class TomographyPlan:
    """Diagonal setting followed by the pruned settings in measurement order.

    ``settings[0]`` is always the diagonal setting, with weight 0 and no
    informed targets. ``overlap`` is C restricted to the plan's settings.
    """

    d: int
    N: int
    threshold: float
    targets: list[TargetElement]
    settings: list[tuple[int, ...]]
    weights: np.ndarray
    informs: list[list[int]]
    overlap: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    candidates: list[tuple[int, ...]] = field(default_factory=list, repr=False)
    policy: str = "fixed"
    coverage: str = COVERAGE_SINGLE
    mas: str = gen.MAS_IDENTITY
    seed: int | None = None

    @property
    def offdiagonal(self) -> list[tuple[int, ...]]:
        return self.settings[1:]

    def __len__(self) -> int:
        return len(self.settings)


def plan_from_targets(targets, d: int, N: int, threshold: float = 0.0, *,
                      coverage: str = COVERAGE_SINGLE, mas: str = gen.MAS_IDENTITY,
                      policy: str = "fixed", seed: int | None = None) -> TomographyPlan:
    catalog = gen.build_catalog(d, mas)
    targets = list(targets)
    candidates = sorted({setting_for_element(m, d, N) for m in targets})
    C = overlap_matrix(candidates, targets, catalog)
    beta = C.max(axis=0) if targets else np.zeros(0)
    kept = sorted(prune(C, coverage=coverage))
    C_kept = C[kept]
    bounds = [m.bound for m in targets]
    w = setting_weights(C_kept, bounds)
    order = sort_by_weight([candidates[s] for s in kept], w)
    diag = diagonal_setting(N)
    settings = [diag] + [candidates[kept[s]] for s in order]
    overlap = np.vstack([np.zeros((1, len(targets))), C_kept[order]])
    informs = [np.flatnonzero(row > ZERO_TOL).tolist() for row in overlap]
    return TomographyPlan(
        d=d, N=N, threshold=float(threshold), targets=targets, settings=settings,
        weights=np.concatenate([[0.0], w[order]]), informs=informs, overlap=overlap,
        beta=beta, candidates=candidates, policy=policy, coverage=coverage, mas=mas, seed=seed)


def build_plan(diag: DiagonalMeasurement, threshold, *, skip_imaginary: bool = False,
               coverage: str = COVERAGE_SINGLE, mas: str = gen.MAS_IDENTITY,
               seed: int | None = None) -> TomographyPlan:
    """Full planning pipeline: threshold, targets, settings, pruning, sorting.

    ``threshold`` is either a number (fixed policy) or a ThresholdPolicy.
    """
    if isinstance(threshold, ThresholdPolicy):
        policy, t = threshold.mode, threshold.resolve(diag)
    else:
        policy, t = "fixed", float(threshold)
    targets = select_targets(diag, t, skip_imaginary=skip_imaginary)
    return plan_from_targets(targets, diag.d, diag.N, t, coverage=coverage, mas=mas,
                             policy=policy, seed=seed)


def full_qst_plan(d: int, N: int, *, coverage: str = COVERAGE_SINGLE,
                  mas: str = gen.MAS_IDENTITY) -> TomographyPlan:
    """Plan in the t -> 0 limit: every off-diagonal element is a target."""
    if d ** N > FULL_PLAN_MAX_DIM:
        raise SizeGuardError(f"d^N = {d ** N} exceeds {FULL_PLAN_MAX_DIM}")
    diag = DiagonalMeasurement.from_probabilities(np.ones(d ** N), d, N)
    return build_plan(diag, 0.0, coverage=coverage, mas=mas)


def coverage_margin(plan: TomographyPlan) -> np.ndarray:
    """sum_s C[s, m] - beta_m over the plan's settings; non-negative when covered."""
    return plan.overlap.sum(axis=0) - plan.beta

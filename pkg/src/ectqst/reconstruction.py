"""Maximum-likelihood reconstruction with a low-rank factor rho = M M^dag / tr(M M^dag)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import generators as gen
from .errors import DensityMatrixError, TomographyError

log = logging.getLogger(__name__)

INIT_DIAGONAL = "diagonal"
INIT_RANDOM = "random"


@dataclass
class LikelihoodProblem:
    """Counts of several settings, ready for repeated likelihood evaluation.

    ``counts[s, n]`` is the number of times outcome n of ``settings[s]`` was
    seen out of ``shots[s]``. Expected counts below ``floor`` are replaced by
    ``floor`` in the denominator.
    """

    d: int
    N: int
    settings: list[tuple[int, ...]]
    counts: np.ndarray
    shots: np.ndarray
    floor: float = 1.0
    mas: str = gen.MAS_IDENTITY
    _fwd: np.ndarray = field(init=False, repr=False)
    _adj: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.settings:
            raise TomographyError("likelihood needs at least one setting")
        self.settings = [tuple(int(k) for k in K) for K in self.settings]
        self.counts = np.asarray(self.counts, dtype=float)
        self.shots = np.asarray(self.shots, dtype=float)
        S, D = len(self.settings), self.d ** self.N
        if self.counts.shape != (S, D):
            raise TomographyError(f"counts must have shape {(S, D)}, got {self.counts.shape}")
        if self.shots.shape != (S,) or np.any(self.shots <= 0):
            raise TomographyError("every setting needs a positive shot count")
        if self.floor <= 0:
            raise TomographyError("denominator floor must be positive")
        vecs = gen.build_catalog(self.d, self.mas).eigvecs
        K = np.array(self.settings)  # (S, N)
        V = vecs[K.T]  # (N, S, d, d); columns are eigenvectors
        self._fwd = np.conj(np.swapaxes(V, -1, -2))  # V^dag: amplitudes in the measured basis
        self._adj = V

    @classmethod
    def from_records(cls, records, d: int, N: int, floor: float = 1.0,
                     mas: str = gen.MAS_IDENTITY) -> "LikelihoodProblem":
        records = list(records)
        return cls(d, N, [r.setting for r in records],
                   np.array([np.asarray(r.counts, dtype=float) for r in records]),
                   np.array([r.shots for r in records], dtype=float), floor, mas)

    def subset(self, rows) -> "LikelihoodProblem":
        rows = list(rows)
        return LikelihoodProblem(self.d, self.N, [self.settings[s] for s in rows],
                                 self.counts[rows], self.shots[rows], self.floor, self.mas)

    @property
    def dim(self) -> int:
        return self.d ** self.N

    def _apply(self, mats: np.ndarray, T: np.ndarray) -> np.ndarray:
        # T: (S, D, r); applies the per-qudit (S, d, d) matrices along each digit axis
        d, N = self.d, self.N
        S, _, r = T.shape
        for q in range(N):
            T = T.reshape(S, d ** q, d, d ** (N - q - 1) * r)
            T = np.einsum("sna,sxay->sxny", mats[q], T)
        return T.reshape(S, d ** N, r)

    def basis_amplitudes(self, M: np.ndarray) -> np.ndarray:
        """<phi_n^(s)| M for every setting: shape (S, D, r)."""
        M = np.asarray(M, dtype=complex)
        S = len(self.settings)
        return self._apply(self._fwd, np.broadcast_to(M, (S,) + M.shape))

    def expected_counts(self, M: np.ndarray) -> np.ndarray:
        B = self.basis_amplitudes(M)
        q = np.sum(B.real ** 2 + B.imag ** 2, axis=2)
        return self.shots[:, None] * q / np.sum(np.abs(M) ** 2)

    def diagonal_frequencies(self) -> np.ndarray | None:
        for s, K in enumerate(self.settings):
            if not any(K):
                return self.counts[s] / self.shots[s]
        return None


def density_from_factor(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    rho = M @ M.conj().T
    return rho / np.trace(rho).real


def likelihood(problem: LikelihoodProblem, M: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and gradient of sum (x - n)^2 / (4 max(x, floor)) over settings and outcomes.

    ``x`` are the expected counts of rho(M). The gradient is returned as the
    complex matrix dL/dRe(M) + 1j * dL/dIm(M).
    """
    M = np.asarray(M, dtype=complex)
    if M.shape[0] != problem.dim:
        raise TomographyError(f"factor has {M.shape[0]} rows, expected {problem.dim}")
    eps = problem.floor
    B = problem.basis_amplitudes(M)
    q = np.sum(B.real ** 2 + B.imag ** 2, axis=2)
    T = float(np.sum(M.real ** 2 + M.imag ** 2))
    shots = problem.shots[:, None]
    x = shots * q / T
    n = problem.counts
    big = x >= eps
    den = np.where(big, x, eps)
    value = float(np.sum((x - n) ** 2 / (4.0 * den)))
    with np.errstate(divide="ignore", invalid="ignore"):
        dfdx = np.where(big, (x * x - n * n) / (4.0 * np.where(big, x * x, 1.0)), (x - n) / (2.0 * eps))
    g = shots * dfdx  # dL/dp
    back = problem._apply(problem._adj, (g / T)[:, :, None] * B).sum(axis=0)
    grad = 2.0 * (back - (np.sum(g * q) / T ** 2) * M)
    return value, grad


@dataclass
class FitConfig:
    rank: int | None = None  # defaults to N
    seed: int = 0
    tol: float = 1e-10
    gtol: float = 1e-8
    max_iter: int = 5000
    max_escalations: int = 3
    init: str = INIT_DIAGONAL
    init_scale: float = 1e-2


@dataclass
class FitReport:
    rho: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)
    objective: float
    iterations: int
    grad_norm: float
    rank_history: list[int]
    purity: float
    converged: bool
    rank_adequate: bool
    message: str = ""

    @property
    def escalations(self) -> int:
        return len(self.rank_history) - 1


def initial_factor(problem: LikelihoodProblem, rank: int, config: FitConfig,
                   rng: np.random.Generator) -> np.ndarray:
    D = problem.dim
    noise = (rng.standard_normal((D, rank)) + 1j * rng.standard_normal((D, rank))) / np.sqrt(2)
    if config.init == INIT_RANDOM:
        return noise
    if config.init != INIT_DIAGONAL:
        raise ValueError(f"unknown init {config.init!r}")
    freqs = problem.diagonal_frequencies()
    if freqs is None:
        freqs = np.full(D, 1.0 / D)
    M = config.init_scale * noise
    M[:, 0] = np.sqrt(np.clip(freqs, 0.0, None))
    return M


def _minimize(problem: LikelihoodProblem, M0: np.ndarray, config: FitConfig):
    D, r = M0.shape

    def fun(v):
        M = v[:D * r].reshape(D, r) + 1j * v[D * r:].reshape(D, r)
        val, G = likelihood(problem, M)
        return val, np.concatenate([G.real.ravel(), G.imag.ravel()])

    v0 = np.concatenate([M0.real.ravel(), M0.imag.ravel()])
    res = minimize(fun, v0, jac=True, method="L-BFGS-B",
                   options={"maxiter": config.max_iter, "ftol": config.tol,
                            "gtol": config.gtol, "maxcor": 20})
    M = res.x[:D * r].reshape(D, r) + 1j * res.x[D * r:].reshape(D, r)
    return M, res


def fit(problem: LikelihoodProblem, config: FitConfig | None = None) -> FitReport:
    """Minimize the likelihood, raising the rank while r <= 1/purity + 1/2.

    Each escalation adds ceil(N/2) columns (small seeded noise) to the current
    factor and refits, at most ``max_escalations`` times. The rank never
    exceeds d^N, where the model is exact.
    """
    config = config or FitConfig()
    rng = np.random.default_rng(config.seed)
    D = problem.dim
    rank = min(config.rank or problem.N, D)
    if rank < 1:
        raise TomographyError("rank must be >= 1")
    M = initial_factor(problem, rank, config, rng)
    history = [rank]
    iterations = 0
    while True:
        M, res = _minimize(problem, M, config)
        iterations += int(res.nit)
        rho = density_from_factor(M)
        purity = float(np.sum(np.abs(rho) ** 2))
        adequate = rank >= D or rank > 1.0 / purity + 0.5
        if adequate or len(history) > config.max_escalations:
            break
        step = math.ceil(problem.N / 2)
        new_rank = min(rank + step, D)
        log.debug("rank %d fails the purity check (1/purity=%.3f), refitting at %d",
                  rank, 1.0 / purity, new_rank)
        extra = (rng.standard_normal((D, new_rank - rank))
                 + 1j * rng.standard_normal((D, new_rank - rank))) * config.init_scale / np.sqrt(2)
        M = np.hstack([M, extra])
        rank = new_rank
        history.append(rank)
    value, G = likelihood(problem, M)
    return FitReport(rho=rho, factor=M, objective=value, iterations=iterations,
                     grad_norm=float(np.linalg.norm(G)), rank_history=history,
                     purity=purity, converged=bool(res.success), rank_adequate=adequate,
                     message=str(res.message))


def _psd_factor(rho: np.ndarray) -> np.ndarray:
    """L with rho = L L^dag; eigenvalues at round-off level are dropped."""
    w, V = np.linalg.eigh(rho)
    cut = 10 * rho.shape[0] * np.finfo(float).eps * max(abs(w).max(), 1e-300)
    keep = w > cut
    return V[:, keep] * np.sqrt(w[keep])


def fidelity(rho1, rho2, psd_tol: float = 1e-8) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2, clipped to [0, 1].

    Evaluated as the squared nuclear norm of L1^dag L2 for factors
    rho_k = L_k L_k^dag, which shares its singular values with
    sqrt(rho1) sqrt(rho2) and stays symmetric for rank-deficient input.
    """
    rho1 = np.asarray(rho1, dtype=complex)
    rho2 = np.asarray(rho2, dtype=complex)
    if rho1.shape != rho2.shape:
        raise DensityMatrixError("fidelity needs matrices of equal dimension")
    factors = []
    for rho in (rho1, rho2):
        rho = (rho + rho.conj().T) / 2
        if np.linalg.eigvalsh(rho).min() < -psd_tol:
            raise DensityMatrixError("fidelity input is not positive semidefinite")
        factors.append(_psd_factor(rho))
    L1, L2 = factors
    if L1.shape[1] == 0 or L2.shape[1] == 0:
        return 0.0
    sv = np.linalg.svd(L1.conj().T @ L2, compute_uv=False)
    return float(np.clip(np.sum(sv) ** 2, 0.0, 1.0))


@dataclass
class ProgressiveStep:
    l: int
    report: FitReport = field(repr=False)
    fidelity_prev: float
    fidelity_target: float | None = None


@dataclass
class ProgressiveResult:
    steps: list[ProgressiveStep]
    l_star: int | None = None

    def curve(self) -> list[tuple[int, float, float | None]]:
        return [(s.l, s.fidelity_prev, s.fidelity_target) for s in self.steps]

    def first_crossing(self, level: float) -> int | None:
        for s in self.steps:
            if s.fidelity_target is not None and s.fidelity_target > level:
                return s.l
        return None


def progressive_fit(problem: LikelihoodProblem, config: FitConfig | None = None, *,
                    target=None, stop_fidelity: float | None = None,
                    stability: int = 3, truncate: bool = True) -> ProgressiveResult:
    """Fit with the diagonal plus the first l settings, for l = 1 .. S - 1.

    Rows of ``problem`` must follow plan order with the diagonal setting
    first. ``fidelity_prev`` compares the l-setting fit with the (l-1)-setting
    one (l = 0 being the diagonal-only fit). With ``stop_fidelity`` set, the
    sweep ends once ``fidelity_prev`` has stayed above it for ``stability``
    further settings, and ``l_star`` is the first l of that run. Pass
    ``truncate=False`` to find ``l_star`` but keep fitting to the end.
    """
    config = config or FitConfig()
    S = len(problem.settings)
    if any(problem.settings[0]):
        raise TomographyError("progressive fits need the diagonal setting first")
    prev = fit(problem.subset([0]), config).rho
    steps: list[ProgressiveStep] = []
    run_start = None
    l_star = None
    for l in range(1, S):
        report = fit(problem.subset(range(l + 1)), config)
        f_prev = fidelity(report.rho, prev)
        f_tgt = fidelity(report.rho, target) if target is not None else None
        steps.append(ProgressiveStep(l, report, f_prev, f_tgt))
        prev = report.rho
        if stop_fidelity is not None and l_star is None:
            if f_prev > stop_fidelity:
                run_start = l if run_start is None else run_start
                if l - run_start >= stability:
                    l_star = run_start
                    if truncate:
                        break
            else:
                run_start = None
    return ProgressiveResult(steps, l_star)


def with_rank(config: FitConfig, rank: int) -> FitConfig:
    return replace(config, rank=rank)

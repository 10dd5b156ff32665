"""Projector selection in the original threshold-tomography style, and cost accounting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import generators as gen
from .errors import TomographyError
from .planner import TomographyPlan, overlap_tensor, product_basis, setting_for_element
from .thresholds import TargetElement


@dataclass(frozen=True)
class ProjectorChoice:
    target: TargetElement
    setting: tuple[int, ...]
    n_max: int
    overlap: float  # |A[m, n_max]|^2
    vector: np.ndarray


def tqst_projector(m: TargetElement, d: int, N: int, mas: str = gen.MAS_IDENTITY,
                   rtol: float = 1e-12) -> ProjectorChoice:
    """Basis vector of m's own setting with the largest |A[m, n]|^2; ties go to the smallest n."""
    if m.i == m.j:
        raise TomographyError("diagonal elements have no projector choice")
    catalog = gen.build_catalog(d, mas)
    K = setting_for_element(m, d, N)
    A, _ = overlap_tensor(K, [m], catalog)
    sq = A[0] ** 2
    best = sq.max()
    n_max = int(np.flatnonzero(sq >= best * (1 - rtol))[0])
    return ProjectorChoice(m, K, n_max, float(sq[n_max]), product_basis(K, catalog)[:, n_max])


@dataclass
class CostReport:
    """Settings |S| and projective measurements M for full, threshold and ECT tomography."""

    d: int
    N: int
    fqst_settings: int
    fqst_measurements: int
    tqst_settings: int
    tqst_measurements: int
    ect_settings: int
    ect_measurements: int

    def rows(self) -> list[tuple[str, int, int]]:
        return [("fQST", self.fqst_settings, self.fqst_measurements),
                ("tQST", self.tqst_settings, self.tqst_measurements),
                ("ECT-QST", self.ect_settings, self.ect_measurements)]


def fqst_settings(d: int, N: int) -> int:
    """3^N Pauli settings for qubits; the zero-threshold ECT bound otherwise."""
    if d == 2:
        return 3 ** N
    return 2 * (d * (d - 1) // 2 + 1) ** N - 1


def cost_report(plan: TomographyPlan, targets=None) -> CostReport:
    """Cost of the plan next to the fQST baseline and the tQST projector count.

    ECT measures every outcome of every plan setting (diagonal included).
    tQST measures the diagonal basis plus one projector per target, counting
    each distinct projector once.
    """
    d, N = plan.d, plan.N
    D = d ** N
    targets = plan.targets if targets is None else targets
    projectors = set()
    for m in targets:
        choice = tqst_projector(m, d, N, plan.mas)
        projectors.add((choice.setting, choice.n_max))
    tqst_settings = 1 + len({K for K, _ in projectors})
    fq = fqst_settings(d, N)
    return CostReport(d=d, N=N,
                      fqst_settings=fq, fqst_measurements=fq * D,
                      tqst_settings=tqst_settings, tqst_measurements=D + len(projectors),
                      ect_settings=len(plan.settings), ect_measurements=len(plan.settings) * D)

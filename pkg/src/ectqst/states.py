"""Target states: GHZ, W (direct and via the block-gate tree), random circuits."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DensityMatrixError, SizeGuardError, TomographyError

SPARSE_MAX_DIM = 2 ** 24
DENSE_MAX_QUBITS = 12
NORM_TOL = 1e-12


@dataclass
class SparseStateVector:
    """Pure state stored as {basis index: amplitude}, non-zeros only."""

    d: int
    N: int
    amplitudes: dict[int, complex] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.d ** self.N

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values())))

    def check(self, tol: float = NORM_TOL) -> "SparseStateVector":
        if abs(self.norm() - 1.0) > tol:
            raise DensityMatrixError(f"state norm {self.norm()!r} is not 1")
        return self

    def to_dense(self) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        for idx, amp in self.amplitudes.items():
            psi[idx] = amp
        return psi

    @classmethod
    def from_dense(cls, psi, d: int, N: int, cutoff: float = 0.0) -> "SparseStateVector":
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (d ** N,):
            raise TomographyError(f"expected {d ** N} amplitudes, got {psi.shape}")
        amps = {int(i): complex(psi[i]) for i in np.flatnonzero(np.abs(psi) > cutoff)}
        return cls(d, N, amps)

    def diagonal_fill(self, cutoff: float = 1e-6) -> int:
        """Number of computational-basis probabilities above ``cutoff``."""
        return sum(abs(a) ** 2 > cutoff for a in self.amplitudes.values())


def _guard(d: int, N: int):
    if d ** N > SPARSE_MAX_DIM:
        raise SizeGuardError(f"d^N = {d ** N} exceeds the sparse limit {SPARSE_MAX_DIM}")


def ghz_state(d: int, N: int) -> SparseStateVector:
    """sum_a |a a ... a> / sqrt(d)."""
    if d < 2 or N < 2:
        raise TomographyError("GHZ state needs d >= 2 and N >= 2")
    _guard(d, N)
    rep = sum(d ** r for r in range(N))  # index of |11...1>
    amp = 1.0 / np.sqrt(d)
    return SparseStateVector(d, N, {a * rep: complex(amp) for a in range(d)})


def w_state_direct(N: int) -> SparseStateVector:
    """Equal superposition of the N single-excitation qubit states."""
    if N < 2:
        raise TomographyError("W state needs N >= 2")
    _guard(2, N)
    amp = complex(1.0 / np.sqrt(N))
    return SparseStateVector(2, N, {1 << (N - 1 - r): amp for r in range(N)})


def _apply_two_qubit(amps: dict, N: int, q0: int, q1: int, U: np.ndarray) -> dict:
    """Apply a 4x4 unitary on qubits (q0, q1); q0 is the high bit of the local index."""
    s0, s1 = N - 1 - q0, N - 1 - q1
    mask = (1 << s0) | (1 << s1)
    out: dict[int, complex] = {}
    for idx, amp in amps.items():
        base = idx & ~mask
        col = (((idx >> s0) & 1) << 1) | ((idx >> s1) & 1)
        for row in range(4):
            c = U[row, col]
            if c == 0:
                continue
            tgt = base | ((row >> 1) << s0) | ((row & 1) << s1)
            out[tgt] = out.get(tgt, 0.0) + c * amp
    return {k: v for k, v in out.items() if v != 0}


def controlled_g(p: float) -> np.ndarray:
    """Control on the first qubit, G(p) = [[sqrt p, -sqrt(1-p)], [sqrt(1-p), sqrt p]] on the second."""
    a, b = np.sqrt(p), np.sqrt(1.0 - p)
    U = np.eye(4, dtype=complex)
    U[2:, 2:] = [[a, -b], [b, a]]
    return U


# CNOT controlled by the second qubit, targeting the first
INVERTED_CNOT = np.array([[1, 0, 0, 0],
                          [0, 0, 0, 1],
                          [0, 0, 1, 0],
                          [0, 1, 0, 0]], dtype=complex)


def block_gate(p: float) -> np.ndarray:
    """B(p): controlled-G(p) then inverted CNOT; |10> -> sqrt(p)|10> + sqrt(1-p)|01>."""
    if not 0.0 < p < 1.0:
        raise TomographyError(f"block parameter must lie in (0, 1), got {p}")
    return INVERTED_CNOT @ controlled_g(p)


def w_tree_layers(N: int) -> list[list[tuple[int, int, float]]]:
    """Block gates (source qubit, target qubit, p) of the W-state tree, grouped in layers.

    A node (n, m) is a block of m qubits whose first qubit holds the
    excitation; it splits into an upper block of n qubits and a lower block of
    m - n, with p = n / m. Children are (floor(n/2), n) and
    (floor((m-n)/2), m - n).
    """
    layers: list[list[tuple[int, int, float]]] = []
    frontier = deque([(0, N // 2, N)])  # (first qubit, n, m)
    while frontier:
        layer, nxt = [], deque()
        for start, n, m in frontier:
            if m < 2:
                continue
            layer.append((start, start + n, n / m))
            nxt.append((start, n // 2, n))
            nxt.append((start + n, (m - n) // 2, m - n))
        if layer:
            layers.append(layer)
        frontier = nxt
    return layers


def w_state_block_tree(N: int) -> SparseStateVector:
    """W state from |10...0> through the logarithmic-depth tree of B(p) blocks."""
    if not 2 <= N <= 20:
        raise TomographyError("block-tree W state supports 2 <= N <= 20")
    amps = {1 << (N - 1): 1.0 + 0.0j}
    for layer in w_tree_layers(N):
        for q0, q1, p in layer:
            amps = _apply_two_qubit(amps, N, q0, q1, block_gate(p))
    return SparseStateVector(2, N, amps)


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_DISCRETE_GATES = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "z": np.diag([1, -1]).astype(complex),
    "h": _H,
    "s": np.diag([1, 1j]),
    "t": np.diag([1, np.exp(1j * np.pi / 4)]),
    "sx": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
}
GATE_FAMILIES = ("discrete", "haar")


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def _apply_one_qubit(psi: np.ndarray, N: int, q: int, U: np.ndarray) -> np.ndarray:
    t = psi.reshape([2] * N)
    t = np.moveaxis(np.tensordot(U, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def _apply_cnot(psi: np.ndarray, N: int, c: int, t: int) -> np.ndarray:
    T = psi.reshape([2] * N).copy()
    sel = [slice(None)] * N
    sel[c] = 1
    sub = T[tuple(sel)]
    axis = t if t < c else t - 1
    T[tuple(sel)] = np.flip(sub, axis=axis)
    return T.reshape(-1)


def random_circuit_state(N: int, depth: int, seed: int, gates: str = "discrete") -> SparseStateVector:
    """Output of a seeded random circuit on |0...0>.

    Each layer applies one random single-qubit gate per qubit, then CNOTs on a
    random matching of neighbouring qubits (random offset and orientation).
    ``gates="haar"`` draws Haar-random single-qubit unitaries, which fills the
    whole diagonal; ``"discrete"`` draws from {I, X, Z, H, S, T, SX} and keeps
    the diagonal sparse.
    """
    if N < 1 or N > DENSE_MAX_QUBITS:
        raise SizeGuardError(f"random circuits support 1 <= N <= {DENSE_MAX_QUBITS}")
    if depth < 0:
        raise TomographyError("depth must be non-negative")
    if gates not in GATE_FAMILIES:
        raise ValueError(f"unknown gate family {gates!r}")
    rng = np.random.default_rng(seed)
    names = list(_DISCRETE_GATES)
    psi = np.zeros(2 ** N, dtype=complex)
    psi[0] = 1.0
    for _ in range(depth):
        for q in range(N):
            if gates == "haar":
                U = haar_unitary(2, rng)
            else:
                U = _DISCRETE_GATES[names[rng.integers(len(names))]]
            psi = _apply_one_qubit(psi, N, q, U)
        offset = int(rng.integers(2))
        for q in range(offset, N - 1, 2):
            c, t = (q, q + 1) if rng.integers(2) == 0 else (q + 1, q)
            psi = _apply_cnot(psi, N, c, t)
    psi[np.abs(psi) < 1e-14] = 0.0
    return SparseStateVector.from_dense(psi, 2, N)


def haar_random_state(d: int, N: int, seed: int) -> SparseStateVector:
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(d ** N) + 1j * rng.standard_normal(d ** N)
    return SparseStateVector.from_dense(psi / np.linalg.norm(psi), d, N)


def to_density(psi) -> np.ndarray:
    """|psi><psi| from a SparseStateVector or a dense normalized vector."""
    vec = psi.to_dense() if isinstance(psi, SparseStateVector) else np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(vec) - 1.0) > 1e-10:
        raise DensityMatrixError("state vector is not normalized")
    return np.outer(vec, vec.conj())


def mix(states, weights) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
        raise DensityMatrixError("mixture weights must be non-negative and sum to 1")
    rhos = [s if isinstance(s, np.ndarray) and s.ndim == 2 else to_density(s) for s in states]
    return sum(w * r for w, r in zip(weights, rhos))


def check_density(rho, herm_tol: float = 1e-12, trace_tol: float = 1e-10,
                  psd_tol: float = 1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DensityMatrixError(f"density matrix must be square, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise DensityMatrixError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise DensityMatrixError(f"trace {np.trace(rho).real} is not 1")
    if np.linalg.eigvalsh(rho).min() < -psd_tol:
        raise DensityMatrixError("density matrix is not positive semidefinite")
    return rho


def parse_state_spec(spec: str) -> SparseStateVector:
    """``ghz:d,N``, ``w:N``, ``wtree:N``, ``random:N,depth,seed[,haar]`` or ``file:<path>``.

    A state file is JSON with ``d``, ``N`` and ``amplitudes`` as a list of
    ``[re, im]`` pairs (dense) or ``{"index": [re, im]}`` (sparse).
    """
    kind, _, args = spec.partition(":")
    try:
        if kind == "ghz":
            d, N = (int(x) for x in args.split(","))
            return ghz_state(d, N)
        if kind == "w":
            return w_state_direct(int(args))
        if kind == "wtree":
            return w_state_block_tree(int(args))
        if kind == "random":
            parts = args.split(",")
            gates = parts[3] if len(parts) > 3 else "discrete"
            return random_circuit_state(int(parts[0]), int(parts[1]), int(parts[2]), gates)
        if kind == "file":
            return _load_state_file(args)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, TomographyError):
            raise
        raise TomographyError(f"bad state spec {spec!r}: {exc}") from exc
    raise TomographyError(f"unknown state spec {spec!r}")


def _load_state_file(path: str) -> SparseStateVector:
    import json

    with open(path) as fh:
        data = json.load(fh)
    d, N = int(data["d"]), int(data["N"])
    raw = data["amplitudes"]
    if isinstance(raw, dict):
        amps = {int(k): complex(v[0], v[1]) for k, v in raw.items()}
        state = SparseStateVector(d, N, amps)
    else:
        state = SparseStateVector.from_dense([complex(re, im) for re, im in raw], d, N)
    return state.check(1e-9)

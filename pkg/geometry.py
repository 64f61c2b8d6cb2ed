"""
Euclidean machinery on the span of a snapshot set.

Every element of span{x_1, ..., x_S} is a coefficient vector c and all
inner products go through the Gram matrix: (c, d) = c^T G d. A Subspace is
a coefficient matrix B with B^T G B = I.
"""

from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from errors import (
    ConvergenceError,
    FamilyMismatchError,
    InvalidParameterError,
    NotOrthonormalError,
    NotPositiveSemidefiniteError,
    RankDeficiencyError,
)

SYMMETRY_RTOL = 1e-14
PSD_RTOL = 1e-10
RANK_RTOL = 1e-10  # on G-norms, so 1e-20 on eigenvalues
ORTHONORMAL_TOL = 1e-10
ORTHONORMAL_FLOOR = 64 * np.finfo(float).eps
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100
REORTHOGONALIZE_RATIO = 0.7


class SpectralDecomposition(BaseModel):
    """Eigenpairs in descending order."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0
    off_norm: float = 0.0

    def reconstruct(self) -> np.ndarray:
        Q = self.eigenvectors
        return (Q * self.eigenvalues) @ Q.T

    def rank(self) -> int:
        top = self.eigenvalues[0] if self.eigenvalues.size else 0.0
        if top <= 0.0:
            return 0
        return int(np.count_nonzero(self.eigenvalues > RANK_RTOL ** 2 * top))


class GramMatrix(BaseModel):
    """Pairwise inner products of a snapshot set."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    entries: np.ndarray
    labels: List[str] = Field(default_factory=list)
    family: Optional[str] = None

    _spectrum: Optional[SpectralDecomposition] = PrivateAttr(default=None)

    @field_validator("entries", mode="before")
    @classmethod
    def _as_symmetric_array(cls, value) -> np.ndarray:
        G = np.array(value, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError(f"Gram matrix must be square, got shape {G.shape}")
        scale = max(1.0, float(np.max(np.abs(G)))) if G.size else 1.0
        if G.size and np.max(np.abs(G - G.T)) > SYMMETRY_RTOL * scale:
            raise ValueError("Gram matrix is not symmetric")
        return 0.5 * (G + G.T)

    @model_validator(mode="after")
    def _labels_match(self) -> "GramMatrix":
        if self.labels and len(self.labels) != self.size:
            raise ValueError("one label per snapshot is required")
        return self

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries)

    def spectrum(self) -> SpectralDecomposition:
        if self._spectrum is None:
            self._spectrum = symmetric_eig(self)
        return self._spectrum

    def rank(self) -> int:
        return self.spectrum().rank()

    def check_psd(self) -> None:
        trace = float(np.trace(self.entries))
        smallest = float(self.spectrum().eigenvalues[-1]) if self.size else 0.0
        if smallest < -PSD_RTOL * max(trace, 0.0):
            raise NotPositiveSemidefiniteError(
                f"smallest eigenvalue {smallest:.3e} below -{PSD_RTOL:g} * trace"
            )

    def scaled(self, factor: float) -> "GramMatrix":
        """Gram matrix of the snapshots multiplied by ``factor``."""
        return GramMatrix(entries=factor * factor * self.entries, labels=self.labels, family=self.family)

    def g_norm(self, c: np.ndarray) -> float:
        return float(np.sqrt(max(float(c @ self.entries @ c), 0.0)))


def orthonormality_tolerance(gram: GramMatrix, coeffs: np.ndarray) -> float:
    """1e-10, relaxed to the rounding floor of badly scaled coefficient columns."""
    if coeffs.size == 0:
        return ORTHONORMAL_TOL
    column_scale = float(np.max(np.sum(coeffs * coeffs, axis=0)))
    g_scale = float(np.max(np.abs(gram.entries))) if gram.size else 0.0
    return max(ORTHONORMAL_TOL, ORTHONORMAL_FLOOR * g_scale * column_scale)


class Subspace(BaseModel):
    """Coefficient columns B, orthonormal against ``gram``."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    coeffs: np.ndarray
    gram: GramMatrix

    @field_validator("coeffs", mode="before")
    @classmethod
    def _as_matrix(cls, value) -> np.ndarray:
        B = np.array(value, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.ndim != 2:
            raise ValueError("coefficients must be a matrix")
        return B

    def __init__(self, **data):
        # checked after validation so callers see NotOrthonormalError itself
        super().__init__(**data)
        if self.coeffs.shape[0] != self.gram.size:
            raise InvalidParameterError(
                f"coefficient rows {self.coeffs.shape[0]} do not match {self.gram.size} snapshots"
            )
        defect = self.defect()
        if defect > orthonormality_tolerance(self.gram, self.coeffs):
            raise NotOrthonormalError(f"B^T G B deviates from the identity by {defect:.3e}")

    @classmethod
    def empty(cls, gram: GramMatrix) -> "Subspace":
        return cls(coeffs=np.zeros((gram.size, 0)), gram=gram)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def defect(self) -> float:
        if self.dim == 0:
            return 0.0
        B = self.coeffs
        return float(np.max(np.abs(B.T @ self.gram.entries @ B - np.eye(self.dim))))


GramLike = Union[GramMatrix, np.ndarray]


def _entries(G: GramLike) -> np.ndarray:
    return G.entries if isinstance(G, GramMatrix) else np.asarray(G, dtype=float)


def assemble_gram(snapshots: Sequence) -> GramMatrix:
    """Exact Gram matrix of snapshots from one family."""
    if not snapshots:
        raise InvalidParameterError("cannot assemble the Gram matrix of an empty set")
    families = {getattr(s, "family", None) for s in snapshots}
    if len(families) != 1 or None in families:
        raise FamilyMismatchError(f"snapshots mix incompatible families: {sorted(map(str, families))}")

    S = len(snapshots)
    G = np.empty((S, S))
    for i in range(S):
        for j in range(i, S):
            G[i, j] = G[j, i] = snapshots[i].inner(snapshots[j])
    return GramMatrix(entries=G, labels=[s.label for s in snapshots], family=families.pop())


@lru_cache(maxsize=None)
def _round_robin(size: int) -> Tuple[Tuple[np.ndarray, np.ndarray], ...]:
    """Disjoint (p, q) pairings covering every index pair once per sweep."""
    n = size + (size % 2)
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        pairs = [(players[i], players[n - 1 - i]) for i in range(half)]
        pairs = [(p, q) for p, q in pairs if p < size and q < size]
        if pairs:
            p, q = zip(*pairs)
            rounds.append((np.array(p), np.array(q)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _off_diagonal_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def symmetric_eig(G: GramLike, initial: Optional[np.ndarray] = None,
                  max_sweeps: int = JACOBI_MAX_SWEEPS) -> SpectralDecomposition:
    """Cyclic Jacobi eigendecomposition with round-robin ordering.

    ``initial`` is an orthogonal warm-start basis; the rotations then act on
    Q0^T G Q0, which is nearly diagonal when G moved little.
    """
    entries = _entries(G)
    size = entries.shape[0]
    if size == 0:
        return SpectralDecomposition(eigenvalues=np.zeros(0), eigenvectors=np.zeros((0, 0)))
    if np.max(np.abs(entries - entries.T)) > SYMMETRY_RTOL * max(1.0, float(np.max(np.abs(entries)))):
        raise InvalidParameterError("symmetric_eig needs a symmetric matrix")

    if initial is None:
        V = np.eye(size)
        A = entries.copy()
    else:
        V = np.array(initial, dtype=float)
        A = V.T @ entries @ V
        A = 0.5 * (A + A.T)

    target = JACOBI_RTOL * float(np.linalg.norm(entries))
    rounds = _round_robin(size)
    sweeps = 0
    off = _off_diagonal_norm(A)
    while off > target:
        if sweeps == max_sweeps:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off:.3e})")
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                tau = (aqq - app) / (2.0 * apq)
                t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t = np.where((apq == 0.0) | ~np.isfinite(t), 0.0, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c

            col_p = A[:, p].copy()
            col_q = A[:, q].copy()
            A[:, p] = c * col_p - s * col_q
            A[:, q] = s * col_p + c * col_q
            row_p = A[p, :].copy()
            row_q = A[q, :].copy()
            A[p, :] = c[:, None] * row_p - s[:, None] * row_q
            A[q, :] = s[:, None] * row_p + c[:, None] * row_q
            A[p, q] = 0.0
            A[q, p] = 0.0

            vec_p = V[:, p].copy()
            vec_q = V[:, q].copy()
            V[:, p] = c * vec_p - s * vec_q
            V[:, q] = s * vec_p + c * vec_q
        sweeps += 1
        off = _off_diagonal_norm(A)

    eigenvalues = np.diag(A).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return SpectralDecomposition(
        eigenvalues=eigenvalues[order], eigenvectors=V[:, order], sweeps=sweeps, off_norm=off,
    )


def numerical_rank(G: GramMatrix) -> int:
    return G.rank()


def gram_factor(G: GramMatrix) -> Tuple[np.ndarray, SpectralDecomposition]:
    """A = Lambda_r^{1/2} Q_r^T with A^T A = G on the numerical range."""
    spectrum = G.spectrum()
    r = spectrum.rank()
    lam = spectrum.eigenvalues[:r]
    return np.sqrt(lam)[:, None] * spectrum.eigenvectors[:, :r].T, spectrum


def g_extend(basis: np.ndarray, v: np.ndarray, G: GramMatrix) -> Optional[np.ndarray]:
    """Orthonormalize ``v`` against the columns of ``basis`` in the G inner product.

    Returns the new unit column, or None when v is dependent to 1e-10.
    """
    entries = G.entries
    v = np.array(v, dtype=float)
    norm_init = G.g_norm(v)
    if norm_init == 0.0:
        return None
    if basis.size:
        v -= basis @ (basis.T @ (entries @ v))
        # reorthogonalization if need
        if G.g_norm(v) < REORTHOGONALIZE_RATIO * norm_init:
            v -= basis @ (basis.T @ (entries @ v))
    norm = G.g_norm(v)
    if norm < RANK_RTOL * norm_init:
        return None
    return v / norm


def g_orthonormalize(vectors: np.ndarray, G: GramMatrix) -> np.ndarray:
    """Modified Gram-Schmidt in the G inner product, dropping dependent columns."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    if vectors.shape[1] < 1:
        raise InvalidParameterError("at least one vector is required")
    G.check_psd()

    basis = np.zeros((G.size, 0))
    for column in vectors.T:
        unit = g_extend(basis, column, G)
        if unit is not None:
            basis = np.column_stack([basis, unit])
    return basis


def _check_subspace(G: GramMatrix, B: Subspace) -> None:
    if B.gram is not G and not np.array_equal(B.gram.entries, G.entries):
        raise NotOrthonormalError("subspace was built against a different Gram matrix")


def all_residuals(G: GramMatrix, B: Subspace) -> np.ndarray:
    """Projection residual of every snapshot onto span(B)."""
    _check_subspace(G, B)
    squared = G.diagonal.copy()
    if B.dim:
        C = B.coeffs.T @ G.entries
        squared -= np.sum(C * C, axis=0)
    return np.sqrt(np.clip(squared, 0.0, None))


def projection_residual(G: GramMatrix, B: Subspace, k: int) -> float:
    """||x_k - P x_k||_G = sqrt(G_kk - sum_j (B^T G e_k)_j^2)."""
    _check_subspace(G, B)
    if not 0 <= k < G.size:
        raise InvalidParameterError(f"snapshot index {k} outside 0..{G.size - 1}")
    c = B.coeffs.T @ G.entries[:, k]
    return float(np.sqrt(max(G.entries[k, k] - float(c @ c), 0.0)))


def sup_residual(G: GramMatrix, B: Subspace) -> Tuple[float, int]:
    residuals = all_residuals(G, B)
    k = int(np.argmax(residuals))
    return float(residuals[k]), k


def pod_subspace(G: GramMatrix, N: int) -> Subspace:
    """Top-N eigenvectors of G, rescaled to be G-orthonormal."""
    spectrum = G.spectrum()
    rank = spectrum.rank()
    if N > rank:
        raise RankDeficiencyError(f"N={N} exceeds the numerical rank {rank}")
    lam = spectrum.eigenvalues[:N]
    return Subspace(coeffs=spectrum.eigenvectors[:, :N] / np.sqrt(lam), gram=G)


def weighted_gram(G: GramMatrix, weights: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.asarray(weights, dtype=float))
    return d[:, None] * G.entries * d[None, :]


def weighted_pod_subspace(G: GramMatrix, N: int, weights: np.ndarray,
                          initial: Optional[np.ndarray] = None) -> Tuple[Subspace, SpectralDecomposition]:
    """Minimizer of sum_i w_i r_i^2 over subspaces of dimension at most N.

    Columns are b_j = D^{1/2} v_j / sqrt(lambda_j) for the top eigenpairs of
    D^{1/2} G D^{1/2}; directions beyond the numerical rank are left out.
    """
    d = np.sqrt(np.asarray(weights, dtype=float))
    spectrum = symmetric_eig(d[:, None] * G.entries * d[None, :], initial=initial)
    n_eff = min(N, spectrum.rank())
    lam = spectrum.eigenvalues[:n_eff]
    coeffs = d[:, None] * spectrum.eigenvectors[:, :n_eff] / np.sqrt(lam)
    return Subspace(coeffs=coeffs, gram=G), spectrum


def subspace_from_coordinates(G: GramMatrix, U: np.ndarray) -> Subspace:
    """Map orthonormal columns in the coordinates of ``gram_factor`` back to snapshots."""
    spectrum = G.spectrum()
    r = spectrum.rank()
    U = np.asarray(U, dtype=float)
    if U.shape[0] != r:
        raise InvalidParameterError(f"coordinates have {U.shape[0]} rows, numerical rank is {r}")
    lam = spectrum.eigenvalues[:r]
    return Subspace(coeffs=spectrum.eigenvectors[:, :r] @ (U / np.sqrt(lam)[:, None]), gram=G)

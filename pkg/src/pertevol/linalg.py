"""Dense complex operator algebra.

Operators are plain ``numpy`` complex square arrays.  Everything here is pure:
inputs are never modified and results are fresh arrays.  The Frobenius norm is
the canonical operator distance used throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, HermiticityError

HERMITIAN_TOL = 1e-12
DEFAULT_CLUSTER_TOL = 1e-9


def as_operator(x) -> np.ndarray:
    """Return ``x`` as a finite complex square matrix."""
    a = np.asarray(x, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("operator has non-finite entries")
    return a


def fro(x) -> float:
    return float(np.linalg.norm(x))


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(x).T


def hermiticity_defect(x: np.ndarray) -> float:
    """Max-entry Hermiticity defect, relative to ``max(1, ||x||_F)``."""
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - dagger(x)))) / max(1.0, fro(x))


def is_hermitian(x: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_defect(x) <= tol


def require_hermitian(x: np.ndarray, tol: float = HERMITIAN_TOL, name: str = "operator") -> np.ndarray:
    x = as_operator(x)
    d = hermiticity_defect(x)
    if d > tol:
        raise HermiticityError(d, f"{name} is not Hermitian (defect {d:.3e} > {tol:.1e})")
    return x


def _check_same(x: np.ndarray, y: np.ndarray) -> None:
    if np.shape(x) != np.shape(y):
        raise DimensionError(f"dimension mismatch: {np.shape(x)} vs {np.shape(y)}")


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    _check_same(x, y)
    return x @ y - y @ x


def commutator_power(x: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Return ``ad_x^k y`` with ``ad_x y = [x, y]``; ``k = 0`` gives ``y``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    x = as_operator(x)
    y = as_operator(y)
    _check_same(x, y)
    out = y.copy()
    for _ in range(k):
        out = x @ out - out @ x
    return out


def hermitian_exponential(x: np.ndarray, s: float = 1.0, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``exp(-i s x)`` for Hermitian ``x`` via its eigendecomposition.

    The input is symmetrised before diagonalisation, so the result is unitary
    to roundoff.
    """
    x = require_hermitian(x, tol=tol)
    h = 0.5 * (x + dagger(x))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * s * w)) @ dagger(v)


def adjoint_conjugate(u: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return ``u y u^dagger`` (``Ad_u y`` for unitary ``u``)."""
    u = as_operator(u)
    y = as_operator(y)
    _check_same(u, y)
    return u @ y @ dagger(u)


def unitarity_defect(u: np.ndarray) -> float:
    """Frobenius norm of ``u^dagger u - I``."""
    u = as_operator(u)
    return fro(dagger(u) @ u - np.eye(u.shape[0]))


@dataclass(frozen=True)
class Cluster:
    energy: float
    projector: np.ndarray
    multiplicity: int


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues clustered into degenerate groups with orthogonal projectors."""

    clusters: tuple[Cluster, ...]
    tolerance: float

    @property
    def energies(self) -> np.ndarray:
        return np.array([c.energy for c in self.clusters])

    @property
    def projectors(self) -> list[np.ndarray]:
        return [c.projector for c in self.clusters]

    @property
    def multiplicities(self) -> list[int]:
        return [c.multiplicity for c in self.clusters]

    @property
    def dim(self) -> int:
        return self.clusters[0].projector.shape[0]

    def __len__(self) -> int:
        return len(self.clusters)

    def reconstruct(self) -> np.ndarray:
        return sum(c.energy * c.projector for c in self.clusters)

    def min_gap(self) -> float:
        e = self.energies
        if len(e) < 2:
            return np.inf
        return float(np.min(np.diff(e)))


def spectral_decompose(h: np.ndarray, rel_tol: float = DEFAULT_CLUSTER_TOL) -> Spectrum:
    """Cluster the eigenvalues of Hermitian ``h``.

    Sorted eigenvalues are chained into one cluster while consecutive gaps are
    at most ``rel_tol * max(1, spectral range)``.  Each cluster's energy is the
    mean of its members.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    h = require_hermitian(h)
    w, v = np.linalg.eigh(0.5 * (h + dagger(h)))
    tol = rel_tol * max(1.0, float(w[-1] - w[0]))
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    clusters = []
    for g in groups:
        vecs = v[:, g]
        clusters.append(Cluster(float(np.mean(w[g])), vecs @ dagger(vecs), len(g)))
    return Spectrum(tuple(clusters), tol)


def nested_ad_sums(
    chain: Sequence,
    x,
    n: int,
    bracket: Callable = commutator,
) -> list:
    """Sums of nested adjoint actions over integer compositions of ``n``.

    Returns ``[S_1, ..., S_n]`` where

        S_m = sum over k_1 + ... + k_m = n of ad_{chain[k_1]} ... ad_{chain[k_m]} x

    with ``chain`` indexed from 1 (``chain[k-1]`` holds the order-``k`` entry).
    Entries of ``chain`` may be ``None`` to denote zero.  Inner sums over the
    remaining order are shared between compositions with a common prefix, so
    each partial chain is evaluated once.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(chain) < n:
        raise ValueError(f"chain holds {len(chain)} entries, order {n} requested")
    # table[m][j]: sum over compositions of j into m parts (None = zero)
    table = [[None] * (n + 1) for _ in range(n + 1)]
    for j in range(1, n + 1):
        z = chain[j - 1]
        table[1][j] = None if z is None else bracket(z, x)
    for m in range(2, n + 1):
        for j in range(m, n + 1):
            acc = None
            for k in range(1, j - m + 2):
                z = chain[k - 1]
                inner = table[m - 1][j - k]
                if z is None or inner is None:
                    continue
                term = bracket(z, inner)
                acc = term if acc is None else acc + term
            table[m][j] = acc
    return [table[m][n] for m in range(1, n + 1)]

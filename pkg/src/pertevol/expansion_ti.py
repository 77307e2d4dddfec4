"""Time-independent engine.

For ``H(lam) = H0 + sum_n lam^n H_n`` the evolution operator is written as

    U(lam; t) = exp(-i Z(lam)) exp(-i (H0 + C(lam)) t) exp(i Z(lam)),   [C, H0] = 0,

and ``C_n``, ``Z_n`` are obtained order by order from the eigenprojectors of
``H0``.  Every truncation is a one-parameter unitary group.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import DimensionError, GaugeError, OrderError, SmallDivisorError

MAX_TI_ORDER = 6
SMALL_DIVISOR_FACTOR = 1e3


@dataclass(frozen=True)
class TISolution:
    order: int
    H0: np.ndarray
    spectrum: la.Spectrum
    C_list: tuple
    Z_list: tuple
    gauge: tuple
    min_divisor: float

    def C(self, lam: float, order: int | None = None) -> np.ndarray:
        n_max = self.order if order is None else order
        return sum((lam ** (n + 1)) * c for n, c in enumerate(self.C_list[:n_max]))

    def Z(self, lam: float, order: int | None = None) -> np.ndarray:
        n_max = self.order if order is None else order
        return sum((lam ** (n + 1)) * z for n, z in enumerate(self.Z_list[:n_max]))

    @property
    def is_minimal(self) -> bool:
        return all(not np.any(g) for g in self.gauge)


def block_split(x: np.ndarray, spec: la.Spectrum) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``x`` relative to the eigenprojectors of ``H0``.

    Returns ``(diag, offdiag, sylvester)`` with

        diag      = sum_m P_m x P_m
        offdiag   = x - diag
        sylvester = i sum_{j != l} (E_l - E_j)^{-1} P_j x P_l

    so that ``-i [sylvester, H0] = offdiag``.
    """
    x = la.as_operator(x)
    if x.shape[0] != spec.dim:
        raise DimensionError(f"operator dim {x.shape[0]} vs spectrum dim {spec.dim}")
    ps = spec.projectors
    es = spec.energies
    blocks = [[pj @ x @ pl for pl in ps] for pj in ps]
    diag = sum(blocks[m][m] for m in range(len(ps)))
    syl = np.zeros_like(x)
    for j in range(len(ps)):
        for l in range(len(ps)):
            if j != l:
                syl += blocks[j][l] / (es[l] - es[j])
    return diag, x - diag, 1j * syl


def g_script(x: np.ndarray, z_chain: Sequence[np.ndarray], n: int, skip_single: bool = False) -> np.ndarray:
    """``sum_m (i^m / m!) sum_{k_1+..+k_m = n} ad_{Z_k1} ... ad_{Z_km} x``.

    With ``skip_single`` the ``m = 1`` term (``i [Z_n, x]``) is left out.
    """
    if n > len(z_chain):
        raise OrderError(f"order {n} needs Z_1..Z_{n}, only {len(z_chain)} given")
    sums = la.nested_ad_sums(list(z_chain[:n]), x, n)
    out = np.zeros_like(la.as_operator(x))
    for m, s in enumerate(sums, start=1):
        if s is None or (skip_single and m == 1):
            continue
        out = out + (1j ** m / math.factorial(m)) * s
    return out


def g_big(h_list: Sequence[np.ndarray], z_chain: Sequence[np.ndarray], n: int) -> np.ndarray:
    """Right-hand side of ``C_n - i [Z_n, H0] = G_n``.

    ``h_list`` holds ``H0..H_n`` and ``z_chain`` holds ``Z_1..Z_{n-1}``; the
    result does not depend on ``Z_n``.
    """
    if n < 1:
        raise OrderError("n must be >= 1")
    if len(h_list) < n + 1:
        raise DimensionError(f"need H0..H{n}, got {len(h_list)} operators")
    if len(z_chain) < n - 1:
        raise DimensionError(f"need Z1..Z{n - 1}, got {len(z_chain)} operators")
    # Z_n enters only through i[Z_n, H0], which is excluded; pad with None.
    chain = list(z_chain[: n - 1]) + [None]
    out = la.as_operator(h_list[n]).copy()
    out = out + g_script(h_list[0], chain, n, skip_single=True)
    for m in range(1, n):
        out = out + g_script(h_list[m], chain, n - m)
    return out


def solve_ti(
    H0: np.ndarray,
    h_list: Sequence[np.ndarray],
    order: int,
    gauge: Sequence[np.ndarray | None] | None = None,
    rel_tol: float = la.DEFAULT_CLUSTER_TOL,
) -> TISolution:
    """Order-by-order solution ``C_n = floor(G_n)``, ``Z_n = gauge_n + sylvester(G_n)``.

    ``h_list`` holds ``H_1, H_2, ...`` (missing orders are zero).  The default
    gauge (all zero) is the minimal solution.
    """
    if order < 1 or order > MAX_TI_ORDER:
        raise OrderError(f"order must be in 1..{MAX_TI_ORDER}, got {order}")
    H0 = la.require_hermitian(H0, tol=1e-10, name="H0")
    dim = H0.shape[0]
    hs = [H0]
    for n in range(order):
        if n < len(h_list) and h_list[n] is not None:
            hn = la.require_hermitian(h_list[n], tol=1e-10, name=f"H{n + 1}")
            if hn.shape != H0.shape:
                raise DimensionError(f"H{n + 1} has shape {hn.shape}, H0 has {H0.shape}")
        else:
            hn = np.zeros((dim, dim), complex)
        hs.append(hn)

    spec = la.spectral_decompose(H0, rel_tol=rel_tol)
    min_div = spec.min_gap()
    if min_div < SMALL_DIVISOR_FACTOR * spec.tolerance:
        raise SmallDivisorError(
            f"smallest energy denominator {min_div:.3e} is below "
            f"{SMALL_DIVISOR_FACTOR:g} x clustering tolerance {spec.tolerance:.3e}")

    gauges = []
    for n in range(order):
        g = None if gauge is None or n >= len(gauge) else gauge[n]
        if g is None:
            g = np.zeros((dim, dim), complex)
        else:
            g = la.require_hermitian(g, tol=1e-10, name=f"gauge_{n + 1}")
            defect = la.fro(la.commutator(g, H0))
            if defect > 1e-10 * max(1.0, la.fro(g) * la.fro(H0)):
                raise GaugeError(f"gauge_{n + 1} does not commute with H0 (defect {defect:.3e})")
        gauges.append(g)

    C_list, Z_list = [], []
    for n in range(1, order + 1):
        G = g_big(hs, Z_list, n)
        diag, _, syl = block_split(G, spec)
        C_list.append(0.5 * (diag + la.dagger(diag)))
        z = gauges[n - 1] + syl
        Z_list.append(0.5 * (z + la.dagger(z)))
    return TISolution(order, H0, spec, tuple(C_list), tuple(Z_list), tuple(gauges), min_div)


def evolution_ti(sol: TISolution, lam: float, t: float) -> np.ndarray:
    """``exp(-i Z_[N]) exp(-i (H0 + C_[N]) t) exp(i Z_[N])``."""
    z = sol.Z(lam)
    w = la.hermitian_exponential(z, 1.0, tol=1e-10)
    core = la.hermitian_exponential(sol.H0 + sol.C(lam), t, tol=1e-10)
    return w @ core @ la.dagger(w)


def reduced_rank_form(sol: TISolution, lam: float, t: float) -> np.ndarray:
    """Same propagator assembled cluster by cluster from ``P_m C P_m``."""
    c = sol.C(lam)
    w = la.hermitian_exponential(sol.Z(lam), 1.0, tol=1e-10)
    core = np.zeros_like(c)
    for cl in sol.spectrum.clusters:
        p = cl.projector
        cm = p @ c @ p
        core += np.exp(-1j * cl.energy * t) * (la.hermitian_exponential(cm, t, tol=1e-10) @ p)
    return w @ core @ la.dagger(w)


def block_diag_residual(sol: TISolution, H0: np.ndarray, h_list: Sequence[np.ndarray], lam: float) -> float:
    """``|| offdiag( exp(iZ) H(lam) exp(-iZ) ) ||_F`` for the truncated ``Z``."""
    h = la.as_operator(H0).copy()
    for n, hn in enumerate(h_list, start=1):
        if hn is not None:
            h = h + (lam ** n) * hn
    w = la.hermitian_exponential(sol.Z(lam), -1.0, tol=1e-10)
    _, off, _ = block_split(la.adjoint_conjugate(w, h), sol.spectrum)
    return la.fro(off)


def recursion_residual(sol: TISolution, h_list: Sequence[np.ndarray]) -> list[float]:
    """Per-order ``|| C_n - i[Z_n, H0] - G_n ||_F``."""
    hs = [sol.H0] + [
        (h_list[n] if n < len(h_list) and h_list[n] is not None else np.zeros_like(sol.H0))
        for n in range(sol.order)
    ]
    out = []
    for n in range(1, sol.order + 1):
        G = g_big(hs, sol.Z_list[: n - 1], n)
        r = sol.C_list[n - 1] - 1j * la.commutator(sol.Z_list[n - 1], sol.H0) - G
        out.append(la.fro(r))
    return out

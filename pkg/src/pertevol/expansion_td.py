"""Time-dependent engine.

The interaction-picture evolution operator is decomposed as

    T(lam; t) = exp(-i Z(lam; t)) exp(-i int_0^t C(lam; s) ds) exp(i Z(lam; 0))

with ``Z``, ``C`` expanded in powers of ``lam``.  Perturbative coefficients of
the interaction-picture Hamiltonian are trigonometric polynomials, and the
recursion is carried out exactly in that algebra.

Supported solution classes:

``mean-constants``
    ``C_n`` constant and equal to the mean of the order-``n`` source;
    ``Z_n(t)`` the zero-mean primitive of the remainder.
``general``
    constant ``C_n`` as above but user-chosen gauge constants ``Z_n(0)``.
``floquet-magnus``
    the ``general`` class with every gauge constant set to zero.
``magnus``
    ``Z = 0``; ``C`` is recovered from ``H~`` and grows polynomially in ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import ClosureError, DimensionError, GaugeError, OrderError
from .trigpoly import (
    TrigPoly,
    commutator_poly,
    derivative,
    mean_and_essential_primitive,
    primitive,
)

MAX_TD_ORDER = 4
MAX_MAGNUS_ORDER = 3

MODES = ("mean-constants", "general", "floquet-magnus", "magnus")


@dataclass(frozen=True)
class TDSolution:
    order: int
    mode: str
    bases: tuple
    dim: int
    C_list: tuple      # TrigPoly per order
    Z_list: tuple      # TrigPoly per order
    Z0_list: tuple     # Z_n(0) as ndarray
    frak_list: tuple   # TrigPoly per order
    C_int_list: tuple  # int_0^t C_n as TrigPoly
    source_list: tuple  # the order-n source G_n (TrigPoly)

    def Z_at(self, lam: float, t: float) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), complex)
        for n, z in enumerate(self.Z_list, start=1):
            out += lam ** n * z(t)
        return out

    def Z0(self, lam: float) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), complex)
        for n, z in enumerate(self.Z0_list, start=1):
            out += lam ** n * z
        return out

    def C_integral(self, lam: float, t: float) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), complex)
        for n, c in enumerate(self.C_int_list, start=1):
            out += lam ** n * c(t)
        return out

    def C_constant(self, lam: float) -> np.ndarray:
        """``C_[N](lam)`` for the constant-C classes."""
        if self.mode == "magnus":
            raise ClosureError("magnus-mode C is time dependent")
        out = np.zeros((self.dim, self.dim), complex)
        for n, c in enumerate(self.C_list, start=1):
            out += lam ** n * c(0.0)
        return out


def _pad_chain(h_chain: Sequence[TrigPoly], n: int) -> list[TrigPoly]:
    if not h_chain:
        raise ValueError("at least H~_1 is required")
    ref = h_chain[0]
    out = []
    for k in range(n):
        if k < len(h_chain) and h_chain[k] is not None:
            ref._compat(h_chain[k])
            out.append(h_chain[k])
        else:
            out.append(TrigPoly.zero(ref.bases, ref.dim))
    return out


def _nested(chain: Sequence[TrigPoly], x: TrigPoly, n: int) -> list:
    chain = [None if (z is None or z.is_empty) else z for z in chain]
    return la.nested_ad_sums(chain, x, n, bracket=commutator_poly)


def g_breve_script(x: TrigPoly, y: TrigPoly, z_chain: Sequence[TrigPoly], n: int) -> TrigPoly:
    """``sum_m (i^m/m!) sum_{k_1+..+k_m=n} ad_{Z_k1}..ad_{Z_km} (x - y/(m+1))``."""
    sx = _nested(z_chain, x, n)
    sy = _nested(z_chain, y, n)
    out = TrigPoly.zero(x.bases, x.dim)
    for m in range(1, n + 1):
        c = 1j ** m / math.factorial(m)
        if sx[m - 1] is not None:
            out = out + sx[m - 1].scale(c)
        if sy[m - 1] is not None:
            out = out + sy[m - 1].scale(-c / (m + 1))
    return out


def g_breve(
    h_chain: Sequence[TrigPoly],
    z_chain: Sequence[TrigPoly],
    n: int,
    zdot_chain: Sequence[TrigPoly] | None = None,
) -> TrigPoly:
    """Order-``n`` source: ``sum_{m<n} G~_{n-m}(H~_m, Z'_m; Z) + H~_n``.

    ``h_chain`` holds ``H~_1..H~_n`` (missing entries are zero) and
    ``z_chain`` holds ``Z_1..Z_{n-1}``.  Time derivatives are taken exactly
    unless supplied.
    """
    if n < 1:
        raise OrderError("n must be >= 1")
    hs = _pad_chain(h_chain, n)
    if len(z_chain) < n - 1:
        raise DimensionError(f"need Z_1..Z_{n - 1}, got {len(z_chain)}")
    zs = list(z_chain[: n - 1])
    zds = list(zdot_chain[: n - 1]) if zdot_chain is not None else [derivative(z) for z in zs]
    out = hs[n - 1]
    for m in range(1, n):
        out = out + g_breve_script(hs[m - 1], zds[m - 1], zs, n - m)
    return out


def _r_script(x: TrigPoly, y_chain: Sequence[TrigPoly], n: int) -> TrigPoly:
    sums = _nested(y_chain, x, n)
    out = TrigPoly.zero(x.bases, x.dim)
    for m, s in enumerate(sums, start=1):
        if s is not None:
            out = out + s.scale(-((-1j) ** m) / math.factorial(m + 1))
    return out


def _r_big(c_chain: Sequence[TrigPoly], c_int_chain: Sequence[TrigPoly], n: int) -> TrigPoly:
    out = TrigPoly.zero(c_chain[0].bases, c_chain[0].dim)
    for m in range(1, n):
        out = out + _r_script(c_chain[m - 1], c_int_chain, n - m)
    return out


def frak_to_c(frak_chain: Sequence[TrigPoly], max_power: int | None = None) -> list[TrigPoly]:
    """Recover ``C_1..C_n`` from the transformed-Hamiltonian coefficients."""
    kw = {} if max_power is None else {"max_power": max_power}
    cs, ints = [], []
    for n, frak in enumerate(frak_chain, start=1):
        c = frak if n == 1 else _r_big(cs, ints, n) + frak
        cs.append(c)
        ints.append(primitive(c, **kw))
    return cs


def c_to_frak(c_chain: Sequence[TrigPoly], max_power: int | None = None) -> list[TrigPoly]:
    """``frak_n = C_n - R_n(C_1..C_{n-1}; int C_1..int C_{n-1})`` for every order."""
    kw = {} if max_power is None else {"max_power": max_power}
    ints = [primitive(c, **kw) for c in c_chain]
    out = []
    for n, c in enumerate(c_chain, start=1):
        out.append(c if n == 1 else c - _r_big(list(c_chain), ints, n))
    return out


def _check_order(order: int, cap: int) -> None:
    if order < 1 or order > cap:
        raise OrderError(f"order must be in 1..{cap}, got {order}")


def _solve_constant_class(h_chain, order, gauge, c_choice, mode) -> TDSolution:
    _check_order(order, MAX_TD_ORDER)
    hs = _pad_chain(h_chain, order)
    bases, dim = hs[0].bases, hs[0].dim
    C, Z, Z0, ints, sources = [], [], [], [], []
    for n in range(1, order + 1):
        g = g_breve(hs, Z, n)
        m, esp = mean_and_essential_primitive(g)
        if c_choice is not None:
            want = np.asarray(c_choice[n - 1], dtype=complex)
            gap = la.fro(want - m)
            if gap > 1e-10 * max(1.0, g.max_norm()):
                raise ClosureError(
                    f"C_{n} differs from the mean of its source by {gap:.3e}; "
                    "Z_n would grow linearly in time")
            m = want
        if gauge is None:
            shift = -esp.coefficient((0,) * len(bases))  # makes <Z_n> = 0
        else:
            shift = gauge[n - 1]
        zn = esp + TrigPoly.constant(bases, shift)
        cn = TrigPoly.constant(bases, m)
        C.append(cn)
        Z.append(zn)
        Z0.append(zn(0.0))
        ints.append(primitive(cn))
        sources.append(g)
    return TDSolution(order, mode, bases, dim, tuple(C), tuple(Z), tuple(Z0), tuple(C),
                      tuple(ints), tuple(sources))


def solve_td_mean(h_chain: Sequence[TrigPoly], order: int) -> TDSolution:
    """Mean-constant solution: ``C_n = <G_n>``, ``Z_n = esp(G_n) - <esp(G_n)>``.

    ``Z_n(0)`` are the long-time-average constants; ``<Z_n> = 0``.
    """
    return _solve_constant_class(h_chain, order, None, None, "mean-constants")


def solve_td_gauged(
    h_chain: Sequence[TrigPoly],
    order: int,
    gauge: Sequence[np.ndarray | None] | None = None,
    c_choice: str | Sequence[np.ndarray] = "mean",
) -> TDSolution:
    """Constant-C solution with arbitrary gauge constants ``Z_n(0) = gauge_n``.

    All-zero gauges give the Floquet-Magnus solution.  ``c_choice`` is
    ``"mean"`` or an explicit list of constants, which must equal the source
    means (any other constant breaks closure of the algebra).
    """
    _check_order(order, MAX_TD_ORDER)
    hs = _pad_chain(h_chain, order)
    dim = hs[0].dim
    gs = []
    for n in range(order):
        g = None if gauge is None or n >= len(gauge) else gauge[n]
        if g is None:
            g = np.zeros((dim, dim), complex)
        else:
            g = la.as_operator(g)
            if g.shape != (dim, dim):
                raise DimensionError(f"gauge_{n + 1} has shape {g.shape}")
            if not la.is_hermitian(g, 1e-10):
                raise GaugeError(f"gauge_{n + 1} is not Hermitian")
        gs.append(g)
    mode = "floquet-magnus" if all(not np.any(g) for g in gs) else "general"
    cc = None if isinstance(c_choice, str) else list(c_choice)
    if isinstance(c_choice, str) and c_choice != "mean":
        raise ValueError(f"unknown c_choice {c_choice!r}")
    return _solve_constant_class(hs, order, gs, cc, mode)


def magnus_mode(h_chain: Sequence[TrigPoly], order: int) -> TDSolution:
    """``Z = 0``: ``exp(-i int_0^t C_[N])`` is the order-``N`` Magnus propagator."""
    _check_order(order, MAX_MAGNUS_ORDER)
    hs = _pad_chain(h_chain, order)
    bases, dim = hs[0].bases, hs[0].dim
    cs = frak_to_c(hs)
    ints = tuple(primitive(c) for c in cs)
    zero = TrigPoly.zero(bases, dim)
    z0 = np.zeros((dim, dim), complex)
    return TDSolution(order, "magnus", bases, dim, tuple(cs), (zero,) * order, (z0,) * order,
                      tuple(hs), ints, tuple(hs))


def evolution_td(sol: TDSolution, lam: float, t: float, U0: np.ndarray | None = None) -> np.ndarray:
    """``U0 exp(-i Z_[N](lam;t)) exp(-i int_0^t C_[N]) exp(i Z_[N](lam;0))``.

    With ``U0`` omitted the interaction-picture factor ``T`` is returned.
    """
    a = la.hermitian_exponential(sol.Z_at(lam, t), 1.0, tol=1e-10)
    b = la.hermitian_exponential(sol.C_integral(lam, t), 1.0, tol=1e-10)
    c = la.hermitian_exponential(sol.Z0(lam), -1.0, tol=1e-10)
    out = a @ b @ c
    return out if U0 is None else la.as_operator(U0) @ out


def ode_residual(sol: TDSolution, h_chain: Sequence[TrigPoly], times: Sequence[float]) -> list[float]:
    """Per-order ``max_t || Z_n'(t) + frak_n(t) - G_n(t) ||_F`` with fresh sources."""
    hs = _pad_chain(h_chain, sol.order)
    out = []
    for n in range(1, sol.order + 1):
        g = g_breve(hs, sol.Z_list[: n - 1], n)
        r = derivative(sol.Z_list[n - 1]) + sol.frak_list[n - 1] - g
        out.append(max(la.fro(r(t)) for t in times))
    return out


def _series_ad(z: list, s: list, order: int) -> list:
    """Truncated product of lam-series: ``[z, s]`` up to ``lam^order``."""
    out = [np.zeros_like(s[0]) for _ in range(order + 1)]
    for a in range(1, order + 1):
        if not np.any(z[a]):
            continue
        for b in range(0, order + 1 - a):
            out[a + b] += z[a] @ s[b] - s[b] @ z[a]
    return out


def verify_effective_hamiltonian(
    sol: TDSolution,
    lam: float,
    h_chain: Sequence[TrigPoly],
    t_samples: Sequence[float],
) -> float:
    """Check ``frak = exp(iZ) H~ exp(-iZ) - z_R`` order by order at sample times.

    Both sides are expanded as lam-series of matrices at each sample time
    (independently of the recursion's composition sums) and truncated at the
    solution order.  Returns ``max_t || sum_n lam^n (frak_n - rhs_n) ||_F``.
    """
    N = sol.order
    hs = _pad_chain(h_chain, N)
    worst = 0.0
    for t in t_samples:
        zero = np.zeros((sol.dim, sol.dim), complex)
        z = [zero] + [sol.Z_list[n](t) for n in range(N)]
        zd = [zero] + [derivative(sol.Z_list[n])(t) for n in range(N)]
        h = [zero] + [hs[n](t) for n in range(N)]
        # exp(i ad_Z) H~
        term = list(h)
        lhs = list(h)
        for k in range(1, N + 1):
            term = [(1j / k) * x for x in _series_ad(z, term, N)]
            lhs = [a + b for a, b in zip(lhs, term)]
        # z_R = sum_k i^k/(k+1)! ad_Z^k Z'
        term = list(zd)
        zr = list(zd)
        for k in range(1, N + 1):
            term = [(1j / k) * x for x in _series_ad(z, term, N)]
            zr = [a + b / (k + 1) for a, b in zip(zr, term)]
        resid = zero.copy()
        for n in range(1, N + 1):
            resid += lam ** n * (sol.frak_list[n - 1](t) - (lhs[n] - zr[n]))
        worst = max(worst, la.fro(resid))
    return worst


def is_periodic_in_algebra(poly: TrigPoly) -> bool:
    """True when every term is an ordinary harmonic of a single base frequency."""
    return len(poly.bases) == 1 and poly.is_trig

"""Reference propagators and error-scaling fits.

The Schrodinger integrator is scipy's embedded Dormand-Prince 5(4) scheme on
the flattened complex matrix ODE ``i U' = H(t) U``.  No re-unitarisation is
applied; the unitarity defect of every returned matrix is reported.

Dyson and low-order Magnus terms use closed-form scalar double integrals over
pairs of frequencies, so they do not share code with the engine's primitive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import linalg as la
from .errors import IntegrationError, OrderError
from .trigpoly import TrigPoly

MIN_REL_TOL = 1e-13
MAX_REL_TOL = 1e-6


@dataclass(frozen=True)
class PropagatorTrace:
    times: np.ndarray
    U_values: np.ndarray
    tolerance: float
    unitarity_defects: np.ndarray
    n_steps: int = 0

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise KeyError(f"time {t} not on the trace grid")
        return self.U_values[i]

    @property
    def final(self) -> np.ndarray:
        return self.U_values[-1]


def _hamiltonian_fn(H) -> tuple[Callable[[float], np.ndarray], int]:
    if isinstance(H, TrigPoly):
        if not H.is_trig:
            raise ValueError("Hamiltonian polynomial must not grow in t")
        omegas, _, coeffs = H.stacked()
        if len(omegas) == 0:
            return (lambda t: np.zeros((H.dim, H.dim), complex)), H.dim
        return (lambda t: np.tensordot(np.exp(1j * omegas * t), coeffs, axes=1)), H.dim
    if callable(H):
        h0 = la.as_operator(H(0.0))
        return (lambda t: np.asarray(H(t), dtype=complex)), h0.shape[0]
    h = la.as_operator(H)
    return (lambda t: h), h.shape[0]


def integrate_schrodinger(
    H_of_t,
    t_end: float,
    rel_tol: float = 1e-10,
    t_eval: Sequence[float] | None = None,
    U_init: np.ndarray | None = None,
) -> PropagatorTrace:
    """Solve ``i dU/dt = H(t) U`` with ``U(0) = I`` (or ``U_init``).

    ``H_of_t`` is a :class:`TrigPoly`, a constant matrix or a callable.  The
    absolute tolerance is ``rel_tol`` times ``1e-2``.  Values are returned on
    ``t_eval`` (default: ``[0, t_end]``).
    """
    if not (MIN_REL_TOL <= rel_tol <= MAX_REL_TOL):
        raise ValueError(f"rel_tol must lie in [{MIN_REL_TOL:g}, {MAX_REL_TOL:g}]")
    h, dim = _hamiltonian_fn(H_of_t)
    u0 = np.eye(dim, dtype=complex) if U_init is None else la.as_operator(U_init).copy()
    times = np.array([0.0, t_end] if t_eval is None else sorted(set(float(x) for x in t_eval)))
    if times[0] < 0 or times[-1] > t_end + 1e-15:
        raise ValueError("t_eval must lie in [0, t_end]")
    if t_end == 0:
        return PropagatorTrace(times, np.array([u0] * len(times)), rel_tol,
                               np.array([la.unitarity_defect(u0)] * len(times)), 0)

    def rhs(t, y):
        u = y.reshape(dim, dim)
        return (-1j * (h(t) @ u)).ravel()

    sol = solve_ivp(rhs, (0.0, t_end), u0.ravel(), method="RK45", t_eval=times,
                    rtol=rel_tol, atol=rel_tol * 1e-2)
    if not sol.success:
        raise IntegrationError(f"integration failed: {sol.message}")
    us = np.moveaxis(sol.y, -1, 0).reshape(len(times), dim, dim)
    defects = np.array([la.unitarity_defect(u) for u in us])
    return PropagatorTrace(times, us, rel_tol, defects, int(sol.nfev))


def interaction_oracle(h_tilde: TrigPoly, lam: float, t: float, rel_tol: float = 1e-11,
                       t_eval: Sequence[float] | None = None) -> PropagatorTrace:
    """Reference ``T(lam; t)`` for ``H~ = lam * h_tilde``."""
    return integrate_schrodinger(h_tilde.scale(lam), t, rel_tol, t_eval=t_eval)


# -- scalar double integrals ---------------------------------------------
SERIES_SWITCH = 0.1


def _e(c: float, t: float) -> complex:
    """``int_0^t exp(i c s) ds``."""
    x = 1j * c * t
    if abs(x) < 1e-4:
        # complex division by a subnormal c gives nan; the series is exact here
        return complex(t * (1 + x / 2 + x * x / 6 + x ** 3 / 24))
    return complex(np.expm1(x) / (1j * c))


def nested_exp_integral(a: float, b: float, t: float) -> complex:
    """``int_0^t dt1 int_0^t1 dt2 exp(i a t1) exp(i b t2)`` in closed form.

    The divided difference in ``b`` is used when ``|b| t`` is not small; else
    the triangle is swapped (the two orderings sum to ``E(a) E(b)``); when both
    frequencies are small a double Taylor series is summed.
    """
    if abs(b) * t >= SERIES_SWITCH:
        return (_e(a + b, t) - _e(a, t)) / (1j * b)
    if abs(a) * t >= SERIES_SWITCH:
        return _e(a, t) * _e(b, t) - (_e(a + b, t) - _e(b, t)) / (1j * a)
    # int t1^j t2^k over the triangle = t^{j+k+2} / ((k+1)(j+k+2))
    out = 0j
    ia, ib = 1j * a * t, 1j * b * t
    for j in range(20):
        for k in range(20 - j):
            out += ia ** j * ib ** k / (math.factorial(j) * math.factorial(k) * (k + 1) * (j + k + 2))
    return out * t * t


def _terms(h: TrigPoly):
    if not h.is_trig:
        raise ValueError("expected an ordinary trig polynomial")
    return [(h.frequency_value(f), a) for (f, _), a in h.items()]


def single_integral(h: TrigPoly, t: float) -> np.ndarray:
    out = np.zeros((h.dim, h.dim), complex)
    for w, a in _terms(h):
        out += _e(w, t) * a
    return out


def ordered_double_integral(h1: TrigPoly, h2: TrigPoly, t: float, bracket: bool = False) -> np.ndarray:
    """``int_0^t dt1 int_0^t1 dt2 h1(t1) h2(t2)`` (or the commutator)."""
    out = np.zeros((h1.dim, h1.dim), complex)
    t2 = _terms(h2)
    for w1, a in _terms(h1):
        for w2, b in t2:
            prod = a @ b - b @ a if bracket else a @ b
            out += nested_exp_integral(w1, w2, t) * prod
    return out


def dyson_truncation(h_chain: Sequence[TrigPoly] | TrigPoly, lam: float, N: int, t: float) -> np.ndarray:
    """Truncated time-ordered series for ``T(lam; t)``.

    ``h_chain`` holds ``H~_1`` (and optionally ``H~_2``).  Order 2 includes
    the ``lam^2 int H~_2`` term when present.
    """
    if N not in (1, 2):
        raise OrderError(f"Dyson truncation supports N in (1, 2), got {N}")
    if isinstance(h_chain, TrigPoly):
        h_chain = [h_chain]
    h1 = h_chain[0]
    out = np.eye(h1.dim, dtype=complex) - 1j * lam * single_integral(h1, t)
    if N == 2:
        out = out - lam ** 2 * ordered_double_integral(h1, h1, t)
        if len(h_chain) > 1 and h_chain[1] is not None:
            out = out - 1j * lam ** 2 * single_integral(h_chain[1], t)
    return out


def magnus_analytic_low(h_tilde: TrigPoly, t: float) -> tuple[np.ndarray, np.ndarray]:
    """First two Magnus exponents (per unit ``lam`` and ``lam^2``).

    ``Omega1 = -i int_0^t H``, ``Omega2 = -1/2 int_0^t dt1 int_0^t1 dt2 [H(t1), H(t2)]``,
    so that ``exp(lam Omega1 + lam^2 Omega2)`` is the order-2 Magnus propagator.
    """
    om1 = -1j * single_integral(h_tilde, t)
    om2 = -0.5 * ordered_double_integral(h_tilde, h_tilde, t, bracket=True)
    return om1, om2


def error_scaling_fit(lambdas: Sequence[float], errors: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of ``log(error)`` against ``log(lam)`` and its ``r^2``."""
    x = np.asarray(lambdas, dtype=float)
    y = np.asarray(errors, dtype=float)
    if x.shape != y.shape or x.size < 4:
        raise ValueError("need at least 4 (lambda, error) pairs")
    if np.any(x <= 0):
        raise ValueError("lambdas must be positive")
    if np.any(~(y > 0)):
        raise ValueError("errors must be positive")
    lx, ly = np.log(x), np.log(y)
    slope, icept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2

import math
import time

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from pertevol import linalg as la
from pertevol import oracle
from pertevol.errors import OrderError
from pertevol.trigpoly import TrigPoly

from conftest import random_hermitian

SP = np.array([[0, 1], [0, 0]], complex)
SM = SP.T.copy()
SZ = np.diag([1.0, -1.0]).astype(complex)
NODES, WEIGHTS = np.polynomial.legendre.leggauss(32)


def _mul(x, y):
    return x @ y if np.ndim(x) == 2 else x * y


def gl_double(fa, fb, t, pieces=16):
    """int_0^t dt1 int_0^t1 dt2 fa(t1) fb(t2) by nested Gauss-Legendre."""
    def inner(t1):
        edges = np.linspace(0, t1, pieces + 1)
        acc = 0
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            acc = acc + half * sum(w * fb(mid + half * x) for x, w in zip(NODES, WEIGHTS))
        return acc
    edges = np.linspace(0, t, pieces + 1)
    out = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        out = out + half * sum(w * _mul(fa(mid + half * x), inner(mid + half * x)) for x, w in zip(NODES, WEIGHTS))
    return out


def test_zero_hamiltonian():
    tr = oracle.integrate_schrodinger(np.zeros((3, 3)), 2.0, 1e-10)
    assert np.allclose(tr.final, np.eye(3))
    assert np.allclose(tr.U_values[0], np.eye(3))


def test_constant_hamiltonian_vs_exponential():
    h = random_hermitian(np.random.default_rng(0), 4)
    tr = oracle.integrate_schrodinger(h, 3.0, 1e-10, t_eval=[0.0, 1.0, 3.0])
    for t in (1.0, 3.0):
        assert la.fro(tr.at(t) - la.hermitian_exponential(h, t)) < 1e-9
    assert np.all(tr.unitarity_defects < 1e-8)


def test_tolerance_range():
    with pytest.raises(ValueError):
        oracle.integrate_schrodinger(np.eye(2), 1.0, 1e-14)
    with pytest.raises(ValueError):
        oracle.integrate_schrodinger(np.eye(2), 1.0, 1e-5)


def test_convergence_monotone():
    h = random_hermitian(np.random.default_rng(1), 4)
    exact = la.hermitian_exponential(h, 5.0)
    errs = [la.fro(oracle.integrate_schrodinger(h, 5.0, tol).final - exact) for tol in (1e-7, 1e-9, 1e-11)]
    assert errs[0] > errs[1] > errs[2]


def test_ion_trap_runtime(trap_chain, period):
    start = time.perf_counter()
    oracle.interaction_oracle(trap_chain[0], 0.05, 3 * period, 1e-10)
    assert time.perf_counter() - start < 10


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=-3, max_value=3),
       st.floats(min_value=0.1, max_value=4))
def test_nested_exp_integral_vs_quadrature(a, b, t):
    fa = lambda s: np.exp(1j * a * s)
    fb = lambda s: np.exp(1j * b * s)
    ref = gl_double(fa, fb, t, pieces=4)
    assert abs(oracle.nested_exp_integral(a, b, t) - ref) < 1e-10


@given(st.floats(min_value=-1e-6, max_value=1e-6), st.floats(min_value=-3, max_value=3))
def test_nested_exp_integral_near_zero_frequencies(a, b):
    t = 2.0
    for x, y in ((a, b), (b, a), (a, a)):
        ref = gl_double(lambda s: np.exp(1j * x * s), lambda s: np.exp(1j * y * s), t, pieces=4)
        assert abs(oracle.nested_exp_integral(x, y, t) - ref) < 1e-11


def test_nested_exp_integral_zero_cases():
    assert oracle.nested_exp_integral(0.0, 0.0, 2.0) == pytest.approx(2.0)
    t = 1.3
    ref = gl_double(lambda s: np.exp(2j * s), lambda s: 1.0, t, pieces=4)
    assert oracle.nested_exp_integral(2.0, 0.0, t) == pytest.approx(ref, abs=1e-12)


def test_dyson_trivial_and_defect(trap_chain, period):
    assert np.allclose(oracle.dyson_truncation(trap_chain, 0.0, 2, 1.0), np.eye(trap_chain[0].dim))
    assert la.unitarity_defect(oracle.dyson_truncation(trap_chain, 0.1, 1, 3 * period)) > 1e-3
    with pytest.raises(OrderError):
        oracle.dyson_truncation(trap_chain, 0.1, 3, 1.0)


def test_dyson_first_order_defect_identity(trap_chain):
    # U = I - i lam A with A Hermitian gives U^dag U - I = lam^2 A^2 exactly
    lam, t = 1e-3, 2.5
    a = oracle.single_integral(trap_chain[0], t)
    d = la.unitarity_defect(oracle.dyson_truncation(trap_chain, lam, 1, t))
    assert d == pytest.approx(lam ** 2 * la.fro(a @ a), rel=0.2)


def test_dyson_second_order_vs_quadrature():
    h = TrigPoly.from_terms((1.0,), {-1: SM, 1: SP, 0: 0.3 * SZ})
    t, lam = 1.9, 0.3
    dbl = gl_double(h, h, t, pieces=4)
    expected = np.eye(2) - 1j * lam * oracle.single_integral(h, t) - lam ** 2 * dbl
    assert np.allclose(oracle.dyson_truncation(h, lam, 2, t), expected, atol=1e-10)


def test_dyson_order_of_accuracy():
    h = TrigPoly.from_terms((1.0,), {-1: SM, 1: SP, 0: 0.3 * SZ})
    lams = [0.04, 0.02, 0.01, 0.005]
    t = 2.0
    for n in (1, 2):
        errs = [la.fro(oracle.dyson_truncation(h, lam, n, t) - oracle.interaction_oracle(h, lam, t, 1e-12).final)
                for lam in lams]
        assert oracle.error_scaling_fit(lams, errs)[0] > n + 0.8


def test_magnus_commuting_and_harmonic():
    c = TrigPoly.from_terms((1.0,), {1: 0.5 * SZ, -1: 0.5 * SZ})
    _, om2 = oracle.magnus_analytic_low(c, 2.3)
    assert np.allclose(om2, 0)
    h = TrigPoly.from_terms((1.0,), {-1: SM, 1: SP})
    for t in (0.5, 4.0):
        om1, om2 = oracle.magnus_analytic_low(h, t)
        assert np.allclose(om2, -1j * (t - math.sin(t)) * SZ, atol=1e-13)
        u = scipy.linalg.expm(0.01 * om1 + 1e-4 * om2)
        assert la.fro(u - oracle.interaction_oracle(h, 0.01, t, 1e-12).final) < 1e-5


def test_error_scaling_fit():
    lams = np.array([0.1, 0.05, 0.025, 0.0125])
    s, r2 = oracle.error_scaling_fit(lams, lams ** 2)
    assert abs(s - 2) < 1e-12 and r2 == pytest.approx(1)
    s, _ = oracle.error_scaling_fit(lams, 3 * lams)
    assert s == pytest.approx(1)
    with pytest.raises(ValueError):
        oracle.error_scaling_fit(lams, [1, 2, 0, 1])
    with pytest.raises(ValueError):
        oracle.error_scaling_fit(lams[:3], lams[:3])

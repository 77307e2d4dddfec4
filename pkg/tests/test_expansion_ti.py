import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from pertevol import expansion_ti as ti
from pertevol import linalg as la
from pertevol import oracle
from pertevol.errors import GaugeError, HermiticityError, OrderError, SmallDivisorError

from conftest import random_hermitian

SX = np.array([[0, 1], [1, 0]], complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def rabi(nu=1.0):
    return 0.5 * nu * SZ, [nu * SX]


def degenerate_model(seed, dim=6):
    """H0 with a doubly degenerate level, plus two perturbation orders."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    energies = np.array([0.0, 0.0, 1.3, 2.1, 2.1, 3.7])[:dim]
    H0 = q @ np.diag(energies) @ q.conj().T
    return H0, [random_hermitian(rng, dim, 0.3), random_hermitian(rng, dim, 0.3)]


def test_rabi_first_order():
    H0, hs = rabi()
    sol = ti.solve_ti(H0, hs, 1)
    assert np.allclose(sol.C_list[0], 0, atol=1e-14)
    assert np.allclose(sol.Z_list[0], SY, atol=1e-14)


def test_sylvester_inverts_offdiagonal_part():
    H0, hs = degenerate_model(1)
    spec = la.spectral_decompose(H0)
    diag, off, syl = ti.block_split(hs[0], spec)
    assert np.allclose(-1j * la.commutator(syl, H0), off, atol=1e-12)
    assert np.allclose(la.commutator(diag, H0), 0, atol=1e-12)


def test_second_order_source_explicit():
    H0, hs = degenerate_model(2)
    sol = ti.solve_ti(H0, hs, 2)
    z1 = sol.Z_list[0]
    expected = (-0.5 * la.commutator(z1, la.commutator(z1, H0))
                + 1j * la.commutator(z1, hs[0]) + hs[1])
    assert np.allclose(ti.g_big([H0] + hs, [z1], 2), expected, atol=1e-12)


@given(st.integers(min_value=0, max_value=2 ** 31), st.integers(min_value=1, max_value=4))
def test_recursion_and_constraints(seed, order):
    H0, hs = degenerate_model(seed)
    sol = ti.solve_ti(H0, hs, order)
    assert max(ti.recursion_residual(sol, hs)) < 1e-10
    for c, z in zip(sol.C_list, sol.Z_list):
        assert la.fro(la.commutator(c, H0)) < 1e-10
        assert la.is_hermitian(c, 1e-12) and la.is_hermitian(z, 1e-12)
        # minimal gauge: no block-diagonal part in Z_n
        d, _, _ = ti.block_split(z, sol.spectrum)
        assert la.fro(d) < 1e-10


def test_propagator_unitary_and_reduced_rank():
    H0, hs = degenerate_model(4)
    sol = ti.solve_ti(H0, hs, 3)
    for t in (0.0, 1.1, 4.0):
        u = ti.evolution_ti(sol, 0.1, t)
        assert la.unitarity_defect(u) < 1e-12
        assert np.allclose(ti.reduced_rank_form(sol, 0.1, t), u, atol=1e-12)


def test_one_parameter_group():
    H0, hs = degenerate_model(5)
    sol = ti.solve_ti(H0, hs, 2)
    a = ti.evolution_ti(sol, 0.2, 0.7)
    b = ti.evolution_ti(sol, 0.2, 1.9)
    assert np.allclose(a @ b, ti.evolution_ti(sol, 0.2, 2.6), atol=1e-12)


def test_order_of_accuracy_exact_exponential():
    H0, hs = degenerate_model(6)
    lams = [0.04, 0.02, 0.01, 0.005]
    t = 2.0
    for order in (1, 2):
        sol = ti.solve_ti(H0, hs, order)
        errs = []
        for lam in lams:
            exact = scipy.linalg.expm(-1j * t * (H0 + lam * hs[0] + lam ** 2 * hs[1]))
            errs.append(la.fro(ti.evolution_ti(sol, lam, t) - exact))
        slope, _ = oracle.error_scaling_fit(lams, errs)
        assert slope > order + 0.8


def test_gauge_shifts_z_only():
    H0, hs = degenerate_model(7)
    base = ti.solve_ti(H0, hs, 2)
    spec = base.spectrum
    g = spec.projectors[0] @ random_hermitian(np.random.default_rng(0), 6) @ spec.projectors[0]
    gauged = ti.solve_ti(H0, hs, 2, gauge=[g])
    assert not gauged.is_minimal and base.is_minimal
    assert np.allclose(gauged.C_list[0], base.C_list[0])
    assert np.allclose(gauged.Z_list[0], base.Z_list[0] + g)
    assert max(ti.recursion_residual(gauged, hs)) < 1e-10


def test_errors():
    H0, hs = rabi()
    with pytest.raises(OrderError):
        ti.solve_ti(H0, hs, 0)
    with pytest.raises(OrderError):
        ti.solve_ti(H0, hs, 7)
    with pytest.raises(HermiticityError):
        ti.solve_ti(H0, [np.array([[0, 1], [0, 0]], complex)], 1)
    with pytest.raises(GaugeError):
        ti.solve_ti(H0, hs, 1, gauge=[SX])
    with pytest.raises(SmallDivisorError):
        ti.solve_ti(np.diag([0.0, 1e-7]), hs, 1)


def test_block_residual_shrinks():
    H0, hs = rabi()
    lams = [0.04, 0.02, 0.01, 0.005]
    for order in (1, 2):
        sol = ti.solve_ti(H0, hs, order)
        res = [ti.block_diag_residual(sol, H0, hs, lam) for lam in lams]
        slope, _ = oracle.error_scaling_fit(lams, res)
        assert slope > order + 0.8

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pertevol import expansion_td as td
from pertevol import expansion_ti as ti
from pertevol import linalg as la
from pertevol import models
from pertevol import oracle
from pertevol import trigpoly as tp
from pertevol.errors import ConfigError


def interior(x, cutoff, margin):
    k = 2 * (cutoff - margin)
    return x[:k, :k]


def test_operator_invariants(trap):
    ops = models.build_operators(trap)
    nf = trap.cutoff
    assert ops.dim == 2 * nf
    assert np.allclose(ops.fock_a_f, np.diag(np.r_[trap.f_table()[1:], 1.0]) @ ops.fock_a)  # f(n+1) a
    assert la.unitarity_defect(ops.D_plus) < 1e-11
    comm = la.commutator(ops.fock_a, ops.fock_a.conj().T)
    assert np.allclose(comm[: nf - 1, : nf - 1], np.eye(nf - 1))
    assert np.allclose(np.diag(ops.fock_a.conj().T @ ops.fock_a), np.arange(nf))
    assert np.allclose(ops.sigma_plus, ops.sigma_minus.conj().T)


def test_trivial_operator_cases():
    p = models.IonTrapParams(eta=0.0, f=1.0, cutoff=5)
    ops = models.build_operators(p)
    assert np.allclose(ops.D_plus, np.eye(10))
    assert np.allclose(ops.a_f, ops.a)
    with pytest.raises(ConfigError):
        models.build_operators(models.IonTrapParams(cutoff=3))


def test_resonance_flag():
    assert models.IonTrapParams(nu=2.0, epsilon=5.0, alpha=3.0).resonant
    assert not models.IonTrapParams(nu=2.0, epsilon=5.0, alpha=2.9).resonant


@given(st.floats(min_value=0, max_value=1.5), st.integers(0, 6), st.integers(0, 10))
def test_phi_series_vs_laguerre(eta, m, n):
    a = models.phi_m(eta, m, n)
    b = models.phi_m_laguerre(eta, m, n)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_phi_examples():
    for m in range(5):
        assert models.phi_m(0.0, m, 3) == pytest.approx(1 / math.factorial(m), abs=1e-15)
    assert models.phi_m(0.7, 0, 0) == 1.0
    assert abs(models.phi_m(0.3, 1, 4) - models.phi_m_laguerre(0.3, 1, 4)) < 1e-13


def test_displacement_series_matches_exponential():
    eta, nf = 0.3, 24
    p = models.IonTrapParams(eta=eta, cutoff=nf)
    exact = models.build_operators(p).fock_D_plus
    series = models.displacement_series(eta, nf)
    k = nf - 10
    assert np.allclose(series[:k, :k], exact[:k, :k], atol=1e-10)


def test_linearized_equals_generalized(trap):
    _, lin = models.build_hamiltonian(trap, "linearized")
    _, gen = models.build_hamiltonian(trap, "generalized-gf")
    assert (lin - gen).max_norm() < 1e-14
    assert lin.frequencies() == [(-1,), (1,)]
    assert lin.is_hermitian_valued()


def test_full_displacement_close_to_linearized():
    gaps = []
    for eta in (0.04, 0.02, 0.01):
        p = models.linearized_params(eta=eta, cutoff=10)
        _, full = models.build_hamiltonian(p, "full-D")
        _, lin = models.build_hamiltonian(p, "linearized")
        gaps.append(interior((full - lin).coefficient(1), 10, 4).__abs__().max())
    assert gaps[0] / gaps[1] == pytest.approx(4, rel=0.05)
    assert gaps[1] / gaps[2] == pytest.approx(4, rel=0.05)


def test_zero_coupling_is_empty():
    _, h = models.build_hamiltonian(models.IonTrapParams(lam=0.0))
    assert h.is_empty
    p = models.IonTrapParams(g=0.0, f=0.0)
    assert models.interaction_chain(p)[0].is_empty


def test_interaction_picture_structure(trap, trap_chain):
    h1 = trap_chain[0]
    assert h1.bases == (trap.nu,)
    assert h1.frequencies() == [(-2,), (-1,), (0,), (1,), (2,)]
    assert np.allclose(tp.mean(h1), models.mean_coupling(trap))
    # entrywise result equals brute-force conjugation
    H0, h = models.build_hamiltonian(trap.with_lambda(1.0))
    for t in (0.0, 0.7, 2.9):
        u = la.hermitian_exponential(H0, -t)
        assert np.allclose(h1(t), u @ h(t) @ u.conj().T, atol=1e-12)


def test_off_resonant_two_bases():
    p = models.IonTrapParams(nu=1.0, epsilon=3.0, alpha=3.0 - math.sqrt(2.0), cutoff=6, f=0.2)
    H0, h = models.build_hamiltonian(p.with_lambda(1.0))
    ip = models.interaction_picture(p, H0, h)
    assert ip.bases == (1.0, pytest.approx(math.sqrt(2.0)))
    u = la.hermitian_exponential(H0, -1.3)
    assert np.allclose(ip(1.3), u @ h(1.3) @ u.conj().T, atol=1e-12)
    q = models.IonTrapParams(nu=1.0, epsilon=3.0, alpha=1.0 + 1e-11, cutoff=6)
    H0, h = models.build_hamiltonian(q)
    with pytest.warns(RuntimeWarning):
        models.interaction_picture(q, H0, h)


def test_rotating_frame(trap, trap_chain):
    h0, h1 = models.rotating_frame(trap)
    t = 0.7 / trap.nu
    u = la.hermitian_exponential(h0, -t)
    assert np.allclose(u @ h1 @ u.conj().T, trap_chain[0](t), atol=1e-11)
    spec = la.spectral_decompose(h0)
    singles = [c.energy for c in spec.clusters if c.multiplicity == 1]
    # |0,-> at -nu/2, plus the truncation edge |N-1,+>
    assert singles[0] == pytest.approx(-0.5 * trap.nu)
    assert singles[1] == pytest.approx(trap.nu * (trap.cutoff - 0.5))
    assert all(m == 2 for m in spec.multiplicities[1:-1])
    with pytest.raises(ConfigError):
        models.rotating_frame(models.IonTrapParams(alpha=2.5))


def test_rotating_frame_propagator_matches_integrator(trap):
    p = trap.with_lambda(0.1)
    t = 5.0
    H0, h = models.build_hamiltonian(p)
    ref = oracle.integrate_schrodinger(lambda s: H0 + h(s), t, 1e-11).final
    assert la.fro(models.rotating_frame_propagator(p, t) - ref) < 1e-8


def test_rwa_effective(trap):
    plus = models.rwa_effective(trap, "+")
    ops = models.build_operators(trap)
    c = trap.lam * trap.nu * trap.eta
    assert np.allclose(plus, 1j * c * (ops.a @ ops.sigma_plus - ops.a_dag @ ops.sigma_minus))
    for tag in ("0", "-", "+"):
        h = models.rwa_effective(trap, tag)
        assert la.fro(la.commutator(h, models.rwa_reference(trap, tag))) < 1e-11
    rot = la.hermitian_exponential(ops.n_hat, math.pi / 2)  # exp(-i pi n/2)
    jc = rot.conj().T @ plus @ rot
    assert np.allclose(jc, c * (ops.a @ ops.sigma_plus + ops.a_dag @ ops.sigma_minus), atol=1e-12)
    # the + tag coincides with the long-time mean of the linearized model
    assert np.allclose(plus, trap.lam * models.mean_coupling(trap))
    with pytest.raises(ConfigError):
        models.rwa_effective(trap, "2")


def test_first_order_closed_forms(trap, trap_chain):
    sol = td.solve_td_mean(trap_chain, 1)
    c1 = sol.C_list[0](0.0)
    assert la.fro(c1 - models.mean_coupling(trap)) < 1e-12
    assert la.fro(sol.Z0_list[0] - models.mean_generator(trap)) < 1e-12
    for t in np.linspace(0, 7, 8):
        assert la.fro(sol.Z_list[0](t) - models.generator_at(trap, t)) < 1e-12
    lam, t = 0.07, 3.3
    exp_c, v1, v2 = models.first_order_closed_forms(trap, lam, t)
    assert la.fro(exp_c - la.hermitian_exponential(lam * c1, t)) < 1e-10
    assert la.unitarity_defect(v1) < 1e-12 and la.unitarity_defect(v2) < 1e-12
    # population amplitude of |1,->: index 2*1 + 1
    fs = trap.eta * 1.0
    assert exp_c[3, 3] == pytest.approx(math.cos(lam * trap.nu * fs * t))


def test_closed_forms_identity_at_zero(trap):
    for m in models.first_order_closed_forms(trap, 0.0, 1.3):
        assert np.allclose(m, np.eye(trap.dim))


def test_product_split_is_second_order(trap):
    t = 2.2
    lams = [0.04, 0.02, 0.01, 0.005]
    gaps = []
    for lam in lams:
        _, v1, v2 = models.first_order_closed_forms(trap, lam, t)
        gaps.append(la.fro(v1 @ v2 - la.hermitian_exponential(lam * models.generator_at(trap, t), 1.0)))
    slope, _ = oracle.error_scaling_fit(lams, gaps)
    assert abs(slope - 2) < 0.05


def test_windowed_average(trap, trap_chain):
    h1 = trap_chain[0]
    c = tp.TrigPoly.constant((1.0,), np.eye(2))
    assert np.allclose(models.windowed_average(c, 3.0), np.eye(2))
    tau = 1.7
    direct = oracle.single_integral(h1, tau) / tau
    assert np.allclose(models.windowed_average(h1, tau), direct, atol=1e-13)
    ops = models.build_operators(trap)
    w = models.windowed_average(h1, tau)
    coeff = np.vdot(models.fock(ops.g_op) @ ops.sigma_minus, w) / np.vdot(
        models.fock(ops.g_op) @ ops.sigma_minus, models.fock(ops.g_op) @ ops.sigma_minus)
    assert coeff == pytest.approx(trap.nu * models.avxp(-1j * trap.nu * tau))
    m = tp.mean(h1)
    far = models.windowed_average(h1, 1e3 * 2 * math.pi / trap.nu)
    assert la.fro(far - m) <= 1e-3 * la.fro(m)
    with pytest.raises(ValueError):
        models.windowed_average(h1, 0.0)


def test_ti_td_first_order_agree(trap, trap_chain):
    h0, h1 = models.rotating_frame(trap)
    sti = ti.solve_ti(h0, [h1], 1)
    std = td.solve_td_mean(trap_chain, 1)
    assert la.fro(sti.C_list[0] - std.C_list[0](0.0)) < 1e-10
    assert la.fro(sti.Z_list[0] - std.Z0_list[0]) < 1e-10


def test_lamb_dicke_profiles():
    g, f = models.lamb_dicke_profiles(0.1, 8)
    assert f[0] == 1.0
    assert g[0] == pytest.approx(math.exp(-0.005))
    assert f[1] == pytest.approx(0.1 * math.exp(-0.005))
    p = models.IonTrapParams(eta=0.1, g=g, f=f, cutoff=8)
    assert models.interaction_chain(p)[0].is_hermitian_valued()


def test_profile_validation():
    with pytest.raises(ConfigError):
        models.IonTrapParams(g=[1.0, 2.0], cutoff=6).g_table()
    with pytest.raises(ConfigError):
        models.IonTrapParams(nu=-1.0)

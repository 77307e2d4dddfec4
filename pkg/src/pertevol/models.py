"""Trapped-ion (Jaynes-Cummings type) model family.

Hilbert space: truncated Fock space of dimension ``cutoff`` tensored with a
two-level system.  Basis ordering is ``|n> (x) |s>`` with ``s = +`` first, so
the flat index of ``|n, +>`` is ``2n`` and of ``|n, ->`` is ``2n + 1``.

Conventions: ``sigma_z |+-> = +-|+->``, ``sigma_+ = |+><-|``,
``sigma_- = |-><+|``.  The deformed ladder operator is ``a_f = a f(n)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import eval_genlaguerre

from . import linalg as la
from .errors import ClosureError, ConfigError
from .trigpoly import TrigPoly

FORMS = ("full-D", "linearized", "generalized-gf")
RESONANCE_REL = 1e-12
COLLISION_TOL = 1e-9

Profile = Union[float, Sequence[float], Callable[[int], float]]

SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
PROJ_PLUS = np.diag([1.0, 0.0]).astype(complex)
PROJ_MINUS = np.diag([0.0, 1.0]).astype(complex)


def _table(profile: Profile, size: int, name: str) -> np.ndarray:
    """Tabulate ``profile`` on ``0..size-1``.  A scalar means constant."""
    if callable(profile):
        vals = [profile(n) for n in range(size)]
    elif np.isscalar(profile):
        vals = [profile] * size
    else:
        vals = list(profile)
        if len(vals) < size:
            raise ConfigError(f"{name} table has {len(vals)} entries, need {size}")
        vals = vals[:size]
    arr = np.asarray(vals)
    if np.iscomplexobj(arr) and np.any(np.imag(arr) != 0):
        raise ConfigError(f"{name} must be real-valued")
    arr = np.real(arr).astype(float)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class IonTrapParams:
    """Ion-trap parameters (angular frequencies in rad per unit time).

    Parameters
    ----------
    nu : trap frequency, > 0
    epsilon : internal splitting
    alpha : laser frequency
    lam : Rabi frequency over ``nu`` (dimensionless)
    eta : Lamb-Dicke parameter, >= 0
    phi : coupling phase of the generalized model
    g, f : real profiles on ``n = 0, 1, ...`` (scalar, table or callable).
        ``f(0)`` is irrelevant and forced to 1.
    cutoff : Fock-space dimension
    """

    nu: float = 1.0
    epsilon: float = 3.0
    alpha: float = 2.0
    lam: float = 0.05
    eta: float = 0.1
    phi: float = -math.pi / 2
    g: Profile = 1.0
    f: Profile = 0.1
    cutoff: int = 12
    delta: float = field(init=False)
    resonant: bool = field(init=False)

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigError("nu must be positive")
        if self.eta < 0:
            raise ConfigError("eta must be non-negative")
        if int(self.cutoff) != self.cutoff:
            raise ConfigError("cutoff must be an integer")
        d = self.epsilon - self.alpha
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "resonant", abs(d - self.nu) <= RESONANCE_REL * self.nu)

    @property
    def dim(self) -> int:
        return 2 * int(self.cutoff)

    @property
    def rabi(self) -> float:
        return self.lam * self.nu

    def g_table(self) -> np.ndarray:
        return _table(self.g, int(self.cutoff), "g")

    def f_table(self) -> np.ndarray:
        t = _table(self.f, int(self.cutoff), "f")
        t[0] = 1.0
        return t

    def with_lambda(self, lam: float) -> "IonTrapParams":
        return replace(self, lam=lam)


def linearized_params(nu=1.0, epsilon=3.0, alpha=2.0, lam=0.05, eta=0.1, cutoff=12) -> IonTrapParams:
    """Generalized model that reproduces the linearized Lamb-Dicke coupling."""
    return IonTrapParams(nu=nu, epsilon=epsilon, alpha=alpha, lam=lam, eta=eta,
                         phi=-math.pi / 2, g=1.0, f=eta, cutoff=cutoff)


@dataclass(frozen=True)
class ModelOperators:
    a: np.ndarray
    a_dag: np.ndarray
    n_hat: np.ndarray
    a_f: np.ndarray
    a_f_dag: np.ndarray
    sigma_plus: np.ndarray
    sigma_minus: np.ndarray
    sigma_z: np.ndarray
    D_plus: np.ndarray
    D_minus: np.ndarray
    H0: np.ndarray
    # Fock-space factors (cutoff x cutoff)
    fock_a: np.ndarray
    fock_a_f: np.ndarray
    fock_D_plus: np.ndarray
    g_op: np.ndarray

    @property
    def cutoff(self) -> int:
        return self.fock_a.shape[0]

    @property
    def dim(self) -> int:
        return self.H0.shape[0]


def fock(x: np.ndarray) -> np.ndarray:
    """Lift a Fock-space operator to the product space."""
    return np.kron(x, np.eye(2))


def spin(s: np.ndarray, cutoff: int) -> np.ndarray:
    return np.kron(np.eye(cutoff), s)


def build_operators(p: IonTrapParams) -> ModelOperators:
    nf = int(p.cutoff)
    if nf < 4:
        raise ConfigError(f"cutoff must be >= 4, got {nf}")
    a = np.diag(np.sqrt(np.arange(1, nf)), 1).astype(complex)
    ad = la.dagger(a)
    n_hat = np.diag(np.arange(nf)).astype(complex)
    a_f = a @ np.diag(p.f_table())
    g_op = np.diag(p.g_table()).astype(complex)
    # D(i eta) = exp(i eta (a + a^dag)) by exact Hermitian exponentiation
    d_plus = la.hermitian_exponential(p.eta * (a + ad), -1.0)
    H0 = p.nu * fock(n_hat) + 0.5 * p.epsilon * spin(SIGMA_Z, nf)
    return ModelOperators(
        a=fock(a), a_dag=fock(ad), n_hat=fock(n_hat),
        a_f=fock(a_f), a_f_dag=fock(la.dagger(a_f)),
        sigma_plus=spin(SIGMA_PLUS, nf), sigma_minus=spin(SIGMA_MINUS, nf), sigma_z=spin(SIGMA_Z, nf),
        D_plus=fock(d_plus), D_minus=fock(la.dagger(d_plus)), H0=H0,
        fock_a=a, fock_a_f=a_f, fock_D_plus=d_plus, g_op=g_op,
    )


# -- displacement-operator coefficients ---------------------------------
def phi_m(eta: float, m: int, n: int) -> float:
    """Normal-ordered displacement coefficient by its terminating series.

    ``sum_l (-eta^2)^l / (l! (l+m)!) * n!/(n-l)!``, ``l = 0..n``.
    """
    if m < 0 or n < 0:
        raise ValueError("m and n must be non-negative")
    x = -eta * eta
    return math.fsum(x ** l * math.perm(n, l) / (math.factorial(l) * math.factorial(l + m))
                     for l in range(n + 1))


def phi_m_laguerre(eta: float, m: int, n: int) -> float:
    """Same coefficient as ``n!/(n+m)! L_n^m(eta^2)``."""
    if m < 0 or n < 0:
        raise ValueError("m and n must be non-negative")
    return float(eval_genlaguerre(n, m, eta * eta)) / math.perm(n + m, m)


def displacement_series(eta: float, cutoff: int, sign: int = 1) -> np.ndarray:
    """``D(sign * i eta)`` on Fock space from its normal-ordered expansion.

    Entry ``<n+m| D |n> = exp(-eta^2/2) (sign*i eta)^m sqrt((n+m)!/n!) Phi_m(eta; n)``
    and symmetrically below the diagonal.  Independent of the exact
    exponential, but only exact on the untruncated space, so agreement is
    restricted to the interior of the Fock cutoff.
    """
    out = np.zeros((cutoff, cutoff), complex)
    pref = math.exp(-eta * eta / 2)
    for n in range(cutoff):
        for m in range(cutoff - n):
            amp = pref * (sign * 1j * eta) ** m * math.sqrt(math.perm(n + m, m)) * phi_m(eta, m, n)
            out[n + m, n] = amp
            out[n, n + m] = amp
    return out


def lamb_dicke_profiles(eta: float, cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """``g``, ``f`` tables of the higher-accuracy Lamb-Dicke model (use ``phi = -pi/2``)."""
    pref = math.exp(-eta * eta / 2)
    g = np.array([pref * phi_m(eta, 0, n) for n in range(cutoff)])
    f = np.ones(cutoff)
    f[1:] = [eta * pref * phi_m(eta, 1, n) for n in range(cutoff - 1)]
    return g, f


# -- Hamiltonians -------------------------------------------------------
def coupling_operator(p: IonTrapParams, form: str, ops: ModelOperators | None = None) -> np.ndarray:
    """The operator ``K`` multiplying ``sigma_-`` (with ``e^{i alpha t}``)."""
    ops = ops or build_operators(p)
    if form == "full-D":
        return ops.D_minus
    if form == "linearized":
        return np.eye(ops.dim) - 1j * p.eta * (ops.a + ops.a_dag)
    if form == "generalized-gf":
        return fock(ops.g_op) + np.exp(1j * p.phi) * (ops.a_f + ops.a_f_dag)
    raise ConfigError(f"unknown form {form!r}; expected one of {FORMS}")


def build_hamiltonian(p: IonTrapParams, form: str = "generalized-gf"):
    """``(H0, H_int)`` with ``H_int(t) = lam nu (e^{i alpha t} K sigma_- + h.c.)``.

    ``H_int`` is a :class:`TrigPoly` over the single base ``|alpha|``.  For
    ``alpha = 0`` the drive is static and the polynomial is constant over base
    ``nu``.
    """
    ops = build_operators(p)
    k = coupling_operator(p, form, ops)
    low = p.rabi * (k @ ops.sigma_minus)
    if p.alpha == 0:
        return ops.H0, TrigPoly.constant((p.nu,), low + la.dagger(low))
    s = 1 if p.alpha > 0 else -1
    h = TrigPoly.from_terms((abs(p.alpha),), {s: low, -s: la.dagger(low)}, dim=ops.dim)
    return ops.H0, h


def _split_index(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fock number and spin sign (+1 / -1) of flat basis indices."""
    return idx // 2, 1 - 2 * (idx % 2)


def interaction_picture(p: IonTrapParams, H0: np.ndarray, H_int: TrigPoly) -> TrigPoly:
    """``exp(i H0 t) H_int(t) exp(-i H0 t)`` computed entrywise.

    ``H0`` must be diagonal in the product basis.  An entry coupling
    ``|n_b, s_b>`` to ``|n_a, s_a>`` acquires the frequency
    ``nu dn + epsilon ds + k alpha`` with ``ds = (s_a - s_b)/2``; the laser
    frequency must cancel (``ds + k = 0``), leaving ``nu dn + ds delta``.

    Resonant (``delta = nu``): single base ``nu``.  Otherwise: bases
    ``(nu, |delta|)``, meaningful only if ``delta/nu`` is irrational.
    """
    H0 = la.as_operator(H0)
    if la.fro(H0 - np.diag(np.diag(H0))) > 0:
        raise ValueError("entrywise interaction picture needs a diagonal H0")
    dim = H0.shape[0]
    nz = H_int.frequencies()
    drive_sign = 0 if p.alpha == 0 else (1 if p.alpha > 0 else -1)
    if p.resonant:
        bases = (p.nu,)
    elif p.delta == 0:
        bases = (p.nu,)
    else:
        ratio = abs(p.delta) / p.nu
        if abs(ratio - round(ratio)) <= COLLISION_TOL:
            warnings.warn(f"delta/nu = {ratio:.12g} is close to an integer; "
                          "frequencies may collide", RuntimeWarning, stacklevel=2)
        bases = (p.nu, abs(p.delta))
    d_sign = 1 if p.delta >= 0 else -1
    idx = np.arange(dim)
    nums, spins = _split_index(idx)
    terms: dict = {}
    for freq in nz:
        if any(pw != 0 for (fq, pw) in H_int.keys() if fq == freq):
            raise ClosureError("interaction_picture expects an ordinary trig polynomial")
        coeff = H_int.coefficient(freq)
        k = freq[0] * drive_sign if drive_sign else 0
        rows, cols = np.nonzero(np.abs(coeff) > 0)
        for r, c in zip(rows, cols):
            dn = int(nums[r] - nums[c])
            ds = int((spins[r] - spins[c]) // 2)
            if ds + k != 0:
                raise ClosureError("laser frequency does not cancel in the interaction picture")
            if p.resonant:
                key = (dn + ds,)
            elif len(bases) == 1:
                key = (dn,)
            else:
                key = (dn, ds * d_sign)
            m = terms.setdefault(key, np.zeros((dim, dim), complex))
            m[r, c] += coeff[r, c]
    return TrigPoly(bases, dim, {(kk, 0): v for kk, v in terms.items()})


def interaction_chain(p: IonTrapParams, form: str = "generalized-gf") -> list[TrigPoly]:
    """Perturbative coefficients ``[H~_1]`` (``H~ = lam H~_1``)."""
    unit = p.with_lambda(1.0)
    H0, h = build_hamiltonian(unit, form)
    return [interaction_picture(unit, H0, h)]


def rotating_frame(p: IonTrapParams, form: str = "generalized-gf") -> tuple[np.ndarray, np.ndarray]:
    """Static pair ``(h0, h1)`` with ``h0 = nu n + delta sigma_z / 2``, ``h1 = nu (K sigma_- + h.c.)``.

    The full rotating-frame Hamiltonian is ``h0 + lam h1`` and the Schrodinger
    propagator is ``exp(-i alpha sigma_z t/2) exp(-i (h0 + lam h1) t)``.
    """
    if not p.resonant:
        raise ConfigError(f"rotating_frame needs delta = nu (delta = {p.delta!r}, nu = {p.nu!r})")
    ops = build_operators(p)
    h0 = p.nu * ops.n_hat + 0.5 * p.delta * ops.sigma_z
    low = p.nu * (coupling_operator(p, form, ops) @ ops.sigma_minus)
    return h0, low + la.dagger(low)


def rotating_frame_propagator(p: IonTrapParams, t: float, form: str = "generalized-gf") -> np.ndarray:
    """Exact truncated Schrodinger propagator via the rotating frame."""
    h0, h1 = rotating_frame(p, form)
    r = la.hermitian_exponential(0.5 * p.alpha * build_operators(p).sigma_z, t)
    return r @ la.hermitian_exponential(h0 + p.lam * h1, t)


def rwa_effective(p: IonTrapParams, resonance: str) -> np.ndarray:
    """RWA effective interaction-picture Hamiltonian of the linearized model.

    ``resonance`` is ``"0"``, ``"-"`` or ``"+"`` (``delta`` near 0, -nu, +nu).
    """
    ops = build_operators(p)
    c = p.rabi
    if resonance == "0":
        return c * (ops.sigma_minus + ops.sigma_plus)
    if resonance == "-":
        return 1j * c * p.eta * (ops.a_dag @ ops.sigma_plus - ops.a @ ops.sigma_minus)
    if resonance == "+":
        return 1j * c * p.eta * (ops.a @ ops.sigma_plus - ops.a_dag @ ops.sigma_minus)
    raise ConfigError(f"unsupported resonance tag {resonance!r}; use '0', '-' or '+'")


def rwa_reference(p: IonTrapParams, resonance: str) -> np.ndarray:
    """``nu n + delta_r sigma_z / 2`` at the exact resonance selected by the tag."""
    shift = {"0": 0.0, "-": -p.nu, "+": p.nu}
    if resonance not in shift:
        raise ConfigError(f"unsupported resonance tag {resonance!r}")
    ops = build_operators(p)
    return p.nu * ops.n_hat + 0.5 * shift[resonance] * ops.sigma_z


# -- first-order closed forms -------------------------------------------
def _ladder_squares(ops: ModelOperators) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of ``a_f^dag a_f`` and ``a_f a_f^dag`` on Fock space.

    These play the role of ``F(n)^2`` and ``F(n+1)^2`` with
    ``F(n) = f(n) sqrt(n)``, taking ``F(0) = 0`` and respecting the cutoff.
    """
    af = ops.fock_a_f
    low = np.real(np.diag(la.dagger(af) @ af))
    high = np.real(np.diag(af @ la.dagger(af)))
    return np.sqrt(np.clip(low, 0, None)), np.sqrt(np.clip(high, 0, None))


def _sinc_ratio(theta: float, x: np.ndarray) -> np.ndarray:
    """``sin(theta x)/x`` with the limit ``theta`` at ``x = 0``."""
    out = np.full_like(x, theta, dtype=float)
    nz = x != 0
    out[nz] = np.sin(theta * x[nz]) / x[nz]
    return out


def first_order_closed_forms(p: IonTrapParams, lam: float, t: float):
    """``(expC, V1, V2)``: closed-form unitaries of the resonant first-order operators.

    ``expC = exp(-i lam C1 t)`` with ``C1`` the mean of ``H~_1``;
    ``V1 V2`` approximates ``exp(-i lam Z1(t))`` to first order in ``lam``.
    """
    if not p.resonant:
        raise ConfigError("closed forms are derived at delta = nu")
    ops = build_operators(p)
    nf = ops.cutoff
    lo, hi = _ladder_squares(ops)
    af, afd = ops.a_f, ops.a_f_dag
    ph = np.exp(1j * p.phi)
    pm, pp = spin(PROJ_MINUS, nf), spin(PROJ_PLUS, nf)

    th = lam * p.nu * t
    exp_c = (fock(np.diag(np.cos(th * lo))) @ pm + fock(np.diag(np.cos(th * hi))) @ pp
             - 1j * (ph * fock(np.diag(_sinc_ratio(th, lo))) @ afd @ ops.sigma_minus
                     + np.conj(ph) * fock(np.diag(_sinc_ratio(th, hi))) @ af @ ops.sigma_plus))

    g = np.real(np.diag(ops.g_op))
    rot = np.exp(-1j * p.nu * t) * ops.sigma_minus - np.exp(1j * p.nu * t) * ops.sigma_plus
    v1 = fock(np.diag(np.cos(lam * g))) + fock(np.diag(np.sin(lam * g))) @ rot

    e2 = np.exp(-1j * (2 * p.nu * t - p.phi))
    h = 0.5 * lam
    v2 = (fock(np.diag(np.cos(h * hi))) @ pm + fock(np.diag(np.cos(h * lo))) @ pp
          + e2 * fock(np.diag(_sinc_ratio(h, hi))) @ af @ ops.sigma_minus
          - np.conj(e2) * fock(np.diag(_sinc_ratio(h, lo))) @ afd @ ops.sigma_plus)
    return exp_c, v1, v2


def mean_coupling(p: IonTrapParams) -> np.ndarray:
    """``nu (e^{i phi} a_f^dag sigma_- + h.c.)``, the long-time mean of ``H~_1``."""
    ops = build_operators(p)
    x = p.nu * np.exp(1j * p.phi) * ops.a_f_dag @ ops.sigma_minus
    return x + la.dagger(x)


def mean_generator(p: IonTrapParams) -> np.ndarray:
    """Closed form of the mean-zero first-order generator at ``t = 0``."""
    ops = build_operators(p)
    g = fock(ops.g_op)
    ph = np.exp(1j * p.phi)
    return (1j * g @ (ops.sigma_minus - ops.sigma_plus)
            + 0.5j * (ph * ops.a_f @ ops.sigma_minus - np.conj(ph) * ops.a_f_dag @ ops.sigma_plus))


def generator_at(p: IonTrapParams, t: float) -> np.ndarray:
    """Closed form of the periodic first-order generator at time ``t``."""
    ops = build_operators(p)
    g = fock(ops.g_op)
    e1 = np.exp(-1j * p.nu * t)
    e2 = np.exp(-1j * (2 * p.nu * t - p.phi))
    return (1j * g @ (e1 * ops.sigma_minus - np.conj(e1) * ops.sigma_plus)
            + 0.5j * (e2 * ops.a_f @ ops.sigma_minus - np.conj(e2) * ops.a_f_dag @ ops.sigma_plus))


def avxp(z: complex) -> complex:
    """``(e^z - 1)/z`` with value 1 at ``z = 0``."""
    if z == 0:
        return 1.0 + 0j
    if abs(z) < 1e-5:
        return 1 + z / 2 + z * z / 6 + z ** 3 / 24
    return (np.exp(z) - 1) / z


def windowed_average(H_tilde: TrigPoly, tau: float) -> np.ndarray:
    """``(1/tau) int_0^tau H_tilde``, equal to ``sum_w A_w avxp(i w tau)``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not H_tilde.is_trig:
        raise ClosureError("windowed_average expects an ordinary trig polynomial")
    out = np.zeros((H_tilde.dim, H_tilde.dim), complex)
    for (freq, _), a in H_tilde.items():
        out += avxp(1j * H_tilde.frequency_value(freq) * tau) * a
    return out

"""Operator-valued trigonometric polynomials.

A :class:`TrigPoly` represents

    F(t) = sum_{(k, p)} A_{k,p} t^p exp(i (k . bases) t)

where ``k`` is an integer vector over a fixed tuple of base angular
frequencies and ``p`` is a non-negative power of ``t``.  Frequencies are kept
as integer vectors so that the zero frequency (the mean) is identified
exactly; the bases must be rationally independent for this to be meaningful.

Ordinary trigonometric polynomials have only ``p = 0`` terms.  Terms with
``p > 0`` appear only as intermediate results of full primitives (Magnus and
Dyson integrals).  The mean value, essential primitive and zero-mean
primitive are defined for ordinary polynomials only.
"""
from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import BaseMismatchError, ClosureError, DimensionError, RepresentationOverflow

PRUNE_REL = 1e-14
MEAN_TOL = 1e-12
DEFAULT_MAX_POWER = 6

Freq = tuple  # tuple[int, ...]
Key = tuple  # (Freq, int)


def _as_freq(k, nbase: int) -> Freq:
    if isinstance(k, (int, np.integer)):
        k = (int(k),)
    k = tuple(int(c) for c in k)
    if len(k) != nbase:
        raise ValueError(f"frequency {k} has {len(k)} components, expected {nbase}")
    return k


class TrigPoly:
    """Immutable operator-valued (quasi-)trigonometric polynomial."""

    __slots__ = ("bases", "dim", "_terms")

    def __init__(self, bases: Iterable[float], dim: int, terms: Mapping[Key, np.ndarray] | None = None):
        bases = tuple(float(b) for b in bases)
        if not bases or any(b <= 0 for b in bases):
            raise ValueError("base frequencies must be a non-empty list of positive numbers")
        self.bases = bases
        self.dim = int(dim)
        self._terms = _prune(terms or {}, self.dim)

    # -- construction -------------------------------------------------
    @classmethod
    def from_terms(cls, bases, mapping: Mapping, dim: int | None = None) -> "TrigPoly":
        """Build from ``{frequency: coefficient}``.

        A frequency is an int (single base) or a tuple of ints; to give a
        ``t``-power use a key ``(frequency, power)`` with ``frequency`` a tuple.
        """
        bases = tuple(float(b) for b in bases)
        terms: dict = {}
        for key, a in mapping.items():
            if isinstance(key, tuple) and len(key) == 2 and isinstance(key[0], tuple):
                freq, p = _as_freq(key[0], len(bases)), int(key[1])
            else:
                freq, p = _as_freq(key, len(bases)), 0
            a = np.asarray(a, dtype=complex)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise DimensionError("coefficients must be square matrices")
            if dim is None:
                dim = a.shape[0]
            elif a.shape[0] != dim:
                raise DimensionError(f"coefficient of dim {a.shape[0]} in a dim-{dim} polynomial")
            k = (freq, p)
            terms[k] = terms.get(k, 0) + a
        if dim is None:
            raise ValueError("dim is required for an empty polynomial")
        return cls(bases, dim, terms)

    @classmethod
    def constant(cls, bases, a) -> "TrigPoly":
        a = np.asarray(a, dtype=complex)
        return cls(bases, a.shape[0], {(_zero(len(tuple(bases))), 0): a})

    @classmethod
    def zero(cls, bases, dim: int) -> "TrigPoly":
        return cls(bases, dim, {})

    @classmethod
    def fourier_truncation(cls, func: Callable[[float], np.ndarray], nu: float, n_harmonics: int,
                           n_samples: int | None = None) -> "TrigPoly":
        """Finite Fourier truncation of a ``2 pi / nu``-periodic operator function.

        The truncation error is not estimated.
        """
        n_samples = n_samples or 4 * n_harmonics + 4
        period = 2 * np.pi / nu
        ts = np.arange(n_samples) * period / n_samples
        samples = np.array([np.asarray(func(t), dtype=complex) for t in ts])
        coeffs = np.fft.fft(samples, axis=0) / n_samples
        terms = {}
        for k in range(-n_harmonics, n_harmonics + 1):
            terms[((k,), 0)] = coeffs[k % n_samples]
        return cls((nu,), samples.shape[1], terms)

    # -- introspection ------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def keys(self):
        return self._terms.keys()

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    @property
    def is_empty(self) -> bool:
        return not self._terms

    @property
    def max_power(self) -> int:
        return max((p for _, p in self._terms), default=0)

    @property
    def is_trig(self) -> bool:
        return self.max_power == 0

    @property
    def is_constant(self) -> bool:
        z = _zero(len(self.bases))
        return all(k == (z, 0) for k in self._terms)

    def frequency_value(self, freq: Freq) -> float:
        return float(np.dot(freq, self.bases))

    def frequencies(self) -> list[Freq]:
        return sorted({f for f, _ in self._terms})

    def coefficient(self, freq, power: int = 0) -> np.ndarray:
        freq = _as_freq(freq, len(self.bases))
        a = self._terms.get((freq, power))
        return np.zeros((self.dim, self.dim), complex) if a is None else a.copy()

    def max_norm(self) -> float:
        return max((float(np.linalg.norm(a)) for a in self._terms.values()), default=0.0)

    def __repr__(self) -> str:
        keys = ", ".join(f"{f}{'' if p == 0 else f't^{p}'}" for f, p in sorted(self._terms))
        return f"TrigPoly(bases={self.bases}, dim={self.dim}, terms=[{keys}])"

    # -- arithmetic ---------------------------------------------------
    def _compat(self, other: "TrigPoly") -> None:
        if not isinstance(other, TrigPoly):
            raise TypeError(f"expected TrigPoly, got {type(other).__name__}")
        if self.bases != other.bases:
            raise BaseMismatchError(f"base frequencies differ: {self.bases} vs {other.bases}")
        if self.dim != other.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def scale(self, c: complex) -> "TrigPoly":
        return TrigPoly(self.bases, self.dim, {k: c * a for k, a in self._terms.items()})

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        return combine(1.0, self, 1.0, other)

    def __sub__(self, other: "TrigPoly") -> "TrigPoly":
        return combine(1.0, self, -1.0, other)

    def __neg__(self) -> "TrigPoly":
        return self.scale(-1.0)

    def __mul__(self, c) -> "TrigPoly":
        if isinstance(c, TrigPoly):
            return product(self, c)
        return self.scale(c)

    __rmul__ = scale

    def __matmul__(self, other: "TrigPoly") -> "TrigPoly":
        return product(self, other)

    def __call__(self, t: float) -> np.ndarray:
        return evaluate(self, t)

    def dagger(self) -> "TrigPoly":
        """Pointwise adjoint for real ``t``."""
        return TrigPoly(self.bases, self.dim,
                        {(_neg(f), p): np.conj(a).T for (f, p), a in self._terms.items()})

    def hermiticity_defect(self) -> float:
        """Largest coefficient mismatch ``||A_{-w} - A_w^dagger||_F``."""
        d = combine(1.0, self, -1.0, self.dagger())
        return d.max_norm()

    def is_hermitian_valued(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_defect() <= tol * max(1.0, self.max_norm())

    def map_coefficients(self, fn: Callable[[np.ndarray], np.ndarray]) -> "TrigPoly":
        """Apply a linear map to every coefficient (e.g. a fixed conjugation)."""
        return TrigPoly(self.bases, self.dim, {k: fn(a) for k, a in self._terms.items()})

    def stacked(self):
        """Angular frequencies, t-powers and coefficients as arrays, for fast evaluation."""
        keys = sorted(self._terms)
        omegas = np.array([self.frequency_value(f) for f, _ in keys], dtype=float)
        powers = np.array([p for _, p in keys], dtype=int)
        coeffs = (np.array([self._terms[k] for k in keys]) if keys
                  else np.zeros((0, self.dim, self.dim), complex))
        return omegas, powers, coeffs


def _zero(n: int) -> Freq:
    return (0,) * n


def _neg(f: Freq) -> Freq:
    return tuple(-c for c in f)


def _addf(f: Freq, g: Freq) -> Freq:
    return tuple(a + b for a, b in zip(f, g))


def _prune(terms: Mapping, dim: int) -> dict:
    out = {}
    norms = {}
    for k, a in terms.items():
        a = np.asarray(a, dtype=complex)
        if a.shape != (dim, dim):
            raise DimensionError(f"coefficient shape {a.shape} in a dim-{dim} polynomial")
        norms[k] = float(np.linalg.norm(a))
        out[k] = a
    if not out:
        return {}
    cut = PRUNE_REL * max(1.0, max(norms.values()))
    return {k: a for k, a in out.items() if norms[k] > cut}


# -- algebra ------------------------------------------------------------
def combine(a: complex, f: TrigPoly, b: complex, g: TrigPoly) -> TrigPoly:
    """Return ``a f + b g``."""
    f._compat(g)
    terms = {k: a * c for k, c in f.items()}
    for k, c in g.items():
        terms[k] = terms[k] + b * c if k in terms else b * c
    return TrigPoly(f.bases, f.dim, terms)


def product(f: TrigPoly, g: TrigPoly) -> TrigPoly:
    """Pointwise operator product; frequencies convolve, t-powers add."""
    f._compat(g)
    terms: dict = {}
    for (fa, pa), a in f.items():
        for (fb, pb), b in g.items():
            k = (_addf(fa, fb), pa + pb)
            ab = a @ b
            terms[k] = terms[k] + ab if k in terms else ab
    return TrigPoly(f.bases, f.dim, terms)


def commutator_poly(f: TrigPoly, g: TrigPoly) -> TrigPoly:
    """Pointwise commutator ``[f(t), g(t)]``."""
    f._compat(g)
    terms: dict = {}
    for (fa, pa), a in f.items():
        for (fb, pb), b in g.items():
            k = (_addf(fa, fb), pa + pb)
            c = a @ b - b @ a
            terms[k] = terms[k] + c if k in terms else c
    return TrigPoly(f.bases, f.dim, terms)


def evaluate(f: TrigPoly, t: float) -> np.ndarray:
    """Value of ``f`` at time ``t``."""
    out = np.zeros((f.dim, f.dim), dtype=complex)
    for (freq, p), a in f.items():
        w = f.frequency_value(freq)
        out += (t ** p) * np.exp(1j * w * t) * a
    return out


def mean(f: TrigPoly) -> np.ndarray:
    """Long-time mean: the zero-frequency coefficient of an ordinary polynomial."""
    if not f.is_trig:
        raise ClosureError("mean value undefined for terms growing polynomially in t")
    return f.coefficient(_zero(len(f.bases)), 0)


def mean_and_essential_primitive(f: TrigPoly) -> tuple[np.ndarray, TrigPoly]:
    """Return ``(<f>, esp)`` with ``esp(t) = int_0^t (f - <f>)``.

    ``esp`` has the keys of ``f`` (minus zero) plus a zero-frequency constant
    fixing ``esp(0) = 0``.
    """
    m = mean(f)
    z = _zero(len(f.bases))
    terms: dict = {}
    offset = np.zeros((f.dim, f.dim), complex)
    for (freq, _), a in f.items():
        if freq == z:
            continue
        c = a / (1j * f.frequency_value(freq))
        terms[(freq, 0)] = c
        offset -= c
    terms[(z, 0)] = offset
    return m, TrigPoly(f.bases, f.dim, terms)


def zero_mean_primitive(f: TrigPoly, tol: float = MEAN_TOL) -> TrigPoly:
    """``int_0^t f`` for a zero-mean polynomial.

    Raises :class:`ClosureError` when ``<f> != 0``: the primitive would grow
    linearly in time and leave the algebra.
    """
    m, esp = mean_and_essential_primitive(f)
    defect = float(np.linalg.norm(m))
    if defect > tol * max(1.0, f.max_norm()):
        raise ClosureError(f"primitive of a polynomial with non-zero mean (|<F>| = {defect:.3e})")
    return esp


def derivative(f: TrigPoly) -> TrigPoly:
    """Exact time derivative."""
    terms: dict = {}
    z = _zero(len(f.bases))
    for (freq, p), a in f.items():
        if freq != z:
            k = (freq, p)
            c = 1j * f.frequency_value(freq) * a
            terms[k] = terms[k] + c if k in terms else c
        if p > 0:
            k = (freq, p - 1)
            c = p * a
            terms[k] = terms[k] + c if k in terms else c
    return TrigPoly(f.bases, f.dim, terms)


def primitive(f: TrigPoly, max_power: int = DEFAULT_MAX_POWER) -> TrigPoly:
    """Full primitive ``int_0^t f`` allowing polynomial growth in ``t``.

    Used only where the algebra must leave ordinary trigonometric
    polynomials (Magnus-type exponents and Dyson integrals).
    """
    z = _zero(len(f.bases))
    terms: dict = {}

    def add(k, c):
        terms[k] = terms[k] + c if k in terms else c

    for (freq, p), a in f.items():
        if freq == z:
            if p + 1 > max_power:
                raise RepresentationOverflow(f"t-power {p + 1} exceeds supported maximum {max_power}")
            add((z, p + 1), a / (p + 1))
            continue
        iw = 1j * f.frequency_value(freq)
        # int_0^t s^q e^{iws} ds = t^q e^{iwt}/(iw) - (q/(iw)) int_0^t s^{q-1} e^{iws} ds
        coef = a
        for q in range(p, -1, -1):
            add((freq, q), coef / iw)
            if q == 0:
                add((z, 0), -coef / iw)
            coef = -q * coef / iw
    return TrigPoly(f.bases, f.dim, terms)

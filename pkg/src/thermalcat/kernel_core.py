"""Closed-form phase-space algebra for displaced-thermal kernel states.

A state is a weighted sum of *thermal kernels*. Each kernel is a Gaussian
integral over one or more complex variables z_k,

    w * integral prod_k d^2z_k P_k(z_k) exp(Phi(z, zbar))
        (x)_i |u_i(z)><v_i(z)|,

where P_k is a zero-mean thermal P function with variance nbar_k=(V_k-1)/2,
u_i = sum_k L[i,k] z_k + s_i and v_i = sum_k R[i,k] z_k + t_i are coherent
amplitudes (v stored unconjugated), and Phi is an accumulated scalar phase,
at most bilinear between z and zbar. Every operation used here (Wigner
evaluation, traces, marginals, Gaussian unitaries, parity flips, partial
traces) maps this family to itself, so all results are exact closed forms:
no quadrature anywhere.

Single-variable kernels are created with the public ThermalKernel
constructor; multi-variable ones arise from kernel_product and from
partial traces. Construction folds the P-function center into the
coherent offsets, so integration variables are always zero-centered and
a V=1 kernel simply loses its integration variable (pure coherent dyadic).

Numerical policy: exponents are assembled symbolically and exponentiated
exactly once. Marginal coefficients are assembled in extended precision
(clongdouble) because fringe diagnostics at large displacement live on
cancellations of order d^2 between exponent pieces.
"""

from __future__ import annotations

import cmath
import enum
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import wofz

__all__ = [
    "QuadratureConvention",
    "ThermalKernel",
    "PhaseSpaceState",
    "ComplexGaussianExponent",
    "GaussianMixture1D",
    "FringeMetrics",
    "MinWignerResult",
    "Moments",
    "kernel_product",
    "kernel_wigner",
    "kernel_trace",
    "state_wigner",
    "wigner_evaluator",
    "min_wigner",
    "marginal_distribution",
    "fringe_metrics",
    "moments",
    "apply_beam_splitter",
    "apply_phase_shift",
    "apply_displacement",
    "apply_parity",
    "hs_overlap",
    "temperature_map",
    "variance_from_temperature",
    "state_to_json",
    "state_from_json",
]

_V_ONE_TOL = 1e-12
_SQRT2 = math.sqrt(2.0)


class QuadratureConvention(enum.Enum):
    """Abscissa convention for quadrature marginals.

    ALPHA_REAL: x is the real part of the coherent amplitude.
    SYMMETRIC: X = (a + a^dag)/sqrt(2); the default everywhere.
    The two differ by sqrt(2) in the abscissa; densities renormalize
    accordingly so both integrate to one.
    """

    ALPHA_REAL = "alpha_real"
    SYMMETRIC = "symmetric"


DEFAULT_CONVENTION = QuadratureConvention.SYMMETRIC


def _carr(x) -> np.ndarray:
    return np.asarray(x, dtype=complex)


class ThermalKernel:
    """One term of a phase-space state; see the module docstring.

    The public constructor builds a single-variable kernel

        integral d^2a P^th_{V,d}(a) (x)_i |lscale_i a><rscale_i a|

    scaled by ``weight``. V=1 collapses the integral to a point mass at
    the center. Instances are immutable; operations return new kernels.
    """

    __slots__ = (
        "variances", "centers", "ket_scales", "bra_scales",
        "ket_offsets", "bra_offsets", "weight",
        "phase_quad", "phase_lin_z", "phase_lin_zbar", "phase_const",
        "_wig_cache", "_trace_cache",
    )

    def __init__(self, variance: float, center: complex,
                 left_scales, right_scales, weight: complex = 1.0):
        ls = _carr(left_scales).ravel()
        rs = _carr(right_scales).ravel()
        if ls.shape != rs.shape or ls.size < 1:
            raise ValueError("left_scales and right_scales must have equal length >= 1")
        if variance < 1.0 - _V_ONE_TOL:
            raise ValueError("V must be >= 1")
        n = ls.size
        center = complex(center)
        if variance - 1.0 <= _V_ONE_TOL:
            # point-mass P function: the integration variable disappears
            self._init_raw(
                variances=np.zeros(0), centers=np.zeros(0, complex),
                ket_scales=np.zeros((n, 0), complex),
                bra_scales=np.zeros((n, 0), complex),
                ket_offsets=ls * center, bra_offsets=rs * center,
                weight=complex(weight),
                phase_quad=np.zeros((0, 0), complex),
                phase_lin_z=np.zeros(0, complex),
                phase_lin_zbar=np.zeros(0, complex),
                phase_const=0.0 + 0.0j)
        else:
            self._init_raw(
                variances=np.array([float(variance)]),
                centers=np.array([center]),
                ket_scales=ls[:, None].copy(), bra_scales=rs[:, None].copy(),
                ket_offsets=ls * center, bra_offsets=rs * center,
                weight=complex(weight),
                phase_quad=np.zeros((1, 1), complex),
                phase_lin_z=np.zeros(1, complex),
                phase_lin_zbar=np.zeros(1, complex),
                phase_const=0.0 + 0.0j)

    def _init_raw(self, variances, centers, ket_scales, bra_scales,
                  ket_offsets, bra_offsets, weight,
                  phase_quad, phase_lin_z, phase_lin_zbar, phase_const):
        self.variances = np.asarray(variances, float)
        self.centers = _carr(centers)
        self.ket_scales = _carr(ket_scales)
        self.bra_scales = _carr(bra_scales)
        self.ket_offsets = _carr(ket_offsets)
        self.bra_offsets = _carr(bra_offsets)
        self.weight = complex(weight)
        self.phase_quad = _carr(phase_quad)
        self.phase_lin_z = _carr(phase_lin_z)
        self.phase_lin_zbar = _carr(phase_lin_zbar)
        self.phase_const = complex(phase_const)
        for a in (self.variances, self.centers, self.ket_scales, self.bra_scales,
                  self.ket_offsets, self.bra_offsets, self.phase_quad,
                  self.phase_lin_z, self.phase_lin_zbar):
            a.flags.writeable = False
        self._wig_cache = None
        self._trace_cache = None

    @classmethod
    def _raw(cls, **kw) -> "ThermalKernel":
        obj = cls.__new__(cls)
        obj._init_raw(**kw)
        return obj

    # -- published accessors (meaningful for as-constructed kernels) --

    @property
    def n_modes(self) -> int:
        return self.ket_scales.shape[0]

    @property
    def n_vars(self) -> int:
        return self.ket_scales.shape[1]

    @property
    def variance(self) -> float:
        if self.n_vars == 0:
            return 1.0
        if self.n_vars == 1:
            return float(self.variances[0])
        raise AttributeError("multi-variable kernel has no single variance")

    @property
    def center(self) -> complex:
        if self.n_vars == 1:
            return complex(self.centers[0])
        raise AttributeError("center is defined for single-variable kernels")

    @property
    def left_scales(self) -> np.ndarray:
        if self.n_vars != 1:
            raise AttributeError("scales are defined for single-variable kernels")
        return self.ket_scales[:, 0]

    @property
    def right_scales(self) -> np.ndarray:
        if self.n_vars != 1:
            raise AttributeError("scales are defined for single-variable kernels")
        return self.bra_scales[:, 0]

    @property
    def nbars(self) -> np.ndarray:
        return (self.variances - 1.0) / 2.0

    # -- structural operations --

    def with_weight(self, weight: complex) -> "ThermalKernel":
        return self._replace(weight=complex(weight))

    def scaled(self, factor: complex) -> "ThermalKernel":
        return self._replace(weight=self.weight * factor)

    def _replace(self, **kw) -> "ThermalKernel":
        base = dict(
            variances=self.variances, centers=self.centers,
            ket_scales=self.ket_scales, bra_scales=self.bra_scales,
            ket_offsets=self.ket_offsets, bra_offsets=self.bra_offsets,
            weight=self.weight, phase_quad=self.phase_quad,
            phase_lin_z=self.phase_lin_z, phase_lin_zbar=self.phase_lin_zbar,
            phase_const=self.phase_const)
        base.update(kw)
        return ThermalKernel._raw(**base)

    def adjoint(self) -> "ThermalKernel":
        """Hermitian conjugate: swap ket/bra data, conjugate phase and weight."""
        return ThermalKernel._raw(
            variances=self.variances, centers=self.centers,
            ket_scales=self.bra_scales, bra_scales=self.ket_scales,
            ket_offsets=self.bra_offsets, bra_offsets=self.ket_offsets,
            weight=np.conj(self.weight),
            phase_quad=self.phase_quad.conj().T,
            phase_lin_z=self.phase_lin_zbar.conj(),
            phase_lin_zbar=self.phase_lin_z.conj(),
            phase_const=np.conj(self.phase_const))

    def tensor(self, other: "ThermalKernel") -> "ThermalKernel":
        """Kernel on the concatenated mode set (modes of self, then other)."""
        na, ma = self.n_modes, self.n_vars
        nb, mb = other.n_modes, other.n_vars
        ks = np.zeros((na + nb, ma + mb), complex)
        bs = np.zeros((na + nb, ma + mb), complex)
        ks[:na, :ma] = self.ket_scales
        ks[na:, ma:] = other.ket_scales
        bs[:na, :ma] = self.bra_scales
        bs[na:, ma:] = other.bra_scales
        Q = np.zeros((ma + mb, ma + mb), complex)
        Q[:ma, :ma] = self.phase_quad
        Q[ma:, ma:] = other.phase_quad
        return ThermalKernel._raw(
            variances=np.concatenate([self.variances, other.variances]),
            centers=np.concatenate([self.centers, other.centers]),
            ket_scales=ks, bra_scales=bs,
            ket_offsets=np.concatenate([self.ket_offsets, other.ket_offsets]),
            bra_offsets=np.concatenate([self.bra_offsets, other.bra_offsets]),
            weight=self.weight * other.weight,
            phase_quad=Q,
            phase_lin_z=np.concatenate([self.phase_lin_z, other.phase_lin_z]),
            phase_lin_zbar=np.concatenate([self.phase_lin_zbar, other.phase_lin_zbar]),
            phase_const=self.phase_const + other.phase_const)

    def allclose(self, other: "ThermalKernel", atol: float = 0.0) -> bool:
        if self.n_modes != other.n_modes or self.n_vars != other.n_vars:
            return False
        pairs = [
            (self.variances, other.variances),
            (self.ket_scales, other.ket_scales),
            (self.bra_scales, other.bra_scales),
            (self.ket_offsets, other.ket_offsets),
            (self.bra_offsets, other.bra_offsets),
            (np.array([self.weight]), np.array([other.weight])),
            (self.phase_quad, other.phase_quad),
            (self.phase_lin_z, other.phase_lin_z),
            (self.phase_lin_zbar, other.phase_lin_zbar),
            (np.array([self.phase_const]), np.array([other.phase_const])),
        ]
        return all(np.allclose(a, b, rtol=0.0, atol=atol) for a, b in pairs)

    def __repr__(self) -> str:
        return (f"ThermalKernel(modes={self.n_modes}, vars={self.n_vars}, "
                f"weight={self.weight:.6g})")


def kernel_product(*kernels: ThermalKernel) -> ThermalKernel:
    """Fuse independent-variable kernels acting on the same mode set.

    Coherent amplitudes add: the product of factors with amplitudes
    L1 z1 + s1 and L2 z2 + s2 is a kernel whose mode-i ket amplitude is
    L1[i] z1 + L2[i] z2 + s1[i] + s2[i].
    """
    if not kernels:
        raise ValueError("need at least one kernel")
    out = kernels[0]
    for k in kernels[1:]:
        if k.n_modes != out.n_modes:
            raise ValueError("kernel_product requires a common mode count")
        ma, mb = out.n_vars, k.n_vars
        Q = np.zeros((ma + mb, ma + mb), complex)
        Q[:ma, :ma] = out.phase_quad
        Q[ma:, ma:] = k.phase_quad
        out = ThermalKernel._raw(
            variances=np.concatenate([out.variances, k.variances]),
            centers=np.concatenate([out.centers, k.centers]),
            ket_scales=np.hstack([out.ket_scales, k.ket_scales]),
            bra_scales=np.hstack([out.bra_scales, k.bra_scales]),
            ket_offsets=out.ket_offsets + k.ket_offsets,
            bra_offsets=out.bra_offsets + k.bra_offsets,
            weight=out.weight * k.weight,
            phase_quad=Q,
            phase_lin_z=np.concatenate([out.phase_lin_z, k.phase_lin_z]),
            phase_lin_zbar=np.concatenate([out.phase_lin_zbar, k.phase_lin_zbar]),
            phase_const=out.phase_const + k.phase_const)
    return out


# --------------------------------------------------------------------------
# Gaussian integration engine
# --------------------------------------------------------------------------
#
# Holomorphic master formula, verified against brute-force quadrature:
#   integral prod_k (d^2z_k/pi) exp(-zbar^T A z + p^T z + q^T zbar + c)
#     = det(A)^(-1) exp(p^T A^(-1) q + c),
# valid when the Hermitian part of A is positive definite. It applies to
# every quantity here except quadrature marginals (those generate z^2 and
# zbar^2 terms and use the real-variable formula further down).


def _holomorphic_integral(A, p, q, c):
    """det(A)^-1 exp(p^T A^-1 q + c); A may be 0x0 (empty integral)."""
    if A.shape[0] == 0:
        return np.exp(c)
    det = np.linalg.det(A)
    sol = np.linalg.solve(A, q)
    return np.exp(p @ sol + c) / det


def kernel_trace(kernel: ThermalKernel) -> complex:
    """Exact trace: thermal average of the dyadic overlaps <v|u>."""
    if kernel._trace_cache is not None:
        return kernel._trace_cache
    nb = kernel.nbars
    L, R = kernel.ket_scales, kernel.bra_scales
    s, t = kernel.ket_offsets, kernel.bra_offsets
    Q = kernel.phase_quad
    a, b = kernel.phase_lin_z, kernel.phase_lin_zbar
    Lc, Rc = L.conj(), R.conj()
    A = (np.diag(1.0 / nb) if nb.size else np.zeros((0, 0), complex))
    A = A + 0.5 * (Lc.T @ L) + 0.5 * (Rc.T @ R) - (Rc.T @ L) - Q
    p = a - 0.5 * (L.T @ s.conj()) - 0.5 * (R.T @ t.conj()) + (L.T @ t.conj())
    q = b - 0.5 * (Lc.T @ s) - 0.5 * (Rc.T @ t) + (Rc.T @ s)
    c = (kernel.phase_const
         - 0.5 * (np.vdot(s, s) + np.vdot(t, t))
         + t.conj() @ s)
    pref = kernel.weight * float(np.prod(1.0 / nb)) if nb.size else kernel.weight
    val = pref * _holomorphic_integral(A, p, q, c)
    kernel._trace_cache = complex(val)
    return kernel._trace_cache


@dataclass
class ComplexGaussianExponent:
    """Exponent of one Wigner term: E(b) = bbar^T M b + lz^T b + lzb^T bbar + c.

    The multiplicative prefactor is folded into the constant, so the term
    value is exp(E); nothing is exponentiated until the whole exponent is
    assembled. Real-coordinate views (quadratic/linear/constant over the
    2n coordinates x_i = Re b_i, y_i = Im b_i) are provided for callers
    that want a plain quadratic form.
    """

    bilinear: np.ndarray
    lin_z: np.ndarray
    lin_zbar: np.ndarray
    const: complex

    @property
    def n_modes(self) -> int:
        return self.bilinear.shape[0]

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Exponent values at an (N, n) array of complex points."""
        P = np.atleast_2d(_carr(points))
        Pc = P.conj()
        out = np.einsum("ij,ai,aj->a", self.bilinear, Pc, P)
        out += P @ self.lin_z + Pc @ self.lin_zbar + self.const
        return out

    @property
    def quadratic(self) -> np.ndarray:
        n = self.n_modes
        K = np.zeros((2 * n, 2 * n), complex)
        M = self.bilinear
        for j in range(n):
            for k in range(n):
                # bbar_j b_k = (x_j - i y_j)(x_k + i y_k)
                K[2 * j, 2 * k] += M[j, k]
                K[2 * j + 1, 2 * k + 1] += M[j, k]
                K[2 * j, 2 * k + 1] += 1j * M[j, k]
                K[2 * j + 1, 2 * k] += -1j * M[j, k]
        return 0.5 * (K + K.T)

    @property
    def linear(self) -> np.ndarray:
        n = self.n_modes
        g = np.zeros(2 * n, complex)
        g[0::2] = self.lin_z + self.lin_zbar
        g[1::2] = 1j * (self.lin_z - self.lin_zbar)
        return g

    @property
    def constant(self) -> complex:
        return self.const


def _wigner_exponent(kernel: ThermalKernel) -> ComplexGaussianExponent | None:
    """Integrate the kernel variables out of the dyadic Wigner product.

    Returns None for a weight-zero kernel. Uses
    W_{|u><v|}(b) = (2/pi) exp(-|u|^2/2 - |v|^2/2 + vbar u
                               - 2(b - u)(bbar - vbar))
    per mode and the holomorphic master formula over the kernel variables.
    """
    if kernel._wig_cache is not None:
        return kernel._wig_cache
    if kernel.weight == 0:
        return None
    nb = kernel.nbars
    n = kernel.n_modes
    L, R = kernel.ket_scales, kernel.bra_scales
    s, t = kernel.ket_offsets, kernel.bra_offsets
    Lc, Rc = L.conj(), R.conj()
    Q = kernel.phase_quad
    a, b = kernel.phase_lin_z, kernel.phase_lin_zbar
    A = (np.diag(1.0 / nb) if nb.size else np.zeros((0, 0), complex))
    A = A + 0.5 * (Lc.T @ L) + 0.5 * (Rc.T @ R) + (Rc.T @ L) - Q
    p0 = a - 0.5 * (L.T @ s.conj()) - 0.5 * (R.T @ t.conj()) - (L.T @ t.conj())
    q0 = b - 0.5 * (Lc.T @ s) - 0.5 * (Rc.T @ t) - (Rc.T @ s)
    c0 = (kernel.phase_const
          - 0.5 * (np.vdot(s, s) + np.vdot(t, t))
          - t.conj() @ s)
    if A.shape[0]:
        det = np.linalg.det(A)
        G = np.linalg.inv(A)
        M = 4.0 * (L @ G @ Rc.T) - 2.0 * np.eye(n)
        lin_z = 2.0 * (Rc @ (G.T @ p0)) + 2.0 * t.conj()
        lin_zbar = 2.0 * (L @ (G @ q0)) + 2.0 * s
        c0 = c0 + p0 @ (G @ q0)
        pref = kernel.weight * (2.0 / math.pi) ** n * np.prod(1.0 / nb) / det
    else:
        M = -2.0 * np.eye(n)
        lin_z = 2.0 * t.conj()
        lin_zbar = 2.0 * s
        pref = kernel.weight * (2.0 / math.pi) ** n
    exp = ComplexGaussianExponent(M, lin_z, lin_zbar, c0 + cmath.log(pref))
    kernel._wig_cache = exp
    return exp


def kernel_wigner(kernel: ThermalKernel, point) -> complex:
    """Closed-form Wigner value of one kernel at a point (n complex numbers)."""
    exp = _wigner_exponent(kernel)
    if exp is None:
        return 0.0 + 0.0j
    pt = np.atleast_1d(_carr(point))
    if pt.size != kernel.n_modes:
        raise ValueError("point length must equal the kernel mode count")
    return complex(np.exp(exp.evaluate(pt[None, :])[0]))


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------


@dataclass
class PhaseSpaceState:
    """Weighted kernel sum over a fixed number of modes.

    Physical states keep Hermiticity by containing, for every term, its
    conjugate partner (possibly itself); constructors are responsible for
    that pairing, and state_wigner enforces it numerically.
    """

    modes: int
    terms: list
    trace_cache: complex | None = None

    @classmethod
    def from_terms(cls, terms) -> "PhaseSpaceState":
        terms = list(terms)
        if not terms:
            raise ValueError("a state needs at least one term")
        n = terms[0].n_modes
        for k in terms:
            if k.n_modes != n:
                raise ValueError("all terms must share the mode count")
        return cls(modes=n, terms=terms)

    def trace(self) -> complex:
        if self.trace_cache is None:
            self.trace_cache = sum(kernel_trace(k) for k in self.terms)
        return self.trace_cache

    def normalize(self) -> "PhaseSpaceState":
        tr = self.trace()
        if abs(tr) == 0.0:
            raise ValueError("cannot normalize a trace-zero state")
        if abs(tr.imag) > 1e-9 * max(1.0, abs(tr.real)):
            raise ValueError(f"trace is not real: {tr}")
        out = PhaseSpaceState(
            self.modes, [k.scaled(1.0 / tr.real) for k in self.terms])
        out.trace_cache = 1.0 + 0.0j
        return out

    def scaled(self, factor: complex) -> "PhaseSpaceState":
        out = PhaseSpaceState(self.modes, [k.scaled(factor) for k in self.terms])
        if self.trace_cache is not None:
            out.trace_cache = self.trace_cache * factor
        return out

    def adjoint(self) -> "PhaseSpaceState":
        return PhaseSpaceState(self.modes, [k.adjoint() for k in self.terms])

    def __add__(self, other: "PhaseSpaceState") -> "PhaseSpaceState":
        if self.modes != other.modes:
            raise ValueError("mode mismatch")
        return PhaseSpaceState(self.modes, self.terms + other.terms)

    def tensor(self, other: "PhaseSpaceState") -> "PhaseSpaceState":
        terms = [a.tensor(b) for a in self.terms for b in other.terms]
        return PhaseSpaceState(self.modes + other.modes, terms)

    def wigner(self, point) -> float:
        return state_wigner(self, point)


def state_wigner(state: PhaseSpaceState, point) -> float:
    """Real Wigner value; raises if the term list is not Hermitian-paired."""
    vals = _wigner_batch(state, np.atleast_1d(_carr(point))[None, :])
    return float(vals[0])


def _wigner_batch(state: PhaseSpaceState, points: np.ndarray) -> np.ndarray:
    total = np.zeros(points.shape[0], complex)
    with np.errstate(over="raise", invalid="raise"):
        for k in state.terms:
            exp = _wigner_exponent(k)
            if exp is None:
                continue
            total += np.exp(exp.evaluate(points))
    bad = np.max(np.abs(total.imag)) if total.size else 0.0
    if bad > 1e-10:
        raise ValueError(f"Wigner imaginary residue {bad:.3e}: malformed term list")
    return total.real


def wigner_evaluator(state: PhaseSpaceState, complex_output: bool = False):
    """Vectorized Wigner closure: pts (N, n) complex -> (N,) real.

    Stacks the per-term exponents once; meant for optimizer hot loops.
    complex_output keeps the raw complex sum, which is what operator-valued
    blocks of qubit-field states need (a lone block is not hermitian).
    """
    exps = [e for e in (_wigner_exponent(k) for k in state.terms) if e is not None]
    if not exps:
        dt = complex if complex_output else float
        return lambda points: np.zeros(np.atleast_2d(points).shape[0], dtype=dt)
    M = np.stack([e.bilinear for e in exps])
    lz = np.stack([e.lin_z for e in exps])
    lzb = np.stack([e.lin_zbar for e in exps])
    cs = np.array([e.const for e in exps])

    def evaluate(points: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(_carr(points))
        Pc = P.conj()
        E = np.einsum("tij,ai,aj->at", M, Pc, P, optimize=True)
        E += P @ lz.T + Pc @ lzb.T + cs
        total = np.exp(E).sum(axis=1)
        return total if complex_output else total.real

    return evaluate


# --------------------------------------------------------------------------
# Gaussian-unitary maps and parity
# --------------------------------------------------------------------------


def _bs_matrix(theta: float, phi: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, np.exp(1j * phi) * s],
                     [-np.exp(-1j * phi) * s, c]])


def _kernel_beam_splitter(k: ThermalKernel, i: int, j: int,
                          theta: float, phi: float) -> ThermalKernel:
    U = _bs_matrix(theta, phi)
    ks = k.ket_scales.copy()
    bs = k.bra_scales.copy()
    so = k.ket_offsets.copy()
    to = k.bra_offsets.copy()
    ks[[i, j], :] = U @ ks[[i, j], :]
    bs[[i, j], :] = U @ bs[[i, j], :]
    so[[i, j]] = U @ so[[i, j]]
    to[[i, j]] = U @ to[[i, j]]
    return k._replace(ket_scales=ks, bra_scales=bs, ket_offsets=so, bra_offsets=to)


def apply_beam_splitter(state: PhaseSpaceState, mode_i: int, mode_j: int,
                        theta: float, phi: float = 0.0) -> PhaseSpaceState:
    """Two-mode mixing: coherent amplitudes (u_i, u_j) map through
    [[cos(t/2), e^{i phi} sin(t/2)], [-e^{-i phi} sin(t/2), cos(t/2)]];
    the 50:50 case (theta=pi/2, phi=0) sends |a>|0> to |a/rt2>|-a/rt2>.
    """
    n = state.modes
    if not (0 <= mode_i < n and 0 <= mode_j < n) or mode_i == mode_j:
        raise ValueError("beam splitter needs two distinct in-range modes")
    out = PhaseSpaceState(
        n, [_kernel_beam_splitter(k, mode_i, mode_j, theta, phi) for k in state.terms])
    out.trace_cache = state.trace_cache
    return out


def _unit_phase(phi: float) -> complex:
    """exp(i phi), snapped exactly onto the axes when phi hits a multiple of
    pi/2 (so pi-valued rotations stay exactly real instead of -1 + 1.2e-16j)."""
    f = complex(math.cos(phi), math.sin(phi))
    if abs(f.real) < 2.5e-16:
        return complex(0.0, math.copysign(1.0, f.imag))
    if abs(f.imag) < 2.5e-16:
        return complex(math.copysign(1.0, f.real), 0.0)
    return f


def _kernel_phase_shift(k: ThermalKernel, mode: int, phi: float,
                        ket: bool, bra: bool) -> ThermalKernel:
    f = _unit_phase(phi)
    kw = {}
    if ket:
        ks = k.ket_scales.copy(); ks[mode, :] *= f
        so = k.ket_offsets.copy(); so[mode] *= f
        kw["ket_scales"] = ks; kw["ket_offsets"] = so
    if bra:
        # bra scales are stored unconjugated, so the same factor applies
        bs = k.bra_scales.copy(); bs[mode, :] *= f
        to = k.bra_offsets.copy(); to[mode] *= f
        kw["bra_scales"] = bs; kw["bra_offsets"] = to
    return k._replace(**kw)


def apply_phase_shift(state: PhaseSpaceState, mode: int, phi: float,
                      ket: bool = True, bra: bool = True) -> PhaseSpaceState:
    """e^{i phi n} rho e^{-i phi n}; the ket/bra flags give the one-sided
    products needed for controlled rotations of operator blocks."""
    if not 0 <= mode < state.modes:
        raise ValueError("mode out of range")
    out = PhaseSpaceState(
        state.modes,
        [_kernel_phase_shift(k, mode, phi, ket, bra) for k in state.terms])
    if ket and bra:
        out.trace_cache = state.trace_cache
    return out


def _kernel_displacement(k: ThermalKernel, mode: int, gamma: complex) -> ThermalKernel:
    # D(g)|u><v|D(g)^dag = exp[(g ubar - gbar u + gbar v - g vbar)/2]
    #                      |u+g><v+g|
    g = complex(gamma)
    Li = k.ket_scales[mode, :]
    Ri = k.bra_scales[mode, :]
    si = k.ket_offsets[mode]
    ti = k.bra_offsets[mode]
    a = k.phase_lin_z + 0.5 * np.conj(g) * (Ri - Li)
    b = k.phase_lin_zbar + 0.5 * g * (Li.conj() - Ri.conj())
    c = k.phase_const + 0.5 * (g * np.conj(si) - np.conj(g) * si
                               + np.conj(g) * ti - g * np.conj(ti))
    so = k.ket_offsets.copy(); so[mode] += g
    to = k.bra_offsets.copy(); to[mode] += g
    return k._replace(ket_offsets=so, bra_offsets=to,
                      phase_lin_z=a, phase_lin_zbar=b, phase_const=c)


def apply_displacement(state: PhaseSpaceState, mode: int, gamma: complex) -> PhaseSpaceState:
    if not 0 <= mode < state.modes:
        raise ValueError("mode out of range")
    out = PhaseSpaceState(
        state.modes, [_kernel_displacement(k, mode, gamma) for k in state.terms])
    out.trace_cache = state.trace_cache
    return out


def _kernel_parity(k: ThermalKernel, mode: int, ket: bool, bra: bool) -> ThermalKernel:
    kw = {}
    if ket:
        ks = k.ket_scales.copy(); ks[mode, :] *= -1.0
        so = k.ket_offsets.copy(); so[mode] *= -1.0
        kw["ket_scales"] = ks; kw["ket_offsets"] = so
    if bra:
        bs = k.bra_scales.copy(); bs[mode, :] *= -1.0
        to = k.bra_offsets.copy(); to[mode] *= -1.0
        kw["bra_scales"] = bs; kw["bra_offsets"] = to
    return k._replace(**kw)


def apply_parity(state: PhaseSpaceState, mode: int,
                 ket: bool = True, bra: bool = True) -> PhaseSpaceState:
    """Photon-number parity on one mode; ket/bra flags give the one-sided
    products needed to build (1 +/- Pi)/2 projections."""
    out = PhaseSpaceState(
        state.modes, [_kernel_parity(k, mode, ket, bra) for k in state.terms])
    if ket and bra:
        out.trace_cache = None
    return out


# --------------------------------------------------------------------------
# partial trace
# --------------------------------------------------------------------------


def _kernel_absorb_mode(k: ThermalKernel, i: int) -> ThermalKernel:
    """Multiply in <v_i|u_i> and delete mode i from the dyadic arrays."""
    Li = k.ket_scales[i, :]
    Ri = k.bra_scales[i, :]
    si = k.ket_offsets[i]
    ti = k.bra_offsets[i]
    Q = (k.phase_quad
         + np.outer(Ri.conj(), Li)
         - 0.5 * np.outer(Li.conj(), Li)
         - 0.5 * np.outer(Ri.conj(), Ri))
    a = k.phase_lin_z + np.conj(ti) * Li - 0.5 * np.conj(si) * Li - 0.5 * np.conj(ti) * Ri
    b = k.phase_lin_zbar + si * Ri.conj() - 0.5 * si * Li.conj() - 0.5 * ti * Ri.conj()
    c = k.phase_const + np.conj(ti) * si - 0.5 * (abs(si) ** 2 + abs(ti) ** 2)
    keep = [m for m in range(k.n_modes) if m != i]
    return k._replace(
        ket_scales=k.ket_scales[keep, :], bra_scales=k.bra_scales[keep, :],
        ket_offsets=k.ket_offsets[keep], bra_offsets=k.bra_offsets[keep],
        phase_quad=Q, phase_lin_z=a, phase_lin_zbar=b, phase_const=c)


def _kernel_simplify(k: ThermalKernel) -> ThermalKernel:
    """Integrate out variables that no longer touch any dyadic amplitude."""
    m = k.n_vars
    if m == 0:
        return k
    live = (np.abs(k.ket_scales).max(axis=0) > 0) | (np.abs(k.bra_scales).max(axis=0) > 0)
    if live.all():
        return k
    D = np.where(~live)[0]
    K = np.where(live)[0]
    nb = k.nbars
    Q = k.phase_quad
    A_dd = np.diag(1.0 / nb[D]) - Q[np.ix_(D, D)]
    det = np.linalg.det(A_dd)
    G = np.linalg.inv(A_dd)
    aD, bD = k.phase_lin_z[D], k.phase_lin_zbar[D]
    Q_KD, Q_DK = Q[np.ix_(K, D)], Q[np.ix_(D, K)]
    newQ = Q[np.ix_(K, K)] + Q_KD @ G @ Q_DK
    newa = k.phase_lin_z[K] + Q_DK.T @ (G.T @ aD)
    newb = k.phase_lin_zbar[K] + Q_KD @ (G @ bD)
    newc = k.phase_const + aD @ (G @ bD)
    w = k.weight * np.prod(1.0 / nb[D]) / det
    return ThermalKernel._raw(
        variances=k.variances[K], centers=k.centers[K],
        ket_scales=k.ket_scales[:, K], bra_scales=k.bra_scales[:, K],
        ket_offsets=k.ket_offsets, bra_offsets=k.bra_offsets,
        weight=w, phase_quad=newQ, phase_lin_z=newa, phase_lin_zbar=newb,
        phase_const=newc)


def partial_trace(state: PhaseSpaceState, keep) -> PhaseSpaceState:
    """Analytic partial trace keeping the listed modes (in their given order
    relative to the original indexing)."""
    keep = sorted(set(int(m) for m in keep))
    if any(m < 0 or m >= state.modes for m in keep):
        raise ValueError("keep modes out of range")
    drop = [m for m in range(state.modes) if m not in keep]
    terms = []
    for k in state.terms:
        for i in sorted(drop, reverse=True):
            k = _kernel_absorb_mode(k, i)
        terms.append(_kernel_simplify(k))
    return PhaseSpaceState(len(keep), terms)


# --------------------------------------------------------------------------
# Hilbert-Schmidt overlaps
# --------------------------------------------------------------------------


def _pair_trace(ka: ThermalKernel, kb: ThermalKernel) -> complex:
    """Tr[K_a K_b] over the joint variable set, in closed form."""
    n = ka.n_modes
    La, Ra = ka.ket_scales, ka.bra_scales
    Lb, Rb = kb.ket_scales, kb.bra_scales
    sa, ta = ka.ket_offsets, ka.bra_offsets
    sb, tb = kb.ket_offsets, kb.bra_offsets
    nba, nbb = ka.nbars, kb.nbars
    ma, mb = ka.n_vars, kb.n_vars
    A = np.zeros((ma + mb, ma + mb), complex)
    # Tr[|ua><va| |ub><vb|] = <va|ub><vb|ua> per mode, summed exponents
    A[:ma, :ma] = ((np.diag(1.0 / nba) if ma else 0)
                   + 0.5 * (La.conj().T @ La) + 0.5 * (Ra.conj().T @ Ra)
                   - ka.phase_quad)
    A[ma:, ma:] = ((np.diag(1.0 / nbb) if mb else 0)
                   + 0.5 * (Lb.conj().T @ Lb) + 0.5 * (Rb.conj().T @ Rb)
                   - kb.phase_quad)
    A[:ma, ma:] = -(Ra.conj().T @ Lb)
    A[ma:, :ma] = -(Rb.conj().T @ La)
    p = np.concatenate([
        ka.phase_lin_z - 0.5 * (La.T @ sa.conj()) - 0.5 * (Ra.T @ ta.conj())
        + La.T @ tb.conj(),
        kb.phase_lin_z - 0.5 * (Lb.T @ sb.conj()) - 0.5 * (Rb.T @ tb.conj())
        + Lb.T @ ta.conj()])
    q = np.concatenate([
        ka.phase_lin_zbar - 0.5 * (La.conj().T @ sa) - 0.5 * (Ra.conj().T @ ta)
        + Ra.conj().T @ sb,
        kb.phase_lin_zbar - 0.5 * (Lb.conj().T @ sb) - 0.5 * (Rb.conj().T @ tb)
        + Rb.conj().T @ sa])
    c = (ka.phase_const + kb.phase_const
         - 0.5 * (np.vdot(sa, sa) + np.vdot(ta, ta) + np.vdot(sb, sb) + np.vdot(tb, tb))
         + ta.conj() @ sb + tb.conj() @ sa)
    pref = ka.weight * kb.weight
    if ma:
        pref *= np.prod(1.0 / nba)
    if mb:
        pref *= np.prod(1.0 / nbb)
    return complex(pref * _holomorphic_integral(A, p, q, c))


def hs_overlap(state_a: PhaseSpaceState, state_b: PhaseSpaceState) -> float:
    """Tr[rho_a rho_b], symmetric; equals purity when both args coincide."""
    if state_a.modes != state_b.modes:
        raise ValueError("mode mismatch")
    val = sum(_pair_trace(ka, kb) for ka in state_a.terms for kb in state_b.terms)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise ValueError(f"overlap not real: {val}")
    return float(val.real)


# --------------------------------------------------------------------------
# marginals (real-variable Gaussian integrals in extended precision)
# --------------------------------------------------------------------------


def _lu_solve_det(M: np.ndarray, B: np.ndarray):
    """Gaussian elimination with partial pivoting for tiny matrices in any
    complex dtype (LAPACK has no extended-precision path). Returns
    (det, solution)."""
    n = M.shape[0]
    if n == 0:
        return M.dtype.type(1.0), B.copy()
    A = M.copy()
    X = B.copy()
    det = M.dtype.type(1.0)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        if A[piv, col] == 0:
            raise np.linalg.LinAlgError("singular matrix in marginal assembly")
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
            X[[col, piv]] = X[[piv, col]]
            det = -det
        det *= A[col, col]
        inv = 1.0 / A[col, col]
        for r in range(col + 1, n):
            f = A[r, col] * inv
            if f != 0:
                A[r, col + 1:] -= f * A[col, col + 1:]
                X[r] -= f * X[col]
    for col in range(n - 1, -1, -1):
        X[col] /= A[col, col]
        for r in range(col):
            X[r] -= A[r, col] * X[col]
    return det, X


def _inv_sqrt_det(M: np.ndarray, det) -> complex:
    """det(M)^(-1/2) with the product-of-principal-roots branch.

    M is complex symmetric with positive-definite real part, so its
    eigenvalues sit in the right half plane and each takes a principal
    square root; the total phase can still exceed pi, which is why the
    naive principal root of det would be wrong. Phase comes from a
    double-precision eigendecomposition, magnitude from the exact det.
    """
    if M.shape[0] == 0:
        return 1.0 + 0.0j
    lam = np.linalg.eigvals(M.astype(complex))
    phase = -0.5 * np.sum(np.angle(lam))
    mag = np.abs(det) ** -0.5
    return mag * np.exp(1j * np.longdouble(phase))


@dataclass
class GaussianMixture1D:
    """Density P(x) = Re sum_t coef_t exp(quad_t x^2 + lin_t x + const_t).

    Coefficients are clongdouble: the assembly cancels exponent pieces of
    order d^2 and double precision is not enough at the displacements this
    library is asked about.
    """

    coefs: np.ndarray
    quads: np.ndarray
    lins: np.ndarray
    consts: np.ndarray

    def __post_init__(self):
        self.coefs = np.asarray(self.coefs, np.clongdouble)
        self.quads = np.asarray(self.quads, np.clongdouble)
        self.lins = np.asarray(self.lins, np.clongdouble)
        self.consts = np.asarray(self.consts, np.clongdouble)

    @property
    def n_terms(self) -> int:
        return self.coefs.size

    def __call__(self, x) -> np.ndarray:
        xs = np.asarray(x, np.longdouble)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        out = np.zeros(xs.size, np.clongdouble)
        logc = np.log(self.coefs)
        for start in range(0, xs.size, 65536):
            seg = xs[start:start + 65536, None]
            E = self.quads * seg * seg + self.lins * seg + self.consts + logc
            out[start:start + 65536] = np.exp(E).sum(axis=1)
        res = np.asarray(out.real, float)
        return float(res[0]) if scalar else res

    def _masses(self) -> np.ndarray:
        # per-term integral: coef sqrt(pi/-a) exp(c - b^2/(4a))
        a, b, c = self.quads, self.lins, self.consts
        return self.coefs * np.sqrt(np.pi / -a) * np.exp(c - b * b / (4.0 * a))

    def integral(self) -> float:
        return float(np.sum(self._masses()).real)

    def mean(self) -> float:
        m = self._masses()
        mu = -self.lins / (2.0 * self.quads)
        return float(np.sum(m * mu).real / np.sum(m).real)

    def variance(self) -> float:
        m = self._masses()
        mu = -self.lins / (2.0 * self.quads)
        second = np.sum(m * (mu * mu - 1.0 / (2.0 * self.quads))).real
        tot = np.sum(m).real
        mean = np.sum(m * mu).real / tot
        return float(second / tot - mean * mean)

    def cdf(self, x) -> np.ndarray:
        """integral_{-inf}^{x} P; complex-erf form with exponents combined
        before any exponentiation."""
        xs = np.atleast_1d(np.asarray(x, np.longdouble))
        scalar = np.asarray(x).ndim == 0
        a, b, c = self.quads, self.lins, self.consts
        r = np.sqrt(-a)
        mu = -b / (2.0 * a)
        base = np.log(self.coefs) + 0.5 * (np.log(np.pi) - np.log(-a)) + c - b * b / (4.0 * a)
        out = np.zeros(xs.size, np.clongdouble)
        for t in range(a.size):
            w = r[t] * (xs - mu[t])
            flip = w.real < 0
            wf = np.where(flip, -w, w)
            # erfc(w) = exp(-w^2) wofz(iw); combine exponents first
            ln_tail = -wf * wf + base[t]
            tail = np.exp(ln_tail) * wofz(1j * wf.astype(complex))
            full = np.exp(base[t])
            # cdf term = full - 0.5 full erfc(w) ; with erfc(-w) = 2 - erfc(w)
            vals = np.where(flip, 0.5 * tail, full - 0.5 * tail)
            out += vals
        res = np.asarray(out.real, float)
        return float(res[0]) if scalar else res

    def envelope_windows(self):
        """Per-term (center, halfwidth) of the Gaussian envelopes.

        |exp(a x^2 + b x + c)| peaks where Re(a) x^2 + Re(b) x is
        stationary; the complex critical point -b/(2a) is somewhere else
        entirely once a has an imaginary part.
        """
        mu = (-self.lins.real / (2.0 * self.quads.real)).astype(float)
        w = (1.0 / np.sqrt(-2.0 * self.quads.real)).astype(float)
        return mu, w

    def oscillation(self):
        """(frequency, mass_rank) of the dominant oscillatory component.

        Frequency is |Im(2a x_env + b)| of the heaviest term whose phase
        advances by more than a radian across its own envelope; zero when
        no term oscillates (no fringes).
        """
        a, b = self.quads, self.lins
        mu, w = self.envelope_windows()
        freq = np.abs((2.0 * a * mu + b).imag).astype(float)
        mass = np.abs(self._masses()).astype(float)
        osc = freq * 2.0 * w > 1.0
        if not np.any(osc):
            return 0.0, None
        idx = int(np.argmax(np.where(osc, mass, -np.inf)))
        return float(freq[idx]), idx

    def scaled_abscissa(self, factor: float) -> "GaussianMixture1D":
        """Density of y = x/factor (i.e. P'(y) = factor * P(factor*y))."""
        f = np.clongdouble(factor)
        return GaussianMixture1D(
            coefs=self.coefs * f, quads=self.quads * f * f,
            lins=self.lins * f, consts=self.consts)


def marginal_distribution(state: PhaseSpaceState, mode: int = 0,
                          quadrature_angle: float = 0.0,
                          convention: QuadratureConvention = DEFAULT_CONVENTION
                          ) -> GaussianMixture1D:
    """Exact quadrature marginal of one mode as a 1-D Gaussian mixture.

    Remaining modes are traced out analytically. The angle-theta quadrature
    of the X convention (SYMMETRIC) is measured by rotating the mode by
    -theta and projecting onto |x><x| eigenstates, for which
    <x|u> = pi^(-1/4) exp(-x^2/2 + sqrt(2) u x - u^2/2 - |u|^2/2).
    """
    if not 0 <= mode < state.modes:
        raise ValueError("mode out of range")
    reduced = partial_trace(state, [mode]) if state.modes > 1 else state
    if quadrature_angle != 0.0:
        reduced = apply_phase_shift(reduced, 0, -quadrature_angle)
    coefs, quads, lins, consts = [], [], [], []
    for k in reduced.terms:
        co, qu, li, cn = _marginal_term(k)
        coefs.append(co); quads.append(qu); lins.append(li); consts.append(cn)
    mix = GaussianMixture1D(np.array(coefs, np.clongdouble),
                            np.array(quads, np.clongdouble),
                            np.array(lins, np.clongdouble),
                            np.array(consts, np.clongdouble))
    if convention is QuadratureConvention.ALPHA_REAL:
        # x = Re alpha = X/sqrt(2)
        mix = mix.scaled_abscissa(_SQRT2)
    return mix


def _marginal_term(k: ThermalKernel):
    """Coefficient and exponent polynomial of one kernel's x-density term.

    Integrates the kernel variables in real coordinates, since the position
    projection introduces holomorphic u^2 and antiholomorphic vbar^2 pieces
    that the mixed-only master formula cannot absorb. All in clongdouble.
    """
    cd = np.clongdouble
    m = k.n_vars
    l = k.ket_scales[0, :].astype(np.clongdouble)
    r = k.bra_scales[0, :].astype(np.clongdouble)
    s = cd(k.ket_offsets[0])
    t = cd(k.bra_offsets[0])
    nb = k.nbars.astype(np.longdouble)
    Q = k.phase_quad.astype(np.clongdouble)
    av = k.phase_lin_z.astype(np.clongdouble)
    bv = k.phase_lin_zbar.astype(np.clongdouble)
    cph = cd(k.phase_const)
    rc = r.conj()
    lc = l.conj()
    tc = t.conj()
    sc = s.conj()

    # exponent pieces in z, zbar (see docstring of marginal_distribution):
    #   -x^2 + sqrt2 (u + vbar) x - (u^2 + vbar^2)/2 - (|u|^2 + |v|^2)/2
    # with u = l.z + s, vbar = rc.zbar + tc; measure -|z_k|^2/nbar_k; plus
    # the accumulated phase. Convert to 2m real coordinates (all x, all y).
    if m:
        # quadratic coefficient matrix C over u=(x_1..x_m, y_1..y_m):
        # exponent contains u^T C u; master formula wants -1/2 u^T Mm u.
        C = np.zeros((2 * m, 2 * m), np.clongdouble)
        X = slice(0, m), slice(0, m)
        XY = slice(0, m), slice(m, 2 * m)
        YX = slice(m, 2 * m), slice(0, m)
        Y = slice(m, 2 * m), slice(m, 2 * m)

        def add_zz(Mat):      # sum M_jk z_j z_k
            C[X] += Mat; C[Y] -= Mat
            C[XY] += 1j * Mat; C[YX] += 1j * Mat

        def add_zbzb(Mat):    # sum M_jk zbar_j zbar_k
            C[X] += Mat; C[Y] -= Mat
            C[XY] += -1j * Mat; C[YX] += -1j * Mat

        def add_zbz(Mat):     # sum M_jk zbar_j z_k
            C[X] += Mat; C[Y] += Mat
            C[XY] += 1j * Mat; C[YX] += -1j * Mat

        dm = np.diag((-1.0 / nb).astype(np.clongdouble))
        add_zbz(dm + Q - 0.5 * np.outer(lc, l) - 0.5 * np.outer(rc, r))
        add_zz(-0.5 * np.outer(l, l))
        add_zbzb(-0.5 * np.outer(rc, rc))
        C = 0.5 * (C + C.T)
        Mm = -2.0 * C

        b0 = np.zeros(2 * m, np.clongdouble)
        b1 = np.zeros(2 * m, np.clongdouble)

        def add_lin_z(vec):
            b0[:m] += vec; b0[m:] += 1j * vec

        def add_lin_zb(vec):
            b0[:m] += vec; b0[m:] += -1j * vec

        add_lin_z(av - s * l - 0.5 * (sc * l) - 0.5 * (tc * r))
        add_lin_zb(bv - tc * rc - 0.5 * (s * lc) - 0.5 * (t * rc))
        b1[:m] = _SQRT2 * (l + rc)
        b1[m:] = 1j * _SQRT2 * (l - rc)

        det, sols = _lu_solve_det(Mm, np.stack([b0, b1], axis=1))
        g0, g1 = sols[:, 0], sols[:, 1]
        inv_sqrt = _inv_sqrt_det(Mm.astype(complex), det)
        quad = cd(-1.0) + 0.5 * (b1 @ g1)
        lin = (b0 @ g1) + _SQRT2 * (s + tc)
        const = 0.5 * (b0 @ g0)
        coef = (cd(k.weight) / cd(math.sqrt(math.pi))
                * np.prod((2.0 / nb).astype(np.clongdouble))
                * cd(inv_sqrt))
    else:
        quad = cd(-1.0)
        lin = _SQRT2 * (s + tc)
        const = cd(0.0)
        coef = cd(k.weight) / cd(math.sqrt(math.pi))
    const = const + cph - 0.5 * (s * s + tc * tc) - 0.5 * (s * sc + t * tc)
    return coef, quad, lin, const


# --------------------------------------------------------------------------
# fringe diagnostics
# --------------------------------------------------------------------------


@dataclass
class FringeMetrics:
    """Interference readout of a 1-D marginal.

    visibility = (Imax - Imin)/(Imax + Imin) from refined extrema of the
    closed-form density; spacing is the analytic period of the dominant
    oscillatory mixture component (independent of envelope distortion);
    spacing_extrema is the empirical mean distance between adjacent maxima,
    which drifts with envelope curvature and is kept as a diagnostic.
    """

    visibility: float
    spacing: float
    spacing_extrema: float
    has_fringes: bool
    n_maxima: int
    axis: float

    def __iter__(self):
        return iter((self.visibility, self.spacing))


def _refine_extrema(mix: GaussianMixture1D, xs: np.ndarray, vals: np.ndarray,
                    sign: float, xtol: float):
    """Refine all sign-bracketed extrema of sign*P; returns (x, P(x)) lists."""
    f = sign * vals
    idx = np.where((f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:]))[0] + 1
    out = []
    for i in idx:
        res = minimize_scalar(
            lambda u: -sign * mix(u), bounds=(xs[i - 1], xs[i + 1]),
            method="bounded", options={"xatol": xtol})
        out.append((float(res.x), float(mix(float(res.x)))))
    return out


def fringe_metrics(state: PhaseSpaceState, fringe_axis: float,
                   mode: int = 0) -> FringeMetrics:
    """Visibility and spacing of the marginal fringes along a quadrature axis.

    The marginal is taken at angle fringe_axis (X convention). When no
    mixture component oscillates across its own envelope the result is the
    explicit no-fringe value (nan metrics, has_fringes False).
    """
    mix = marginal_distribution(state, mode, fringe_axis)
    freq, idx = mix.oscillation()
    if idx is None:
        return FringeMetrics(float("nan"), float("nan"), float("nan"),
                             False, 0, fringe_axis)
    period = 2.0 * math.pi / freq
    mu, w = mix.envelope_windows()
    x_c = float(mu[idx])
    half = max(25.0 * period, 4.0 * float(np.min(w)))
    half = min(half, 8.0 * float(np.max(w)))
    n = int(min(2_000_001, max(2001, math.ceil(2 * half / period * 33))))
    xs = np.linspace(x_c - half, x_c + half, n)
    vals = mix(xs)
    xtol = period * 1e-12
    maxima = _refine_extrema(mix, xs, vals, +1.0, xtol)
    minima = _refine_extrema(mix, xs, vals, -1.0, xtol)
    if len(maxima) < 2:
        return FringeMetrics(float("nan"), float("nan"), float("nan"),
                             False, len(maxima), fringe_axis)
    mx = sorted(x for x, _ in maxima)
    spacing_emp = float(np.mean(np.diff(mx)))
    # visibility is the modulation depth at the pattern center: the trough
    # between the two tallest fringe peaks, not the vanishing envelope tail
    top = sorted(maxima, key=lambda p: p[1])[-2:]
    imax = top[-1][1]
    lo, hi = sorted((top[0][0], top[1][0]))
    interior = [v for x, v in minima if lo < x < hi]
    if interior:
        imin = min(interior)
    else:
        res = minimize_scalar(lambda u: mix(u), bounds=(lo, hi),
                              method="bounded", options={"xatol": xtol})
        imin = float(mix(float(res.x)))
    vis = (imax - imin) / (imax + imin)
    return FringeMetrics(float(vis), float(period), spacing_emp,
                         True, len(maxima), fringe_axis)


# --------------------------------------------------------------------------
# moments and extrema
# --------------------------------------------------------------------------


@dataclass
class Moments:
    mean_photon: float
    quad_mean: float
    quad_variance: float
    purity: float
    mode: int
    angle: float


def moments(state: PhaseSpaceState, mode: int = 0, angle: float = 0.0) -> Moments:
    """Photon number, quadrature mean/variance at the given angle, purity.

    <n> = (<X^2> + <P^2> - 1)/2 from the two closed-form marginals; purity
    is the Hilbert-Schmidt self-overlap pi^n int W^2.
    """
    mx = marginal_distribution(state, mode, 0.0)
    mp = marginal_distribution(state, mode, math.pi / 2.0)
    x2 = mx.variance() + mx.mean() ** 2
    p2 = mp.variance() + mp.mean() ** 2
    if angle == 0.0:
        ma = mx
    elif angle == math.pi / 2.0:
        ma = mp
    else:
        ma = marginal_distribution(state, mode, angle)
    return Moments(
        mean_photon=float(0.5 * (x2 + p2 - 1.0)),
        quad_mean=ma.mean(), quad_variance=ma.variance(),
        purity=hs_overlap(state, state), mode=mode, angle=angle)


@dataclass
class MinWignerResult:
    point: np.ndarray
    value: float

    def __iter__(self):
        return iter((self.point, self.value))


def min_wigner(target, search_region, grid_points: int | None = None,
               refine_iters: int = 50, value_tol: float = 1e-10) -> MinWignerResult:
    """Most negative Wigner value over a box, grid scan plus simplex polish.

    target: a PhaseSpaceState, or a callable taking an (N, n) complex array
    and returning N real Wigner values. search_region: one (lo, hi) pair
    per real coordinate (Re b_1, Im b_1, Re b_2, ...), so 2n entries for n
    modes. Defaults: 101 points per axis in 2 dimensions, shrunk in higher
    dimensions to keep the scan around 2.5e5 points.
    """
    region = [(float(lo), float(hi)) for lo, hi in search_region]
    dim = len(region)
    if dim % 2 or dim == 0:
        raise ValueError("search_region needs (lo, hi) per real coordinate, 2 per mode")
    n = dim // 2
    if isinstance(target, PhaseSpaceState):
        if target.modes != n:
            raise ValueError("search_region does not match the state's mode count")
        f = wigner_evaluator(target)
    else:
        f = target
    if grid_points is None:
        grid_points = 101 if dim <= 2 else max(5, int(250_000 ** (1.0 / dim)))
    axes = [np.linspace(lo, hi, grid_points) for lo, hi in region]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts_r = np.stack([m.ravel() for m in mesh], axis=1)
    pts = pts_r[:, 0::2] + 1j * pts_r[:, 1::2]
    vals = f(pts)
    order = np.argsort(vals)[: max(3, dim)]
    lows = np.array([lo for lo, _ in region])
    highs = np.array([hi for _, hi in region])

    def cost(u):
        u = np.clip(u, lows, highs)
        return float(f((u[0::2] + 1j * u[1::2])[None, :])[0])

    if float(np.max(np.abs(vals))) < 1e-250:
        warnings.warn("search region carries no Wigner support", stacklevel=2)
    best_u, best_v = pts_r[order[0]], float(vals[order[0]])
    for i in order:
        res = minimize(cost, pts_r[i], method="Nelder-Mead",
                       options={"maxiter": refine_iters * dim, "fatol": value_tol,
                                "xatol": 1e-9})
        if res.fun < best_v:
            best_v, best_u = float(res.fun), np.asarray(res.x)
    point = np.clip(best_u, lows, highs)
    return MinWignerResult(point[0::2] + 1j * point[1::2], best_v)


# --------------------------------------------------------------------------
# temperature map
# --------------------------------------------------------------------------


def temperature_map(V: float) -> float:
    """Dimensionless temperature tau/(hbar nu) of a thermal variance V.

    Solves e^{1/tau} = (V+1)/(V-1). V=1 is exactly zero temperature;
    V < 1 is rejected.
    """
    if V < 1.0:
        raise ValueError("V must be >= 1")
    if V == 1.0:
        return 0.0
    # log1p form: log((V+1)/(V-1)) cancels badly for V >> 1
    return 1.0 / math.log1p(2.0 / (V - 1.0))


def variance_from_temperature(tau: float) -> float:
    """Inverse of temperature_map: V = coth(1/(2 tau)); tau=0 gives V=1."""
    if tau < 0.0:
        raise ValueError("temperature must be >= 0")
    if tau == 0.0:
        return 1.0
    return 1.0 / math.tanh(0.5 / tau)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _c2l(z: complex):
    return [float(np.real(z)), float(np.imag(z))]


def _carr2l(arr: np.ndarray):
    return [[_c2l(z) for z in row] for row in np.atleast_2d(arr)]


def _l2c(pair) -> complex:
    return complex(pair[0], pair[1])


def _l2carr(rows) -> np.ndarray:
    return np.array([[_l2c(p) for p in row] for row in rows], complex)


def state_to_json(state: PhaseSpaceState) -> str:
    """Stable JSON document; complex numbers as [re, im] pairs."""
    doc = {
        "format": "phase-space-state",
        "version": 1,
        "modes": state.modes,
        "terms": [
            {
                "variances": [float(v) for v in k.variances],
                "centers": [_c2l(c) for c in k.centers],
                "ket_scales": _carr2l(k.ket_scales) if k.n_vars else [[] for _ in range(k.n_modes)],
                "bra_scales": _carr2l(k.bra_scales) if k.n_vars else [[] for _ in range(k.n_modes)],
                "ket_offsets": [_c2l(z) for z in k.ket_offsets],
                "bra_offsets": [_c2l(z) for z in k.bra_offsets],
                "weight": _c2l(k.weight),
                "phase_quad": _carr2l(k.phase_quad) if k.n_vars else [],
                "phase_lin_z": [_c2l(z) for z in k.phase_lin_z],
                "phase_lin_zbar": [_c2l(z) for z in k.phase_lin_zbar],
                "phase_const": _c2l(k.phase_const),
            }
            for k in state.terms
        ],
    }
    return json.dumps(doc, sort_keys=True)


def state_from_json(text: str) -> PhaseSpaceState:
    doc = json.loads(text)
    if doc.get("format") != "phase-space-state":
        raise ValueError("not a phase-space-state document")
    if doc.get("version") != 1:
        raise ValueError(f"unsupported version {doc.get('version')}")
    n = int(doc["modes"])
    terms = []
    for td in doc["terms"]:
        m = len(td["variances"])
        ks = (_l2carr(td["ket_scales"]) if m else np.zeros((n, 0), complex))
        bs = (_l2carr(td["bra_scales"]) if m else np.zeros((n, 0), complex))
        pq = (_l2carr(td["phase_quad"]) if m else np.zeros((0, 0), complex))
        terms.append(ThermalKernel._raw(
            variances=np.array(td["variances"], float),
            centers=np.array([_l2c(p) for p in td["centers"]], complex),
            ket_scales=ks.reshape(n, m), bra_scales=bs.reshape(n, m),
            ket_offsets=np.array([_l2c(p) for p in td["ket_offsets"]], complex),
            bra_offsets=np.array([_l2c(p) for p in td["bra_offsets"]], complex),
            weight=_l2c(td["weight"]),
            phase_quad=pq.reshape(m, m),
            phase_lin_z=np.array([_l2c(p) for p in td["phase_lin_z"]], complex),
            phase_lin_zbar=np.array([_l2c(p) for p in td["phase_lin_zbar"]], complex),
            phase_const=_l2c(td["phase_const"])))
    return PhaseSpaceState(n, terms)

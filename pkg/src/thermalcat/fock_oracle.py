"""Truncated number-basis oracle.

Everything here is deliberately brute force: dense matrices, explicit
operators, no phase-space shortcuts. The closed-form kernel algebra is
validated against this module, never the other way around.

States live on a tensor product of subsystems with per-subsystem dimensions
``dims``; field modes are truncated oscillators, control qubits are dim-2
subsystems. Displacements are built by exponentiating the truncated generator
inside a padded space and re-truncating, with the padding certified by a
stability check rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

__all__ = [
    "FockDensityMatrix",
    "thermal_fock",
    "coherent_fock",
    "fock_wigner",
    "fock_wigner_grid",
    "fock_cross_kerr",
    "fock_controlled_kerr",
    "fock_beam_splitter",
    "fock_project",
    "fock_parity",
    "fock_phase_shift",
    "fock_displace",
    "quadrature_density",
    "tensor",
    "partial_trace",
    "expect_n",
    "default_cutoff",
]

_HERM_TOL = 1e-12


def destroy(dim: int) -> np.ndarray:
    """Annihilation operator on a dim-level truncated oscillator."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def default_cutoff(V: float, d: complex) -> int:
    """Cutoff heuristic: mean occupation plus ten standard-deviation-like
    paddings plus a constant floor. Verified afterwards through the
    truncation deficit, never trusted blindly."""
    nbar = (V - 1.0) / 2.0 + abs(d) ** 2
    return int(np.ceil(nbar + 10.0 * np.sqrt(nbar) + 20.0))


@dataclass
class FockDensityMatrix:
    """Dense density matrix over subsystems with dimensions ``dims``.

    truncation_deficit records 1 - trace of the raw construction before
    renormalization; constructions with deficit >= 1e-10 are rejected.
    """

    matrix: np.ndarray
    dims: tuple
    truncation_deficit: float = 0.0

    def __post_init__(self):
        dim = int(np.prod(self.dims))
        if self.matrix.shape != (dim, dim):
            raise ValueError("matrix shape does not match dims")

    @property
    def modes(self) -> int:
        return len(self.dims)

    @property
    def cutoff(self) -> int:
        return self.dims[0] - 1

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def normalized(self) -> "FockDensityMatrix":
        t = self.trace().real
        if t <= 0:
            raise ValueError("non-positive trace")
        return FockDensityMatrix(self.matrix / t, self.dims, self.truncation_deficit)

    def check_physical(self, herm_tol=1e-12, eig_tol=-1e-10):
        h = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if h > herm_tol:
            raise ValueError(f"hermiticity violated: {h:.3e}")
        w = np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))
        if w.min() < eig_tol:
            raise ValueError(f"negative eigenvalue: {w.min():.3e}")
        return self


# ---------------------------------------------------------------------------
# displacement with certified padding

_DISP_CACHE: dict = {}


def _displacement_dense(beta: complex, dim: int) -> np.ndarray:
    a = destroy(dim)
    return expm(beta * a.conj().T - np.conj(beta) * a)


def displacement_matrix(beta: complex, dim: int) -> np.ndarray:
    """dim x dim block of the displacement operator D(beta).

    Computed in a padded space large enough that the retained block is
    insensitive to the padding (checked by doubling until stable < 1e-13).
    """
    key = (complex(beta), dim)
    if key in _DISP_CACHE:
        return _DISP_CACHE[key]
    b2 = abs(beta) ** 2
    pad = int(np.ceil(b2 + 2.0 * np.sqrt((dim + b2) * (b2 + 1.0)) + 20))
    prev = _displacement_dense(beta, dim + pad)[:dim, :dim]
    while True:
        pad *= 2
        cur = _displacement_dense(beta, dim + pad)[:dim, :dim]
        if np.max(np.abs(cur - prev)) < 1e-13:
            break
        prev = cur
        if dim + pad > 4000:
            raise RuntimeError("displacement padding failed to stabilize")
    _DISP_CACHE[key] = cur
    return cur


_PARITY_KERNEL_CACHE: dict = {}


def _displaced_parity(beta: complex, dim: int) -> np.ndarray:
    """K(beta) = D(beta) Pi D(beta)^dag truncated to dim, padding certified."""
    key = (complex(beta), dim)
    if key in _PARITY_KERNEL_CACHE:
        return _PARITY_KERNEL_CACHE[key]
    b2 = abs(beta) ** 2
    pad = int(np.ceil(b2 + 2.0 * np.sqrt((dim + b2) * (b2 + 1.0)) + 20))
    out = None
    while True:
        big = dim + pad
        D = _displacement_dense(beta, big)
        par = np.where(np.arange(big) % 2 == 0, 1.0, -1.0)
        K = (D * par[None, :]) @ D.conj().T
        K = K[:dim, :dim]
        if out is not None and np.max(np.abs(K - out)) < 1e-13:
            out = K
            break
        out = K
        pad *= 2
        if dim + pad > 4000:
            raise RuntimeError("parity-kernel padding failed to stabilize")
    _PARITY_KERNEL_CACHE[key] = out
    return out


# ---------------------------------------------------------------------------
# constructors


def _thermal_block(V: float, d: complex, cutoff: int) -> tuple[np.ndarray, float]:
    dim = cutoff + 1
    nbar = (V - 1.0) / 2.0
    b2 = abs(d) ** 2
    pad = int(np.ceil(b2 + 2.0 * np.sqrt((dim + b2) * (b2 + 1.0)) + 30))
    big = dim + pad
    if nbar == 0.0:
        diag = np.zeros(big)
        diag[0] = 1.0
    else:
        n = np.arange(big, dtype=float)
        diag = np.exp(n * np.log(nbar / (nbar + 1.0)) - np.log(nbar + 1.0))
    rho = np.diag(diag).astype(complex)
    if d != 0:
        D = _displacement_dense(d, big)
        rho = D @ rho @ D.conj().T
    rho = rho[:dim, :dim]
    deficit = abs(1.0 - np.trace(rho).real)
    return rho, deficit


def thermal_fock(V: float, d: complex = 0.0, cutoff: int | None = None) -> FockDensityMatrix:
    """Displaced thermal state D(d) rho_th(nbar) D(d)^dag, nbar = (V-1)/2.

    Undisplaced populations follow the geometric law
    p_n = nbar^n / (nbar+1)^(n+1).

    With cutoff=None the heuristic cutoff is grown until the truncation
    deficit certifies below 1e-10; an explicit cutoff that fails the
    certification is an error, never silently accepted.
    """
    if V < 1.0:
        raise ValueError("V must be >= 1")
    if cutoff is None:
        trial = default_cutoff(V, d)
        for _ in range(12):
            rho, deficit = _thermal_block(V, d, trial)
            if deficit < 1e-10:
                break
            trial += max(10, trial // 4)
        else:
            raise ValueError(f"no adequate cutoff found up to {trial}")
        dim = trial + 1
    else:
        rho, deficit = _thermal_block(V, d, cutoff)
        if deficit >= 1e-10:
            raise ValueError(f"cutoff {cutoff} insufficient: deficit {deficit:.3e}")
        dim = cutoff + 1
    out = FockDensityMatrix(rho, (dim,), deficit)
    return out.normalized()


def coherent_fock(alpha: complex, cutoff: int) -> FockDensityMatrix:
    """|alpha><alpha| truncated; deficit is the lost tail mass."""
    dim = cutoff + 1
    n = np.arange(dim)
    lg = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, dim)))))
    amp = np.exp(-0.5 * abs(alpha) ** 2) * np.power(alpha, n) / np.exp(0.5 * lg)
    rho = np.outer(amp, amp.conj())
    deficit = abs(1.0 - np.trace(rho).real)
    return FockDensityMatrix(rho, (dim,), deficit).normalized()


def tensor(a: FockDensityMatrix, b: FockDensityMatrix) -> FockDensityMatrix:
    return FockDensityMatrix(
        np.kron(a.matrix, b.matrix),
        a.dims + b.dims,
        a.truncation_deficit + b.truncation_deficit,
    )


def partial_trace(rho: FockDensityMatrix, keep) -> FockDensityMatrix:
    """Trace out every subsystem not listed in keep (sequence of indices)."""
    keep = tuple(keep)
    n = rho.modes
    dims = rho.dims
    t = rho.matrix.reshape(dims + dims)
    # trace out from the highest index so earlier axis numbers stay valid
    cur_dims = list(dims)
    for idx in sorted(set(range(n)) - set(keep), reverse=True):
        k = len(cur_dims)
        t = np.trace(t, axis1=idx, axis2=idx + k)
        del cur_dims[idx]
    new_dims = tuple(cur_dims)
    dim = int(np.prod(new_dims))
    return FockDensityMatrix(t.reshape(dim, dim), new_dims, rho.truncation_deficit)


# ---------------------------------------------------------------------------
# single-subsystem operator application


def _apply_op(rho: FockDensityMatrix, op: np.ndarray, sub: int,
              left: bool = True, right: bool = True) -> FockDensityMatrix:
    """op acting on subsystem sub: U rho U^dag (or one-sided if asked)."""
    dims = rho.dims
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    if left:
        t = np.tensordot(op, t, axes=([1], [sub]))
        t = np.moveaxis(t, 0, sub)
    if right:
        t = np.tensordot(t, op.conj().T, axes=([n + sub], [0]))
        t = np.moveaxis(t, -1, n + sub)
    dim = int(np.prod(dims))
    return FockDensityMatrix(t.reshape(dim, dim), dims, rho.truncation_deficit)


def fock_displace(rho: FockDensityMatrix, mode: int, beta: complex) -> FockDensityMatrix:
    D = displacement_matrix(beta, rho.dims[mode])
    return _apply_op(rho, D, mode)


def fock_phase_shift(rho: FockDensityMatrix, mode: int, phi: float) -> FockDensityMatrix:
    ph = np.diag(np.exp(1j * phi * np.arange(rho.dims[mode])))
    return _apply_op(rho, ph, mode)


def fock_cross_kerr(rho: FockDensityMatrix, mode_a: int, mode_b: int, phi: float) -> FockDensityMatrix:
    """Diagonal phases e^{i phi n_a n_b}."""
    dims = rho.dims
    na = np.arange(dims[mode_a])
    nb = np.arange(dims[mode_b])
    shape = [1] * len(dims)
    shape[mode_a] = dims[mode_a]
    ga = na.reshape([dims[mode_a] if k == mode_a else 1 for k in range(len(dims))])
    gb = nb.reshape([dims[mode_b] if k == mode_b else 1 for k in range(len(dims))])
    phase = np.exp(1j * phi * (ga * gb)).astype(complex)
    vec = np.broadcast_to(phase, dims).reshape(-1)
    m = rho.matrix * vec[:, None] * vec.conj()[None, :]
    return FockDensityMatrix(m, dims, rho.truncation_deficit)


def fock_controlled_kerr(rho_field: FockDensityMatrix, qubit, phi: float) -> FockDensityMatrix:
    """Adjoin a 2-level control prepared in c0|0> + c1|1>, then apply the
    controlled phase e^{i phi n} on field mode 0 when the control is excited.

    Returns the hybrid state with the control as subsystem 0.
    """
    c0, c1 = qubit
    norm = abs(c0) ** 2 + abs(c1) ** 2
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("control qubit amplitudes must be normalized")
    q = np.array([[c0 * np.conj(c0), c0 * np.conj(c1)],
                  [c1 * np.conj(c0), c1 * np.conj(c1)]], dtype=complex)
    hyb = FockDensityMatrix(np.kron(q, rho_field.matrix),
                            (2,) + rho_field.dims, rho_field.truncation_deficit)
    return fock_cross_kerr(hyb, 0, 1, phi)


def fock_beam_splitter(rho: FockDensityMatrix, i: int, j: int,
                       theta: float, phi: float = 0.0) -> FockDensityMatrix:
    """exp[theta/2 (e^{i phi} a_i^dag a_j - e^{-i phi} a_j^dag a_i)].

    The generator conserves n_i + n_j, so the unitary is assembled block by
    block in the total-photon-number basis of the (i, j) pair.
    """
    if i == j:
        raise ValueError("distinct modes required")
    di, dj = rho.dims[i], rho.dims[j]
    U = np.zeros((di * dj, di * dj), dtype=complex)
    # basis |n_i, n_j>, flattened index n_i * dj + n_j
    for N in range(di + dj - 1):
        lo = max(0, N - dj + 1)
        hi = min(N, di - 1)
        if lo > hi:
            continue
        ns = np.arange(lo, hi + 1)
        sz = len(ns)
        G = np.zeros((sz, sz), dtype=complex)
        for k in range(sz - 1):
            n = ns[k]  # coupling |n, N-n> <-> |n+1, N-n-1|
            g = 0.5 * theta * np.sqrt((n + 1.0) * (N - n))
            G[k + 1, k] += g * np.exp(1j * phi)
            G[k, k + 1] -= g * np.exp(-1j * phi)
        Ub = expm(G)
        idx = ns * dj + (N - ns)
        U[np.ix_(idx, idx)] = Ub
    dims = rho.dims
    n = len(dims)
    # act with U on the (i, j) pair: reshape, move the pair together
    t = rho.matrix.reshape(dims + dims)
    t = np.moveaxis(t, (i, j, n + i, n + j), (0, 1, 2, 3))
    rest = t.shape[4:]
    t = t.reshape(di * dj, di * dj, -1)
    t = np.einsum("ab,bcd,ec->aed", U, t, U.conj(), optimize=True)
    t = t.reshape((di, dj, di, dj) + rest)
    t = np.moveaxis(t, (0, 1, 2, 3), (i, j, n + i, n + j))
    dim = int(np.prod(dims))
    return FockDensityMatrix(t.reshape(dim, dim), dims, rho.truncation_deficit)


def fock_project(rho: FockDensityMatrix, subsystem: int, vector) -> tuple:
    """Project subsystem onto |v><v| / <v|v> and trace it out.

    Returns (conditional FockDensityMatrix on the remaining subsystems,
    probability). Zero-probability outcomes return (None, 0.0).
    """
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    dims = rho.dims
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    t = np.tensordot(v.conj(), t, axes=([0], [subsystem]))
    t = np.tensordot(t, v, axes=([subsystem + n - 1], [0]))
    new_dims = dims[:subsystem] + dims[subsystem + 1:]
    dim = int(np.prod(new_dims))
    m = t.reshape(dim, dim)
    p = np.trace(m).real
    if p < 1e-300:
        return None, 0.0
    return FockDensityMatrix(m / p, new_dims, rho.truncation_deficit), float(p)


def fock_parity(rho: FockDensityMatrix, mode: int | None = None) -> float:
    """<Pi_mode>, or the total parity over all subsystems when mode is None."""
    dims = rho.dims
    if mode is None:
        signs = [np.where(np.arange(d) % 2 == 0, 1.0, -1.0) for d in dims]
        vec = signs[0]
        for s in signs[1:]:
            vec = np.kron(vec, s)
    else:
        vec = np.ones(1)
        for k, d in enumerate(dims):
            s = np.where(np.arange(d) % 2 == 0, 1.0, -1.0) if k == mode else np.ones(d)
            vec = np.kron(vec, s)
    return float(np.real(np.sum(vec * np.diag(rho.matrix))))


def expect_n(rho: FockDensityMatrix, mode: int) -> float:
    dims = rho.dims
    vec = np.ones(1)
    for k, d in enumerate(dims):
        s = np.arange(d, dtype=float) if k == mode else np.ones(d)
        vec = np.kron(vec, s)
    return float(np.real(np.sum(vec * np.diag(rho.matrix))))


# ---------------------------------------------------------------------------
# Wigner reconstruction and quadrature densities


def fock_wigner(rho: FockDensityMatrix, point) -> float:
    """W(point) = (2/pi)^n <prod_k D(beta_k) Pi_k D(beta_k)^dag>."""
    if np.isscalar(point) or isinstance(point, complex):
        point = [point]
    betas = [complex(b) for b in point]
    if len(betas) != rho.modes:
        raise ValueError("point length must equal mode count")
    K = _displaced_parity(betas[0], rho.dims[0])
    for b, d in zip(betas[1:], rho.dims[1:]):
        K = np.kron(K, _displaced_parity(b, d))
    val = np.einsum("ij,ji->", rho.matrix, K)
    return float(np.real(val)) * (2.0 / np.pi) ** rho.modes


def fock_wigner_grid(rho: FockDensityMatrix, grids) -> np.ndarray:
    """Wigner values on an outer product of per-mode complex point lists.

    grids: sequence with one array of complex points per mode. Returns an
    array of shape (len(g_0), ..., len(g_{n-1})). Much faster than calling
    fock_wigner pointwise because the displaced-parity kernels are reused.
    """
    if rho.modes == 1:
        g = np.asarray(grids[0]).ravel()
        Ks = np.stack([_displaced_parity(b, rho.dims[0]) for b in g])
        vals = np.einsum("ij,aji->a", rho.matrix, Ks).real * (2.0 / np.pi)
        return vals.reshape(np.asarray(grids[0]).shape)
    if rho.modes == 2:
        ga = np.asarray(grids[0]).ravel()
        gb = np.asarray(grids[1]).ravel()
        d1, d2 = rho.dims
        Ka = np.stack([_displaced_parity(b, d1) for b in ga])
        Kb = np.stack([_displaced_parity(b, d2) for b in gb])
        t = rho.matrix.reshape(d1, d2, d1, d2)
        # contract mode 1 with Ka then mode 2 with Kb
        x = np.tensordot(Ka, t, axes=([1, 2], [2, 0]))  # (A, d2, d2) with K_{ji} rho_{i.j.}
        vals = np.einsum("aij,bji->ab", x, Kb).real * (2.0 / np.pi) ** 2
        return vals.reshape(np.asarray(grids[0]).shape + np.asarray(grids[1]).shape)
    raise NotImplementedError("grids supported for one or two modes")


def _hermite_functions(dim: int, xs: np.ndarray) -> np.ndarray:
    """Normalized oscillator eigenfunctions h_n(x), X = (a + a^dag)/sqrt2.

    Stable two-term recurrence: h_{n+1} = x sqrt(2/(n+1)) h_n - sqrt(n/(n+1)) h_{n-1}.
    """
    out = np.zeros((dim, len(xs)))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * xs * xs)
    if dim > 1:
        out[1] = np.sqrt(2.0) * xs * out[0]
    for n in range(1, dim - 1):
        out[n + 1] = xs * np.sqrt(2.0 / (n + 1)) * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def quadrature_density(rho: FockDensityMatrix, xs, angle: float = 0.0,
                       mode: int = 0) -> np.ndarray:
    """P(x) for the quadrature X_angle = (a e^{-i angle} + h.c.)/sqrt2.

    Other subsystems are traced out first. Convention: X = (a + a^dag)/sqrt2,
    so the vacuum density is exp(-x^2)/sqrt(pi).
    """
    xs = np.asarray(xs, dtype=float)
    red = partial_trace(rho, [mode]) if rho.modes > 1 else rho
    dim = red.dims[0]
    m = red.matrix
    if angle != 0.0:
        ph = np.exp(-1j * angle * np.arange(dim))
        m = m * ph[:, None] * ph.conj()[None, :]
    h = _hermite_functions(dim, xs)
    return np.einsum("mn,mx,nx->x", m, h, h).real

"""Constructors for displaced thermal states, their superpositions, and the
entangled families derived from them.

Everything here returns closed-form kernel states (PhaseSpaceState) except
the qubit-field combinations, which live in HybridState blocks until the
qubit is measured out.
"""

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from . import kernel_core as kc
from .kernel_core import PhaseSpaceState, ThermalKernel

BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")


def _norm_label(which: str) -> str:
    w = which.strip().lower().replace("φ", "phi").replace("ψ", "psi")
    w = w.replace(" ", "")
    if w not in BELL_LABELS:
        raise ValueError(f"unknown Bell label {which!r}; use one of {BELL_LABELS}")
    return w


def displaced_thermal(V: float, d: complex = 0.0) -> PhaseSpaceState:
    """Thermal state of phase-space variance V displaced to center d.

    V = 1 is the coherent state |d>. The trace is exactly 1.
    """
    st = PhaseSpaceState.from_terms([ThermalKernel(V, d, [1.0], [1.0])])
    st.trace_cache = 1.0
    return st


def _vacuum() -> PhaseSpaceState:
    return displaced_thermal(1.0, 0.0)


@dataclass(frozen=True)
class KerrConfig:
    """Accumulated cross-Kerr rotation angle (nonlinearity strength x time)."""
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))


# Weyl symbols of the qubit dyadics |i><j| in the {ground, first excited}
# subspace; (1,0) carries conj(a) so that hermitian combinations come out real.
def _qubit_dyadic_wigner(i: int, j: int, a: np.ndarray) -> np.ndarray:
    g = (2.0 / math.pi) * np.exp(-2.0 * np.abs(a) ** 2)
    if i == 0 and j == 0:
        return g + 0j
    if i == 1 and j == 1:
        return (4.0 * np.abs(a) ** 2 - 1.0) * g
    if i == 1 and j == 0:
        return 2.0 * np.conj(a) * g
    return 2.0 * a * g


class HybridState:
    """Qubit(s) x field state stored as a matrix of operator-valued blocks.

    blocks[i][j] is the field operator multiplying |i><j| on the qubit side;
    it is the conjugate-transpose partner of blocks[j][i]. One qubit gives a
    2x2 block matrix, two qubits 4x4 (row index i = 2*q1 + q0).
    """

    def __init__(self, blocks: Sequence[Sequence[PhaseSpaceState]]):
        dims = len(blocks)
        if dims not in (2, 4):
            raise ValueError("qubit block matrix must be 2x2 or 4x4")
        if any(len(row) != dims for row in blocks):
            raise ValueError("block matrix must be square")
        modes = blocks[0][0].modes
        if any(b.modes != modes for row in blocks for b in row):
            raise ValueError("all blocks must share the field mode count")
        self.blocks = tuple(tuple(row) for row in blocks)
        self.qubit_dims = dims
        self.n_qubits = 1 if dims == 2 else 2
        self.field_modes = modes

    def trace(self) -> float:
        t = sum(self.blocks[i][i].trace() for i in range(self.qubit_dims))
        t = complex(t)
        if abs(t.imag) > 1e-10 * max(1.0, abs(t.real)):
            raise ValueError("hybrid trace has a non-real residue")
        return t.real

    def scaled(self, factor: complex) -> "HybridState":
        return HybridState([[b.scaled(factor) for b in row] for row in self.blocks])

    def normalize(self) -> "HybridState":
        t = self.trace()
        if abs(t) < 1e-300:
            raise ValueError("cannot normalize a trace-zero hybrid state")
        return self.scaled(1.0 / t)

    def qubit_phase_rotation(self, qubit: int, field_mode: int,
                             phi: float) -> "HybridState":
        """Controlled e^{i phi n} on one field mode: rotates the ket side of
        block (i, j) when qubit bit of i is set, the bra side when set in j."""
        if not 0 <= qubit < self.n_qubits:
            raise ValueError("qubit index out of range")
        out = []
        for i, row in enumerate(self.blocks):
            new_row = []
            for j, b in enumerate(row):
                ket = bool((i >> qubit) & 1)
                bra = bool((j >> qubit) & 1)
                if ket or bra:
                    b = kc.apply_phase_shift(b, field_mode, phi, ket=ket, bra=bra)
                new_row.append(b)
            out.append(new_row)
        return HybridState(out)

    def wigner_evaluator(self) -> Callable[[np.ndarray], np.ndarray]:
        """Joint Wigner closure over (qubit coords..., field coords...).

        Points are (N, n_qubits + field_modes) complex; qubit coordinates
        come first. Returns real values (imaginary residue is checked).
        """
        nq = self.n_qubits
        evals = [[kc.wigner_evaluator(b, complex_output=True) for b in row]
                 for row in self.blocks]

        def evaluate(points: np.ndarray) -> np.ndarray:
            P = np.atleast_2d(np.asarray(points, dtype=complex))
            qpts = P[:, :nq]
            fpts = P[:, nq:]
            total = np.zeros(P.shape[0], dtype=complex)
            for i in range(self.qubit_dims):
                for j in range(self.qubit_dims):
                    fac = np.ones(P.shape[0], dtype=complex)
                    for q in range(nq):
                        fac = fac * _qubit_dyadic_wigner(
                            (i >> q) & 1, (j >> q) & 1, qpts[:, q])
                    total += fac * evals[i][j](fpts)
            bad = np.abs(total.imag)
            if bad.max(initial=0.0) > 1e-9:
                raise ValueError("hybrid Wigner has a non-real residue; "
                                 "block matrix is not hermitian")
            return total.real

        return evaluate

    def wigner(self, point) -> float:
        return float(self.wigner_evaluator()(np.asarray(point, dtype=complex)
                                             .reshape(1, -1))[0])


def micro_macro_entangle(qubit_amplitudes: Tuple[complex, complex],
                         field: PhaseSpaceState, mode: int = 0,
                         kerr: KerrConfig = KerrConfig(math.pi)) -> HybridState:
    """Entangle a ground/first-excited qubit superposition with a field mode
    through a cross-Kerr rotation: the excited branch picks up e^{i phi n}.
    """
    c0, c1 = complex(qubit_amplitudes[0]), complex(qubit_amplitudes[1])
    if abs(abs(c0) ** 2 + abs(c1) ** 2 - 1.0) > 1e-9:
        raise ValueError("qubit amplitudes must be normalized")
    amps = (c0, c1)
    blocks = [[field.scaled(amps[i] * np.conj(amps[j])) for j in range(2)]
              for i in range(2)]
    return HybridState(blocks).qubit_phase_rotation(0, mode, kerr.phi)


def measure_qubit(hybrid: HybridState, basis_sign: int
                  ) -> Tuple[Optional[PhaseSpaceState], float]:
    """Project the qubit of a 2x2 hybrid onto (|0> +- |1>)/sqrt(2).

    Returns (normalized field state, outcome probability). An impossible
    outcome (probability below 1e-300) returns (None, 0.0) rather than
    dividing by zero.
    """
    if hybrid.qubit_dims != 2:
        raise ValueError("measure_qubit expects a single-qubit hybrid")
    s = 1.0 if basis_sign >= 0 else -1.0
    b = hybrid.blocks
    combined = (b[0][0] + b[1][1] + b[0][1].scaled(s) + b[1][0].scaled(s)
                ).scaled(0.5)
    tr = complex(combined.trace())
    if abs(tr.imag) > 1e-10 * max(1.0, abs(tr.real)):
        raise ValueError("outcome probability has a non-real residue")
    prob = tr.real
    if prob < 1e-300:
        return None, 0.0
    out = combined.scaled(1.0 / prob)
    out.trace_cache = 1.0
    return out, prob


def thermal_superposition(V: float, d: complex, phi: float,
                          sign: int = 1) -> PhaseSpaceState:
    """Superposition of a displaced thermal state with its phase-rotated
    image, post-selected from the qubit-mediated entangling interaction.

    phi = pi gives the +-"cat" mixture of two opposite displacements; the
    state is built by the entangle-and-measure composition, so its kernel
    list is exactly what that pipeline produces.
    """
    amp = 1.0 / math.sqrt(2.0)
    hybrid = micro_macro_entangle((amp, amp), displaced_thermal(V, d),
                                  0, KerrConfig(phi))
    state, prob = measure_qubit(hybrid, sign)
    if state is None:
        raise ValueError("the requested branch has zero probability "
                         "(fully destructive interference)")
    return state


def superposition_probability(V: float, d: complex, phi: float,
                              sign: int = 1) -> float:
    """Probability of the +- outcome that prepares thermal_superposition."""
    amp = 1.0 / math.sqrt(2.0)
    hybrid = micro_macro_entangle((amp, amp), displaced_thermal(V, d),
                                  0, KerrConfig(phi))
    return measure_qubit(hybrid, sign)[1]


def kerr_time_series(V: float, d: complex, thetas: Sequence[float],
                     sign: int = 1):
    """thermal_superposition snapshots over a list of rotation angles.

    theta = 0 returns the untouched input thermal state.
    """
    out = []
    for th in thetas:
        if th == 0.0:
            out.append(displaced_thermal(V, d))
        else:
            out.append(thermal_superposition(V, d, th, sign))
    return out


def negativity_floor(V: float, d: float) -> float:
    """Closed-form joint Wigner value of the phi=pi qubit-field entangled
    state at the analytic minimum location (alpha, beta) = (-1/2, 0):

        2 (-2 + e^{-2 d^2 / V} / V) / (pi^2 sqrt(e))

    which tends to -4/(pi^2 sqrt(e)) ~ -0.2458 for large V or large d.
    """
    return 2.0 * (-2.0 + math.exp(-2.0 * d * d / V) / V) / (
        math.pi ** 2 * math.sqrt(math.e))


def negativity_search(V: float, d: float):
    """Search box and grid density for minimizing the joint Wigner function.

    The negative dip sits at the origin of the field plane with radius
    ~1/sqrt(V), modulated by fringes of period pi/(2 d) when d != 0; the
    returned grid resolves both. Gives (region, grid_points) for min_wigner
    over (Re alpha, Im alpha, Re beta, Im beta).
    """
    bw = 3.0 / math.sqrt(V)
    if d:
        bw = max(bw, 0.9)
    region = [(-2.0, 2.0), (-2.0, 2.0), (-bw, bw), (-bw, bw)]
    pts = 22
    if d:
        period = math.pi / (2.0 * abs(d))
        pts = max(22, min(41, math.ceil(2.0 * bw / period * 4.0)))
    return region, pts


def _two_mode_pattern(V: float, d: complex, sign: float,
                      flip_second: bool) -> PhaseSpaceState:
    # diagonal |a, b><a, b| pieces and the mirror cross pieces; flip_second
    # reverses the displacement pattern of mode 2 (psi-type states)
    f = -1.0 if flip_second else 1.0

    def two_mode(k1_scales, k2_scales, w=1.0):
        (l1, r1), (l2, r2) = k1_scales, k2_scales
        return kc.kernel_product(
            ThermalKernel(V, d, [l1, 0.0], [r1, 0.0]),
            ThermalKernel(V, d, [0.0, l2 * f], [0.0, r2 * f])).with_weight(w)

    terms = [
        two_mode((1, 1), (1, 1)),
        two_mode((1, -1), (1, -1), sign),
        two_mode((-1, 1), (-1, 1), sign),
        two_mode((-1, -1), (-1, -1)),
    ]
    return PhaseSpaceState.from_terms(terms).normalize()


def two_mode_thermal_entangled(V: float, d: complex, sign: int = 1
                               ) -> PhaseSpaceState:
    """Two thermal modes superposed with their jointly mirrored image:

        rho x rho +- sigma x sigma +- sigma' x sigma' + rho' x rho'

    (primes marking displacement -d). The unnormalized trace is
    2 (1 +- e^{-4 d^2 / V} / V^2); the returned state is normalized.
    """
    return _two_mode_pattern(V, d, 1.0 if sign >= 0 else -1.0, False)


def thermal_bell(which: str, V: float, d: complex) -> PhaseSpaceState:
    """The four entangled two-mode thermal states phi+-, psi+-.

    phi states correlate the displacement patterns of the two modes, psi
    states anti-correlate them; the +- sign sets the superposition parity.
    """
    w = _norm_label(which)
    sign = 1.0 if w.endswith("+") else -1.0
    return _two_mode_pattern(V, d, sign, w.startswith("psi"))


def bs_entangled(V: float, d: complex, sign: int = 1) -> PhaseSpaceState:
    """Thermal superposition split on a 50:50 beam splitter with vacuum."""
    single = thermal_superposition(V, d, math.pi, sign)
    joint = single.tensor(_vacuum())
    return kc.apply_beam_splitter(joint, 0, 1, math.pi / 2.0, 0.0)


def thermal_qubit(a: complex, b: complex, V: float, d: complex
                  ) -> PhaseSpaceState:
    """Thermal-state qubit: the +-d displaced thermal states as basis.

        |a|^2 rho(d) + a b* sigma(d) + a* b sigma(-d) + |b|^2 rho(-d)

    internally renormalized to trace 1. V = 1 degenerates to the coherent
    state qubit a|d> + b|-d> (normalized).
    """
    a, b = complex(a), complex(b)
    if a == 0 and b == 0:
        raise ValueError("qubit amplitudes must not both vanish")
    terms = [
        ThermalKernel(V, d, [1.0], [1.0], abs(a) ** 2),
        ThermalKernel(V, d, [1.0], [-1.0], a * np.conj(b)),
        ThermalKernel(V, d, [-1.0], [1.0], np.conj(a) * b),
        ThermalKernel(V, d, [-1.0], [-1.0], abs(b) ** 2),
    ]
    return PhaseSpaceState.from_terms(terms).normalize()

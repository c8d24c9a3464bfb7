"""Teleportation of a thermal-state qubit through a thermal-Bell channel.

The sender holds the unknown qubit in mode 0 and one half of a two-mode
entangled channel in mode 1; the receiver keeps mode 2. The sender runs the
same discrimination chain the Bell module uses (50-50 beam splitter, then a
parity readout on each output mode) and announces the identified Bell label;
the receiver applies a static correction keyed by that label.

Outcome conditioning is modeled in two layers. The parity pair is exact
kernel algebra. The phi-vs-psi identification is a sector projection on the
kernel branch labels: every kernel of the joint state carries a definite
+d/-d branch flag per mode, the flags on the measured modes either agree
(phi sector) or disagree (psi sector), and kernels whose ket and bra sides
fall in different sectors are dropped. Those discarded coherences are what
an ideal sector readout erases; their trace mass is reassigned by
renormalizing the four outcome probabilities.

Corrections come in two flavors. The formal flavor relabels kernel
coefficients exactly (the mixed-state analogue of a qubit sign flip), so a
formal round trip reproduces the input kernel list identically. The
physical flavor realizes the sign flip as the small orthogonal displacement
D(i pi / (4 d*)), which approaches the exact flip as the branch separation
grows; its quality is reported through the Hilbert-Schmidt overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernel_core as kc
from . import state_factory as sf
from .bell_measurement import _measure_pair
from .kernel_core import PhaseSpaceState
from .state_factory import HybridState

__all__ = [
    "TeleportReport",
    "correction_table",
    "teleport",
    "outcome_string_probabilities",
    "physical_flip_overlap_curve",
]

CORRECTION_MODES = ("formal", "physical")


@dataclass(frozen=True)
class TeleportReport:
    """Per-outcome summary of one teleportation run.

    probability is the renormalized chance of the outcome being announced.
    hs_overlap is Tr[rho_out rho_in] / Tr[rho_in^2] after the correction;
    exact_match records kernel-list equality with the input. Both are None
    for an outcome whose probability vanishes (nothing to condition on).
    """

    outcome: str
    probability: float
    correction: str
    hs_overlap: Optional[float]
    exact_match: Optional[bool]


def _char_sign(label: str) -> int:
    return 1 if label.endswith("+") else -1


def _family_sign(label: str) -> int:
    return 1 if label.startswith("phi") else -1


def _correction_steps(channel_label: str, outcome: str) -> Tuple[bool, bool]:
    """(swap, flip) needed after `outcome` through `channel_label`.

    The receiver's branch flag is the input flag times the channel pairing
    times the sector alignment, so the branches come out swapped whenever
    those two signs disagree; the relative sign of the coherence terms
    tracks the product of the channel's and the outcome's +/- characters.
    """
    swap = _family_sign(channel_label) * _family_sign(outcome) == -1
    flip = _char_sign(channel_label) * _char_sign(outcome) == -1
    return swap, flip


def _correction_name(swap: bool, flip: bool, correction_mode: str) -> str:
    flip_name = ("sign-flip(formal)" if correction_mode == "formal"
                 else "sign-flip(displacement-approx)")
    if swap and flip:
        return "pi-phase o " + flip_name
    if swap:
        return "pi-phase"
    if flip:
        return flip_name
    return "identity"


def correction_table(channel_label: str = "psi-",
                     correction_mode: str = "formal") -> Dict[str, str]:
    """Static outcome -> correction map for the given channel."""
    if channel_label not in sf.BELL_LABELS:
        raise ValueError(f"unknown channel label {channel_label!r}")
    if correction_mode not in CORRECTION_MODES:
        raise ValueError(f"correction_mode must be one of {CORRECTION_MODES}")
    table = {}
    for outcome in sf.BELL_LABELS:
        swap, flip = _correction_steps(channel_label, outcome)
        table[outcome] = _correction_name(swap, flip, correction_mode)
    return table


def _branch(k: kc.ThermalKernel, mode: int, side: str, dref: complex) -> int:
    """Which displaced branch (+1 or -1) a kernel occupies on one mode.

    Thermal kernels carry the branch in the mode's scale row; V = 1 kernels
    have no integration variables, so the branch lives in the coherent
    offset and is read against the reference displacement.
    """
    row = k.ket_scales[mode] if side == "ket" else k.bra_scales[mode]
    if row.size:
        return 1 if float(np.sum(row).real) > 0.0 else -1
    off = (k.ket_offsets if side == "ket" else k.bra_offsets)[mode]
    if dref == 0:
        raise ValueError("branch flags are undefined at V = 1 with d = 0")
    return 1 if float((off * np.conj(dref)).real) > 0.0 else -1


def _sector_filter(state: PhaseSpaceState, sector: int,
                   dref: complex) -> PhaseSpaceState:
    """Keep kernels whose measured-mode branch flags realize the sector.

    sector = +1 keeps matched flags on modes 0 and 1 (phi), -1 keeps
    opposed flags (psi). Kernels whose ket and bra sides disagree about the
    sector are coherences between the two outcome classes; an ideal sector
    readout removes them, so they belong to neither conditional state.
    """
    kept = []
    for k in state.terms:
        ket = (_branch(k, 0, "ket", dref) * _branch(k, 1, "ket", dref))
        bra = (_branch(k, 0, "bra", dref) * _branch(k, 1, "bra", dref))
        if ket == sector and bra == sector:
            kept.append(k)
    return PhaseSpaceState(state.modes, kept, None)


def _formal_sign_flip(state: PhaseSpaceState,
                      dref: complex) -> PhaseSpaceState:
    """Negate the coherence kernels (ket and bra on opposite branches)."""
    terms = []
    for k in state.terms:
        if _branch(k, 0, "ket", dref) != _branch(k, 0, "bra", dref):
            k = k.scaled(-1.0)
        terms.append(k)
    return PhaseSpaceState(state.modes, terms, None).normalize()


def _physical_sign_flip(state: PhaseSpaceState, d: complex) -> PhaseSpaceState:
    """Orthogonal displacement standing in for the branch sign flip.

    A displacement gamma shifts each branch's phase by 2 Im(gamma dbar) for
    the +d branch and the opposite for -d (Weyl phase plus the geometric
    phase of the shifted overlap), so gamma = i pi / (4 dbar) opens a
    relative pi between them while moving the centers by only |gamma|. The
    residual infidelity scales as |gamma|^2, vanishing as |d| grows.
    """
    gamma = 1j * math.pi / (4.0 * np.conj(complex(d)))
    return kc.apply_displacement(state, 0, gamma)


def _canonical(k: kc.ThermalKernel) -> kc.ThermalKernel:
    """Fold the constant exponent into the weight.

    e^{phase_const} sits outside every integration variable, so it is a
    plain scalar factor; the partial trace parks overlap scalars there,
    while freshly constructed kernels keep it at zero.
    """
    if k.phase_const == 0:
        return k
    return k._replace(weight=k.weight * np.exp(k.phase_const),
                      phase_const=0.0 + 0.0j)


def _consolidate(state: PhaseSpaceState) -> PhaseSpaceState:
    """Merge kernels that share every slot except the weight."""
    groups: Dict[tuple, kc.ThermalKernel] = {}
    for raw_k in state.terms:
        k = _canonical(raw_k)
        key = (
            tuple(np.round(k.variances, 12)),
            tuple(np.round(k.centers, 12)),
            tuple(np.round(k.ket_scales.ravel(), 12)),
            tuple(np.round(k.bra_scales.ravel(), 12)),
            tuple(np.round(k.ket_offsets.ravel(), 12)),
            tuple(np.round(k.bra_offsets.ravel(), 12)),
            tuple(np.round(k.phase_quad.ravel(), 12)),
            tuple(np.round(k.phase_lin_z.ravel(), 12)),
            tuple(np.round(k.phase_lin_zbar.ravel(), 12)),
        )
        if key in groups:
            groups[key] = groups[key].with_weight(groups[key].weight + k.weight)
        else:
            groups[key] = k
    scale = max((abs(k.weight) for k in groups.values()), default=0.0)
    terms = [k for k in groups.values()
             if abs(k.weight) > 1e-14 * max(scale, 1.0)]
    return PhaseSpaceState(state.modes, terms, state.trace_cache)


def _kernel_lists_equal(a: PhaseSpaceState, b: PhaseSpaceState,
                        dref: complex, atol: float = 1e-10) -> bool:
    def order(state):
        ks = [_canonical(k) for k in state.terms]
        big = max((abs(k.weight) for k in ks), default=0.0)
        # zero-weight kernels carry no operator content
        ks = [k for k in ks if abs(k.weight) > 1e-12 * max(big, 1.0)]
        return sorted(ks, key=lambda k: (_branch(k, 0, "ket", dref),
                                         _branch(k, 0, "bra", dref)))
    ta, tb = order(a), order(b)
    if len(ta) != len(tb):
        return False
    return all(x.allclose(y, atol=atol) for x, y in zip(ta, tb))


def _measured_hybrid(filtered: PhaseSpaceState) -> HybridState:
    mixed = kc.apply_beam_splitter(filtered, 0, 1, math.pi / 2, 0.0)
    quarter = mixed.scaled(0.25)
    hybrid = HybridState([[quarter] * 4 for _ in range(4)])
    # detector C watches the difference mode, detector D the sum mode
    hybrid = hybrid.qubit_phase_rotation(0, 1, math.pi)
    hybrid = hybrid.qubit_phase_rotation(1, 0, math.pi)
    return hybrid


def _class_strings(outcome: str) -> Tuple[str, str]:
    return ("++", "--") if outcome.endswith("+") else ("+-", "-+")


def _condition_on(joint: PhaseSpaceState, outcome: str, dref: complex
                  ) -> Tuple[Optional[PhaseSpaceState], float,
                             Dict[str, float]]:
    """Receiver state, raw probability and per-string masses for `outcome`."""
    hybrid = _measured_hybrid(
        _sector_filter(joint, _family_sign(outcome), dref))
    per_string: Dict[str, float] = {}
    total = 0.0
    acc: Optional[PhaseSpaceState] = None
    for string in _class_strings(outcome):
        cond, p = _measure_pair(hybrid, string)
        per_string[string] = p
        if cond is None:
            continue
        total += p
        bob = kc.partial_trace(cond, keep=[2]).scaled(p)
        acc = bob if acc is None else acc + bob
    if acc is None or total <= 0.0:
        return None, total, per_string
    return acc.scaled(1.0 / total), total, per_string


def teleport(qubit: Sequence[complex], channel_label: str = "psi-",
             correction_mode: str = "formal") -> List[TeleportReport]:
    """Run the protocol and report every outcome branch.

    qubit is (a, b, V, d). Returns one TeleportReport per Bell outcome, in
    the state-factory label order, with probabilities renormalized over the
    four announced outcomes.
    """
    if correction_mode not in CORRECTION_MODES:
        raise ValueError(f"correction_mode must be one of {CORRECTION_MODES}")
    a, b, V, d = qubit
    inp = sf.thermal_qubit(a, b, V, d)
    channel = sf.thermal_bell(channel_label, V, d)
    joint = inp.tensor(channel)
    self_overlap = kc.hs_overlap(inp, inp)

    dref = complex(d)
    raw: Dict[str, float] = {}
    outputs: Dict[str, Optional[PhaseSpaceState]] = {}
    for outcome in sf.BELL_LABELS:
        bob, p, _ = _condition_on(joint, outcome, dref)
        raw[outcome] = p
        outputs[outcome] = bob

    total = sum(raw.values())
    if total <= 0.0:
        raise ValueError("no outcome has support; degenerate channel")

    reports = []
    for outcome in sf.BELL_LABELS:
        swap, flip = _correction_steps(channel_label, outcome)
        name = _correction_name(swap, flip, correction_mode)
        bob = outputs[outcome]
        if bob is None:
            reports.append(TeleportReport(outcome, 0.0, name, None, None))
            continue
        if swap:
            bob = kc.apply_phase_shift(bob, 0, math.pi)
        if flip:
            if correction_mode == "formal":
                bob = _formal_sign_flip(bob, dref)
            else:
                bob = _physical_sign_flip(bob, d)
        bob = _consolidate(bob)
        overlap = kc.hs_overlap(bob, inp) / self_overlap
        reports.append(TeleportReport(
            outcome, raw[outcome] / total, name, float(overlap),
            _kernel_lists_equal(bob, inp, dref)))
    return reports


def outcome_string_probabilities(qubit: Sequence[complex],
                                 channel_label: str = "psi-"
                                 ) -> Dict[str, Dict[str, float]]:
    """Raw parity-string masses within each outcome sector.

    The split between the two strings of an outcome reproduces the Bell
    discriminator's statistics for that outcome's state, independent of the
    qubit being sent.
    """
    a, b, V, d = qubit
    joint = sf.thermal_qubit(a, b, V, d).tensor(
        sf.thermal_bell(channel_label, V, d))
    out: Dict[str, Dict[str, float]] = {}
    for outcome in sf.BELL_LABELS:
        _, _, per_string = _condition_on(joint, outcome, complex(d))
        out[outcome] = per_string
    return out


def physical_flip_overlap_curve(a: complex, b: complex, V: float,
                                d_values: Sequence[float]
                                ) -> List[Tuple[float, float]]:
    """Quality of the displacement-approximated sign flip versus d.

    Runs the psi+ outcome branch in physical mode and records the
    normalized overlap with the input for each displacement.
    """
    curve = []
    for d in d_values:
        reports = teleport((a, b, V, d), correction_mode="physical")
        by_label = {r.outcome: r for r in reports}
        curve.append((float(d), by_label["psi+"].hs_overlap))
    return curve

"""Discrimination of the four thermal-Bell states.

The measurement chain is: 50:50 beam splitter, then a photon-number-parity
readout of each output mode (realized physically by a dual-rail single-photon
qubit coupled through a pi cross-Kerr interaction and measured in the
(|01> +- |10>)/sqrt(2) basis), then a homodyne measurement on the output
that stays origin-centered for Phi inputs. The parity pair identifies the
+/- class exactly; the homodyne quadrature separates Phi from Psi with an
error that vanishes rapidly in d.

Mode layout after the beam splitter: mode 0 carries the sum combination
(displaced by +-sqrt(2)d for Phi inputs), mode 1 the difference combination.
Homodyne detector C watches mode 1, detector D mode 0. Outcome strings are
ordered (parity of mode 1, parity of mode 0), i.e. detector C first.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf, erfc

from . import kernel_core as kc
from .kernel_core import GaussianMixture1D, PhaseSpaceState
from . import state_factory as sf
from .state_factory import HybridState

DETECTOR_C_MODE = 1
DETECTOR_D_MODE = 0

OUTCOMES = ("++", "+-", "-+", "--")

# allowed outcome pairs per input class, heavier one first (its probability
# is always > 1/2, which the pair completion below relies on)
_ALLOWED = {
    "phi+": ("++", "--"), "psi+": ("++", "--"),
    "phi-": ("+-", "-+"), "psi-": ("-+", "+-"),
}


def bs1_transform(state: PhaseSpaceState) -> PhaseSpaceState:
    """50:50 beam splitter mixing the two Bell-state modes."""
    if state.modes != 2:
        raise ValueError("the Bell measurement takes a two-mode state")
    return kc.apply_beam_splitter(state, 0, 1, math.pi / 2.0, 0.0)


def measurement_pipeline(which: str, V: float, d: float) -> HybridState:
    """Joint state of the two parity qubits and the two field modes after
    the beam splitter and both cross-Kerr couplings.

    Qubit 0 couples to the detector-C mode, qubit 1 to the detector-D mode;
    both start in (|0> + |1>)/sqrt(2) and pick up a controlled pi rotation.
    """
    mixed = bs1_transform(sf.thermal_bell(which, V, d))
    quarter = mixed.scaled(0.25)
    hybrid = HybridState([[quarter] * 4 for _ in range(4)])
    hybrid = hybrid.qubit_phase_rotation(0, DETECTOR_C_MODE, math.pi)
    return hybrid.qubit_phase_rotation(1, DETECTOR_D_MODE, math.pi)


def _parse_outcome(outcome: str) -> Tuple[int, int]:
    if outcome not in OUTCOMES:
        raise ValueError(f"outcome must be one of {OUTCOMES}")
    return (1 if outcome[0] == "+" else -1), (1 if outcome[1] == "+" else -1)


def _measure_pair(hybrid: HybridState, outcome: str
                  ) -> Tuple[Optional[PhaseSpaceState], float]:
    """Project both qubits onto (|0> +- |1>)/sqrt(2) and return the
    normalized field state with the outcome probability."""
    s0, s1 = _parse_outcome(outcome)
    total = None
    for i in range(4):
        for j in range(4):
            sgn = (s0 ** ((i & 1) + (j & 1))) * (s1 ** ((i >> 1) + (j >> 1)))
            blk = hybrid.blocks[i][j]
            if sgn < 0:
                blk = blk.scaled(-1.0)
            total = blk if total is None else total + blk
    total = total.scaled(0.25)
    tr = complex(total.trace())
    if abs(tr.imag) > 1e-10 * max(1.0, abs(tr.real)):
        raise ValueError("outcome probability has a non-real residue")
    prob = tr.real
    if prob < 1e-12:
        # below the kernel-cancellation roundoff floor: treat as impossible
        return None, prob
    out = total.scaled(1.0 / prob)
    out.trace_cache = 1.0
    return out, prob


def outcome_probabilities(which: str, V: float, d: float) -> Dict[str, float]:
    """Probability of each parity outcome, from the full pipeline.

    The parity readout is a complete projective measurement, so the two
    allowed probabilities sum to 1 identically; the lighter one is stored
    as 1 - heavy, which is exact because heavy > 1/2. Forbidden outcomes
    keep their raw pipeline traces (they cancel to ~1e-16 or exactly 0).
    """
    hybrid = measurement_pipeline(which, V, d)
    probs = {o: _measure_pair(hybrid, o)[1] for o in OUTCOMES}
    heavy, light = _ALLOWED[sf._norm_label(which)]
    probs[light] = 1.0 - probs[heavy]
    return probs


def conditional_field_state(which: str, V: float, d: float,
                            outcome: str) -> Optional[PhaseSpaceState]:
    """Normalized two-mode field state given a parity outcome, or None when
    the outcome has (numerically) zero probability."""
    hybrid = measurement_pipeline(which, V, d)
    state, _ = _measure_pair(hybrid, outcome)
    return state


def _origin_density(V: float, parity: int) -> GaussianMixture1D:
    # even: sqrt(V) (e^{-V x^2} + e^{-x^2/V}) / (sqrt(pi) (V+1))
    # odd:  sqrt(V) (e^{-x^2/V} - e^{-V x^2}) / (sqrt(pi) (V-1))
    if parity > 0:
        c = math.sqrt(V) / (math.sqrt(math.pi) * (V + 1.0))
        return GaussianMixture1D([c, c], [-V, -1.0 / V], [0.0, 0.0], [0.0, 0.0])
    if V == 1.0:
        raise ValueError("the odd origin branch has zero probability at V = 1")
    c = math.sqrt(V) / (math.sqrt(math.pi) * (V - 1.0))
    return GaussianMixture1D([c, -c], [-1.0 / V, -V], [0.0, 0.0], [0.0, 0.0])


def _displaced_density(V: float, d: float, parity: int) -> GaussianMixture1D:
    # [e^{-(x-2d)^2/V} + e^{-(x+2d)^2/V} +- 2 e^{-4d^2/V} e^{-V x^2}]
    #   / (2 sqrt(pi V) (1 +- e^{-4d^2/V}/V))
    e4 = -4.0 * d * d / V
    nrm = 1.0 + parity * math.exp(e4) / V
    if nrm <= 0.0:
        raise ValueError("the odd displaced branch has zero probability "
                         "at V = 1, d = 0")
    c = 1.0 / (2.0 * math.sqrt(math.pi * V) * nrm)
    return GaussianMixture1D(
        [c, c, parity * 2.0 * c],
        [-1.0 / V, -1.0 / V, -V],
        [4.0 * d / V, -4.0 * d / V, 0.0],
        [e4, e4, e4])


def homodyne_distribution(which: str, outcome: str, detector: str,
                          V: float, d: float) -> GaussianMixture1D:
    """Closed-form quadrature density at one homodyne detector, conditioned
    on the parity outcome. X = (a + a^dag)/sqrt(2) units.

    Detector C sees the origin-centered family for Phi inputs and the
    +-2d-displaced family for Psi inputs; detector D the other way around.
    The relevant parity is the outcome character of the detector's mode.
    """
    label = sf._norm_label(which)
    s0, s1 = _parse_outcome(outcome)
    if outcome not in _ALLOWED[label]:
        raise ValueError(f"outcome {outcome} is not reachable from {label}")
    if detector not in ("C", "D"):
        raise ValueError("detector must be 'C' or 'D'")
    parity = s0 if detector == "C" else s1
    phi_input = label.startswith("phi")
    at_origin = phi_input == (detector == "C")
    if at_origin:
        return _origin_density(V, parity)
    return _displaced_density(V, d, parity)


def distinguishability(V: float, d: float) -> float:
    """Success probability of the |x| < d homodyne test between the
    origin (Phi) and displaced (Psi) even-parity branches at detector C."""
    if V < 1.0:
        raise ValueError("V must be >= 1")
    rv = math.sqrt(V)
    phi_part = (erf(d * rv) + V * erf(d / rv)) / (V + 1.0)
    e4 = math.exp(-4.0 * d * d / V)
    nrm = 1.0 + e4 / V
    psi_part = ((erfc(-d / rv) + erfc(3.0 * d / rv)) / (2.0 * nrm)
                + e4 * erfc(d * rv) / (V * nrm))
    return 0.5 * (phi_part + psi_part)


def decision_threshold(V: float, d: float, rule: str = "midpoint") -> float:
    """|x| threshold separating Phi from Psi. The midpoint rule takes the
    lobe midpoint d; the likelihood rule solves for the density crossing."""
    if rule == "midpoint":
        return float(d)
    if rule != "likelihood":
        raise ValueError("rule must be 'midpoint' or 'likelihood'")
    phi_den = _origin_density(V, +1)
    psi_den = _displaced_density(V, d, +1)
    f = lambda x: phi_den(x) - psi_den(x)
    lo, hi = 1e-9, 2.0 * d
    if d <= 0 or f(lo) * f(hi) >= 0:
        return float(d)
    return float(brentq(f, lo, hi))


@dataclass
class BellOutcomeRecord:
    """One discrimination trial: parity outcome plus homodyne readout(s)."""
    qubit_outcome: str
    homodyne_x: float
    homodyne_x_d: Optional[float] = None
    decision: Optional[str] = None
    correct: Optional[bool] = None


def discriminate(record: BellOutcomeRecord, V: float, d: float,
                 threshold: Optional[float] = None) -> str:
    """Decision rule: the parity class fixes the +/- suffix, the homodyne
    magnitude picks Phi (|x| < threshold) versus Psi."""
    thr = decision_threshold(V, d) if threshold is None else threshold
    suffix = "+" if record.qubit_outcome in ("++", "--") else "-"
    prefix = "phi" if abs(record.homodyne_x) < thr else "psi"
    return prefix + suffix


def mean_photon_split(which: str, V: float, d: float) -> Tuple[float, float]:
    """(N_many, N_few): mean photon numbers of the two beam-splitter
    outputs. Phi inputs route the sqrt(2)d structure to the sum mode,
    Psi inputs to the difference mode."""
    mixed = bs1_transform(sf.thermal_bell(which, V, d))
    n_sum = kc.moments(mixed, DETECTOR_D_MODE).mean_photon
    n_diff = kc.moments(mixed, DETECTOR_C_MODE).mean_photon
    if sf._norm_label(which).startswith("phi"):
        return n_sum, n_diff
    return n_diff, n_sum


def _sample_mixture(mix: GaussianMixture1D, n: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling by vectorized bisection on the closed-form CDF."""
    mu, w = mix.envelope_windows()
    lo = float(np.min(mu - 45.0 * w))
    hi = float(np.max(mu + 45.0 * w))
    target = rng.random(n) * mix.integral()
    a = np.full(n, lo)
    b = np.full(n, hi)
    for _ in range(64):
        m = 0.5 * (a + b)
        left = mix.cdf(m) < target
        a = np.where(left, m, a)
        b = np.where(left, b, m)
    return 0.5 * (a + b)


def simulate_trials(which: str, V: float, d: float, n_trials: int,
                    seed: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None,
                    measure_d: bool = False,
                    threshold: Optional[float] = None
                    ) -> List[BellOutcomeRecord]:
    """Monte Carlo of the full chain: sample a parity outcome, then the
    homodyne quadrature(s) from the matching closed-form density, then
    apply the decision rule. Deterministic for a fixed seed."""
    label = sf._norm_label(which)
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(seed))
    probs = outcome_probabilities(label, V, d)
    p = np.array([max(probs[o], 0.0) for o in OUTCOMES])
    picks = rng.choice(4, size=n_trials, p=p / p.sum())
    records: List[BellOutcomeRecord] = [None] * n_trials
    for io, o in enumerate(OUTCOMES):
        idx = np.nonzero(picks == io)[0]
        if idx.size == 0:
            continue
        xs = _sample_mixture(homodyne_distribution(label, o, "C", V, d),
                             idx.size, rng)
        xds = None
        if measure_d:
            xds = _sample_mixture(homodyne_distribution(label, o, "D", V, d),
                                  idx.size, rng)
        for k, t in enumerate(idx):
            rec = BellOutcomeRecord(
                qubit_outcome=o, homodyne_x=float(xs[k]),
                homodyne_x_d=None if xds is None else float(xds[k]))
            rec.decision = discriminate(rec, V, d, threshold)
            rec.correct = rec.decision == label
            records[t] = rec
    return records


def confusion_matrix(V: float, d: float, n_trials: int,
                     seed: Optional[int] = None) -> Dict[str, Dict[str, int]]:
    """Counts of decided labels for each true label, n_trials each.

    Child generators are spawned per input label from the master seed, so
    the four simulations are independent and individually reproducible.
    """
    children = np.random.SeedSequence(seed).spawn(len(sf.BELL_LABELS))
    table: Dict[str, Dict[str, int]] = {}
    for label, child in zip(sf.BELL_LABELS, children):
        rng = np.random.Generator(np.random.PCG64(child))
        probs = outcome_probabilities(label, V, d)
        p = np.array([max(probs[o], 0.0) for o in OUTCOMES])
        counts = rng.multinomial(n_trials, p / p.sum())
        row = {lab: 0 for lab in sf.BELL_LABELS}
        for o, cnt in zip(OUTCOMES, counts):
            if cnt == 0:
                continue
            xs = _sample_mixture(homodyne_distribution(label, o, "C", V, d),
                                 int(cnt), rng)
            suffix = "+" if o in ("++", "--") else "-"
            n_phi = int(np.count_nonzero(np.abs(xs) < d))
            row["phi" + suffix] += n_phi
            row["psi" + suffix] += int(cnt) - n_phi
        table[label] = row
    return table

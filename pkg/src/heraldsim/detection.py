"""Detector models, heralding, click statistics and post-selected states.

Loss is applied as per-mode binomial thinning at detection; because every
element after the source is passive linear optics this is exact and avoids
explicit loss modes.  All detection POVMs are diagonal in photon number, so
conditioning on herald clicks yields an ensemble with one pure component
per herald-mode occupation.
"""

from __future__ import annotations

import functools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .elements import build_paper_circuit
from .fock import Mode, ModeRegister, Occupation, SparseKet, split_by_occupation
from .source import pair_term

# Coupling times detector efficiency per spatial mode.
DEFAULT_EFFICIENCY = 0.23 * 0.42

# Coincidence patterns (one detected photon per output arm) in the order of
# the two-qubit basis HH, HV, VH, VV.
COINCIDENCE_PATTERNS = ((1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1))


@dataclass(frozen=True)
class DetectorModel:
    """Per-mode detection efficiency plus threshold vs number resolution."""

    efficiency: float = DEFAULT_EFFICIENCY
    resolving: str = "threshold"
    per_mode: Mapping[Mode, float] | None = None

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if self.resolving not in ("threshold", "number"):
            raise ValueError("resolving must be 'threshold' or 'number'")
        if self.per_mode:
            for m, eta in self.per_mode.items():
                if not 0.0 <= eta <= 1.0:
                    raise ValueError(f"efficiency for {m} out of [0, 1]")

    def eta(self, mode: Mode) -> float:
        if self.per_mode and mode in self.per_mode:
            return self.per_mode[mode]
        return self.efficiency


IDEAL_NUMBER_DETECTORS = DetectorModel(efficiency=1.0, resolving="number")


@dataclass(frozen=True)
class ConditionalEnsemble:
    """Heralded output: weighted pure components over the output modes.

    Component weights are absolute probabilities; they sum to the herald
    probability.  Each component ket is normalized.
    """

    register: ModeRegister
    components: tuple[tuple[float, SparseKet], ...]
    probability: float

    def merged_with(self, other: "ConditionalEnsemble") -> "ConditionalEnsemble":
        if other.register.labels != self.register.labels:
            raise ValueError("cannot merge ensembles over different registers")
        return ConditionalEnsemble(
            self.register,
            self.components + other.components,
            self.probability + other.probability,
        )

    def scaled(self, factor: float) -> "ConditionalEnsemble":
        comps = tuple((w * factor, ket) for w, ket in self.components)
        return ConditionalEnsemble(self.register, comps, self.probability * factor)


def _click_factor(n: int, eta: float, resolving: str) -> float:
    """Probability that a detector fires the heralding condition on n photons."""
    if resolving == "number":
        return n * eta * (1.0 - eta) ** (n - 1) if n >= 1 else 0.0
    return 1.0 - (1.0 - eta) ** n


def _detected_count_dist(n: int, eta: float) -> list[float]:
    """Binomial thinning: probability of detecting k of n photons."""
    return [math.comb(n, k) * eta**k * (1.0 - eta) ** (n - k) for k in range(n + 1)]


def click_distribution(
    state: SparseKet, detectors: DetectorModel
) -> dict[tuple[int, ...], float]:
    """Exact click-pattern distribution over all register modes.

    Threshold detectors return binary patterns; number-resolving detectors
    return detected-count tuples.
    """
    labels = state.register.labels
    etas = [detectors.eta(m) for m in labels]
    dist: dict[tuple[int, ...], float] = defaultdict(float)
    for occ, amp in state.amplitudes.items():
        p = abs(amp) ** 2
        outcomes: list[tuple[tuple[int, ...], float]] = [((), p)]
        for n, eta in zip(occ, etas):
            if detectors.resolving == "number":
                choices = list(enumerate(_detected_count_dist(n, eta)))
            else:
                p_click = 1.0 - (1.0 - eta) ** n
                choices = [(0, 1.0 - p_click), (1, p_click)]
            outcomes = [
                (pattern + (k,), w * pk)
                for pattern, w in outcomes
                for k, pk in choices
                if pk > 0.0
            ]
        for pattern, w in outcomes:
            dist[pattern] += w
    return dict(dist)


def herald(
    state: SparseKet, herald_modes: Sequence[Mode], detectors: DetectorModel
) -> ConditionalEnsemble:
    """Condition on a detection event in every herald mode.

    Threshold detectors require at least one surviving photon per herald
    mode, number-resolving detectors exactly one detected photon.  Extra
    clicks in the output modes are never vetoed.
    """
    rest_register, groups = split_by_occupation(state, herald_modes)
    etas = [detectors.eta(m) for m in herald_modes]
    components: list[tuple[float, SparseKet]] = []
    prob = 0.0
    for pattern, rest_amps in groups.items():
        factor = 1.0
        for n, eta in zip(pattern, etas):
            factor *= _click_factor(n, eta, detectors.resolving)
            if factor == 0.0:
                break
        if factor == 0.0:
            continue
        joint = sum(abs(a) ** 2 for a in rest_amps.values())
        weight = joint * factor
        if weight <= 0.0:
            continue
        scale = 1.0 / math.sqrt(joint)
        ket = SparseKet.from_amplitudes(
            rest_register, {o: a * scale for o, a in rest_amps.items()}
        )
        components.append((weight, ket))
        prob += weight
    components.sort(key=lambda c: -c[0])
    return ConditionalEnsemble(rest_register, tuple(components), prob)


def classical_occupation_distribution(
    state: SparseKet, matrix: np.ndarray, out_register: ModeRegister
) -> dict[Occupation, float]:
    """Route photons through the circuit as fully distinguishable particles.

    Each photon of each input basis ket lands in output mode j with
    probability |matrix[i, j]|^2, independently; all interference is
    discarded.  Returns the classical occupation distribution.
    """
    probs = np.abs(np.asarray(matrix)) ** 2
    n_out = probs.shape[1]
    out: dict[Occupation, float] = defaultdict(float)
    zero = (0,) * n_out
    for occ, amp in state.amplitudes.items():
        weight = abs(amp) ** 2
        partial: dict[Occupation, float] = {zero: weight}
        for i, n in enumerate(occ):
            for _ in range(n):
                grown: dict[Occupation, float] = defaultdict(float)
                for pattern, w in partial.items():
                    for j in range(n_out):
                        pj = probs[i, j]
                        if pj == 0.0:
                            continue
                        key = list(pattern)
                        key[j] += 1
                        grown[tuple(key)] += w * pj
                partial = grown
        for pattern, w in partial.items():
            out[pattern] += w
    return dict(out)


def herald_classical(
    occupation_probs: Mapping[Occupation, float],
    register: ModeRegister,
    herald_modes: Sequence[Mode],
    detectors: DetectorModel,
) -> ConditionalEnsemble:
    """Herald a classical occupation distribution (distinguishable photons).

    Components are occupation basis kets; the resulting ensemble is a
    fully dephased mixture.
    """
    idx = register.indices(herald_modes)
    idx_set = set(idx)
    keep = [i for i in range(register.size) if i not in idx_set]
    rest_register = register.without(herald_modes)
    etas = [detectors.eta(m) for m in herald_modes]
    weights: dict[Occupation, float] = defaultdict(float)
    prob = 0.0
    for occ, p in occupation_probs.items():
        factor = 1.0
        for i, eta in zip(idx, etas):
            factor *= _click_factor(occ[i], eta, detectors.resolving)
            if factor == 0.0:
                break
        if factor == 0.0:
            continue
        rest = tuple(occ[i] for i in keep)
        w = p * factor
        weights[rest] += w
        prob += w
    components = tuple(
        (w, SparseKet(rest_register, {occ: 1.0 + 0.0j}))
        for occ, w in sorted(weights.items())
        if w > 0.0
    )
    return ConditionalEnsemble(rest_register, components, prob)


def number_table(
    ensemble: ConditionalEnsemble, output_detectors: DetectorModel
) -> dict[Occupation, float]:
    """Detected photon-number distribution over the output modes.

    Conditioned on the herald (probabilities sum to 1); includes the
    output-mode binomial loss.
    """
    if ensemble.probability <= 0.0:
        raise ValueError("ensemble has zero herald probability")
    etas = [output_detectors.eta(m) for m in ensemble.register.labels]
    table: dict[Occupation, float] = defaultdict(float)
    for weight, ket in ensemble.components:
        for occ, amp in ket.amplitudes.items():
            p = weight * abs(amp) ** 2
            outcomes: list[tuple[tuple[int, ...], float]] = [((), p)]
            for n, eta in zip(occ, etas):
                dist = _detected_count_dist(n, eta)
                outcomes = [
                    (pattern + (k,), w * pk)
                    for pattern, w in outcomes
                    for k, pk in enumerate(dist)
                    if pk > 0.0
                ]
            for pattern, w in outcomes:
                table[pattern] += w
    return {k: v / ensemble.probability for k, v in sorted(table.items())}


def spatial_reduction(table: Mapping[Occupation, float]) -> dict[tuple[int, int], float]:
    """Sum a per-polarization number table over polarizations per arm."""
    out: dict[tuple[int, int], float] = defaultdict(float)
    for (n1h, n1v, n2h, n2v), p in table.items():
        out[(n1h + n1v, n2h + n2v)] += p
    return dict(sorted(out.items()))


def postselect_two_qubit(
    ensemble: ConditionalEnsemble,
    output_detectors: DetectorModel,
    correction: np.ndarray | None = None,
) -> np.ndarray:
    """Two-qubit density matrix of the detected coincidences.

    Restricts to exactly one detected photon per output spatial arm.  Loss
    on the undetected photons is traced out exactly: amplitudes are grouped
    by the lost-photon environment configuration, so multi-photon
    components contribute the correct mixed background.  The optional
    convention-correcting local unitary is applied last.
    """
    etas = [output_detectors.eta(m) for m in ensemble.register.labels]
    rho = np.zeros((4, 4), dtype=complex)
    for weight, ket in ensemble.components:
        vectors: dict[Occupation, np.ndarray] = defaultdict(lambda: np.zeros(4, dtype=complex))
        for occ, amp in ket.amplitudes.items():
            for k_idx, pattern in enumerate(COINCIDENCE_PATTERNS):
                env = tuple(n - d for n, d in zip(occ, pattern))
                if any(e < 0 for e in env):
                    continue
                a = amp
                for n, d, eta in zip(occ, pattern, etas):
                    a *= math.sqrt(
                        math.comb(n, d) * eta**d * (1.0 - eta) ** (n - d)
                    )
                if a != 0.0:
                    vectors[env][k_idx] += a
        for vec in vectors.values():
            rho += weight * np.outer(vec, vec.conj())
    trace = float(np.real(np.trace(rho)))
    if trace <= 0.0:
        raise ValueError("zero coincidence probability; nothing to post-select")
    rho /= trace
    if correction is not None:
        rho = correction @ rho @ correction.conj().T
    return rho


def coincidence_probability(
    ensemble: ConditionalEnsemble, output_detectors: DetectorModel
) -> float:
    """Probability, given the herald, of one detected photon per output arm."""
    table = number_table(ensemble, output_detectors)
    return sum(table.get(p, 0.0) for p in COINCIDENCE_PATTERNS)


def arm_click_probability(
    ensemble: ConditionalEnsemble, output_detectors: DetectorModel
) -> float:
    """Probability, given the herald, of at least one click in each output arm."""
    if ensemble.probability <= 0.0:
        raise ValueError("ensemble has zero herald probability")
    labels = ensemble.register.labels
    etas = [output_detectors.eta(m) for m in labels]
    total = 0.0
    for weight, ket in ensemble.components:
        for occ, amp in ket.amplitudes.items():
            p = abs(amp) ** 2
            miss1 = (1.0 - etas[0]) ** occ[0] * (1.0 - etas[1]) ** occ[1]
            miss2 = (1.0 - etas[2]) ** occ[2] * (1.0 - etas[3]) ** occ[3]
            total += weight * p * (1.0 - miss1) * (1.0 - miss2)
    return total / ensemble.probability


def correction_from_ideal_ensemble(ensemble: ConditionalEnsemble) -> np.ndarray:
    """Local unitary rotating an ideal heralded ket onto (|HH>+|VV>)/sqrt(2).

    The ensemble must come from heralding the pure three-pair term with
    ideal number-resolving lossless detectors (a single maximally entangled
    component); the per-arm unitaries come from the SVD of its 2x2
    coefficient matrix.
    """
    if len(ensemble.components) != 1:
        raise RuntimeError("ideal three-pair herald should have a single component")
    _, ket = ensemble.components[0]
    coeff = np.zeros((2, 2), dtype=complex)
    for (a, b), pattern in zip(((0, 0), (0, 1), (1, 0), (1, 1)), COINCIDENCE_PATTERNS):
        coeff[a, b] = ket.amplitude(pattern)
    u, s, vh = np.linalg.svd(coeff)
    if not np.allclose(s, [math.sqrt(0.5)] * 2, atol=1e-9):
        raise RuntimeError("ideal heralded state is not maximally entangled")
    u1 = u.conj().T
    u2 = vh.conj()
    return np.kron(u1, u2)


@functools.lru_cache(maxsize=256)
def convention_correction(t1: float, t2: float) -> np.ndarray:
    """Convention-correcting local unitary for one splitter pair (cached)."""
    layout = build_paper_circuit(t1, t2, ("z", "z"))
    evolved = layout.run(pair_term(3))
    ensemble = herald(evolved, layout.herald_labels(), IDEAL_NUMBER_DETECTORS)
    return correction_from_ideal_ensemble(ensemble)

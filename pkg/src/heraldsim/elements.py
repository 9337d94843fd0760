"""Optical elements and assembly of the heralded-pair circuit.

The circuit follows the experimental layout: two SPDC arms a1/a2 hit
partially transmitting beam splitters; the reflected arm r1 is analyzed in
the H/V basis, the reflected arm r2 in the +/- basis (half-wave plate at
22.5 degrees before a polarizing beam splitter), and the transmitted arms
t1/t2 pass setting-dependent analysis wave plates before their own
polarizing beam splitters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import (
    Mode,
    ModeMap,
    ModeRegister,
    SparseKet,
    apply_mode_map,
    expand_to_register,
    reorder,
    register_of,
)

# Emission register: two spatial arms, H and V each.
SOURCE_REGISTER = register_of(("a1", "H"), ("a1", "V"), ("a2", "H"), ("a2", "V"))

HERALD_NAMES = ("r1H", "r1V", "r2+", "r2-")
OUTPUT_NAMES = ("t1H", "t1V", "t2H", "t2V")

ANALYSIS_SETTINGS = ("x", "y", "z")


def beam_splitter_map(transmission: float) -> ModeMap:
    """Two-port non-polarizing beam splitter with intensity transmission T.

    Real convention [[sqrt(T), sqrt(R)], [sqrt(R), -sqrt(T)]] between the
    (transmitted, reflected) outputs; any lab phase differs from this by a
    local unitary that is corrected downstream.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {transmission}")
    t = math.sqrt(transmission)
    r = math.sqrt(1.0 - transmission)
    return ModeMap(np.array([[t, r], [r, -t]], dtype=complex))


def hwp_map(angle: float) -> ModeMap:
    """Half-wave plate Jones matrix at fast-axis angle theta.

    [[cos 2t, sin 2t], [sin 2t, -cos 2t]] acting on the (H, V) pair of one
    spatial mode.
    """
    c = math.cos(2.0 * angle)
    s = math.sin(2.0 * angle)
    return ModeMap(np.array([[c, s], [s, -c]], dtype=complex))


def qwp_map(angle: float) -> ModeMap:
    """Quarter-wave plate Jones matrix at fast-axis angle theta.

    Built as R(t) diag(1, -i) R(-t); the global phase is fixed so the
    leading H amplitude is real and positive.
    """
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]], dtype=complex)
    jones = rot @ np.diag([1.0, -1.0j]) @ rot.conj().T
    anchor = jones[0, 0] if abs(jones[0, 0]) > 1e-12 else jones[0, 1]
    jones = jones * (abs(anchor) / anchor)
    return ModeMap(jones)


def _on_spatial(jones: ModeMap, spatial: str) -> ModeMap:
    labels = (Mode(spatial, "H"), Mode(spatial, "V"))
    return ModeMap(jones.matrix, labels, labels)


def pbs_map(spatial: str, transmitted: str, reflected: str) -> ModeMap:
    """Polarizing beam splitter: H to the transmitted port, V to the reflected.

    A pure relabeling isometry; the two output ports become distinct
    detection modes carrying a single polarization each.
    """
    return ModeMap(
        np.eye(2, dtype=complex),
        (Mode(spatial, "H"), Mode(spatial, "V")),
        (Mode(transmitted, "H"), Mode(reflected, "V")),
    )


def splitter_element(transmission: float, spatial: str, t_out: str, r_out: str) -> ModeMap:
    """Beam splitter on one spatial arm (other input port in vacuum).

    Polarization independent: each of (H, V) maps onto the transmitted and
    reflected spatial modes with the first row of the two-port convention.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {transmission}")
    t = math.sqrt(transmission)
    r = math.sqrt(1.0 - transmission)
    matrix = np.array(
        [
            [t, r, 0.0, 0.0],
            [0.0, 0.0, t, r],
        ],
        dtype=complex,
    )
    return ModeMap(
        matrix,
        (Mode(spatial, "H"), Mode(spatial, "V")),
        (Mode(t_out, "H"), Mode(r_out, "H"), Mode(t_out, "V"), Mode(r_out, "V")),
    )


def analysis_elements(spatial: str, setting: str) -> list[ModeMap]:
    """Wave plates that rotate a Pauli measurement basis onto H/V.

    z: none; x: HWP at pi/8 maps +/- onto H/V; y: QWP at pi/4 then HWP at
    pi/4 maps the circular basis onto H/V.
    """
    if setting == "z":
        return []
    if setting == "x":
        return [_on_spatial(hwp_map(math.pi / 8.0), spatial)]
    if setting == "y":
        return [
            _on_spatial(qwp_map(math.pi / 4.0), spatial),
            _on_spatial(hwp_map(math.pi / 4.0), spatial),
        ]
    raise ValueError(f"unknown analysis setting {setting!r} (use x, y or z)")


@dataclass(frozen=True)
class CircuitLayout:
    """Assembled circuit: ordered elements plus named detection modes."""

    elements: tuple[ModeMap, ...]
    input_register: ModeRegister
    register: ModeRegister
    herald_modes: dict[str, Mode]
    output_modes: dict[str, Mode]
    t1: float
    t2: float
    settings: tuple[str, str]

    def herald_labels(self) -> tuple[Mode, ...]:
        return tuple(self.herald_modes[n] for n in HERALD_NAMES)

    def output_labels(self) -> tuple[Mode, ...]:
        return tuple(self.output_modes[n] for n in OUTPUT_NAMES)

    def run(self, state: SparseKet) -> SparseKet:
        """Evolve a source-register state through every element."""
        for element in self.elements:
            state = apply_mode_map(state, element)
        return reorder(state, self.register)

    def total_matrix(self) -> np.ndarray:
        """Composed mode-substitution matrix, source register -> final register."""
        reg = self.input_register
        total = np.eye(reg.size, dtype=complex)
        for element in self.elements:
            expanded = expand_to_register(reg, element)
            total = total @ expanded.matrix
            reg = ModeRegister(expanded.output_labels)
        perm = np.zeros((reg.size, self.register.size), dtype=complex)
        for j, label in enumerate(self.register.labels):
            perm[reg.index(label), j] = 1.0
        return total @ perm


def build_paper_circuit(
    t1: float, t2: float, settings: tuple[str, str] = ("z", "z")
) -> CircuitLayout:
    """Assemble the full heralded-entanglement circuit.

    Arm a1 -> BS(T1) -> (t1, r1); r1 -> PBS -> detectors r1H/r1V.
    Arm a2 -> BS(T2) -> (t2, r2); r2 -> HWP(pi/8) -> PBS -> detectors r2+/r2-.
    Arms t1, t2 -> analysis wave plates for the requested Pauli settings ->
    PBS -> detectors t1H/t1V and t2H/t2V.
    """
    for s in settings:
        if s not in ANALYSIS_SETTINGS:
            raise ValueError(f"unknown analysis setting {s!r} (use x, y or z)")

    elements: list[ModeMap] = [
        splitter_element(t1, "a1", "t1", "r1"),
        splitter_element(t2, "a2", "t2", "r2"),
        pbs_map("r1", "r1H", "r1V"),
        _on_spatial(hwp_map(math.pi / 8.0), "r2"),
        pbs_map("r2", "r2+", "r2-"),
    ]
    elements += analysis_elements("t1", settings[0])
    elements += [pbs_map("t1", "t1H", "t1V")]
    elements += analysis_elements("t2", settings[1])
    elements += [pbs_map("t2", "t2H", "t2V")]

    herald_modes = {
        "r1H": Mode("r1H", "H"),
        "r1V": Mode("r1V", "V"),
        "r2+": Mode("r2+", "H"),
        "r2-": Mode("r2-", "V"),
    }
    output_modes = {
        "t1H": Mode("t1H", "H"),
        "t1V": Mode("t1V", "V"),
        "t2H": Mode("t2H", "H"),
        "t2V": Mode("t2V", "V"),
    }
    final = ModeRegister(
        tuple(herald_modes[n] for n in HERALD_NAMES)
        + tuple(output_modes[n] for n in OUTPUT_NAMES)
    )
    return CircuitLayout(
        elements=tuple(elements),
        input_register=SOURCE_REGISTER,
        register=final,
        herald_modes=herald_modes,
        output_modes=output_modes,
        t1=t1,
        t2=t2,
        settings=tuple(settings),
    )

import math
import warnings

import numpy as np
import pytest

from heraldsim.detection import ConditionalEnsemble, DetectorModel, herald
from heraldsim.elements import build_paper_circuit
from heraldsim.fock import basis_ket, register_of
from heraldsim.metrics import (
    BELL_STATES,
    PHI_PLUS,
    PSI_MINUS,
    RateEstimate,
    check_density_matrix,
    chsh_max,
    concurrence,
    direct_preparation_probability,
    fidelity_to_phi_plus,
    preparation_efficiency,
    tangle,
    total_state_fidelity,
    total_state_fidelity_from_values,
    visibility_from_scan,
)
from heraldsim.source import pair_term

PHI_PLUS_RHO = np.outer(PHI_PLUS, PHI_PLUS.conj())
PSI_MINUS_RHO = np.outer(PSI_MINUS, PSI_MINUS.conj())
MIXED_RHO = np.eye(4, dtype=complex) / 4.0


def werner(p):
    return p * PHI_PLUS_RHO + (1 - p) * MIXED_RHO


def random_local_unitary(rng):
    def u2():
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        q, r = np.linalg.qr(z)
        return q * (np.diag(r) / np.abs(np.diag(r)))

    return np.kron(u2(), u2())


class TestFidelity:
    def test_phi_plus_itself(self):
        assert fidelity_to_phi_plus(PHI_PLUS_RHO) == pytest.approx(1.0, abs=1e-12)

    def test_maximally_mixed(self):
        assert fidelity_to_phi_plus(MIXED_RHO) == pytest.approx(0.25, abs=1e-12)
        assert fidelity_to_phi_plus(MIXED_RHO, optimize_local=True) == pytest.approx(
            0.25, abs=1e-7
        )

    def test_psi_minus_locally_equivalent(self):
        assert fidelity_to_phi_plus(PSI_MINUS_RHO) == pytest.approx(0.0, abs=1e-12)
        assert fidelity_to_phi_plus(PSI_MINUS_RHO, optimize_local=True) == pytest.approx(
            1.0, abs=1e-7
        )

    def test_invalid_matrix_rejected(self):
        with pytest.raises(ValueError):
            fidelity_to_phi_plus(np.eye(4))  # trace 4


class TestTangle:
    def test_bell_states_maximal(self):
        for vec in BELL_STATES.values():
            rho = np.outer(vec, vec.conj())
            assert tangle(rho) == pytest.approx(1.0, abs=1e-10)

    def test_maximally_mixed_zero(self):
        assert tangle(MIXED_RHO) == pytest.approx(0.0, abs=1e-12)

    def test_werner_threshold_at_one_third(self):
        # separable up to p = 1/3; linear in p above
        third = 1.0 / 3.0
        assert concurrence(werner(third - 1e-3)) == pytest.approx(0.0, abs=1e-3)
        assert concurrence(werner(third + 1e-3)) > 0.0
        for p in (0.4, 0.6, 0.8, 1.0):
            assert concurrence(werner(p)) == pytest.approx(
                max(0.0, (3 * p - 1) / 2), abs=1e-10
            )

    def test_monotone_in_werner_weight(self):
        values = [tangle(werner(p)) for p in np.linspace(0, 1, 21)]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


class TestChsh:
    def test_phi_plus_tsirelson(self):
        assert chsh_max(PHI_PLUS_RHO) == pytest.approx(2 * math.sqrt(2), abs=1e-10)

    def test_maximally_mixed_zero(self):
        assert chsh_max(MIXED_RHO) == pytest.approx(0.0, abs=1e-12)

    def test_never_exceeds_tsirelson(self):
        rng = np.random.default_rng(51)
        for _ in range(20):
            z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            rho = z @ z.conj().T
            rho /= np.trace(rho).real
            assert chsh_max(rho) <= 2 * math.sqrt(2) + 1e-9

    def test_local_unitary_invariance(self):
        rng = np.random.default_rng(52)
        rho = werner(0.7)
        for _ in range(5):
            u = random_local_unitary(rng)
            rotated = u @ rho @ u.conj().T
            assert chsh_max(rotated) == pytest.approx(chsh_max(rho), abs=1e-8)
            assert tangle(rotated) == pytest.approx(tangle(rho), abs=1e-8)


class TestPreparationEfficiency:
    def test_unit_when_rates_match(self):
        assert preparation_efficiency(RateEstimate(c4=10.0, c6=10.0 * 0.25, eta=0.5)) == 1.0

    def test_reference_values(self):
        # quoted estimator value for the balanced splitters
        assert preparation_efficiency(
            RateEstimate(c4=1.0, c6=0.294 * 0.0966**2, eta=0.0966)
        ) == pytest.approx(0.294, rel=1e-12)

    def test_zero_six_fold(self):
        assert preparation_efficiency(RateEstimate(c4=5.0, c6=0.0, eta=0.3)) == 0.0

    def test_zero_four_fold_rejected(self):
        with pytest.raises(ValueError):
            preparation_efficiency(RateEstimate(c4=0.0, c6=0.0, eta=0.3))

    def test_clamped_with_warning(self):
        with pytest.warns(UserWarning, match="clamp"):
            value = preparation_efficiency(RateEstimate(c4=1.0, c6=1.0, eta=0.1))
        assert value == 1.0


class TestDirectPreparation:
    def test_ideal_three_pair_unity(self):
        from heraldsim.detection import IDEAL_NUMBER_DETECTORS

        layout = build_paper_circuit(0.5, 0.5)
        ens = herald(layout.run(pair_term(3)), layout.herald_labels(), IDEAL_NUMBER_DETECTORS)
        assert direct_preparation_probability(ens) == pytest.approx(1.0, abs=1e-12)

    def test_threshold_heralds_near_quadratic_line(self):
        det = DetectorModel()
        for t in (0.17, 0.5, 0.7):
            layout = build_paper_circuit(t, t)
            ens = herald(layout.run(pair_term(3)), layout.herald_labels(), det)
            p = direct_preparation_probability(ens)
            assert abs(p - t * t) / (t * t) <= 0.25

    def test_zero_probability_rejected(self):
        reg = register_of(("t1H", "H"), ("t1V", "V"), ("t2H", "H"), ("t2V", "V"))
        ens = ConditionalEnsemble(reg, (), 0.0)
        with pytest.raises(ValueError):
            direct_preparation_probability(ens)


class TestTotalStateFidelity:
    # quoted (P11, F_post) pairs against the quoted total fidelities
    CASES = [
        (2.58e-4, 0.637, 1.64e-4),
        (6.14e-4, 0.842, 5.17e-4),
        (3.06e-3, 0.575, 1.76e-3),
        (8.03e-3, 0.619, 4.97e-3),
    ]

    @pytest.mark.parametrize("p11,f_post,expected", CASES)
    def test_reproduces_quoted_products(self, p11, f_post, expected):
        value = total_state_fidelity_from_values(p11, f_post)
        assert abs(value - expected) / expected <= 0.02

    def test_from_table_and_state(self):
        table = {(1, 0, 1, 0): 2.0e-3, (0, 1, 0, 1): 1.06e-3, (0, 0, 0, 0): 0.9969}
        rho = 0.575 * PHI_PLUS_RHO + 0.425 * np.diag([0.0, 1.0, 0.0, 0.0])
        value = total_state_fidelity(table, rho)
        assert value == pytest.approx(3.06e-3 * 0.575, rel=1e-9)

    def test_edge_values(self):
        assert total_state_fidelity_from_values(0.0, 0.9) == 0.0
        assert total_state_fidelity_from_values(1.0, 1.0) == 1.0


class TestVisibility:
    def test_perfect_contrast(self):
        assert visibility_from_scan([100.0, 0.0]) == pytest.approx(1.0)

    def test_reference_contrast(self):
        assert visibility_from_scan([93.1, 6.9]) == pytest.approx(0.862, abs=1e-12)

    def test_flat_scan(self):
        assert visibility_from_scan([42.0, 42.0, 42.0]) == pytest.approx(0.0)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            visibility_from_scan([0.0, 0.0])

    def test_single_point_rejected(self):
        with pytest.raises(ValueError, match="two"):
            visibility_from_scan([5.0])

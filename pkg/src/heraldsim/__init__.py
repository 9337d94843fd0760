"""Heralded entangled-photon-pair simulator and analysis toolkit."""

from .detection import (
    ConditionalEnsemble,
    DetectorModel,
    click_distribution,
    convention_correction,
    herald,
    number_table,
    postselect_two_qubit,
)
from .elements import CircuitLayout, beam_splitter_map, build_paper_circuit, hwp_map, pbs_map, qwp_map
from .experiments import (
    ExperimentConfig,
    calibrate_tau,
    heralded_ensemble,
    run_power_comparison,
    run_sweep,
    simulate_experiment,
)
from .fock import Mode, ModeMap, ModeRegister, SparseKet, apply_mode_map, project_occupation, tensor, vacuum
from .metrics import (
    RateEstimate,
    chsh_max,
    direct_preparation_probability,
    fidelity_to_phi_plus,
    preparation_efficiency,
    tangle,
    total_state_fidelity,
    visibility_from_scan,
)
from .source import SpdcParams, apply_visibility, pair_term, spdc_state
from .tomography import (
    CountTable,
    expected_coincidences,
    ingest_counts,
    mle_reconstruct,
    monte_carlo_errors,
    simulate_counts,
)

__version__ = "0.1.0"

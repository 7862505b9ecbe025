//! Clifford randomized benchmarking and coherence-limited gate fidelity.

mod clifford;
mod coherence;
mod rb;

pub use clifford::{
    enumerate_group, pulse_count, pulse_counts, standard_generators, CliffordElement, PulseCount, SignedPauli,
    CLIFFORD2_ORDER, SINGLE_QUBIT_SLOT_NS, TWO_QUBIT_GATE_NS,
};
pub use coherence::{
    apply_kraus, coherence_limit_1q, coherence_limit_1q_kraus, coherence_limit_2q, coherence_limit_2q_kraus,
    relaxation_kraus, relaxation_kraus_2q, CoherenceParams, FormulaVariant,
};
pub use rb::{
    apply_unitary, depolarize, depolarizing_channel, fit_decay, interleaved_gate_fidelity, interleaved_rb,
    relaxation_channel, run_rb, sample_clifford2, DecayFit, GateChannel, InterleavedResult, RbOptions, RbResult,
};

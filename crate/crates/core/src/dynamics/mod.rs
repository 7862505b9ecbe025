//! Time-domain simulation of cross-resonance pulse sequences.

pub mod cr;
pub mod noise;
pub mod propagate;
pub mod pulse;

pub use cr::{
    calibrate_zx_gate, conditional_angle, ideal_zx90, simulate_cr_rabi, simulate_echoed_cr_evolution,
    BlochTrajectory, CalibrationOptions, CrSystem, EchoedCrGate, ZxCalibration,
};
pub use noise::{ModeNoise, NoiseSpec, StepChannel};
pub use propagate::{
    check_density_matrix, propagate, propagate_lab_frame, propagator, ChannelDrive, DrivenSystem, PiMode,
    PropagationOptions,
};
pub use pulse::{
    amplitude_for_angle, echoed_cr_sequence, edge_area, Channel, EchoTiming, PulseEnvelope,
    PulseSequence, TimedPulse,
};

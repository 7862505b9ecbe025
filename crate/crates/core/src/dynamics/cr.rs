use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::NoiseSpec;
use super::propagate::{propagate, propagator, ChannelDrive, DrivenSystem, PiMode, PropagationOptions};
use super::pulse::{echoed_cr_sequence, Channel, EchoTiming, PulseEnvelope, PulseSequence};
use crate::effective::{cr_effective_hamiltonian, cr_frame, pauli_pair, EffectiveHamiltonian, EffectiveOptions};
use crate::error::{Error, Result};
use crate::model::{CircuitSpec, DriveSpec, ModeLabel, MHZ};
use crate::frames::restrict as restrict_square;
use crate::numerics::{nelder_mead, CMatrix, SimplexOptions};

/// Length and edge time of the control pi pulse used to prepare |1> and in
/// pulsed echoes.
const PI_LENGTH: f64 = 40e-9;
const PI_RISE: f64 = 10e-9;

/// Driven control/target system ready for time-domain simulation.
///
/// Label slot 0 is the control (T), slot 1 the target (A) and slot 2 the
/// spectator (B). The CR channel carries `amplitude` and `phase`;
/// `effective` holds the block-diagonal Pauli coefficients at that drive.
#[derive(Debug, Clone)]
pub struct CrSystem {
    pub system: DrivenSystem,
    pub spectator: usize,
    /// Indices of |00>, |01>, |10>, |11> (control, target).
    pub computational: [usize; 4],
    pub amplitude: f64,
    pub phase: f64,
    pub effective: EffectiveHamiltonian,
}

/// Entries of `m` that raise the total excitation by exactly one.
fn raising_part(m: &CMatrix, labels: &[[usize; 3]]) -> CMatrix {
    let exc = |l: &[usize; 3]| l.iter().sum::<usize>();
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if exc(&labels[i]) == exc(&labels[j]) + 1 {
            m[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

impl CrSystem {
    /// Dressed, rotating-frame model of `spec` with B frozen in `spectator`
    /// (whole space when lambda != 0).
    pub fn from_spec(spec: &CircuitSpec, drive: &DriveSpec, spectator: usize) -> Result<Self> {
        let drive = drive.normalized()?;
        let opts = EffectiveOptions {
            spectator_level: spectator,
            ..Default::default()
        };
        let idle = cr_frame(spec, &DriveSpec { amplitude: 0.0, ..drive }, &opts)?;
        // unit-amplitude drive operator from a reference amplitude, with
        // the cross-talk phase taken relative to the CR phase
        let reference = MHZ;
        let probe = DriveSpec {
            amplitude: reference,
            phase: 0.0,
            crosstalk_phase: drive.crosstalk_phase - drive.phase,
            ..drive
        };
        let driven = cr_frame(spec, &probe, &opts)?;
        if driven.labels != idle.labels {
            return Err(Error::Labeling("drive changed the dressed labeling".into()));
        }
        let diff = (&driven.h - &idle.h) / Complex64::new(reference, 0.0);
        let cr = raising_part(&diff, &idle.labels) * Complex64::new(2.0, 0.0);
        let control = raising_part(&idle.control_drive, &idle.labels);
        let comp = idle.computational(spectator)?;
        let e = |k: usize| idle.h[(comp[k], comp[k])].re;
        let control_detuning = 0.5 * ((e(2) - e(0)) + (e(3) - e(1)));
        let effective = cr_effective_hamiltonian(spec, &drive, &opts)?.coefficients;
        let system = DrivenSystem {
            h0: idle.h,
            labels: idle.labels,
            channels: vec![
                ChannelDrive {
                    channel: Channel::Cr,
                    raising: cr,
                    detuning: 0.0,
                },
                ChannelDrive {
                    channel: Channel::Control,
                    raising: control,
                    detuning: control_detuning,
                },
            ],
        };
        system.validate()?;
        Ok(Self {
            system,
            spectator,
            computational: comp,
            amplitude: drive.amplitude,
            phase: drive.phase,
            effective,
        })
    }

    /// Two-qubit model whose CR pulse at `amplitude` reproduces `effective`:
    /// IZ, ZI and ZZ are static, IX, IY, ZX and ZY scale with the envelope.
    pub fn synthetic(effective: &EffectiveHamiltonian, amplitude: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidParameter("synthetic amplitude must be positive".into()));
        }
        let c = |v: f64| Complex64::new(v, 0.0);
        let h0 = (pauli_pair(0, 3) * c(effective.iz)
            + pauli_pair(3, 0) * c(effective.zi)
            + pauli_pair(3, 3) * c(effective.zz))
            * c(0.5);
        let sigma_plus = |control: [f64; 2], a: Complex64| {
            let mut m = CMatrix::zeros(4, 4);
            for ctl in 0..2 {
                m[(2 * ctl + 1, 2 * ctl)] = a * control[ctl];
            }
            m
        };
        let cr = (sigma_plus([1.0, -1.0], Complex64::new(effective.zx, effective.zy))
            + sigma_plus([1.0, 1.0], Complex64::new(effective.ix, effective.iy)))
            / c(amplitude);
        let mut control = CMatrix::zeros(4, 4);
        control[(2, 0)] = c(1.0);
        control[(3, 1)] = c(1.0);
        let system = DrivenSystem {
            h0,
            labels: vec![[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0]],
            channels: vec![
                ChannelDrive {
                    channel: Channel::Cr,
                    raising: cr,
                    detuning: 0.0,
                },
                ChannelDrive {
                    channel: Channel::Control,
                    raising: control,
                    detuning: 0.0,
                },
            ],
        };
        Ok(Self {
            system,
            spectator: 0,
            computational: [0, 1, 2, 3],
            amplitude,
            phase: 0.0,
            effective: *effective,
        })
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// Noise restricted to what the simulated space can represent: when the
    /// spectator is frozen in one level its channels are dropped (exact for
    /// level 0, where damping and dephasing of B act trivially).
    pub fn adapt_noise(&self, noise: &NoiseSpec) -> NoiseSpec {
        let mut out = *noise;
        let b = ModeLabel::B.index();
        if self.system.labels.iter().all(|l| l[b] == self.spectator) {
            out.modes[b] = None;
        }
        out
    }

    fn options(&self, opts: &PropagationOptions) -> PropagationOptions {
        PropagationOptions {
            noise: opts.noise.map(|n| self.adapt_noise(&n)),
            ..*opts
        }
    }

    fn basis_state(&self, label: [usize; 3]) -> Result<CMatrix> {
        let i = self
            .system
            .index_of(label)
            .ok_or_else(|| Error::Labeling(format!("no state labeled {label:?}")))?;
        let n = self.system.dim();
        let mut rho = CMatrix::zeros(n, n);
        rho[(i, i)] = Complex64::new(1.0, 0.0);
        Ok(rho)
    }

    /// Amplitude of a 40 ns control pulse with area pi on the 0 -> 1
    /// transition of the control.
    pub fn pi_amplitude(&self) -> Result<f64> {
        self.pi_amplitude_for(&pi_envelope(1.0))
    }

    fn pi_amplitude_for(&self, env: &PulseEnvelope) -> Result<f64> {
        let ch = self
            .system
            .channel(Channel::Control)
            .ok_or_else(|| Error::InvalidParameter("no control channel".into()))?;
        let element = ch.raising[(self.computational[2], self.computational[0])].norm();
        if element < 1e-6 {
            return Err(Error::InvalidParameter("control transition is dark".into()));
        }
        Ok(PI / (env.unit_area() * element))
    }

    fn cr_pulse(&self, flat: f64, rise: f64) -> PulseEnvelope {
        PulseEnvelope::rounded_square(self.amplitude, flat, rise).with_phase(self.phase)
    }

    /// Target Bloch vector (control traced out, target restricted to its
    /// two lowest levels) and control <Z> over the control's 0/1 levels.
    pub fn observe(&self, rho: &CMatrix) -> [f64; 4] {
        let labels = &self.system.labels;
        let (mut r00, mut r11, mut r01) = (0.0, 0.0, Complex64::new(0.0, 0.0));
        let mut control_z = 0.0;
        for (i, l) in labels.iter().enumerate() {
            let p = rho[(i, i)].re;
            match l[0] {
                0 => control_z += p,
                1 => control_z -= p,
                _ => {}
            }
            if l[1] == 0 && l[2] == self.spectator {
                r00 += p;
                if let Some(j) = self.system.index_of([l[0], 1, l[2]]) {
                    r11 += rho[(j, j)].re;
                    r01 += rho[(i, j)];
                }
            }
        }
        [2.0 * r01.re, -2.0 * r01.im, r00 - r11, control_z]
    }
}

fn pi_envelope(amplitude: f64) -> PulseEnvelope {
    PulseEnvelope::rounded_square(amplitude, PI_LENGTH - 2.0 * PI_RISE, PI_RISE)
}

/// Conditional target trajectory. `times` are pulse lengths for Rabi
/// experiments and half-pulse lengths for echo experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochTrajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub control_z: Vec<f64>,
    pub control_state: usize,
}

impl BlochTrajectory {
    fn from_points(times: Vec<f64>, points: Vec<[f64; 4]>, control_state: usize) -> Result<Self> {
        for (t, p) in times.iter().zip(&points) {
            let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            if r2 > 1.0 + 1e-9 {
                return Err(Error::NonPhysical(format!("Bloch vector of length^2 {r2} at t = {t:e}")));
            }
        }
        Ok(Self {
            times,
            x: points.iter().map(|p| p[0]).collect(),
            y: points.iter().map(|p| p[1]).collect(),
            z: points.iter().map(|p| p[2]).collect(),
            control_z: points.iter().map(|p| p[3]).collect(),
            control_state,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 3] {
        [self.x[i], self.y[i], self.z[i]]
    }
}

fn check_control_state(c: usize) -> Result<()> {
    if c > 1 {
        return Err(Error::InvalidParameter(format!("control state must be 0 or 1, got {c}")));
    }
    Ok(())
}

/// CR Rabi experiment: control prepared in `control_state`, target in |0>,
/// CR drive applied for each of `n_points` lengths in [0, tau_max].
///
/// With `rise == 0` the pulse is square and all lengths are sampled from
/// one run; otherwise every length is a separate rounded pulse (edges
/// shortened for lengths below two rise times). In pulsed mode the control
/// is prepared by a 40 ns pi pulse before the CR drive.
pub fn simulate_cr_rabi(
    sys: &CrSystem,
    tau_max: f64,
    n_points: usize,
    control_state: usize,
    rise: f64,
    opts: &PropagationOptions,
) -> Result<BlochTrajectory> {
    check_control_state(control_state)?;
    if !(tau_max > 0.0 && tau_max.is_finite()) || n_points < 2 {
        return Err(Error::InvalidParameter("need tau_max > 0 and at least two points".into()));
    }
    if !(rise >= 0.0 && rise.is_finite()) {
        return Err(Error::InvalidParameter("rise time must be non-negative".into()));
    }
    let opts = sys.options(opts);
    let times: Vec<f64> = (0..n_points)
        .map(|k| tau_max * k as f64 / (n_points - 1) as f64)
        .collect();
    let pulsed_prep = opts.pi_mode == PiMode::Pulsed && control_state == 1;
    let (prep, rho0) = if pulsed_prep {
        let seq = PulseSequence::new().then(Channel::Control, pi_envelope(sys.pi_amplitude()?));
        (seq, sys.basis_state([0, 0, sys.spectator])?)
    } else {
        (PulseSequence::new(), sys.basis_state([control_state, 0, sys.spectator])?)
    };
    let offset = prep.duration();
    let points: Vec<[f64; 4]> = if rise == 0.0 {
        let seq = prep.then(Channel::Cr, sys.cr_pulse(tau_max, 0.0));
        let samples: Vec<f64> = times.iter().map(|t| t + offset).collect();
        let (states, _) = propagate(&sys.system, &seq, &rho0, &opts, &samples)?;
        states.iter().map(|r| sys.observe(r)).collect()
    } else {
        times
            .par_iter()
            .map(|&t| {
                let r = rise.min(t / 2.0);
                let seq = prep.clone().then(Channel::Cr, sys.cr_pulse(t - 2.0 * r, r));
                let (_, rho) = propagate(&sys.system, &seq, &rho0, &opts, &[])?;
                Ok(sys.observe(&rho))
            })
            .collect::<Result<_>>()?
    };
    BlochTrajectory::from_points(times, points, control_state)
}

fn echo_sequence(sys: &CrSystem, timing: &EchoTiming, phase: f64) -> Result<PulseSequence> {
    let rise = timing.rise.min(timing.pi_length / 2.0);
    let pi = PulseEnvelope::rounded_square(1.0, timing.pi_length - 2.0 * rise, rise);
    echoed_cr_sequence(timing, sys.amplitude, phase, sys.pi_amplitude_for(&pi)?)
}

/// Echoed CR for every half length in `halves`; returns the target Bloch
/// vector and control <Z> at the end of each sequence.
pub fn simulate_echoed_cr_evolution(
    sys: &CrSystem,
    timing: &EchoTiming,
    halves: &[f64],
    control_state: usize,
    opts: &PropagationOptions,
) -> Result<BlochTrajectory> {
    check_control_state(control_state)?;
    let opts = sys.options(opts);
    let rho0 = sys.basis_state([control_state, 0, sys.spectator])?;
    let points = halves
        .par_iter()
        .map(|&half| {
            let t = EchoTiming { half, ..*timing };
            let seq = echo_sequence(sys, &t, sys.phase)?;
            let (_, rho) = propagate(&sys.system, &seq, &rho0, &opts, &[])?;
            Ok(sys.observe(&rho))
        })
        .collect::<Result<Vec<_>>>()?;
    BlochTrajectory::from_points(halves.to_vec(), points, control_state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub timing: EchoTiming,
    /// Longest allowed CR half pulse.
    pub max_half: f64,
    /// Allowed error of the conditional angle (rad).
    pub angle_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            timing: EchoTiming::default(),
            max_half: 2e-6,
            angle_tolerance: 1e-5,
            max_iterations: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZxCalibration {
    /// Echo timing with the calibrated half length.
    pub timing: EchoTiming,
    /// Half length from 2 |ZX| tau_eff = pi/2 alone.
    pub analytic_half: f64,
    /// (theta_0 - theta_1) / 2 of the calibrated echo (rad).
    pub achieved_angle: f64,
    /// CR phase used; shifted by pi when ZX < 0.
    pub cr_phase: f64,
    pub iterations: usize,
}

/// Conditional rotation angle (theta_0 - theta_1)/2 of the target, with
/// theta = atan2(-y, z), after the echo.
pub fn conditional_angle(
    sys: &CrSystem,
    timing: &EchoTiming,
    phase: f64,
    opts: &PropagationOptions,
) -> Result<f64> {
    let opts = sys.options(opts);
    let seq = echo_sequence(sys, timing, phase)?;
    let theta = [0, 1]
        .par_iter()
        .map(|&c| {
            let rho0 = sys.basis_state([c, 0, sys.spectator])?;
            let (_, rho) = propagate(&sys.system, &seq, &rho0, &opts, &[])?;
            let p = sys.observe(&rho);
            Ok(f64::atan2(-p[1], p[2]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((theta[0] - theta[1]).rem_euclid(2.0 * PI) / 2.0)
}

/// Chooses the CR half length so the echoed sequence is a ZX_{pi/2}.
///
/// Starts from 2 |ZX| tau_eff = pi/2 with tau_eff = flat + 2 * edge area,
/// then refines the flat length by secant iteration on the simulated
/// conditional angle.
pub fn calibrate_zx_gate(
    sys: &CrSystem,
    cal: &CalibrationOptions,
    opts: &PropagationOptions,
) -> Result<ZxCalibration> {
    let zx = sys.effective.zx;
    if !(zx.abs() > 0.0 && zx.is_finite()) {
        return Err(Error::InvalidParameter("ZX vanishes at this drive".into()));
    }
    let cr_phase = if zx < 0.0 { sys.phase + PI } else { sys.phase };
    let rise = cal.timing.rise;
    let edge = PulseEnvelope::rounded_square(1.0, 0.0, rise).edge_area();
    let tau_eff = PI / (4.0 * zx.abs());
    let flat0 = tau_eff - 2.0 * edge;
    if flat0 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ZX is too strong for {:.1} ns edges",
            rise * 1e9
        )));
    }
    let analytic_half = flat0 + 2.0 * rise;
    if analytic_half > cal.max_half {
        return Err(Error::InvalidParameter(format!(
            "calibrated half pulse {:.1} ns exceeds the cap of {:.1} ns",
            analytic_half * 1e9,
            cal.max_half * 1e9
        )));
    }
    let timing_for = |flat: f64| EchoTiming {
        half: flat + 2.0 * rise,
        ..cal.timing
    };
    let residual = |flat: f64| -> Result<f64> {
        Ok(conditional_angle(sys, &timing_for(flat), cr_phase, opts)? - FRAC_PI_2)
    };
    let mut x0 = flat0;
    let mut f0 = residual(x0)?;
    let mut x1 = flat0 * (1.0 - f0 / FRAC_PI_2).max(0.5) + 1e-12;
    let mut iterations = 1;
    if f0.abs() > cal.angle_tolerance {
        let mut f1 = residual(x1)?;
        iterations += 1;
        while f1.abs() > cal.angle_tolerance {
            if iterations >= cal.max_iterations || f1 == f0 {
                return Err(Error::NoConvergence(format!(
                    "ZX calibration off by {:.3e} rad after {iterations} simulations",
                    f1
                )));
            }
            let x2 = (x1 - f1 * (x1 - x0) / (f1 - f0)).max(0.0);
            (x0, f0) = (x1, f1);
            x1 = x2;
            if x1 + 2.0 * rise > cal.max_half {
                return Err(Error::InvalidParameter("calibration ran past the half-pulse cap".into()));
            }
            f1 = residual(x1)?;
            iterations += 1;
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(ZxCalibration {
        timing: timing_for(x0),
        analytic_half,
        achieved_angle: f0 + FRAC_PI_2,
        cr_phase,
        iterations,
    })
}

/// exp(-i pi/4 Z (x) X), control first.
pub fn ideal_zx90() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let zx = pauli_pair(3, 1);
    CMatrix::identity(4, 4) * Complex64::new(s, 0.0) - zx * Complex64::new(0.0, s)
}

/// X on the control, identity on the target.
fn control_flip() -> CMatrix {
    pauli_pair(1, 0)
}

fn local_z(angles: [f64; 2]) -> CMatrix {
    let s = |bit: usize| if bit == 0 { 1.0 } else { -1.0 };
    CMatrix::from_fn(4, 4, |i, j| {
        if i == j {
            let phase = -0.5 * (angles[0] * s(i / 2) + angles[1] * s(i % 2));
            Complex64::from_polar(1.0, phase)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Calibrated echoed CR acting on two-qubit density matrices.
///
/// Inputs are embedded in the dressed computational states, propagated
/// through the echo, moved to the control's own frame, and corrected by
/// the control bit flip and by virtual Z rotations on both qubits chosen
/// once from the noiseless propagator. The output is the 4x4 block, whose
/// trace falls below one by the leaked population.
#[derive(Debug, Clone)]
pub struct EchoedCrGate {
    sys: CrSystem,
    seq: PulseSequence,
    opts: PropagationOptions,
    frame: CMatrix,
    correction: CMatrix,
    /// Virtual Z angles (control, target) in rad.
    pub local_z: [f64; 2],
    pub calibration: ZxCalibration,
}

impl EchoedCrGate {
    pub fn new(sys: &CrSystem, calibration: &ZxCalibration, opts: &PropagationOptions) -> Result<Self> {
        let sys = sys.clone();
        let seq = echo_sequence(&sys, &calibration.timing, calibration.cr_phase)?;
        let frame = sys.system.to_qubit_frame(seq.duration());
        let noiseless = PropagationOptions { noise: None, ..*opts };
        let u = propagator(&sys.system, &seq, &noiseless)?;
        let block = restrict_square(&(&frame * u), &sys.computational);
        let m = control_flip() * block;
        let target = ideal_zx90();
        let overlap = |a: &[f64]| -> f64 {
            let d = local_z([a[0], a[1]]);
            -(target.adjoint() * &d * &m).trace().norm()
        };
        let mut best = ([0.0, 0.0], f64::INFINITY);
        let n = 36;
        for i in 0..n {
            for j in 0..n {
                let a = [2.0 * PI * i as f64 / n as f64, 2.0 * PI * j as f64 / n as f64];
                let f = overlap(&a);
                if f < best.1 {
                    best = (a, f);
                }
            }
        }
        let simplex = SimplexOptions {
            initial_step: 0.05,
            ..SimplexOptions::default()
        };
        let res = nelder_mead(overlap, &best.0, &simplex)?;
        let local = [res.x[0].rem_euclid(2.0 * PI), res.x[1].rem_euclid(2.0 * PI)];
        let correction = local_z(local) * control_flip();
        Ok(Self {
            sys,
            seq,
            opts: *opts,
            frame,
            correction,
            local_z: local,
            calibration: *calibration,
        })
    }

    pub fn duration(&self) -> f64 {
        self.seq.duration()
    }

    pub fn sequence(&self) -> &PulseSequence {
        &self.seq
    }

    /// Corrected 4x4 block of the noiseless propagator.
    pub fn unitary_block(&self) -> Result<CMatrix> {
        let noiseless = PropagationOptions { noise: None, ..self.opts };
        let u = propagator(&self.sys.system, &self.seq, &noiseless)?;
        Ok(&self.correction * restrict_square(&(&self.frame * u), &self.sys.computational))
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != 4 || rho.ncols() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: rho.nrows(),
            });
        }
        // the map is linear, so a state already depleted by leakage is
        // propagated normalized and scaled back
        let weight = rho.trace().re;
        if !(weight > 0.0) {
            return Err(Error::NonPhysical(format!("input trace {weight}")));
        }
        let n = self.sys.system.dim();
        let comp = self.sys.computational;
        let mut full = CMatrix::zeros(n, n);
        for a in 0..4 {
            for b in 0..4 {
                full[(comp[a], comp[b])] = rho[(a, b)] / weight;
            }
        }
        let opts = self.sys.options(&self.opts);
        let (_, out) = propagate(&self.sys.system, &self.seq, &full, &opts, &[])?;
        let out = &self.frame * out * self.frame.adjoint();
        let block = restrict_square(&out, &comp);
        Ok(&self.correction * block * self.correction.adjoint() * Complex64::new(weight, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KHZ, MHZ};

    fn pure_zx(zx: f64) -> EffectiveHamiltonian {
        EffectiveHamiltonian {
            zx,
            ..Default::default()
        }
    }

    fn square() -> CalibrationOptions {
        CalibrationOptions {
            timing: EchoTiming {
                rise: 0.0,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn zero_drive_leaves_target_at_rest() {
        let sys = CrSystem::synthetic(&pure_zx(0.0), 1.0).unwrap();
        let tr = simulate_cr_rabi(&sys, 200e-9, 21, 0, 0.0, &PropagationOptions::default()).unwrap();
        assert!(tr.z.iter().all(|z| (z - 1.0).abs() < 1e-14));
    }

    #[test]
    fn synthetic_rabi_rates_follow_coefficients() {
        let h = EffectiveHamiltonian {
            ix: 0.4 * MHZ,
            zx: 1.0 * MHZ,
            ..Default::default()
        };
        let sys = CrSystem::synthetic(&h, 10.0 * MHZ).unwrap();
        for (c, rate) in [(0, 1.4 * MHZ), (1, -0.6 * MHZ)] {
            let tr = simulate_cr_rabi(&sys, 500e-9, 26, c, 0.0, &PropagationOptions::default()).unwrap();
            for i in 0..tr.len() {
                let t = tr.times[i];
                assert!((tr.z[i] - (rate * t).cos()).abs() < 1e-10);
                assert!((tr.y[i] + (rate * t).sin()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn square_pulse_half_length_for_1_47_mhz() {
        let sys = CrSystem::synthetic(&pure_zx(1.47 * MHZ), 1.0).unwrap();
        let cal = calibrate_zx_gate(&sys, &square(), &PropagationOptions::default()).unwrap();
        assert!((cal.analytic_half - 85.03e-9).abs() < 0.01e-9, "{}", cal.analytic_half);
        assert!((cal.timing.half - cal.analytic_half).abs() < 1e-13);
        assert!((cal.achieved_angle - FRAC_PI_2).abs() < (0.5f64).to_radians());

        let doubled = CrSystem::synthetic(&pure_zx(2.94 * MHZ), 1.0).unwrap();
        let cal2 = calibrate_zx_gate(&doubled, &square(), &PropagationOptions::default()).unwrap();
        assert!((cal2.timing.half - cal.timing.half / 2.0).abs() < 1e-13);
    }

    #[test]
    fn rounded_calibration_reaches_target_angle() {
        let h = EffectiveHamiltonian {
            ix: 0.3 * MHZ,
            zx: -1.1 * MHZ,
            zz: 80.0 * KHZ,
            zi: -0.5 * MHZ,
            ..Default::default()
        };
        let sys = CrSystem::synthetic(&h, 1.0).unwrap();
        let cal = calibrate_zx_gate(&sys, &CalibrationOptions::default(), &PropagationOptions::default()).unwrap();
        assert!((cal.achieved_angle - FRAC_PI_2).abs() < 1e-4);
        assert!((cal.cr_phase - PI).abs() < 1e-15);
        let gate = EchoedCrGate::new(&sys, &cal, &PropagationOptions::default()).unwrap();
        let u = gate.unitary_block().unwrap();
        let f = (ideal_zx90().adjoint() * u).trace().norm_sqr() / 16.0;
        assert!(f > 0.999, "{f}");
    }

    #[test]
    fn calibration_rejects_weak_zx() {
        let sys = CrSystem::synthetic(&pure_zx(0.01 * MHZ), 1.0).unwrap();
        assert!(calibrate_zx_gate(&sys, &square(), &PropagationOptions::default()).is_err());
        let sys = CrSystem::synthetic(&pure_zx(0.0), 1.0).unwrap();
        assert!(calibrate_zx_gate(&sys, &square(), &PropagationOptions::default()).is_err());
    }

    #[test]
    fn echo_without_zz_keeps_x_at_zero() {
        let halves: Vec<f64> = (0..30).map(|k| k as f64 * 10e-9).collect();
        let timing = EchoTiming::default();
        let mut amplitudes = Vec::new();
        for zz in [0.0, 0.1 * MHZ, 0.3 * MHZ] {
            let h = EffectiveHamiltonian {
                zx: 1.0 * MHZ,
                ix: 0.5 * MHZ,
                zz,
                ..Default::default()
            };
            let sys = CrSystem::synthetic(&h, 1.0).unwrap();
            let tr = simulate_echoed_cr_evolution(&sys, &timing, &halves, 0, &PropagationOptions::default()).unwrap();
            amplitudes.push(tr.x.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
        assert!(amplitudes[0] < 1e-12);
        assert!(amplitudes[1] > 1e-3 && amplitudes[2] > amplitudes[1]);
    }

    #[test]
    fn echo_rotates_at_twice_zx() {
        let zx = 1.2 * MHZ;
        let sys = CrSystem::synthetic(&pure_zx(zx), 1.0).unwrap();
        let timing = EchoTiming {
            rise: 0.0,
            ..Default::default()
        };
        let halves: Vec<f64> = (0..20).map(|k| k as f64 * 15e-9).collect();
        let tr = simulate_echoed_cr_evolution(&sys, &timing, &halves, 0, &PropagationOptions::default()).unwrap();
        for (i, h) in halves.iter().enumerate() {
            assert!((tr.z[i] - (2.0 * zx * h).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn gate_maps_states_like_zx90() {
        let sys = CrSystem::synthetic(&pure_zx(1.47 * MHZ), 1.0).unwrap();
        let cal = calibrate_zx_gate(&sys, &square(), &PropagationOptions::default()).unwrap();
        let gate = EchoedCrGate::new(&sys, &cal, &PropagationOptions::default()).unwrap();
        let g = ideal_zx90();
        let mut rho = CMatrix::zeros(4, 4);
        rho[(1, 1)] = Complex64::new(1.0, 0.0);
        let expect = &g * &rho * g.adjoint();
        assert!((gate.apply(&rho).unwrap() - expect).norm() < 1e-9);
    }
}

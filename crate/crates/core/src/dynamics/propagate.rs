use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::noise::{NoiseSpec, StepChannel};
use super::pulse::{Channel, PulseSequence, TimedPulse};
use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, hermitian_deviation, unitary_from_hermitian, CMatrix};

/// Drive coupling of one channel in the rotating frame: a pulse with
/// envelope a(t) and phase phi adds
/// (a/2) [e^{-i(phi + detuning t)} R + h.c.].
#[derive(Debug, Clone)]
pub struct ChannelDrive {
    pub channel: Channel,
    pub raising: CMatrix,
    /// Channel carrier minus the frame frequency (rad/s).
    pub detuning: f64,
}

/// Static rotating-frame Hamiltonian plus drive channels, written in a
/// labeled basis so noise channels and ideal flips can act on mode levels.
#[derive(Debug, Clone)]
pub struct DrivenSystem {
    pub h0: CMatrix,
    pub labels: Vec<[usize; 3]>,
    pub channels: Vec<ChannelDrive>,
}

impl DrivenSystem {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: [usize; 3]) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn channel(&self, c: Channel) -> Option<&ChannelDrive> {
        self.channels.iter().find(|d| d.channel == c)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.h0.nrows() != n || self.h0.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.h0.nrows(),
            });
        }
        let dev = hermitian_deviation(&self.h0);
        if dev > 1e-9 * self.h0.norm().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        for c in &self.channels {
            if c.raising.nrows() != n || c.raising.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.raising.nrows(),
                });
            }
        }
        Ok(())
    }

    /// Hamiltonian at time t for the given pulses.
    pub fn hamiltonian(&self, pulses: &[TimedPulse], t: f64) -> CMatrix {
        let mut h = self.h0.clone();
        for p in pulses {
            let a = p.value_at(t);
            if a == 0.0 {
                continue;
            }
            let Some(ch) = self.channel(p.channel) else { continue };
            let c = Complex64::from_polar(a / 2.0, -(p.envelope.phase + ch.detuning * t));
            h += &ch.raising * c + ch.raising.adjoint() * c.conj();
        }
        h
    }

    /// Swap of control levels 0 and 1 (identity elsewhere), i.e. an ideal
    /// X on the control in its own frame, expressed in the rotating frame
    /// at time t.
    pub fn ideal_control_flip(&self, t: f64) -> Result<CMatrix> {
        let n = self.dim();
        let detuning = self.channel(Channel::Control).map_or(0.0, |c| c.detuning);
        let mut u = CMatrix::zeros(n, n);
        for (i, l) in self.labels.iter().enumerate() {
            let j = match l[0] {
                0 | 1 => {
                    let mut p = *l;
                    p[0] = 1 - l[0];
                    self.index_of(p).ok_or_else(|| {
                        Error::Labeling(format!("flip partner of {l:?} is missing"))
                    })?
                }
                _ => i,
            };
            // V(t)^dagger X V(t) with V = exp(i detuning n_T t)
            let phase = detuning * t * (self.labels[i][0] as f64 - self.labels[j][0] as f64);
            u[(j, i)] = Complex64::from_polar(1.0, phase);
        }
        Ok(u)
    }

    /// exp(i detuning n_T t): maps rotating-frame states to the frame where
    /// the control rotates at its own frequency.
    pub fn to_qubit_frame(&self, t: f64) -> CMatrix {
        let detuning = self.channel(Channel::Control).map_or(0.0, |c| c.detuning);
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::from_polar(1.0, detuning * t * self.labels[i][0] as f64)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PiMode {
    /// Control-channel pulses become instantaneous flips at their midpoint.
    #[default]
    Ideal,
    /// Control-channel pulses are simulated with their envelopes.
    Pulsed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub dt: f64,
    pub noise: Option<NoiseSpec>,
    pub pi_mode: PiMode,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            dt: 0.05e-9,
            noise: None,
            pi_mode: PiMode::Ideal,
        }
    }
}

pub fn check_density_matrix(rho: &CMatrix, n: usize) -> Result<()> {
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rho.nrows(),
        });
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(Error::NonPhysical(format!("trace {tr}")));
    }
    let (vals, _) = eig_hermitian(rho).map_err(|e| Error::NonPhysical(e.to_string()))?;
    if vals[0] < -1e-9 {
        return Err(Error::NonPhysical(format!("min eigenvalue {:.3e}", vals[0])));
    }
    Ok(())
}

/// Object carried through the timeline: a density matrix or an
/// accumulated propagator.
trait Evolving {
    fn unitary(&mut self, u: &CMatrix);
    fn channel(&mut self, ch: &StepChannel);
    fn end_interval(&mut self) {}
    fn snapshot(&self) -> CMatrix;
}

struct Density(CMatrix);

impl Evolving for Density {
    fn unitary(&mut self, u: &CMatrix) {
        self.0 = u * &self.0 * u.adjoint();
    }
    fn channel(&mut self, ch: &StepChannel) {
        ch.apply(&mut self.0);
    }
    fn end_interval(&mut self) {
        self.0 = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
    }
    fn snapshot(&self) -> CMatrix {
        self.0.clone()
    }
}

struct Propagator(CMatrix);

impl Evolving for Propagator {
    fn unitary(&mut self, u: &CMatrix) {
        self.0 = u * &self.0;
    }
    fn channel(&mut self, _: &StepChannel) {
        unreachable!("propagators are only built without noise")
    }
    fn snapshot(&self) -> CMatrix {
        self.0.clone()
    }
}

/// Piecewise-constant propagation of a density matrix through `seq`.
///
/// The timeline is cut at pulse boundaries, edge/flat joins, flip times and
/// the requested sample times; each interval is split into equal steps no
/// longer than `dt`, each evolved with the Hamiltonian at its midpoint and
/// followed by one noise step. Intervals with a constant Hamiltonian and no
/// noise are evolved exactly in one shot. Returns the state at every
/// requested sample time, in the order given, and the final state.
pub fn propagate(
    system: &DrivenSystem,
    seq: &PulseSequence,
    rho0: &CMatrix,
    opts: &PropagationOptions,
    sample_times: &[f64],
) -> Result<(Vec<CMatrix>, CMatrix)> {
    check_density_matrix(rho0, system.dim())?;
    let mut state = Density(rho0.clone());
    let samples = run(system, seq, opts, sample_times, &mut state)?;
    Ok((samples, state.0))
}

/// Noiseless propagator of the whole sequence, ideal flips included.
pub fn propagator(system: &DrivenSystem, seq: &PulseSequence, opts: &PropagationOptions) -> Result<CMatrix> {
    if opts.noise.is_some_and(|n| !n.is_none()) {
        return Err(Error::InvalidParameter("a propagator cannot include noise".into()));
    }
    let mut state = Propagator(CMatrix::identity(system.dim(), system.dim()));
    run(system, seq, opts, &[], &mut state)?;
    Ok(state.0)
}

fn run<S: Evolving>(
    system: &DrivenSystem,
    seq: &PulseSequence,
    opts: &PropagationOptions,
    sample_times: &[f64],
    state: &mut S,
) -> Result<Vec<CMatrix>> {
    system.validate()?;
    seq.validate()?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let total = seq.duration();
    if sample_times.iter().any(|&t| !(0.0..=total * (1.0 + 1e-12)).contains(&t)) {
        return Err(Error::InvalidParameter("sample time outside the sequence".into()));
    }
    let mut pulses = Vec::new();
    let mut flips = Vec::new();
    for p in seq.pulses() {
        if p.channel == Channel::Control && opts.pi_mode == PiMode::Ideal {
            flips.push(p.start + 0.5 * p.envelope.duration());
        } else {
            pulses.push(*p);
        }
    }
    flips.sort_by(f64::total_cmp);

    let mut cuts = vec![0.0, total];
    for p in &pulses {
        cuts.extend([p.start, p.start + p.envelope.rise, p.end() - p.envelope.rise, p.end()]);
    }
    cuts.extend_from_slice(&flips);
    cuts.extend(sample_times.iter().map(|&t| t.min(total)));
    cuts.retain(|t| (0.0..=total).contains(t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-18);

    let noise = opts.noise.as_ref().filter(|n| !n.is_none());
    let mut channel_cache: Option<(f64, StepChannel)> = None;

    let mut order: Vec<usize> = (0..sample_times.len()).collect();
    order.sort_by(|&a, &b| sample_times[a].total_cmp(&sample_times[b]));
    let mut samples = vec![CMatrix::zeros(0, 0); sample_times.len()];
    let mut next_sample = 0;
    let mut next_flip = 0;

    for w in 0..cuts.len() {
        let t = cuts[w];
        while next_flip < flips.len() && flips[next_flip] <= t + 1e-18 {
            state.unitary(&system.ideal_control_flip(t)?);
            next_flip += 1;
        }
        while next_sample < order.len() && sample_times[order[next_sample]].min(total) <= t + 1e-18 {
            samples[order[next_sample]] = state.snapshot();
            next_sample += 1;
        }
        let Some(&t1) = cuts.get(w + 1) else { break };
        let len = t1 - t;
        if len <= 0.0 {
            continue;
        }
        let steps = (len / opts.dt).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        let active: Vec<TimedPulse> = pulses
            .iter()
            .filter(|p| p.start < t1 && p.end() > t)
            .copied()
            .collect();
        let constant = active.iter().all(|p| {
            let flat = t >= p.start + p.envelope.rise - 1e-18 && t1 <= p.end() - p.envelope.rise + 1e-18;
            flat && system.channel(p.channel).is_none_or(|c| c.detuning == 0.0)
        });
        let step_channel = match noise {
            Some(n) => {
                if channel_cache.as_ref().is_none_or(|(dt, _)| (dt - h).abs() > 1e-24) {
                    channel_cache = Some((h, StepChannel::new(n, &system.labels, h)?));
                }
                channel_cache.as_ref().map(|(_, c)| c)
            }
            None => None,
        };
        if constant {
            let ham = system.hamiltonian(&active, 0.5 * (t + t1));
            match step_channel {
                None => state.unitary(&unitary_from_hermitian(&ham, len)?),
                Some(ch) => {
                    let u = unitary_from_hermitian(&ham, h)?;
                    for _ in 0..steps {
                        state.unitary(&u);
                        state.channel(ch);
                    }
                }
            }
        } else {
            for k in 0..steps {
                let ham = system.hamiltonian(&active, t + (k as f64 + 0.5) * h);
                state.unitary(&unitary_from_hermitian(&ham, h)?);
                if let Some(ch) = step_channel {
                    state.channel(ch);
                }
            }
        }
        state.end_interval();
    }
    Ok(samples)
}

/// Lab-frame reference integrator for validating the rotating-wave model on
/// small systems. `energies` are the dressed energies, `coupling` the
/// dressed drive operator on the CR channel, and the drive is
/// a(t) cos(w_d t + phi). Steps are midpoint-sampled with length <= dt;
/// the final state is returned in the frame rotating at `w_d` times the
/// labeled excitation number.
pub fn propagate_lab_frame(
    energies: &[f64],
    excitations: &[usize],
    coupling: &CMatrix,
    seq: &PulseSequence,
    drive_frequency: f64,
    rho0: &CMatrix,
    dt: f64,
) -> Result<CMatrix> {
    let n = energies.len();
    check_density_matrix(rho0, n)?;
    if excitations.len() != n || coupling.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: coupling.nrows(),
        });
    }
    let total = seq.duration();
    let steps = (total / dt).ceil().max(1.0) as usize;
    let h = total / steps as f64;
    let h0 = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(energies[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut rho = rho0.clone();
    for k in 0..steps {
        let t = (k as f64 + 0.5) * h;
        let mut ham = h0.clone();
        for p in seq.pulses().iter().filter(|p| p.channel == Channel::Cr) {
            let a = p.value_at(t);
            if a != 0.0 {
                let c = a * (drive_frequency * t + p.envelope.phase).cos();
                ham += coupling * Complex64::new(c, 0.0);
            }
        }
        let u = unitary_from_hermitian(&ham, h)?;
        rho = &u * &rho * u.adjoint();
    }
    let frame = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, drive_frequency * total * excitations[i] as f64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(&frame * rho * frame.adjoint())
}

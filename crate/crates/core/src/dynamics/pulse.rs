use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat-top pulse with truncated-Gaussian rise and fall.
///
/// The rise uses exp(-(t - t_r)^2 / (2 sigma^2)) with sigma = t_r / 2,
/// shifted and rescaled to run from exactly 0 at t = 0 to exactly 1 at
/// t = t_r. The fall mirrors the rise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    /// Peak amplitude (rad/s).
    pub amplitude: f64,
    pub flat: f64,
    pub rise: f64,
    pub phase: f64,
    /// +1 or -1.
    pub sign: f64,
}

impl PulseEnvelope {
    pub fn rounded_square(amplitude: f64, flat: f64, rise: f64) -> Self {
        Self {
            amplitude,
            flat,
            rise,
            phase: 0.0,
            sign: 1.0,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn negated(mut self) -> Self {
        self.sign = -self.sign;
        self
    }

    pub fn duration(&self) -> f64 {
        self.flat + 2.0 * self.rise
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.amplitude, self.flat, self.rise, self.phase];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pulse envelope"));
        }
        if self.flat < 0.0 || self.rise < 0.0 {
            return Err(Error::InvalidParameter("pulse durations must be non-negative".into()));
        }
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(Error::InvalidParameter("pulse sign must be +1 or -1".into()));
        }
        Ok(())
    }

    /// Unit-amplitude shape at time t in [0, duration].
    pub fn shape(&self, t: f64) -> Result<f64> {
        let d = self.duration();
        if !(0.0..=d).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "t = {t:.3e} outside pulse support [0, {d:.3e}]"
            )));
        }
        Ok(self.shape_unchecked(t))
    }

    fn shape_unchecked(&self, t: f64) -> f64 {
        let tr = self.rise;
        if tr == 0.0 {
            return 1.0;
        }
        let d = self.duration();
        let u = if t < tr {
            t
        } else if t > tr + self.flat {
            d - t
        } else {
            return 1.0;
        };
        rise_shape(u, tr)
    }

    /// Signed envelope value (rad/s).
    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(self.sign * self.amplitude * self.shape(t)?)
    }

    /// Integral of the unit shape over one edge.
    pub fn edge_area(&self) -> f64 {
        edge_area(self.rise)
    }

    /// Integral of the unit shape over the whole pulse.
    pub fn unit_area(&self) -> f64 {
        self.flat + 2.0 * self.edge_area()
    }
}

fn rise_shape(u: f64, tr: f64) -> f64 {
    let sigma = tr / 2.0;
    let floor = (-tr * tr / (2.0 * sigma * sigma)).exp();
    let g = (-(u - tr).powi(2) / (2.0 * sigma * sigma)).exp();
    ((g - floor) / (1.0 - floor)).clamp(0.0, 1.0)
}

/// Area of one rising edge of length `tr`, by composite Simpson quadrature.
pub fn edge_area(tr: f64) -> f64 {
    if tr == 0.0 {
        return 0.0;
    }
    let n = 2000;
    let h = tr / n as f64;
    let mut s = rise_shape(0.0, tr) + rise_shape(tr, tr);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * rise_shape(k as f64 * h, tr);
    }
    s * h / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Cross-resonance drive on the control at the target frequency.
    Cr,
    /// Single-qubit drive on the control at its own frequency.
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPulse {
    pub channel: Channel,
    pub start: f64,
    pub envelope: PulseEnvelope,
}

impl TimedPulse {
    pub fn end(&self) -> f64 {
        self.start + self.envelope.duration()
    }

    pub fn value_at(&self, t: f64) -> f64 {
        if t < self.start || t > self.end() {
            0.0
        } else {
            self.envelope.sign * self.envelope.amplitude * self.envelope.shape_unchecked(t - self.start)
        }
    }
}

/// Pulses placed on a timeline. Pulses on different channels may overlap;
/// pulses on one channel may not.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseSequence {
    pulses: Vec<TimedPulse>,
    duration: f64,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a sequence from explicit pulses, rejecting overlaps.
    pub fn from_pulses(pulses: Vec<TimedPulse>, duration: f64) -> Result<Self> {
        let seq = Self { pulses, duration };
        seq.validate()?;
        Ok(seq)
    }

    /// Appends a pulse after everything already scheduled.
    pub fn then(mut self, channel: Channel, envelope: PulseEnvelope) -> Self {
        self.pulses.push(TimedPulse {
            channel,
            start: self.duration,
            envelope,
        });
        self.duration += envelope.duration();
        self
    }

    pub fn delay(mut self, duration: f64) -> Self {
        self.duration += duration;
        self
    }

    pub fn pulses(&self) -> &[TimedPulse] {
        &self.pulses
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::Sequence("duration must be finite and non-negative".into()));
        }
        for p in &self.pulses {
            p.envelope.validate()?;
            if p.start < 0.0 || p.end() > self.duration * (1.0 + 1e-12) + 1e-18 {
                return Err(Error::Sequence(format!(
                    "pulse at {:.3e} s runs outside the sequence",
                    p.start
                )));
            }
        }
        for (i, a) in self.pulses.iter().enumerate() {
            for b in &self.pulses[i + 1..] {
                if a.channel == b.channel && a.start < b.end() && b.start < a.end() {
                    return Err(Error::Sequence(format!(
                        "{:?} pulses at {:.3e} s and {:.3e} s overlap",
                        a.channel, a.start, b.start
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Timing of the echoed cross-resonance gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoTiming {
    /// Length of each CR half pulse including its edges.
    pub half: f64,
    pub gap: f64,
    pub pi_length: f64,
    pub rise: f64,
}

impl Default for EchoTiming {
    fn default() -> Self {
        Self {
            half: 85e-9,
            gap: 5e-9,
            pi_length: 40e-9,
            rise: 10e-9,
        }
    }
}

impl EchoTiming {
    pub fn total(&self) -> f64 {
        2.0 * self.half + 2.0 * self.gap + self.pi_length
    }

    /// Flat-top length of each CR half; the edges shrink when the half is
    /// shorter than two rise times.
    pub fn cr_envelope(&self, amplitude: f64, phase: f64) -> PulseEnvelope {
        let rise = self.rise.min(self.half / 2.0);
        PulseEnvelope::rounded_square(amplitude, self.half - 2.0 * rise, rise).with_phase(phase)
    }
}

/// CR(+) gap pi gap CR(-). The control pi pulse carries `pi_amplitude`
/// (rad/s) and the rise time of the CR edges, capped at half its length.
pub fn echoed_cr_sequence(
    timing: &EchoTiming,
    cr_amplitude: f64,
    cr_phase: f64,
    pi_amplitude: f64,
) -> Result<PulseSequence> {
    let vals = [timing.half, timing.gap, timing.pi_length, timing.rise];
    if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Sequence("echo durations must be finite and non-negative".into()));
    }
    if timing.pi_length <= 0.0 {
        return Err(Error::Sequence("pi pulse length must be positive".into()));
    }
    let cr = timing.cr_envelope(cr_amplitude, cr_phase);
    let pi_rise = timing.rise.min(timing.pi_length / 2.0);
    let pi = PulseEnvelope::rounded_square(pi_amplitude, timing.pi_length - 2.0 * pi_rise, pi_rise);
    let mut seq = PulseSequence::new();
    if timing.half > 0.0 {
        seq = seq.then(Channel::Cr, cr);
    }
    seq = seq.delay(timing.gap).then(Channel::Control, pi).delay(timing.gap);
    if timing.half > 0.0 {
        seq = seq.then(Channel::Cr, cr.negated());
    }
    seq.validate()?;
    Ok(seq)
}

/// Amplitude (rad/s) of a pulse whose area is `angle` for a transition
/// with unit matrix element.
pub fn amplitude_for_angle(envelope: &PulseEnvelope, angle: f64) -> f64 {
    angle / envelope.unit_area()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_endpoints_and_flat_top() {
        let p = PulseEnvelope::rounded_square(2.0, 65e-9, 10e-9);
        assert_eq!(p.value(0.0).unwrap(), 0.0);
        assert_eq!(p.value(p.duration()).unwrap(), 0.0);
        assert_eq!(p.value(p.duration() / 2.0).unwrap(), 2.0);
        assert_eq!(p.value(10e-9).unwrap(), 2.0);
        assert!(p.value(-1e-12).is_err());
        assert!(p.value(p.duration() + 1e-12).is_err());
        assert_eq!(p.negated().value(40e-9).unwrap(), -2.0);
    }

    #[test]
    fn envelope_is_continuous_at_joins() {
        let p = PulseEnvelope::rounded_square(1.0, 65e-9, 10e-9);
        for t in [10e-9, 75e-9] {
            let a = p.value(t - 1e-15).unwrap();
            let b = p.value(t + 1e-15).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_area_regression() {
        let p = PulseEnvelope::rounded_square(1.0, 65e-9, 10e-9);
        // closed form of one edge: (sigma sqrt(pi/2) erf(sqrt 2) - t_r e^-2) / (1 - e^-2)
        let area = p.unit_area();
        assert!((area - 75.704_929_077_182e-9).abs() < 1e-17, "{area:e}");
        // independent trapezoid check on a fine grid
        let n = 200_000;
        let h = p.duration() / n as f64;
        let mut s = 0.5 * (p.value(0.0).unwrap() + p.value(p.duration()).unwrap());
        for k in 1..n {
            s += p.value(k as f64 * h).unwrap();
        }
        assert!((s * h - area).abs() < 1e-15);
    }

    #[test]
    fn echo_lasts_220_ns() {
        let seq = echoed_cr_sequence(&EchoTiming::default(), 1.0, 0.0, 1.0).unwrap();
        assert!((seq.duration() - 220e-9).abs() < 1e-18);
        assert_eq!(seq.pulses().len(), 3);
        assert_eq!(seq.pulses()[2].envelope.sign, -1.0);

        let collapsed = echoed_cr_sequence(&EchoTiming { half: 0.0, ..Default::default() }, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(collapsed.pulses().len(), 1);
        assert!((collapsed.duration() - 50e-9).abs() < 1e-18);
        assert_eq!(collapsed.pulses()[0].channel, Channel::Control);
    }

    #[test]
    fn overlapping_pulses_rejected() {
        let env = PulseEnvelope::rounded_square(1.0, 10e-9, 5e-9);
        let a = TimedPulse { channel: Channel::Cr, start: 0.0, envelope: env };
        let b = TimedPulse { channel: Channel::Cr, start: 15e-9, envelope: env };
        assert!(PulseSequence::from_pulses(vec![a, b], 50e-9).is_err());
        let c = TimedPulse { channel: Channel::Control, start: 15e-9, envelope: env };
        assert!(PulseSequence::from_pulses(vec![a, c], 50e-9).is_ok());
        assert!(PulseSequence::from_pulses(vec![a], 10e-9).is_err());
    }
}

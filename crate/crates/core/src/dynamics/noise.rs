use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModeLabel, Preset};
use crate::numerics::CMatrix;

/// Energy relaxation and echo coherence time of one mode (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeNoise {
    pub t1: f64,
    pub t2: f64,
}

impl ModeNoise {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let n = Self { t1, t2 };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t2 > 0.0) {
            return Err(Error::InvalidParameter("T1 and T2 must be positive".into()));
        }
        if self.t2 > 2.0 * self.t1 * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "T2 = {:.3e} s exceeds 2 T1 = {:.3e} s",
                self.t2,
                2.0 * self.t1
            )));
        }
        Ok(())
    }

    /// 1/T_phi = 1/T2 - 1/(2 T1), clamped at zero.
    pub fn dephasing_rate(&self) -> f64 {
        (1.0 / self.t2 - 0.5 / self.t1).max(0.0)
    }
}

/// Per-mode noise, indexed like [`ModeLabel::index`]. `None` means noiseless.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub modes: [Option<ModeNoise>; 3],
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// T1 and echo T2 of each mode from a device preset.
    pub fn from_preset(preset: &Preset) -> Result<Self> {
        let mut modes = [None; 3];
        for label in ModeLabel::ALL {
            let c = preset.coherence[label.index()];
            modes[label.index()] = Some(ModeNoise::new(c.t1, c.t2_echo)?);
        }
        Ok(Self { modes })
    }

    pub fn with_mode(mut self, label: ModeLabel, noise: ModeNoise) -> Self {
        self.modes[label.index()] = Some(noise);
        self
    }

    pub fn is_none(&self) -> bool {
        self.modes.iter().all(Option::is_none)
    }

    pub fn validate(&self) -> Result<()> {
        for m in self.modes.iter().flatten() {
            m.validate()?;
        }
        Ok(())
    }
}

/// Amplitude damping and pure dephasing of every mode for one time step,
/// precomputed for a fixed set of basis labels.
///
/// Damping uses the oscillator Kraus operators
/// K_k = sum_n sqrt(C(n,k)) (1-g)^{(n-k)/2} g^{k/2} |n-k><n| with
/// g = 1 - exp(-dt/T1). Dephasing multiplies coherences between levels n
/// and m by exp(-(n-m)^2 dt / T_phi).
#[derive(Debug, Clone)]
pub struct StepChannel {
    /// For each mode with damping: for each source index, the list of
    /// (target index, Kraus amplitude) over k = 0..=n.
    damping: Vec<Vec<Vec<(usize, f64)>>>,
    mask: Option<Vec<f64>>,
    dim: usize,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl StepChannel {
    pub fn new(noise: &NoiseSpec, labels: &[[usize; 3]], dt: f64) -> Result<Self> {
        noise.validate()?;
        let dim = labels.len();
        let index_of = |l: [usize; 3]| labels.iter().position(|x| *x == l);
        let mut damping = Vec::new();
        let mut mask = vec![1.0; dim * dim];
        let mut any_dephasing = false;
        for (j, mode) in noise.modes.iter().enumerate() {
            let Some(mode) = mode else { continue };
            let g = 1.0 - (-dt / mode.t1).exp();
            let mut table = Vec::with_capacity(dim);
            for l in labels {
                let n = l[j];
                let mut entries = Vec::with_capacity(n + 1);
                for k in 0..=n {
                    let mut target = *l;
                    target[j] -= k;
                    let t = index_of(target).ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "damping maps {l:?} to {target:?}, which is outside the simulated space"
                        ))
                    })?;
                    let amp = (binomial(n, k) * (1.0 - g).powi((n - k) as i32) * g.powi(k as i32)).sqrt();
                    entries.push((t, amp));
                }
                table.push(entries);
            }
            damping.push(table);
            let rate = mode.dephasing_rate();
            if rate > 0.0 {
                any_dephasing = true;
                for a in 0..dim {
                    for b in 0..dim {
                        let dn = labels[a][j] as f64 - labels[b][j] as f64;
                        mask[a * dim + b] *= (-dn * dn * dt * rate).exp();
                    }
                }
            }
        }
        Ok(Self {
            damping,
            mask: any_dephasing.then_some(mask),
            dim,
        })
    }

    pub fn apply(&self, rho: &mut CMatrix) {
        let n = self.dim;
        for table in &self.damping {
            let mut out = CMatrix::zeros(n, n);
            for b in 0..n {
                let eb = &table[b];
                for a in 0..n {
                    let v = rho[(a, b)];
                    if v == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let ea = &table[a];
                    for k in 0..ea.len().min(eb.len()) {
                        let (ta, ca) = ea[k];
                        let (tb, cb) = eb[k];
                        out[(ta, tb)] += v * (ca * cb);
                    }
                }
            }
            *rho = out;
        }
        if let Some(mask) = &self.mask {
            for a in 0..n {
                for b in 0..n {
                    rho[(a, b)] *= mask[a * n + b];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_preset, PresetName};

    fn qubit_labels() -> Vec<[usize; 3]> {
        vec![[0, 0, 0], [1, 0, 0]]
    }

    #[test]
    fn t1_decay_composes_exactly() {
        let noise = NoiseSpec::none().with_mode(ModeLabel::T, ModeNoise::new(10e-6, 20e-6).unwrap());
        let dt = 1e-9;
        let ch = StepChannel::new(&noise, &qubit_labels(), dt).unwrap();
        let mut rho = CMatrix::zeros(2, 2);
        rho[(1, 1)] = Complex64::new(1.0, 0.0);
        for _ in 0..5000 {
            ch.apply(&mut rho);
        }
        let expected = (-5e-6f64 / 10e-6).exp();
        assert!((rho[(1, 1)].re - expected).abs() < 1e-5);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherence_decays_at_t2() {
        let noise = NoiseSpec::none().with_mode(ModeLabel::T, ModeNoise::new(10e-6, 8e-6).unwrap());
        let dt = 1e-9;
        let ch = StepChannel::new(&noise, &qubit_labels(), dt).unwrap();
        let mut rho = CMatrix::from_element(2, 2, Complex64::new(0.5, 0.0));
        for _ in 0..4000 {
            ch.apply(&mut rho);
        }
        let expected = 0.5 * (-4e-6f64 / 8e-6).exp();
        assert!((rho[(0, 1)].re - expected).abs() < 1e-9);
    }

    #[test]
    fn multilevel_damping_preserves_trace() {
        let noise = NoiseSpec::from_preset(&load_preset(PresetName::Exp2Al)).unwrap();
        let mut labels = Vec::new();
        for t in 0..3 {
            for a in 0..3 {
                for b in 0..2 {
                    labels.push([t, a, b]);
                }
            }
        }
        let ch = StepChannel::new(&noise, &labels, 5e-9).unwrap();
        let n = labels.len();
        let mut rho = CMatrix::from_fn(n, n, |i, j| Complex64::new(1.0 / n as f64, 0.01 * (i as f64 - j as f64)));
        for i in 0..n {
            rho[(i, i)] = Complex64::new(1.0 / n as f64, 0.0);
        }
        ch.apply(&mut rho);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_noise_rejected() {
        assert!(ModeNoise::new(1e-6, 3e-6).is_err());
        assert!(ModeNoise::new(0.0, 0.0).is_err());
        let noise = NoiseSpec::none().with_mode(ModeLabel::B, ModeNoise::new(1e-6, 1e-6).unwrap());
        // B = 1 cannot decay into a space that only holds B = 1
        assert!(StepChannel::new(&noise, &[[0, 0, 1]], 1e-9).is_err());
    }
}

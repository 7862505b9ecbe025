//! Circuit and drive descriptions and the lab-frame operators built from
//! them on a truncated three-mode Fock space.
//!
//! Mode order is always transmon (T), dimon dipolar mode (A), dimon
//! quadrupolar mode (B). Frequencies are angular (rad/s) everywhere in
//! this module.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CMatrix;

pub const MHZ: f64 = 1e6 * TAU;
pub const GHZ: f64 = 1e9 * TAU;
pub const KHZ: f64 = 1e3 * TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeLabel {
    T,
    A,
    B,
}

impl ModeLabel {
    pub const ALL: [ModeLabel; 3] = [ModeLabel::T, ModeLabel::A, ModeLabel::B];

    pub fn index(self) -> usize {
        match self {
            ModeLabel::T => 0,
            ModeLabel::A => 1,
            ModeLabel::B => 2,
        }
    }
}

/// One Duffing oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: ModeLabel,
    /// 0 -> 1 transition frequency (rad/s).
    pub frequency: f64,
    /// omega_12 - omega_01 (rad/s), negative for transmon-like modes.
    pub anharmonicity: f64,
    pub levels: usize,
}

impl ModeSpec {
    pub fn new(label: ModeLabel, frequency: f64, anharmonicity: f64, levels: usize) -> Self {
        Self {
            label,
            frequency,
            anharmonicity,
            levels,
        }
    }

    /// Coefficient of the quartic term, -alpha/2.
    pub fn delta(&self) -> f64 {
        -self.anharmonicity / 2.0
    }

    /// Linear-term correction, chosen so the 0 -> 1 transition equals `frequency`.
    pub fn beta(&self) -> f64 {
        -self.delta()
    }

    /// Bare energy of Fock level n (rad/s).
    pub fn level_energy(&self, n: usize) -> f64 {
        let n = n as f64;
        (self.frequency - self.beta()) * n - self.delta() * n * n
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency.is_finite() && self.anharmonicity.is_finite()) {
            return Err(Error::NonFinite("mode parameters"));
        }
        if self.levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "mode {:?} needs at least 2 levels",
                self.label
            )));
        }
        if self.frequency <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mode {:?} frequency must be positive",
                self.label
            )));
        }
        if self.anharmonicity.abs() >= self.frequency {
            return Err(Error::InvalidParameter(format!(
                "mode {:?} anharmonicity must be smaller than its frequency",
                self.label
            )));
        }
        Ok(())
    }
}

/// Transmon plus two-mode dimon with longitudinal (A-B) and transverse
/// (T-A, weighted T-B) couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    /// Indexed by [`ModeLabel::index`].
    pub modes: [ModeSpec; 3],
    pub j_zz: f64,
    pub j_xx: f64,
    /// Relative T-B exchange coupling.
    pub lambda: f64,
}

impl CircuitSpec {
    pub fn mode(&self, label: ModeLabel) -> &ModeSpec {
        &self.modes[label.index()]
    }

    pub fn mode_mut(&mut self, label: ModeLabel) -> &mut ModeSpec {
        &mut self.modes[label.index()]
    }

    pub fn levels(&self) -> [usize; 3] {
        [self.modes[0].levels, self.modes[1].levels, self.modes[2].levels]
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        for m in &mut self.modes {
            m.levels = levels;
        }
        self
    }

    /// A-mode transition with the B mode excited (the dimon's tabulated
    /// "upper sideband").
    pub fn a_upper_sideband(&self) -> f64 {
        self.mode(ModeLabel::A).frequency + 2.0 * self.j_zz
    }

    /// Bare A-mode transition frequency with B frozen in `spectator_level`.
    pub fn target_frequency(&self, spectator_level: usize) -> f64 {
        self.mode(ModeLabel::A).frequency + 2.0 * self.j_zz * spectator_level as f64
    }

    /// Validates the spec and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (i, m) in self.modes.iter().enumerate() {
            m.validate()?;
            if m.label.index() != i {
                return Err(Error::InvalidParameter(format!(
                    "mode slot {i} holds {:?}; expected order T, A, B",
                    m.label
                )));
            }
        }
        if !(self.j_zz.is_finite() && self.j_xx.is_finite() && self.lambda.is_finite()) {
            return Err(Error::NonFinite("couplings"));
        }
        if self.lambda.abs() >= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "|lambda| = {} must stay below 0.5",
                self.lambda.abs()
            )));
        }
        let mut warnings = Vec::new();
        if self.lambda.abs() > 0.1 {
            warnings.push(format!("lambda = {} is not small", self.lambda));
        }
        let freqs: Vec<f64> = self.modes.iter().map(|m| m.frequency).collect();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let detuning = (freqs[i] - freqs[j]).abs();
                if self.j_xx.abs() > detuning / 3.0 {
                    warnings.push(format!(
                        "J_xx is not small against the {:?}-{:?} detuning (dispersive regime violated)",
                        self.modes[i].label, self.modes[j].label
                    ));
                }
            }
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(warnings)
    }
}

/// Cross-resonance drive on the control (transmon) with classical
/// cross-talk onto the A mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub crosstalk: f64,
    pub crosstalk_phase: f64,
}

impl DriveSpec {
    pub fn new(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self {
            amplitude,
            frequency,
            phase,
            crosstalk: 0.0,
            crosstalk_phase: 0.0,
        }
    }

    pub fn with_crosstalk(mut self, fraction: f64, phase: f64) -> Self {
        self.crosstalk = fraction;
        self.crosstalk_phase = phase;
        self
    }

    /// Checks invariants and zeroes the cross-talk phase when there is no
    /// cross-talk.
    pub fn normalized(mut self) -> Result<Self> {
        let vals = [
            self.amplitude,
            self.frequency,
            self.phase,
            self.crosstalk,
            self.crosstalk_phase,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("drive parameters"));
        }
        if self.crosstalk < 0.0 {
            return Err(Error::InvalidParameter(
                "cross-talk fraction must be non-negative".into(),
            ));
        }
        if self.crosstalk == 0.0 {
            self.crosstalk_phase = 0.0;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Ordering {
    /// |n_T, n_A, n_B> with n_T varying slowest.
    #[default]
    TensorProduct,
    /// Grouped by total excitation, lexicographic inside a group.
    Excitation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisLayout {
    dims: [usize; 3],
    ordering: Ordering,
    /// position in this ordering -> tensor-product index
    to_tensor: Vec<usize>,
    /// tensor-product index -> position in this ordering
    from_tensor: Vec<usize>,
}

impl BasisLayout {
    pub fn new(dims: [usize; 3], ordering: Ordering) -> Self {
        let total: usize = dims.iter().product();
        let to_tensor: Vec<usize> = match ordering {
            Ordering::TensorProduct => (0..total).collect(),
            Ordering::Excitation => {
                let mut idx: Vec<usize> = (0..total).collect();
                idx.sort_by_key(|&i| {
                    let l = tensor_labels(dims, i);
                    (l[0] + l[1] + l[2], l)
                });
                idx
            }
        };
        let mut from_tensor = vec![0; total];
        for (pos, &t) in to_tensor.iter().enumerate() {
            from_tensor[t] = pos;
        }
        Self {
            dims,
            ordering,
            to_tensor,
            from_tensor,
        }
    }

    pub fn for_spec(spec: &CircuitSpec) -> Self {
        Self::new(spec.levels(), Ordering::TensorProduct)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    pub fn dim(&self) -> usize {
        self.to_tensor.len()
    }

    pub fn labels(&self, index: usize) -> [usize; 3] {
        tensor_labels(self.dims, self.to_tensor[index])
    }

    pub fn index(&self, labels: [usize; 3]) -> Option<usize> {
        if labels.iter().zip(&self.dims).any(|(l, d)| l >= d) {
            return None;
        }
        let t = (labels[0] * self.dims[1] + labels[1]) * self.dims[2] + labels[2];
        Some(self.from_tensor[t])
    }

    pub fn excitation(&self, index: usize) -> usize {
        self.labels(index).iter().sum()
    }

    /// `perm[i]` is the tensor-product index of basis state `i`.
    pub fn permutation_to_tensor(&self) -> &[usize] {
        &self.to_tensor
    }

    /// Re-expresses a matrix written in `self`'s ordering in `other`'s.
    pub fn reorder(&self, m: &CMatrix, other: &BasisLayout) -> Result<CMatrix> {
        if self.dims != other.dims || m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: m.nrows(),
            });
        }
        let n = self.dim();
        Ok(CMatrix::from_fn(n, n, |i, j| {
            let ti = other.to_tensor[i];
            let tj = other.to_tensor[j];
            m[(self.from_tensor[ti], self.from_tensor[tj])]
        }))
    }

    fn check(&self, spec: &CircuitSpec) -> Result<()> {
        if self.dims != spec.levels() {
            return Err(Error::DimensionMismatch {
                expected: spec.levels().iter().product(),
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// Matrix of a^dagger_k a_l (k != l) or of a product of single-mode
    /// diagonal functions; built element by element from labels.
    fn hopping(&self, to: usize, from: usize) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            let l = self.labels(i);
            if l[from] == 0 || l[to] + 1 >= self.dims[to] {
                continue;
            }
            let mut target = l;
            target[from] -= 1;
            target[to] += 1;
            let amp = ((l[from] as f64) * ((l[to] + 1) as f64)).sqrt();
            let j = self.index(target).expect("target inside truncation");
            m[(j, i)] = Complex64::new(amp, 0.0);
        }
        m
    }

    pub fn lowering(&self, mode: ModeLabel) -> CMatrix {
        let k = mode.index();
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            let l = self.labels(i);
            if l[k] == 0 {
                continue;
            }
            let mut target = l;
            target[k] -= 1;
            let j = self.index(target).expect("lowered state inside truncation");
            m[(j, i)] = Complex64::new((l[k] as f64).sqrt(), 0.0);
        }
        m
    }

    pub fn number(&self, mode: ModeLabel) -> CMatrix {
        let k = mode.index();
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(self.labels(i)[k] as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn total_number(&self) -> CMatrix {
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(self.excitation(i) as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

fn tensor_labels(dims: [usize; 3], t: usize) -> [usize; 3] {
    let b = t % dims[2];
    let a = (t / dims[2]) % dims[1];
    let tt = t / (dims[2] * dims[1]);
    [tt, a, b]
}

/// Lab-frame static Hamiltonian H0/hbar (rad/s).
pub fn build_bare_hamiltonian(spec: &CircuitSpec, layout: &BasisLayout) -> Result<CMatrix> {
    spec.validate()?;
    layout.check(spec)?;
    let n = layout.dim();
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        let l = layout.labels(i);
        let mut e = 0.0;
        for (k, mode) in spec.modes.iter().enumerate() {
            e += mode.level_energy(l[k]);
        }
        e += 2.0 * spec.j_zz * (l[1] * l[2]) as f64;
        h[(i, i)] = Complex64::new(e, 0.0);
    }
    let (t, a, b) = (0, 1, 2);
    let ta = layout.hopping(a, t);
    h += (&ta + ta.adjoint()) * Complex64::new(spec.j_xx, 0.0);
    if spec.lambda != 0.0 {
        let tb = layout.hopping(b, t);
        h += (&tb + tb.adjoint()) * Complex64::new(spec.lambda * spec.j_xx, 0.0);
    }
    Ok(h)
}

/// Quadrature operators (a_T^dagger + a_T, a_A^dagger + a_A).
pub fn build_drive_operators(spec: &CircuitSpec, layout: &BasisLayout) -> Result<(CMatrix, CMatrix)> {
    spec.validate()?;
    layout.check(spec)?;
    let quad = |m: ModeLabel| {
        let a = layout.lowering(m);
        &a + a.adjoint()
    };
    Ok((quad(ModeLabel::T), quad(ModeLabel::A)))
}

/// T1 and echo T2 of one mode (seconds), plus the Ramsey T2 for reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCoherence {
    pub t1: f64,
    pub t2_echo: f64,
    pub t2_ramsey: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Exp1Cu,
    Exp2Al,
}

impl std::str::FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1_cu" | "exp1" => Ok(PresetName::Exp1Cu),
            "exp2_al" | "exp2" => Ok(PresetName::Exp2Al),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Exp1Cu => "exp1_cu",
            PresetName::Exp2Al => "exp2_al",
        }
    }
}

/// Measured device: circuit parameters plus per-mode coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: PresetName,
    pub circuit: CircuitSpec,
    /// Indexed by [`ModeLabel::index`].
    pub coherence: [ModeCoherence; 3],
    /// Tabulated qubit frequencies (rad/s): T bare, A and B upper sidebands.
    pub tabulated_frequencies: [f64; 3],
}

/// Longitudinal coupling used when a device does not publish its own.
pub const DEFAULT_J_ZZ: f64 = 70.5 * MHZ;

/// Default truncation per mode.
pub const DEFAULT_LEVELS: usize = 4;

pub fn load_preset(name: PresetName) -> Preset {
    load_preset_with(name, DEFAULT_J_ZZ, DEFAULT_LEVELS)
}

/// Same as [`load_preset`] with an explicit longitudinal coupling and
/// truncation. Dimon frequencies in the device table are upper sidebands,
/// so the bare mode frequencies are recovered by subtracting 2 J_zz.
pub fn load_preset_with(name: PresetName, j_zz: f64, levels: usize) -> Preset {
    let us = 1e-6;
    // (freq GHz, anharmonicity MHz, T1, T2 Ramsey, T2 echo) in T, A, B order
    let (rows, j_xx) = match name {
        PresetName::Exp1Cu => (
            [
                (4.959, -220.0, 11.3, 1.1, 1.6),
                (4.413, -100.0, 10.0, 1.6, 1.8),
                (5.620, -123.0, 5.2, 1.3, 2.1),
            ],
            1.9 * MHZ,
        ),
        PresetName::Exp2Al => (
            [
                (4.774, -280.0, 14.0, 6.0, 8.0),
                (4.562, -128.0, 18.0, 17.0, 19.0),
                (5.822, -142.0, 7.0, 4.0, 4.0),
            ],
            2.76 * MHZ,
        ),
    };
    let mut modes = [ModeSpec::new(ModeLabel::T, 1.0, 0.0, levels); 3];
    let mut coherence = [ModeCoherence {
        t1: 0.0,
        t2_echo: 0.0,
        t2_ramsey: 0.0,
    }; 3];
    let mut tabulated = [0.0; 3];
    for (k, label) in ModeLabel::ALL.iter().enumerate() {
        let (f, a, t1, t2r, t2e) = rows[k];
        tabulated[k] = f * GHZ;
        let bare = if *label == ModeLabel::T {
            f * GHZ
        } else {
            f * GHZ - 2.0 * j_zz
        };
        modes[k] = ModeSpec::new(*label, bare, a * MHZ, levels);
        coherence[k] = ModeCoherence {
            t1: t1 * us,
            t2_echo: t2e * us,
            t2_ramsey: t2r * us,
        };
    }
    Preset {
        name,
        circuit: CircuitSpec {
            modes,
            j_zz,
            j_xx,
            lambda: 0.0,
        },
        coherence,
        tabulated_frequencies: tabulated,
    }
}

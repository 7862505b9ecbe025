//! Least-action block diagonalization and the two-qubit effective
//! Hamiltonian of the cross-resonance drive.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{apply_rwa, diagonalize_bare, restrict, rotate_operator, sector_indices, DressedBasis};
use crate::model::{
    build_bare_hamiltonian, build_drive_operators, BasisLayout, CircuitSpec, DriveSpec, ModeLabel,
};
use crate::numerics::{eig_hermitian, hermitian_deviation, inv_sqrt_psd, unitary_deviation, CMatrix};

/// Disjoint index groups covering `0..dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        let mut group_of = vec![usize::MAX; dim];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidParameter(format!("partition group {g} is empty")));
            }
            for &i in members {
                if i >= dim {
                    return Err(Error::InvalidParameter(format!("index {i} outside dimension {dim}")));
                }
                if group_of[i] != usize::MAX {
                    return Err(Error::InvalidParameter(format!("index {i} appears in two groups")));
                }
                group_of[i] = g;
            }
        }
        if let Some(i) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::InvalidParameter(format!("index {i} is not covered")));
        }
        Ok(Self { groups, group_of })
    }

    /// Groups `first` in order, then one group with everything else.
    pub fn with_rest(first: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        let mut used = vec![false; dim];
        for g in &first {
            for &i in g {
                if i < dim {
                    used[i] = true;
                }
            }
        }
        let rest: Vec<usize> = (0..dim).filter(|&i| !used[i]).collect();
        let mut groups = first;
        if !rest.is_empty() {
            groups.push(rest);
        }
        Self::new(groups, dim)
    }

    pub fn dim(&self) -> usize {
        self.group_of.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.group_of[i] == self.group_of[j]
    }

    /// Zeroes every entry outside the diagonal blocks.
    pub fn block_part(&self, m: &CMatrix) -> CMatrix {
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| {
            if self.same_block(i, j) {
                m[(i, j)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Frobenius norm of the off-block part.
    pub fn off_block_norm(&self, m: &CMatrix) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                if !self.same_block(i, j) {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOptions {
    /// Smallest admissible eigenvalue of S_BD S_BD^dagger. Eigenvectors that
    /// leak more than this across blocks make the labeling meaningless.
    pub min_block_weight: f64,
    /// Largest admissible off-block residual relative to ||H||.
    pub residual_tolerance: f64,
}

impl Default for BlockOptions {
    fn default() -> Self {
        Self {
            min_block_weight: 0.5,
            residual_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockDiagonalization {
    pub t: CMatrix,
    /// T^dagger H T with the off-block part set to zero.
    pub h_eff: CMatrix,
    /// Off-block Frobenius norm before zeroing, relative to ||H||.
    pub off_block_residual: f64,
    /// Minimum eigenvalue of S_BD S_BD^dagger.
    pub min_block_weight: f64,
}

/// Least-action block diagonalization: the block-diagonalizing unitary
/// closest to the identity, T = S S_BD^dagger (S_BD S_BD^dagger)^{-1/2}.
///
/// Eigenvectors are matched to basis states by greedy maximum overlap, so
/// each block keeps the eigenvectors that live mostly inside it.
pub fn least_action_block_diagonalize(
    h: &CMatrix,
    partition: &Partition,
    opts: &BlockOptions,
) -> Result<BlockDiagonalization> {
    let n = partition.dim();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.nrows(),
        });
    }
    let (_, s) = eig_hermitian(h)?;

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for k in 0..n {
        for i in 0..n {
            pairs.push((s[(i, k)].norm_sqr(), i, k));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut column_for = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut assigned = 0;
    for &(_, i, k) in &pairs {
        if column_for[i] != usize::MAX || used[k] {
            continue;
        }
        column_for[i] = k;
        used[k] = true;
        assigned += 1;
        if assigned == n {
            break;
        }
    }
    let s = CMatrix::from_fn(n, n, |r, c| s[(r, column_for[c])]);

    let s_bd = partition.block_part(&s);
    let gram = &s_bd * s_bd.adjoint();
    let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let (weights, _) = eig_hermitian(&gram)?;
    let min_weight = weights[0];
    if min_weight < opts.min_block_weight {
        let mut leaks = Vec::new();
        for (g, members) in partition.groups().iter().enumerate() {
            for &c in members {
                let inside: f64 = members.iter().map(|&r| s[(r, c)].norm_sqr()).sum();
                if inside < 1.0 - opts.min_block_weight {
                    leaks.push(format!("eigenvector for state {c} keeps {inside:.3} in block {g}"));
                }
            }
        }
        return Err(Error::Degenerate(format!(
            "min eig(S_BD S_BD^dagger) = {min_weight:.3e}; {}",
            if leaks.is_empty() {
                "mixing spread over several eigenvectors".to_string()
            } else {
                leaks.join(", ")
            }
        )));
    }
    let root = inv_sqrt_psd(&gram, 0.0)?;
    let t = &s * s_bd.adjoint() * root;

    let rotated = t.adjoint() * h * &t;
    let h_norm = h.norm().max(f64::MIN_POSITIVE);
    let residual = partition.off_block_norm(&rotated) / h_norm;
    if residual > opts.residual_tolerance {
        return Err(Error::Degenerate(format!(
            "off-block residual {residual:.3e} exceeds {:.1e}",
            opts.residual_tolerance
        )));
    }
    let h_eff = partition.block_part(&rotated);
    let h_eff = (&h_eff + h_eff.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(BlockDiagonalization {
        t,
        h_eff,
        off_block_residual: residual,
        min_block_weight: min_weight,
    })
}

/// Pauli coefficients of H = (1/2) sum c_PQ sigma_P (x) sigma_Q, control first (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EffectiveHamiltonian {
    pub ii: f64,
    pub ix: f64,
    pub iy: f64,
    pub iz: f64,
    pub zi: f64,
    pub zx: f64,
    pub zy: f64,
    pub zz: f64,
}

fn pauli(k: usize) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match k {
        0 => [[o, z], [z, o]],
        1 => [[z, o], [o, z]],
        2 => [[z, -i], [i, z]],
        _ => [[o, z], [z, -o]],
    }
}

pub(crate) fn pauli_pair(p: usize, q: usize) -> CMatrix {
    let a = pauli(p);
    let b = pauli(q);
    CMatrix::from_fn(4, 4, |r, c| a[r / 2][c / 2] * b[r % 2][c % 2])
}

impl EffectiveHamiltonian {
    const TERMS: [(usize, usize); 8] = [(0, 0), (0, 1), (0, 2), (0, 3), (3, 0), (3, 1), (3, 2), (3, 3)];

    fn values(&self) -> [f64; 8] {
        [self.ii, self.ix, self.iy, self.iz, self.zi, self.zx, self.zy, self.zz]
    }

    fn from_values(v: [f64; 8]) -> Self {
        Self {
            ii: v[0],
            ix: v[1],
            iy: v[2],
            iz: v[3],
            zi: v[4],
            zx: v[5],
            zy: v[6],
            zz: v[7],
        }
    }

    /// Rebuilds the 4x4 matrix in the (control, target) basis.
    pub fn to_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for (&(p, q), v) in Self::TERMS.iter().zip(self.values()) {
            m += pauli_pair(p, q) * Complex64::new(v / 2.0, 0.0);
        }
        m
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_values(self.values().map(|v| v * factor))
    }
}

/// c_PQ = tr[(sigma_P (x) sigma_Q) H] / 2 for P in {I, Z}, Q in {I, X, Y, Z}.
pub fn extract_pauli_coefficients(h: &CMatrix) -> Result<EffectiveHamiltonian> {
    if h.nrows() != 4 || h.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: h.nrows(),
        });
    }
    let dev = hermitian_deviation(h);
    if dev > 1e-9 * h.norm().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let mut v = [0.0; 8];
    for (k, &(p, q)) in EffectiveHamiltonian::TERMS.iter().enumerate() {
        v[k] = (pauli_pair(p, q) * h).trace().re / 2.0;
    }
    Ok(EffectiveHamiltonian::from_values(v))
}

/// Static ZZ splitting (E110 - E100) - (E010 - E000), rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticZz {
    /// Dispersive formula with anharmonicity magnitudes and
    /// Delta = w_T - w_A^u.
    pub perturbative: f64,
    /// Same formula with signed anharmonicities.
    pub perturbative_signed: f64,
    /// Full diagonalization with B in `spectator_level`.
    pub numeric: f64,
    pub spectator_level: usize,
}

/// -2 J^2 (d_T + d_A) / [(Delta + d_T)(d_A - Delta)].
pub fn static_zz_formula(j: f64, detuning: f64, delta_t: f64, delta_a: f64) -> Result<f64> {
    let a = detuning + delta_t;
    let b = delta_a - detuning;
    let scale = delta_t.abs().max(delta_a.abs()).max(detuning.abs()).max(f64::MIN_POSITIVE);
    if a.abs() <= 1e-9 * scale || b.abs() <= 1e-9 * scale {
        return Err(Error::Pole(format!(
            "Delta = {detuning:.6e} sits on a pole (-d_T = {:.6e}, d_A = {delta_a:.6e})",
            -delta_t
        )));
    }
    Ok(-2.0 * j * j * (delta_t + delta_a) / (a * b))
}

/// Energies of |c, t, spectator> read off the dressed spectrum.
fn computational_energies(basis: &DressedBasis, spectator: usize) -> Result<[f64; 4]> {
    let mut e = [0.0; 4];
    for (k, (c, t)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        e[k] = basis.energy([c, t, spectator]).ok_or_else(|| {
            Error::Labeling(format!("no dressed state labeled {:?}", [c, t, spectator]))
        })?;
    }
    Ok(e)
}

pub fn static_zz_numeric(spec: &CircuitSpec, spectator_level: usize) -> Result<f64> {
    let layout = BasisLayout::for_spec(spec);
    let basis = diagonalize_bare(&build_bare_hamiltonian(spec, &layout)?, &layout)?;
    let e = computational_energies(&basis, spectator_level)?;
    Ok((e[3] - e[2]) - (e[1] - e[0]))
}

pub fn static_zz(spec: &CircuitSpec, spectator_level: usize) -> Result<StaticZz> {
    let t = spec.mode(ModeLabel::T);
    let a = spec.mode(ModeLabel::A);
    let detuning = t.frequency - spec.a_upper_sideband();
    let perturbative = static_zz_formula(
        spec.j_xx,
        detuning,
        t.anharmonicity.abs(),
        a.anharmonicity.abs(),
    )?;
    let perturbative_signed = static_zz_formula(spec.j_xx, detuning, t.anharmonicity, a.anharmonicity)
        .unwrap_or(f64::NAN);
    Ok(StaticZz {
        perturbative,
        perturbative_signed,
        numeric: static_zz_numeric(spec, spectator_level)?,
        spectator_level,
    })
}

/// Target transition frequencies with the control in |0> and |1>.
pub fn conditional_target_frequencies(spec: &CircuitSpec, spectator_level: usize) -> Result<(f64, f64)> {
    let layout = BasisLayout::for_spec(spec);
    let basis = diagonalize_bare(&build_bare_hamiltonian(spec, &layout)?, &layout)?;
    let e = computational_energies(&basis, spectator_level)?;
    Ok((e[1] - e[0], e[3] - e[2]))
}

/// Mean of the two conditional target frequencies.
pub fn default_drive_frequency(spec: &CircuitSpec, spectator_level: usize) -> Result<f64> {
    let (w0, w1) = conditional_target_frequencies(spec, spectator_level)?;
    Ok(0.5 * (w0 + w1))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EffectiveOptions {
    /// Level the B mode is frozen in.
    pub spectator_level: usize,
    pub block: BlockOptions,
    /// Keep the whole Hilbert space even when the spectator sector is
    /// exactly decoupled (lambda = 0).
    pub full_space: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrEffective {
    pub coefficients: EffectiveHamiltonian,
    pub drive_frequency: f64,
    pub dropped_norm: f64,
    /// 1 - min eig(S_BD S_BD^dagger): weight mixed across the partition.
    pub leakage: f64,
    pub off_block_residual: f64,
}

/// Rotating-frame Hamiltonian together with the dressed labels it is
/// written in. Restricted to the spectator sector unless `full_space`.
#[derive(Debug, Clone)]
pub struct CrFrame {
    pub h: CMatrix,
    pub labels: Vec<[usize; 3]>,
    pub dropped_norm: f64,
    pub drive_frequency: f64,
    /// Dressed drive operator on the control's single-qubit channel.
    pub control_drive: CMatrix,
}

impl CrFrame {
    pub fn index_of(&self, label: [usize; 3]) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    /// Indices of |000>, |010>, |100>, |110> with B in the spectator level.
    pub fn computational(&self, spectator: usize) -> Result<[usize; 4]> {
        let mut out = [0; 4];
        for (k, (c, t)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            out[k] = self.index_of([c, t, spectator]).ok_or_else(|| {
                Error::Labeling(format!("no dressed state labeled {:?}", [c, t, spectator]))
            })?;
        }
        Ok(out)
    }
}

pub fn cr_frame(spec: &CircuitSpec, drive: &DriveSpec, opts: &EffectiveOptions) -> Result<CrFrame> {
    let layout = BasisLayout::for_spec(spec);
    let h0 = build_bare_hamiltonian(spec, &layout)?;
    let basis = diagonalize_bare(&h0, &layout)?;
    let (xt, xa) = build_drive_operators(spec, &layout)?;
    let dt = rotate_operator(&basis.unitary, &xt)?;
    let da = rotate_operator(&basis.unitary, &xa)?;
    let rwa = apply_rwa(&basis, &dt, &da, drive)?;
    let (h, labels, control_drive) = if spec.lambda == 0.0 && !opts.full_space {
        let idx = sector_indices(&basis, ModeLabel::B.index(), opts.spectator_level);
        let labels = idx.iter().map(|&i| basis.labels[i]).collect();
        (restrict(&rwa.h, &idx), labels, restrict(&dt, &idx))
    } else {
        (rwa.h, basis.labels.clone(), dt)
    };
    Ok(CrFrame {
        h,
        labels,
        dropped_norm: rwa.dropped_norm,
        drive_frequency: rwa.drive_frequency,
        control_drive,
    })
}

/// Model -> dressed frame -> RWA -> block diagonalization -> Pauli terms.
pub fn cr_effective_hamiltonian(
    spec: &CircuitSpec,
    drive: &DriveSpec,
    opts: &EffectiveOptions,
) -> Result<CrEffective> {
    let frame = cr_frame(spec, drive, opts)?;
    let comp = frame.computational(opts.spectator_level)?;
    let partition = Partition::with_rest(vec![vec![comp[0], comp[1]], vec![comp[2], comp[3]]], frame.h.nrows())?;
    let bd = least_action_block_diagonalize(&frame.h, &partition, &opts.block)?;
    let dev = unitary_deviation(&bd.t);
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }
    let block = restrict(&bd.h_eff, &comp);
    Ok(CrEffective {
        coefficients: extract_pauli_coefficients(&block)?,
        drive_frequency: frame.drive_frequency,
        dropped_norm: frame.dropped_norm,
        leakage: 1.0 - bd.min_block_weight,
        off_block_residual: bd.off_block_residual,
    })
}

/// Abscissas -Delta_TA/delta_T where a transmon transition meets the target.
pub const DETUNING_POLES: [f64; 5] = [-0.5, 0.0, 0.5, 1.0, 1.5];

pub fn nearest_pole_distance(x: f64) -> f64 {
    DETUNING_POLES.iter().map(|p| (x - p).abs()).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Ok,
    Degenerate,
    Labeling,
    Error,
}

impl SweepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepStatus::Ok => "ok",
            SweepStatus::Degenerate => "degenerate",
            SweepStatus::Labeling => "labeling",
            SweepStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid_value: f64,
    pub status: SweepStatus,
    pub result: Option<CrEffective>,
    pub message: Option<String>,
}

impl SweepRow {
    fn from_result(grid_value: f64, r: Result<CrEffective>) -> Self {
        match r {
            Ok(v) => Self {
                grid_value,
                status: SweepStatus::Ok,
                result: Some(v),
                message: None,
            },
            Err(e) => {
                let status = match e {
                    Error::Degenerate(_) | Error::Singular(_) => SweepStatus::Degenerate,
                    Error::Labeling(_) => SweepStatus::Labeling,
                    _ => SweepStatus::Error,
                };
                Self {
                    grid_value,
                    status,
                    result: None,
                    message: Some(e.to_string()),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub effective: EffectiveOptions,
    /// Recompute the drive frequency as the conditional mean at each point.
    pub auto_frequency: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            effective: EffectiveOptions::default(),
            auto_frequency: true,
        }
    }
}

fn evaluate_point(spec: &CircuitSpec, drive: &DriveSpec, opts: &SweepOptions) -> Result<CrEffective> {
    let mut drive = *drive;
    if opts.auto_frequency {
        drive.frequency = default_drive_frequency(spec, opts.effective.spectator_level)?;
    }
    cr_effective_hamiltonian(spec, &drive, &opts.effective)
}

/// Moves the transmon so that (w_T - w_target)/|alpha_T| = x, where
/// w_target is the bare A transition in the spectator sector.
pub fn spec_at_detuning(spec: &CircuitSpec, x: f64, spectator_level: usize) -> CircuitSpec {
    let mut s = *spec;
    let alpha = spec.mode(ModeLabel::T).anharmonicity.abs();
    s.mode_mut(ModeLabel::T).frequency = spec.target_frequency(spectator_level) + x * alpha;
    s
}

/// Effective Hamiltonian over a grid of -Delta_TA/delta_T. Failing points
/// become rows with a non-ok status; rows keep grid order.
pub fn sweep_detuning(
    spec: &CircuitSpec,
    drive: &DriveSpec,
    grid: &[f64],
    opts: &SweepOptions,
) -> Vec<SweepRow> {
    grid.par_iter()
        .map(|&x| {
            let s = spec_at_detuning(spec, x, opts.effective.spectator_level);
            SweepRow::from_result(x, evaluate_point(&s, drive, opts))
        })
        .collect()
}

/// Effective Hamiltonian over a grid of drive amplitudes (rad/s).
pub fn sweep_amplitude(
    spec: &CircuitSpec,
    drive: &DriveSpec,
    amplitudes: &[f64],
    opts: &SweepOptions,
) -> Vec<SweepRow> {
    amplitudes
        .par_iter()
        .map(|&amp| {
            let mut d = *drive;
            d.amplitude = amp;
            SweepRow::from_result(amp, evaluate_point(spec, &d, opts))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptimum {
    pub phase: f64,
    pub effective: EffectiveHamiltonian,
    pub evaluations: usize,
}

/// Drive phase minimizing |ZY| within pi/2 of `drive.phase`, by golden
/// section. With no cross-talk |ZY| is sinusoidal in the phase, so the
/// window holds exactly one zero.
pub fn optimize_drive_phase(
    spec: &CircuitSpec,
    drive: &DriveSpec,
    opts: &EffectiveOptions,
) -> Result<PhaseOptimum> {
    let eval = |phi: f64| -> Result<EffectiveHamiltonian> {
        let mut d = *drive;
        let shift = phi - drive.phase;
        d.phase = phi;
        d.crosstalk_phase = drive.crosstalk_phase + shift;
        Ok(cr_effective_hamiltonian(spec, &d, opts)?.coefficients)
    };
    let half = std::f64::consts::FRAC_PI_2;
    let (mut a, mut b) = (drive.phase - half, drive.phase + half);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = eval(c)?.zy.abs();
    let mut fd = eval(d)?.zy.abs();
    let mut evaluations = 2;
    let max_iter = 200;
    while (b - a) > 1e-10 {
        if evaluations > max_iter {
            return Err(Error::NoConvergence(format!(
                "phase search bracket still {:.3e} rad wide",
                b - a
            )));
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c)?.zy.abs();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d)?.zy.abs();
        }
        evaluations += 1;
    }
    let phase = 0.5 * (a + b);
    Ok(PhaseOptimum {
        phase,
        effective: eval(phase)?,
        evaluations: evaluations + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_preset, PresetName, KHZ, MHZ};
    use crate::numerics::expm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
        });
        (&m + m.adjoint()) * c(0.5)
    }

    #[test]
    fn block_diagonal_input_gives_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Partition::new(vec![vec![0, 1], vec![2, 3], vec![4, 5, 6, 7]], 8).unwrap();
        let mut h = p.block_part(&random_hermitian(&mut rng, 8, 0.1));
        for i in 0..8 {
            h[(i, i)] += c(i as f64);
        }
        let bd = least_action_block_diagonalize(&h, &p, &BlockOptions::default()).unwrap();
        assert!((&bd.t - CMatrix::identity(8, 8)).norm() < 1e-12);
        assert!((&bd.h_eff - &h).norm() < 1e-12);
    }

    #[test]
    fn second_order_shifts() {
        let (delta, g) = (1.0, 1e-3);
        let h = CMatrix::from_row_slice(
            4,
            4,
            &[
                c(0.0), c(0.0), c(g), c(0.0),
                c(0.0), c(0.1), c(0.0), c(g),
                c(g), c(0.0), c(delta), c(0.0),
                c(0.0), c(g), c(0.0), c(delta + 0.1),
            ],
        );
        let p = Partition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let bd = least_action_block_diagonalize(&h, &p, &BlockOptions::default()).unwrap();
        let shift = g * g / delta;
        let tol = 10.0 * g.powi(4) / delta.powi(3);
        assert!((bd.h_eff[(0, 0)].re + shift).abs() < tol);
        assert!((bd.h_eff[(1, 1)].re - 0.1 + shift).abs() < tol);
        assert!((bd.h_eff[(2, 2)].re - delta - shift).abs() < tol);
    }

    #[test]
    fn least_action_beats_other_completions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = Partition::new(vec![vec![0, 1], vec![2, 3], vec![4, 5, 6, 7]], 8).unwrap();
        let mut h = random_hermitian(&mut rng, 8, 0.05);
        for i in 0..8 {
            h[(i, i)] += c(i as f64);
        }
        let bd = least_action_block_diagonalize(&h, &p, &BlockOptions::default()).unwrap();
        let base = (&bd.t - CMatrix::identity(8, 8)).norm();
        for _ in 0..10 {
            let gen = p.block_part(&random_hermitian(&mut rng, 8, 1.0));
            let v = expm(&(gen * Complex64::new(0.0, 1.0)));
            let alt = &bd.t * v;
            let off = p.off_block_norm(&(alt.adjoint() * &h * &alt));
            assert!(off < 1e-9 * h.norm());
            assert!(base <= (&alt - CMatrix::identity(8, 8)).norm());
        }
    }

    #[test]
    fn degenerate_mixing_is_reported() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let p = Partition::new(vec![vec![0], vec![1]], 2).unwrap();
        assert!(matches!(
            least_action_block_diagonalize(&h, &p, &BlockOptions::default()),
            Err(Error::Degenerate(_))
        ));
        assert!(Partition::new(vec![vec![0, 1], vec![1]], 2).is_err());
        assert!(Partition::new(vec![vec![0]], 2).is_err());
    }

    #[test]
    fn pauli_extraction() {
        let w = 3.0;
        let zx = pauli_pair(3, 1) * c(w / 2.0);
        let e = extract_pauli_coefficients(&zx).unwrap();
        assert_eq!(e, EffectiveHamiltonian { zx: w, ..Default::default() });

        let xi = 0.7;
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(xi), c(-xi), c(-xi), c(xi)]));
        let e = extract_pauli_coefficients(&h).unwrap();
        assert!((e.zz - 2.0 * xi).abs() < 1e-15);
        assert!((e.to_matrix() - h).norm() < 1e-15);

        let coeffs = EffectiveHamiltonian {
            ii: 0.1, ix: -0.2, iy: 0.3, iz: 0.4, zi: -0.5, zx: 0.6, zy: -0.7, zz: 0.8,
        };
        let back = extract_pauli_coefficients(&coeffs.to_matrix()).unwrap();
        for (a, b) in back.values().iter().zip(coeffs.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(hermitian_deviation(&coeffs.to_matrix()), 0.0);
        let mut bad = coeffs.to_matrix();
        bad[(0, 1)] += c(1.0);
        assert!(extract_pauli_coefficients(&bad).is_err());
    }

    #[test]
    fn static_zz_values() {
        let mut spec = load_preset(PresetName::Exp2Al).circuit;
        let zz = static_zz(&spec, 0).unwrap();
        assert!((zz.perturbative / KHZ - 150.41).abs() < 0.05, "{}", zz.perturbative / KHZ);
        assert!((zz.perturbative_signed / KHZ - 268.9).abs() < 0.5);
        spec.j_xx = 0.0;
        let zero = static_zz(&spec, 0).unwrap();
        assert_eq!(zero.perturbative, 0.0);
        assert!(zero.numeric.abs() < 1e-3 * KHZ);
        assert!(static_zz_formula(1.0, -2.0, 2.0, 1.0).is_err());
        assert!(static_zz_formula(1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn signed_formula_tracks_diagonalization_in_each_sector() {
        let spec = load_preset(PresetName::Exp2Al).circuit;
        let t = spec.mode(ModeLabel::T);
        let a = spec.mode(ModeLabel::A);
        for level in [0, 1] {
            let detuning = t.frequency - spec.target_frequency(level);
            let signed = static_zz_formula(spec.j_xx, detuning, t.anharmonicity, a.anharmonicity).unwrap();
            let numeric = static_zz_numeric(&spec, level).unwrap();
            assert!(((signed - numeric) / numeric).abs() < 0.02, "sector {level}");
        }
    }

    #[test]
    fn drive_off_matches_static_zz() {
        let spec = load_preset(PresetName::Exp2Al).circuit;
        let wd = default_drive_frequency(&spec, 0).unwrap();
        let eff = cr_effective_hamiltonian(&spec, &DriveSpec::new(0.0, wd, 0.0), &EffectiveOptions::default()).unwrap();
        let numeric = static_zz_numeric(&spec, 0).unwrap();
        let e = eff.coefficients;
        assert_eq!((e.zx, e.zy, e.ix, e.iy), (0.0, 0.0, 0.0, 0.0));
        assert!((2.0 * e.zz - numeric).abs() <= 1e-6 * numeric.abs());
        // the full space gives the same numbers
        let full = cr_effective_hamiltonian(
            &spec,
            &DriveSpec::new(0.0, wd, 0.0),
            &EffectiveOptions { full_space: true, ..Default::default() },
        )
        .unwrap();
        assert!((full.coefficients.zz - e.zz).abs() <= 1e-6 * e.zz.abs());
    }

    #[test]
    fn zx_grows_with_positive_detuning() {
        let spec = load_preset(PresetName::Exp1Cu).circuit;
        let drive = DriveSpec::new(5.0 * MHZ, 0.0, 0.0);
        let rows = sweep_detuning(&spec, &drive, &[-0.3, 0.3], &SweepOptions::default());
        let zx: Vec<f64> = rows.iter().map(|r| r.result.unwrap().coefficients.zx.abs()).collect();
        assert!(zx[1] > 1.5 * zx[0], "{zx:?}");
    }

    #[test]
    fn full_space_agrees_with_sector_when_driven() {
        let spec = load_preset(PresetName::Exp2Al).circuit;
        let wd = default_drive_frequency(&spec, 0).unwrap();
        let d = DriveSpec::new(20.0 * MHZ, wd, 0.3);
        let a = cr_effective_hamiltonian(&spec, &d, &EffectiveOptions::default()).unwrap();
        let b = cr_effective_hamiltonian(&spec, &d, &EffectiveOptions { full_space: true, ..Default::default() }).unwrap();
        assert!((a.coefficients.zx - b.coefficients.zx).abs() < 1e-6 * a.coefficients.zx.abs());
    }

    #[test]
    fn phase_covariance_and_optimum() {
        let spec = load_preset(PresetName::Exp2Al).circuit;
        let wd = default_drive_frequency(&spec, 0).unwrap();
        let opts = EffectiveOptions::default();
        let d0 = DriveSpec::new(20.0 * MHZ, wd, 0.4);
        let a = cr_effective_hamiltonian(&spec, &d0, &opts).unwrap().coefficients;
        let mut d1 = d0;
        d1.phase += std::f64::consts::PI;
        let b = cr_effective_hamiltonian(&spec, &d1, &opts).unwrap().coefficients;
        assert!((a.zx + b.zx).abs() < 1e-9 * a.zx.abs());

        let opt0 = optimize_drive_phase(&spec, &d0, &opts).unwrap();
        let opt1 = optimize_drive_phase(&spec, &d1, &opts).unwrap();
        assert!(opt0.effective.zy.abs() < 1.0 * KHZ && opt0.effective.iy.abs() < 1.0 * KHZ);
        assert!((opt1.phase - opt0.phase - std::f64::consts::PI).abs() < 1e-6);
        assert!((opt1.effective.zx + opt0.effective.zx).abs() < 1e-6 * opt0.effective.zx.abs());

        let dx = DriveSpec::new(20.0 * MHZ, wd, 0.0).with_crosstalk(0.1, 1.0);
        let optx = optimize_drive_phase(&spec, &dx, &opts).unwrap();
        assert!(optx.effective.iy.abs() > 0.0);
    }

    #[test]
    fn amplitude_sweep_shape() {
        let spec = load_preset(PresetName::Exp2Al).circuit;
        let amps: Vec<f64> = (0..6).map(|k| k as f64 * 2.0 * MHZ).collect();
        let rows = sweep_amplitude(&spec, &DriveSpec::new(0.0, 0.0, 0.0), &amps, &SweepOptions::default());
        assert_eq!(rows[0].result.unwrap().coefficients.zx, 0.0);
        let zx: Vec<f64> = rows.iter().map(|r| r.result.unwrap().coefficients.zx).collect();
        // linear through the lowest three points
        let slope = (amps[1] * zx[1] + amps[2] * zx[2]) / (amps[1].powi(2) + amps[2].powi(2));
        let mean = zx[..3].iter().sum::<f64>() / 3.0;
        let ss_res: f64 = (0..3).map(|k| (zx[k] - slope * amps[k]).powi(2)).sum();
        let ss_tot: f64 = (0..3).map(|k| (zx[k] - mean).powi(2)).sum();
        assert!(1.0 - ss_res / ss_tot > 0.999);
        // ZZ is convex in the amplitude
        let zz: Vec<f64> = rows.iter().map(|r| r.result.unwrap().coefficients.zz).collect();
        for k in 1..zz.len() - 1 {
            assert!(zz[k + 1] - 2.0 * zz[k] + zz[k - 1] > 0.0, "{zz:?}");
        }
    }
}

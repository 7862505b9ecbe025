//! Dressed basis, drive rotation and the rotating-wave Hamiltonian.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BasisLayout, DriveSpec};
use crate::numerics::{eig_hermitian, hermitian_deviation, CMatrix};

/// Below this squared overlap a dressed state has no meaningful bare label.
pub const MIN_LABEL_OVERLAP: f64 = 0.25;
/// Below this squared overlap labeling only warns.
pub const WARN_LABEL_OVERLAP: f64 = 0.5;

/// Eigenbasis of the static Hamiltonian with bare-state labels.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    /// Columns are dressed states written in the layout's bare basis.
    pub unitary: CMatrix,
    /// Bare label (n_T, n_A, n_B) of each dressed state.
    pub labels: Vec<[usize; 3]>,
    pub energies: DVector<f64>,
    /// Smallest |<bare(label)|dressed>|^2 over all states.
    pub min_overlap: f64,
}

impl DressedBasis {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: [usize; 3]) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn energy(&self, label: [usize; 3]) -> Option<f64> {
        self.index_of(label).map(|i| self.energies[i])
    }

    pub fn excitation(&self, index: usize) -> usize {
        self.labels[index].iter().sum()
    }

    pub fn energies_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.energies.map(|e| Complex64::new(e, 0.0)))
    }
}

/// Diagonalizes `h0` and labels each eigenvector by its dominant bare state.
///
/// Labels are assigned greedily in order of decreasing overlap, which makes
/// the assignment a bijection; ties go to the lower bare index. A dressed
/// state whose assigned overlap falls below [`MIN_LABEL_OVERLAP`] is an
/// error naming the bare label it lost.
pub fn diagonalize_bare(h0: &CMatrix, layout: &BasisLayout) -> Result<DressedBasis> {
    let n = layout.dim();
    if h0.nrows() != n || h0.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h0.nrows(),
        });
    }
    let (energies, mut u) = eig_hermitian(h0)?;

    for k in 0..n {
        let mut best = 0;
        let mut best_mag = -1.0;
        for i in 0..n {
            let m = u[(i, k)].norm_sqr();
            if m > best_mag * (1.0 + 1e-12) {
                best = i;
                best_mag = m;
            }
        }
        let phase = u[(best, k)] / u[(best, k)].norm();
        let fix = phase.conj();
        u.column_mut(k).iter_mut().for_each(|z| *z *= fix);
        u[(best, k)] = Complex64::new(u[(best, k)].re, 0.0);
    }

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for k in 0..n {
        for i in 0..n {
            pairs.push((u[(i, k)].norm_sqr(), i, k));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut bare_of = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut assigned = 0;
    for &(_, i, k) in &pairs {
        if bare_of[k] != usize::MAX || taken[i] {
            continue;
        }
        bare_of[k] = i;
        taken[i] = true;
        assigned += 1;
        if assigned == n {
            break;
        }
    }

    let mut min_overlap = f64::INFINITY;
    for k in 0..n {
        let ov = u[(bare_of[k], k)].norm_sqr();
        if ov < MIN_LABEL_OVERLAP {
            let preferred = (0..n)
                .max_by(|&a, &b| u[(a, k)].norm_sqr().total_cmp(&u[(b, k)].norm_sqr()))
                .unwrap_or(0);
            return Err(Error::Labeling(format!(
                "dressed state {k} (E = {:.6e}) lost bare label {:?} and keeps only overlap {ov:.3}",
                energies[k],
                layout.labels(preferred)
            )));
        }
        min_overlap = min_overlap.min(ov);
    }
    if min_overlap < WARN_LABEL_OVERLAP {
        log::warn!("dressed labeling is ambiguous: minimum overlap {min_overlap:.3}");
    }
    let labels = bare_of.iter().map(|&i| layout.labels(i)).collect();
    Ok(DressedBasis {
        unitary: u,
        labels,
        energies,
        min_overlap,
    })
}

/// U^dagger O U.
pub fn rotate_operator(u: &CMatrix, o: &CMatrix) -> Result<CMatrix> {
    if u.nrows() != o.nrows() || o.nrows() != o.ncols() || u.nrows() != u.ncols() {
        return Err(Error::DimensionMismatch {
            expected: u.nrows(),
            got: o.nrows(),
        });
    }
    Ok(u.adjoint() * o * u)
}

/// Parts of an operator graded by the change in labeled excitation number.
#[derive(Debug, Clone)]
pub struct GradedOperator {
    /// Raises the excitation number by exactly one.
    pub raising: CMatrix,
    pub lowering: CMatrix,
    /// Everything else (excitation-preserving or changing by two or more).
    pub ungraded: CMatrix,
}

pub fn grade_operator(basis: &DressedBasis, d: &CMatrix) -> Result<GradedOperator> {
    let n = basis.dim();
    if d.nrows() != n || d.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: d.nrows(),
        });
    }
    let mut raising = CMatrix::zeros(n, n);
    let mut lowering = CMatrix::zeros(n, n);
    let mut ungraded = CMatrix::zeros(n, n);
    for j in 0..n {
        let nj = basis.excitation(j) as i64;
        for i in 0..n {
            let ni = basis.excitation(i) as i64;
            match ni - nj {
                1 => raising[(i, j)] = d[(i, j)],
                -1 => lowering[(i, j)] = d[(i, j)],
                _ => ungraded[(i, j)] = d[(i, j)],
            }
        }
    }
    Ok(GradedOperator {
        raising,
        lowering,
        ungraded,
    })
}

/// Time-independent Hamiltonian in the frame rotating at the drive frequency.
#[derive(Debug, Clone)]
pub struct RwaHamiltonian {
    pub h: CMatrix,
    pub drive_frequency: f64,
    /// Frobenius weight of drive matrix elements the grading could not
    /// keep (rad/s).
    pub dropped_norm: f64,
}

/// Builds diag(E) - w_d N + (W/2)[e^{-i phi} D_T^+ + h.c.] + (m W/2)[e^{-i phi'} D_A^+ + h.c.]
/// with N and the grading taken from the dressed-state labels.
pub fn apply_rwa(
    basis: &DressedBasis,
    d_t: &CMatrix,
    d_a: &CMatrix,
    drive: &DriveSpec,
) -> Result<RwaHamiltonian> {
    let drive = drive.normalized()?;
    let n = basis.dim();
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        let e = basis.energies[i] - drive.frequency * basis.excitation(i) as f64;
        h[(i, i)] = Complex64::new(e, 0.0);
    }
    let mut dropped = 0.0;
    let terms = [
        (d_t, drive.amplitude, drive.phase),
        (d_a, drive.crosstalk * drive.amplitude, drive.crosstalk_phase),
    ];
    for (d, amp, phase) in terms {
        if amp == 0.0 {
            continue;
        }
        let g = grade_operator(basis, d)?;
        let c = Complex64::from_polar(amp / 2.0, -phase);
        h += &g.raising * c + &g.lowering * c.conj();
        dropped += amp.abs() * g.ungraded.norm();
    }
    // exact Hermiticity
    let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    debug_assert!(hermitian_deviation(&h) == 0.0);
    Ok(RwaHamiltonian {
        h,
        drive_frequency: drive.frequency,
        dropped_norm: dropped,
    })
}

/// Indices of dressed states whose label has mode `mode` in level `level`.
pub fn sector_indices(basis: &DressedBasis, mode: usize, level: usize) -> Vec<usize> {
    (0..basis.dim()).filter(|&i| basis.labels[i][mode] == level).collect()
}

/// Principal submatrix on `indices`.
pub fn restrict(m: &CMatrix, indices: &[usize]) -> CMatrix {
    let k = indices.len();
    CMatrix::from_fn(k, k, |i, j| m[(indices[i], indices[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        build_bare_hamiltonian, build_drive_operators, load_preset, CircuitSpec, ModeLabel,
        ModeSpec, Ordering, PresetName, GHZ, MHZ,
    };
    use crate::numerics::unitary_deviation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn two_level_spec(freq: f64) -> CircuitSpec {
        CircuitSpec {
            modes: [
                ModeSpec::new(ModeLabel::T, freq, -200.0 * MHZ, 2),
                ModeSpec::new(ModeLabel::A, 7.0 * GHZ, -200.0 * MHZ, 2),
                ModeSpec::new(ModeLabel::B, 8.0 * GHZ, -200.0 * MHZ, 2),
            ],
            j_zz: 0.0,
            j_xx: 0.0,
            lambda: 0.0,
        }
    }

    #[test]
    fn diagonal_input_gives_identity() {
        let layout = BasisLayout::new([2, 2, 2], Ordering::TensorProduct);
        let h = CMatrix::from_fn(8, 8, |i, j| if i == j { c(i as f64 * 1.3) } else { c(0.0) });
        let b = diagonalize_bare(&h, &layout).unwrap();
        assert_eq!(b.unitary, CMatrix::identity(8, 8));
        for i in 0..8 {
            assert_eq!(b.labels[i], layout.labels(i));
        }
    }

    #[test]
    fn two_by_two_split_and_labels() {
        let layout = BasisLayout::new([2, 1, 1], Ordering::TensorProduct);
        let (delta, j) = (1.0, 0.1);
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0), c(j), c(j), c(delta)]);
        let b = diagonalize_bare(&h, &layout).unwrap();
        let split = b.energies[1] - b.energies[0];
        assert!((split - (delta * delta + 4.0 * j * j).sqrt()).abs() < 1e-14);
        assert_eq!(b.labels, vec![[0, 0, 0], [1, 0, 0]]);
        for k in 0..2 {
            let big = (0..2).max_by(|&a, &c| b.unitary[(a, k)].norm().total_cmp(&b.unitary[(c, k)].norm())).unwrap();
            assert!(b.unitary[(big, k)].im == 0.0 && b.unitary[(big, k)].re > 0.0);
        }
    }

    #[test]
    fn avoided_crossing_gap_is_twice_the_exchange() {
        // transmon tuned onto the A-mode transition of the B = 0 sector
        let mut spec = load_preset(PresetName::Exp1Cu).circuit;
        spec.modes[0].frequency = spec.mode(ModeLabel::A).frequency;
        let layout = BasisLayout::for_spec(&spec);
        let h0 = build_bare_hamiltonian(&spec, &layout).unwrap();
        let b = diagonalize_bare(&h0, &layout).unwrap();
        let mut single: Vec<f64> = (0..b.dim())
            .filter(|&i| b.excitation(i) == 1 && b.labels[i][2] == 0)
            .map(|i| b.energies[i])
            .collect();
        single.sort_by(f64::total_cmp);
        let gap = single[1] - single[0];
        assert!((gap / MHZ - 3.8).abs() < 1e-9, "gap {}", gap / MHZ);
    }

    #[test]
    fn rotation_preserves_trace_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let mut h = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        h = &h + h.adjoint();
        let (_, u) = eig_hermitian(&h).unwrap();
        let mut o = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        o = &o + o.adjoint();
        let r = rotate_operator(&u, &o).unwrap();
        assert!((r.trace() - o.trace()).norm() < 1e-12);
        assert!((r.norm() - o.norm()).abs() < 1e-12);
        assert_eq!(rotate_operator(&CMatrix::identity(n, n), &o).unwrap(), o);
        assert!(rotate_operator(&u, &CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn resonant_two_level_rwa_is_sigma_x() {
        let freq = 5.0 * GHZ;
        let spec = two_level_spec(freq).with_levels(2);
        let layout = BasisLayout::for_spec(&spec);
        let h0 = build_bare_hamiltonian(&spec, &layout).unwrap();
        let basis = diagonalize_bare(&h0, &layout).unwrap();
        let (xt, xa) = build_drive_operators(&spec, &layout).unwrap();
        let dt = rotate_operator(&basis.unitary, &xt).unwrap();
        let da = rotate_operator(&basis.unitary, &xa).unwrap();
        let omega = 10.0 * MHZ;
        for detuning in [0.0, 3.0 * MHZ] {
            let drive = DriveSpec::new(omega, freq + detuning, 0.0);
            let rwa = apply_rwa(&basis, &dt, &da, &drive).unwrap();
            let g = basis.index_of([0, 0, 0]).unwrap();
            let e = basis.index_of([1, 0, 0]).unwrap();
            let h = &rwa.h;
            assert!((h[(g, e)] - c(omega / 2.0)).norm() < 1e-6);
            assert!(((h[(e, e)] - h[(g, g)]).re + detuning).abs() < 1e-3);
        }
    }

    #[test]
    fn grading_partitions_operator_and_rwa_limit() {
        let spec = load_preset(PresetName::Exp2Al).circuit;
        let layout = BasisLayout::for_spec(&spec);
        let h0 = build_bare_hamiltonian(&spec, &layout).unwrap();
        let basis = diagonalize_bare(&h0, &layout).unwrap();
        assert!(unitary_deviation(&basis.unitary) < 1e-12);
        let (xt, xa) = build_drive_operators(&spec, &layout).unwrap();
        let dt = rotate_operator(&basis.unitary, &xt).unwrap();
        let g = grade_operator(&basis, &dt).unwrap();
        assert_eq!(&g.raising + &g.lowering + &g.ungraded, dt);

        let da = rotate_operator(&basis.unitary, &xa).unwrap();
        let wd = 4.5 * GHZ;
        let rwa = apply_rwa(&basis, &dt, &da, &DriveSpec::new(0.0, wd, 0.0)).unwrap();
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                let expected = if i == j {
                    basis.energies[i] - wd * basis.excitation(i) as f64
                } else {
                    0.0
                };
                assert_eq!(rwa.h[(i, j)], c(expected));
            }
        }
        assert_eq!(rwa.dropped_norm, 0.0);
        let driven = apply_rwa(&basis, &dt, &da, &DriveSpec::new(30.0 * MHZ, wd, 0.4)).unwrap();
        assert_eq!(hermitian_deviation(&driven.h), 0.0);
    }

    #[test]
    fn spectrum_preserved_and_deterministic() {
        let spec = load_preset(PresetName::Exp1Cu).circuit;
        let layout = BasisLayout::for_spec(&spec);
        let h0 = build_bare_hamiltonian(&spec, &layout).unwrap();
        let a = diagonalize_bare(&h0, &layout).unwrap();
        let b = diagonalize_bare(&h0, &layout).unwrap();
        assert_eq!(a.unitary, b.unitary);
        let d = rotate_operator(&a.unitary, &h0).unwrap();
        for i in 0..a.dim() {
            assert!((d[(i, i)].re - a.energies[i]).abs() < 1e-11 * a.energies[i].abs().max(GHZ));
        }
    }

    #[test]
    fn sector_restriction() {
        let spec = load_preset(PresetName::Exp2Al).circuit;
        let layout = BasisLayout::for_spec(&spec);
        let basis = diagonalize_bare(&build_bare_hamiltonian(&spec, &layout).unwrap(), &layout).unwrap();
        let idx = sector_indices(&basis, 2, 0);
        assert_eq!(idx.len(), 16);
        let m = restrict(&basis.energies_matrix(), &idx);
        assert_eq!(m.nrows(), 16);
    }
}

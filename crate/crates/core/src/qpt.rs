//! Two-qubit state and process tomography in the Pauli operator basis.
//!
//! Operators are indexed 4i + j for B_i (x) B_j with B = (I, X, Y, Z), the
//! control qubit first. A channel is E(rho) = sum_mn chi_mn A_m rho A_n^dagger.

use log::{debug, warn};
use nalgebra::{DVector, LU};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, hermitian_deviation, nelder_mead, unitary_deviation, CMatrix, SimplexOptions};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub const PAULI_LABELS: [&str; 4] = ["I", "X", "Y", "Z"];

pub fn pauli(i: usize) -> CMatrix {
    let (o, l) = (c(1.0), Complex64::new(0.0, 1.0));
    let v = match i {
        0 => [o, ZERO, ZERO, o],
        1 => [ZERO, o, o, ZERO],
        2 => [ZERO, -l, l, ZERO],
        3 => [o, ZERO, ZERO, -o],
        _ => panic!("Pauli index {i} out of range"),
    };
    CMatrix::from_row_slice(2, 2, &v)
}

/// A_m = B_{m/4} (x) B_{m%4}.
pub fn pauli_basis() -> Vec<CMatrix> {
    (0..16).map(|m| pauli(m / 4).kronecker(&pauli(m % 4))).collect()
}

pub fn basis_labels() -> Vec<String> {
    (0..16)
        .map(|m| format!("{}{}", PAULI_LABELS[m / 4], PAULI_LABELS[m % 4]))
        .collect()
}

/// |0>, |1>, (|0>+|1>)/sqrt2, (|0>-i|1>)/sqrt2.
fn single_qubit_input(k: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = match k {
        0 => [c(1.0), ZERO],
        1 => [ZERO, c(1.0)],
        2 => [c(s), c(s)],
        _ => [c(s), Complex64::new(0.0, -s)],
    };
    let v = DVector::from_column_slice(&v);
    &v * v.adjoint()
}

/// Sixteen product inputs rho_{4a+b} = in_a (x) in_b.
pub fn input_states() -> Vec<CMatrix> {
    (0..16)
        .map(|j| single_qubit_input(j / 4).kronecker(&single_qubit_input(j % 4)))
        .collect()
}

/// Linear inversion from the 15 non-identity Pauli expectations (index
/// m - 1 for A_m), followed by projection onto the nearest density matrix
/// when an eigenvalue falls below -1e-9.
pub fn state_tomography(expectations: &[f64]) -> Result<CMatrix> {
    if expectations.len() != 15 {
        return Err(Error::DimensionMismatch {
            expected: 15,
            got: expectations.len(),
        });
    }
    if expectations.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("Pauli expectations"));
    }
    let basis = pauli_basis();
    let mut rho = CMatrix::identity(4, 4);
    for (m, e) in expectations.iter().enumerate() {
        rho += &basis[m + 1] * c(*e);
    }
    rho *= c(0.25);
    let (vals, _) = eig_hermitian(&rho)?;
    if vals[0] < -1e-9 {
        rho = nearest_density_matrix(&rho)?;
    }
    Ok(rho)
}

/// Euclidean projection of a real vector onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Frobenius-nearest PSD unit-trace matrix to the Hermitian part of `m`.
pub fn nearest_density_matrix(m: &CMatrix) -> Result<CMatrix> {
    let h = (m + m.adjoint()) * c(0.5);
    let (vals, vecs) = eig_hermitian(&h)?;
    let p = project_simplex(vals.as_slice());
    let d = CMatrix::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|&x| c(x))));
    Ok(&vecs * d * vecs.adjoint())
}

/// Pauli expectations tr(A_m rho) for m = 1..15.
pub fn pauli_expectations(rho: &CMatrix) -> Vec<f64> {
    pauli_basis()[1..].iter().map(|p| (p * rho).trace().re).collect()
}

/// Per-qubit assignment probabilities, `p[measured][prepared]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub p: [[f64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(p: [[f64; 2]; 2]) -> Result<Self> {
        for col in 0..2 {
            let s = p[0][col] + p[1][col];
            if (s - 1.0).abs() > 1e-12 || p.iter().any(|r| !(0.0..=1.0).contains(&r[col])) {
                return Err(Error::InvalidParameter(
                    "confusion columns must be probability vectors".into(),
                ));
            }
        }
        Ok(Self { p })
    }

    pub fn identity() -> Self {
        Self { p: [[1.0, 0.0], [0.0, 1.0]] }
    }

    /// Flip probability `e` for both outcomes.
    pub fn symmetric(e: f64) -> Result<Self> {
        Self::new([[1.0 - e, e], [e, 1.0 - e]])
    }

    /// Assignment fidelity 1 - (P(1|0) + P(0|1))/2.
    pub fn fidelity(&self) -> f64 {
        1.0 - 0.5 * (self.p[1][0] + self.p[0][1])
    }

    fn determinant(&self) -> f64 {
        self.p[0][0] * self.p[1][1] - self.p[0][1] * self.p[1][0]
    }

    fn inverse(&self) -> Result<[[f64; 2]; 2]> {
        let d = self.determinant();
        if d.abs() < 1e-12 {
            return Err(Error::Singular(d.abs()));
        }
        Ok([[self.p[1][1] / d, -self.p[0][1] / d], [-self.p[1][0] / d, self.p[0][0] / d]])
    }
}

/// Two-qubit outcome index 2 q_control + q_target.
fn apply_pair(m: [[[f64; 2]; 2]; 2], p: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for a in 0..2 {
        for b in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    out[2 * a + b] += m[0][a][x] * m[1][b][y] * p[2 * x + y];
                }
            }
        }
    }
    out
}

/// Readout model: measured distribution from the true one.
pub fn apply_confusion(p: &[f64; 4], confusion: &[ConfusionMatrix; 2]) -> [f64; 4] {
    apply_pair([confusion[0].p, confusion[1].p], p)
}

/// Inverts the tensor-product confusion model, then clips negative
/// probabilities and renormalizes.
pub fn correct_readout(raw: &[f64; 4], confusion: &[ConfusionMatrix; 2]) -> Result<[f64; 4]> {
    let inv = [confusion[0].inverse()?, confusion[1].inverse()?];
    let mut p = apply_pair(inv, raw);
    let clipped: f64 = p.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
    if clipped > 0.0 {
        for x in p.iter_mut() {
            *x = x.max(0.0);
        }
        let s: f64 = p.iter().sum();
        if s <= 0.0 {
            return Err(Error::NonPhysical("corrected distribution vanished".into()));
        }
        for x in p.iter_mut() {
            *x /= s;
        }
        if clipped > 1e-12 {
            debug!("readout correction clipped {clipped:.3e} of probability");
        }
    }
    Ok(p)
}

/// Pauli expectations estimated as a readout experiment would: each of
/// the nine local measurement settings yields an outcome distribution,
/// which passes through `confusion` and is then corrected; expectations
/// with an identity factor are averaged over the settings that contain
/// them.
pub fn measured_expectations(rho: &CMatrix, confusion: Option<&[ConfusionMatrix; 2]>) -> Result<Vec<f64>> {
    let Some(confusion) = confusion else {
        return Ok(pauli_expectations(rho));
    };
    // eigenprojectors of X, Y, Z for outcomes +1 (bit 0) and -1 (bit 1)
    let projector = |axis: usize, bit: usize| {
        let s = if bit == 0 { 0.5 } else { -0.5 };
        CMatrix::identity(2, 2) * c(0.5) + pauli(axis) * c(s)
    };
    let mut sums = [0.0; 16];
    let mut counts = [0usize; 16];
    for a in 1..4 {
        for b in 1..4 {
            let mut p = [0.0; 4];
            for x in 0..2 {
                for y in 0..2 {
                    let proj = projector(a, x).kronecker(&projector(b, y));
                    p[2 * x + y] = (proj * rho).trace().re.max(0.0);
                }
            }
            let total: f64 = p.iter().sum();
            // leaked population reads out at random
            for v in p.iter_mut() {
                *v += 0.25 * (1.0 - total);
            }
            let q = correct_readout(&apply_confusion(&p, confusion), confusion)?;
            let sign = |x: usize| if x == 0 { 1.0 } else { -1.0 };
            for (m, ia, ib) in [(4 * a + b, true, true), (4 * a, true, false), (b, false, true)] {
                let mut e = 0.0;
                for x in 0..2 {
                    for y in 0..2 {
                        let f = (if ia { sign(x) } else { 1.0 }) * (if ib { sign(y) } else { 1.0 });
                        e += f * q[2 * x + y];
                    }
                }
                sums[m] += e;
                counts[m] += 1;
            }
        }
    }
    Ok((1..16).map(|m| sums[m] / counts[m] as f64).collect())
}

/// Pauli basis, input states and the beta tensor, with the factorization
/// of the input-state operator basis kept for lambda extraction.
pub struct QptBasis {
    pub basis: Vec<CMatrix>,
    pub inputs: Vec<CMatrix>,
    inputs_lu: LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    /// beta[(16 j + k, 16 m + n)]
    pub beta: CMatrix,
    beta_lu: LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    pub input_condition: f64,
    pub beta_condition: f64,
}

fn condition_number(m: &CMatrix) -> f64 {
    let s = m.clone().svd(false, false).singular_values;
    let max = s.max();
    let min = s.min();
    if min == 0.0 { f64::INFINITY } else { max / min }
}

fn vectorize(m: &CMatrix) -> DVector<Complex64> {
    DVector::from_iterator(16, m.iter().copied())
}

impl QptBasis {
    pub fn new() -> Result<Self> {
        Self::with_inputs(input_states())
    }

    pub fn with_inputs(inputs: Vec<CMatrix>) -> Result<Self> {
        if inputs.len() != 16 || inputs.iter().any(|r| r.nrows() != 4 || r.ncols() != 4) {
            return Err(Error::DimensionMismatch {
                expected: 16,
                got: inputs.len(),
            });
        }
        let mut m = CMatrix::zeros(16, 16);
        for (k, rho) in inputs.iter().enumerate() {
            m.set_column(k, &vectorize(rho));
        }
        let input_condition = condition_number(&m);
        if !input_condition.is_finite() || input_condition > 1e12 {
            return Err(Error::Singular(1.0 / input_condition));
        }
        let inputs_lu = m.lu();
        let basis = pauli_basis();
        let mut beta = CMatrix::zeros(256, 256);
        for (j, rho) in inputs.iter().enumerate() {
            for mi in 0..16 {
                for ni in 0..16 {
                    let op = &basis[mi] * rho * basis[ni].adjoint();
                    let coeffs = inputs_lu
                        .solve(&vectorize(&op))
                        .ok_or(Error::Singular(0.0))?;
                    for k in 0..16 {
                        beta[(16 * j + k, 16 * mi + ni)] = coeffs[k];
                    }
                }
            }
        }
        let beta_condition = condition_number(&beta);
        if beta_condition > 1e8 {
            warn!("beta system is ill-conditioned (condition number {beta_condition:.3e})");
        }
        let beta_lu = beta.clone().lu();
        Ok(Self {
            basis,
            inputs,
            inputs_lu,
            beta,
            beta_lu,
            input_condition,
            beta_condition,
        })
    }

    /// Coefficients of `m` in the input-state operator basis.
    pub fn expand(&self, m: &CMatrix) -> Result<DVector<Complex64>> {
        self.inputs_lu.solve(&vectorize(m)).ok_or(Error::Singular(0.0))
    }

    /// lambda[(j, k)] from outputs E(rho_j).
    pub fn lambda(&self, outputs: &[CMatrix]) -> Result<CMatrix> {
        if outputs.len() != 16 {
            return Err(Error::DimensionMismatch {
                expected: 16,
                got: outputs.len(),
            });
        }
        let mut l = CMatrix::zeros(16, 16);
        for (j, out) in outputs.iter().enumerate() {
            let v = self.expand(out)?;
            for k in 0..16 {
                l[(j, k)] = v[k];
            }
        }
        Ok(l)
    }

    /// Solves lambda_jk = sum_mn chi_mn beta_jk^mn.
    pub fn chi_from_lambda(&self, lambda: &CMatrix) -> Result<CMatrix> {
        let rhs = DVector::from_iterator(256, (0..256).map(|r| lambda[(r / 16, r % 16)]));
        let x = self.beta_lu.solve(&rhs).ok_or(Error::Singular(0.0))?;
        Ok(CMatrix::from_fn(16, 16, |m, n| x[16 * m + n]))
    }

    /// E(rho) from chi.
    pub fn apply_chi(&self, chi: &CMatrix, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(4, 4);
        for m in 0..16 {
            let left = &self.basis[m] * rho;
            for n in 0..16 {
                let w = chi[(m, n)];
                if w != ZERO {
                    out += &left * self.basis[n].adjoint() * w;
                }
            }
        }
        out
    }

    /// sum_mn chi_mn A_n^dagger A_m - I.
    pub fn trace_preservation_defect(&self, chi: &CMatrix) -> CMatrix {
        let mut d = -CMatrix::identity(4, 4);
        for m in 0..16 {
            for n in 0..16 {
                let w = chi[(m, n)];
                if w != ZERO {
                    d += self.basis[n].adjoint() * &self.basis[m] * w;
                }
            }
        }
        d
    }
}

/// Rank-one chi of a unitary with c_m = tr(A_m^dagger U)/4.
pub fn ideal_chi(u: &CMatrix) -> Result<CMatrix> {
    if u.nrows() != 4 || u.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: u.nrows(),
        });
    }
    let dev = unitary_deviation(u);
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }
    let coeffs = DVector::from_iterator(16, pauli_basis().iter().map(|a| (a.adjoint() * u).trace() / 4.0));
    Ok(&coeffs * coeffs.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiDiagnostics {
    pub hermitian_deviation: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
}

pub fn chi_diagnostics(chi: &CMatrix) -> Result<ChiDiagnostics> {
    let h = (chi + chi.adjoint()) * c(0.5);
    let (vals, _) = eig_hermitian(&h)?;
    Ok(ChiDiagnostics {
        hermitian_deviation: hermitian_deviation(chi),
        min_eigenvalue: vals[0],
        trace: chi.trace().re,
    })
}

/// Re tr(chi_p chi_id^dagger), clipped to [0, 1].
pub fn process_fidelity(chi_p: &CMatrix, chi_id: &CMatrix) -> f64 {
    let f = (chi_p * chi_id.adjoint()).trace().re;
    let clipped = f.clamp(0.0, 1.0);
    if (clipped - f).abs() > 1e-12 {
        debug!("process fidelity {f} clipped to {clipped}");
    }
    clipped
}

pub fn gate_fidelity_from_process(f_pro: f64, d: usize) -> f64 {
    let d = d as f64;
    (d * f_pro + 1.0) / (d + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOptions {
    /// Weight of the trace-preservation penalty; `None` means 10 ||chi_exp||_F.
    pub lagrange: Option<f64>,
    pub max_iterations: usize,
    pub initial_step: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            lagrange: None,
            max_iterations: 50_000,
            initial_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub chi: CMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lagrange: f64,
}

/// Lower-triangular T from its 256 real parameters: 16 real diagonal
/// entries, then real and imaginary parts of the strict lower triangle
/// row by row.
fn t_from_params(p: &[f64]) -> CMatrix {
    let mut t = CMatrix::zeros(16, 16);
    let mut k = 16;
    for i in 0..16 {
        t[(i, i)] = c(p[i]);
        for j in 0..i {
            t[(i, j)] = Complex64::new(p[k], p[k + 1]);
            k += 2;
        }
    }
    t
}

fn params_from_t(t: &CMatrix) -> Vec<f64> {
    let mut p = vec![0.0; 256];
    let mut k = 16;
    for i in 0..16 {
        p[i] = t[(i, i)].re;
        for j in 0..i {
            p[k] = t[(i, j)].re;
            p[k + 1] = t[(i, j)].im;
            k += 2;
        }
    }
    p
}

fn chi_from_t(t: &CMatrix) -> CMatrix {
    let m = t.adjoint() * t;
    let tr = m.trace().re;
    m / c(tr)
}

/// Lower-triangular T with T^dagger T = chi (chi positive definite):
/// Cholesky of the index-reversed matrix, reversed back and adjointed.
fn reversed_cholesky(chi: &CMatrix) -> Result<CMatrix> {
    let n = chi.nrows();
    let rev = CMatrix::from_fn(n, n, |i, j| chi[(n - 1 - i, n - 1 - j)]);
    let l = rev
        .cholesky()
        .ok_or_else(|| Error::NonPhysical("seed is not positive definite".into()))?
        .unpack();
    let u = CMatrix::from_fn(n, n, |i, j| l[(n - 1 - i, n - 1 - j)]);
    Ok(u.adjoint())
}

/// Physical chi closest to `chi_exp` under the trace-preservation penalty.
///
/// chi_p = T^dagger T / tr(T^dagger T) with T lower triangular, minimizing
/// ||chi_exp - chi_p||_F + lambda_L ||sum chi_p,mn A_n^dagger A_m - I||_F by
/// Nelder-Mead, seeded with the spectral projection of chi_exp.
pub fn project_physical(qb: &QptBasis, chi_exp: &CMatrix, opts: &ProjectionOptions) -> Result<Projection> {
    if chi_exp.nrows() != 16 || chi_exp.ncols() != 16 {
        return Err(Error::DimensionMismatch {
            expected: 16,
            got: chi_exp.nrows(),
        });
    }
    let target = (chi_exp + chi_exp.adjoint()) * c(0.5);
    let lagrange = opts.lagrange.unwrap_or(10.0 * target.norm());
    // defect is linear in chi: vec(D + I) = K vec(chi)
    let mut k = CMatrix::zeros(16, 256);
    for m in 0..16 {
        for n in 0..16 {
            let q = qb.basis[n].adjoint() * &qb.basis[m];
            for (r, v) in q.iter().enumerate() {
                k[(r, 16 * m + n)] = *v;
            }
        }
    }
    let id = vectorize(&CMatrix::identity(4, 4));
    let objective = |p: &[f64]| -> f64 {
        let chi = chi_from_t(&t_from_params(p));
        let dist = (&target - &chi).norm();
        let v = DVector::from_iterator(256, (0..256).map(|r| chi[(r / 16, r % 16)]));
        let defect = (&k * v - &id).norm();
        dist + lagrange * defect
    };

    let seed = nearest_density_matrix(&target)?;
    let seed = (&seed + CMatrix::identity(16, 16) * c(1e-13)) / c(1.0 + 16e-13);
    let p0 = params_from_t(&reversed_cholesky(&seed)?);
    let scale = p0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let simplex = SimplexOptions {
        max_iterations: opts.max_iterations,
        initial_step: opts.initial_step * scale.max(1e-3),
        x_tolerance: 1e-9,
        f_tolerance: 1e-12,
        ..SimplexOptions::adaptive(256)
    };
    let res = nelder_mead(objective, &p0, &simplex)?;
    if !res.converged {
        debug!("chi projection stopped at the iteration cap ({})", res.iterations);
    }
    Ok(Projection {
        chi: chi_from_t(&t_from_params(&res.x)),
        objective: res.f,
        iterations: res.iterations,
        converged: res.converged,
        lagrange,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QptOptions {
    pub confusion: Option<[ConfusionMatrix; 2]>,
    pub projection: ProjectionOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QptResult {
    pub chi_exp: CMatrix,
    pub chi_p: CMatrix,
    pub chi_ideal: CMatrix,
    pub f_pro: f64,
    pub f_gate: f64,
    pub projection: Projection,
}

/// Exact chi of a channel from its action on the 16 inputs, without
/// tomography or projection. Useful for replaying a simulated gate cheaply.
pub fn process_chi<G>(gate: G) -> Result<CMatrix>
where
    G: Fn(&CMatrix) -> Result<CMatrix> + Sync,
{
    let qb = QptBasis::new()?;
    let outputs = qb.inputs.par_iter().map(&gate).collect::<Result<Vec<_>>>()?;
    qb.chi_from_lambda(&qb.lambda(&outputs)?)
}

/// Prepare the 16 inputs, apply `gate`, reconstruct each output by state
/// tomography, invert to chi, project, and compare with `ideal`.
pub fn run_qpt<G>(gate: G, ideal: &CMatrix, opts: &QptOptions) -> Result<QptResult>
where
    G: Fn(&CMatrix) -> Result<CMatrix> + Sync,
{
    let qb = QptBasis::new()?;
    let chi_ideal = ideal_chi(ideal)?;
    let outputs = qb
        .inputs
        .par_iter()
        .map(|rho| {
            let out = gate(rho)?;
            let e = measured_expectations(&out, opts.confusion.as_ref())?;
            state_tomography(&e)
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda = qb.lambda(&outputs)?;
    let chi_exp = qb.chi_from_lambda(&lambda)?;
    let projection = project_physical(&qb, &chi_exp, &opts.projection)?;
    let f_pro = process_fidelity(&projection.chi, &chi_ideal);
    Ok(QptResult {
        chi_exp,
        chi_p: projection.chi.clone(),
        chi_ideal,
        f_pro,
        f_gate: gate_fidelity_from_process(f_pro, 4),
        projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> CMatrix {
        let g = CMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &g * g.adjoint();
        let t = m.trace();
        m / t
    }

    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        g.qr().q()
    }

    fn cnot() -> CMatrix {
        let mut u = CMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            u[(i, j)] = c(1.0);
        }
        u
    }

    #[test]
    fn state_tomography_basics() {
        let mut ket = CMatrix::zeros(4, 4);
        ket[(0, 0)] = c(1.0);
        assert!((state_tomography(&pauli_expectations(&ket)).unwrap() - &ket).norm() < 1e-15);
        let mixed = state_tomography(&[0.0; 15]).unwrap();
        assert!((mixed - CMatrix::identity(4, 4) * c(0.25)).norm() < 1e-15);
    }

    #[test]
    fn depolarized_bell_fidelity() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DVector::from_column_slice(&[c(s), ZERO, ZERO, c(s)]);
        let pure = &bell * bell.adjoint();
        let p = 0.1;
        let rho = &pure * c(1.0 - p) + CMatrix::identity(4, 4) * c(p / 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noisy: Vec<f64> = pauli_expectations(&rho)
            .iter()
            .map(|e| e + rng.random_range(-1e-4..1e-4))
            .collect();
        let est = state_tomography(&noisy).unwrap();
        let f = (bell.adjoint() * est * &bell)[(0, 0)].re;
        assert!((f - (1.0 - 0.75 * p)).abs() < 1e-3);
    }

    #[test]
    fn unphysical_state_is_projected() {
        let mut e = vec![0.0; 15];
        e[14] = 1.0; // ZZ
        e[2] = 1.0; // IZ
        e[11] = 1.0; // ZI
        e[0] = 0.5; // IX pushes it outside
        let rho = state_tomography(&e).unwrap();
        let (vals, _) = eig_hermitian(&rho).unwrap();
        assert!(vals[0] >= -1e-12);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inputs_are_independent() {
        let qb = QptBasis::new().unwrap();
        assert!(qb.input_condition.is_finite() && qb.input_condition < 100.0);
        // identity pair gives beta = delta
        for j in 0..16 {
            for k in 0..16 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((qb.beta[(16 * j + k, 0)] - c(want)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ideal_chi_examples() {
        let id = ideal_chi(&CMatrix::identity(4, 4)).unwrap();
        assert!((id[(0, 0)] - c(1.0)).norm() < 1e-15);
        let x = ideal_chi(&pauli(1).kronecker(&pauli(0))).unwrap();
        assert!((x[(4, 4)] - c(1.0)).norm() < 1e-15);
        let zx = ideal_chi(&crate::dynamics::ideal_zx90()).unwrap();
        assert!((zx[(0, 0)] - c(0.5)).norm() < 1e-15);
        assert!((zx[(13, 13)] - c(0.5)).norm() < 1e-15);
        assert!((zx[(0, 13)].im.abs() - 0.5).abs() < 1e-15);
        assert!((zx.norm() - 1.0).abs() < 1e-14);
        assert!(ideal_chi(&(CMatrix::identity(4, 4) * c(1.1))).is_err());
    }

    #[test]
    fn identity_and_cnot_processes() {
        let qb = QptBasis::new().unwrap();
        let chi = qb.chi_from_lambda(&qb.lambda(&qb.inputs).unwrap()).unwrap();
        assert!((chi[(0, 0)] - c(1.0)).norm() < 1e-12);
        assert!((chi.norm() - 1.0).abs() < 1e-12);

        let u = cnot();
        let outs: Vec<CMatrix> = qb.inputs.iter().map(|r| &u * r * u.adjoint()).collect();
        let chi = qb.chi_from_lambda(&qb.lambda(&outs).unwrap()).unwrap();
        let (vals, _) = eig_hermitian(&((&chi + chi.adjoint()) * c(0.5))).unwrap();
        assert!(vals.iter().take(15).all(|v| v.abs() < 1e-10));
        assert!((process_fidelity(&chi, &ideal_chi(&u).unwrap()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn depolarizing_chi() {
        let qb = QptBasis::new().unwrap();
        let p = 0.2;
        let outs: Vec<CMatrix> = qb
            .inputs
            .iter()
            .map(|r| r * c(1.0 - p) + CMatrix::identity(4, 4) * c(p / 4.0))
            .collect();
        let chi = qb.chi_from_lambda(&qb.lambda(&outs).unwrap()).unwrap();
        assert!((chi[(0, 0)].re - (1.0 - 15.0 * p / 16.0)).abs() < 1e-12);
        for m in 1..16 {
            assert!((chi[(m, m)].re - p / 16.0).abs() < 1e-12);
        }
        assert!((chi.trace().re - 1.0).abs() < 1e-12);
        let full = CMatrix::identity(16, 16) / c(16.0);
        assert!((process_fidelity(&full, &ideal_chi(&CMatrix::identity(4, 4)).unwrap()) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn random_kraus_channel_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let qb = QptBasis::new().unwrap();
        // Kraus set from the blocks of a random 16x4 isometry
        let v = random_unitary(&mut rng, 16);
        let kraus: Vec<CMatrix> = (0..4).map(|b| v.view((4 * b, 0), (4, 4)).into_owned()).collect();
        let completeness = kraus.iter().fold(CMatrix::zeros(4, 4), |acc, k| acc + k.adjoint() * k);
        assert!((completeness - CMatrix::identity(4, 4)).norm() < 1e-12);
        let channel = |r: &CMatrix| kraus.iter().fold(CMatrix::zeros(4, 4), |acc, k| acc + k * r * k.adjoint());
        let outs: Vec<CMatrix> = qb.inputs.iter().map(channel).collect();
        let chi = qb.chi_from_lambda(&qb.lambda(&outs).unwrap()).unwrap();
        for _ in 0..50 {
            let rho = random_state(&mut rng);
            assert!((qb.apply_chi(&chi, &rho) - channel(&rho)).norm() < 1e-8);
        }
        assert!(qb.trace_preservation_defect(&chi).norm() < 1e-10);
    }

    #[test]
    fn fidelity_relation() {
        assert_eq!(gate_fidelity_from_process(1.0, 4), 1.0);
        assert!((gate_fidelity_from_process(0.9282, 4) - 0.94256).abs() < 1e-12);
        assert!((gate_fidelity_from_process(1.0 / 16.0, 4) - 0.25).abs() < 1e-15);
        let mut last = 0.0;
        for k in 0..=100 {
            let f = gate_fidelity_from_process(k as f64 / 100.0, 4);
            assert!(f > last || k == 0);
            last = f;
        }
    }

    #[test]
    fn fidelity_invariant_under_reordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(&mut rng, 4);
        let chi_id = ideal_chi(&u).unwrap();
        let qb = QptBasis::new().unwrap();
        let outs: Vec<CMatrix> = qb
            .inputs
            .iter()
            .map(|r| &u * r * u.adjoint() * c(0.9) + CMatrix::identity(4, 4) * c(0.025))
            .collect();
        let chi = qb.chi_from_lambda(&qb.lambda(&outs).unwrap()).unwrap();
        let perm: Vec<usize> = (0..16).rev().collect();
        let reorder = |m: &CMatrix| CMatrix::from_fn(16, 16, |i, j| m[(perm[i], perm[j])]);
        let a = process_fidelity(&chi, &chi_id);
        let b = process_fidelity(&reorder(&chi), &reorder(&chi_id));
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn readout_correction() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let id = [ConfusionMatrix::identity(); 2];
        assert_eq!(correct_readout(&p, &id).unwrap(), p);
        let sym = [ConfusionMatrix::symmetric(0.07).unwrap(); 2];
        let raw = apply_confusion(&[1.0, 0.0, 0.0, 0.0], &sym);
        let back = correct_readout(&raw, &sym).unwrap();
        for (a, b) in back.iter().zip([1.0, 0.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-10);
        }
        let u = correct_readout(&[0.25; 4], &sym).unwrap();
        assert!(u.iter().all(|x| (x - 0.25).abs() < 1e-15));
        assert!(ConfusionMatrix::new([[0.5, 0.5], [0.5, 0.5]]).is_ok());
        assert!(correct_readout(&p, &[ConfusionMatrix::symmetric(0.5).unwrap(); 2]).is_err());
        assert!(ConfusionMatrix::new([[0.9, 0.2], [0.2, 0.8]]).is_err());
    }

    #[test]
    fn readout_model_round_trips_expectations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_state(&mut rng);
        let conf = [ConfusionMatrix::symmetric(0.07).unwrap(), ConfusionMatrix::symmetric(0.06).unwrap()];
        let e = measured_expectations(&rho, Some(&conf)).unwrap();
        for (a, b) in e.iter().zip(pauli_expectations(&rho)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_physical() {
        let qb = QptBasis::new().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let chi_id = ideal_chi(&crate::dynamics::ideal_zx90()).unwrap();
        let noise = CMatrix::from_fn(16, 16, |_, _| Complex64::new(rng.random_range(-0.005..0.005), rng.random_range(-0.005..0.005)));
        let h = &noise + noise.adjoint();
        let bad = &chi_id + &h - CMatrix::identity(16, 16) * (h.trace() / 16.0);
        let before = chi_diagnostics(&bad).unwrap();
        assert!(before.min_eigenvalue < -0.01);
        let proj = project_physical(&qb, &bad, &ProjectionOptions::default()).unwrap();
        let after = chi_diagnostics(&proj.chi).unwrap();
        assert!(after.min_eigenvalue >= -1e-10);
        assert!((after.trace - 1.0).abs() < 1e-12);
        assert!(after.hermitian_deviation < 1e-12);
        let f = process_fidelity(&proj.chi, &chi_id);
        assert!(f > 0.9, "{f}");
    }

    #[test]
    fn physical_input_is_nearly_fixed() {
        let qb = QptBasis::new().unwrap();
        let p = 0.1;
        let mut chi = ideal_chi(&cnot()).unwrap() * c(1.0 - p);
        chi += CMatrix::identity(16, 16) * c(p / 16.0);
        let proj = project_physical(&qb, &chi, &ProjectionOptions::default()).unwrap();
        assert!((&proj.chi - &chi).norm() < 1e-6, "{}", (&proj.chi - &chi).norm());
    }
}

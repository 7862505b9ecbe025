//! Standard and interleaved randomized benchmarking over Clifford(2).

use log::warn;
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clifford::{pulse_count, CliffordElement};
use super::coherence::{apply_kraus, relaxation_kraus_2q, CoherenceParams};
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, SeedStream};

const DIM: f64 = 4.0;

/// Fit of A alpha^m + B with standard errors from the residual variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub a_err: f64,
    pub b_err: f64,
    pub alpha_err: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

impl DecayFit {
    pub fn error_per_clifford(&self) -> f64 {
        (1.0 - self.alpha) * (DIM - 1.0) / DIM
    }

    pub fn fidelity(&self) -> f64 {
        1.0 - self.error_per_clifford()
    }

    pub fn fidelity_err(&self) -> f64 {
        self.alpha_err * (DIM - 1.0) / DIM
    }
}

fn linear_part(m: &[f64], y: &[f64], alpha: f64) -> (f64, f64, f64) {
    let mut ata = Matrix2::zeros();
    let mut aty = Vector2::zeros();
    for (&mi, &yi) in m.iter().zip(y) {
        let row = Vector2::new(alpha.powf(mi), 1.0);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let Some(x) = ata.lu().solve(&aty) else {
        return (0.0, 0.0, f64::INFINITY);
    };
    let rss = m
        .iter()
        .zip(y)
        .map(|(&mi, &yi)| (x[0] * alpha.powf(mi) + x[1] - yi).powi(2))
        .sum();
    (x[0], x[1], rss)
}

/// Variable-projection fit: a grid over alpha with the linear parameters
/// solved exactly, golden-section refinement, then Gauss-Newton on all
/// three parameters.
pub fn fit_decay(lengths: &[f64], values: &[f64]) -> Result<DecayFit> {
    let n = lengths.len();
    if n != values.len() {
        return Err(Error::DimensionMismatch { expected: n, got: values.len() });
    }
    if n < 4 {
        return Err(Error::Fit("decay fit needs at least four lengths".into()));
    }
    if values.iter().chain(lengths).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("decay data"));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo < 1e-12 {
        return Ok(DecayFit {
            a: 0.0,
            b: values.iter().sum::<f64>() / n as f64,
            alpha: 1.0,
            a_err: 0.0,
            b_err: 0.0,
            alpha_err: 0.0,
            residual: 0.0,
        });
    }
    let rss = |al: f64| linear_part(lengths, values, al).2;
    let grid = 400;
    let at = |k: usize| 1e-3 + (1.0 - 1e-3) * k as f64 / grid as f64;
    let k_best = (0..=grid).min_by(|&a, &b| rss(at(a)).total_cmp(&rss(at(b)))).unwrap_or(grid);
    let (mut a, mut b) = (at(k_best.saturating_sub(1)), at((k_best + 1).min(grid)));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if rss(c) < rss(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mut alpha = 0.5 * (a + b);
    if alpha > 1.0 - 1e-9 {
        return Err(Error::Fit("survival does not decay".into()));
    }
    let (mut amp, mut off, mut best) = linear_part(lengths, values, alpha);

    let jacobian = |amp: f64, alpha: f64| -> Vec<Vector3<f64>> {
        lengths
            .iter()
            .map(|&m| Vector3::new(alpha.powf(m), 1.0, amp * m * alpha.powf(m - 1.0)))
            .collect()
    };
    let residuals = |amp: f64, off: f64, alpha: f64| -> Vec<f64> {
        lengths.iter().zip(values).map(|(&m, &y)| y - (amp * alpha.powf(m) + off)).collect()
    };
    for _ in 0..50 {
        let j = jacobian(amp, alpha);
        let r = residuals(amp, off, alpha);
        let jtj: Matrix3<f64> = j.iter().map(|v| v * v.transpose()).sum();
        let jtr: Vector3<f64> = j.iter().zip(&r).map(|(v, ri)| v * *ri).sum();
        let Some(step) = jtj.lu().solve(&jtr) else { break };
        let (na, no, nal) = (amp + step[0], off + step[1], (alpha + step[2]).min(1.0));
        let new_rss: f64 = residuals(na, no, nal).iter().map(|x| x * x).sum();
        if !(new_rss <= best) {
            break;
        }
        let done = (best - new_rss) <= 1e-15 * best.max(1e-300);
        (amp, off, alpha, best) = (na, no, nal, new_rss);
        if done {
            break;
        }
    }

    let j = jacobian(amp, alpha);
    let jtj: Matrix3<f64> = j.iter().map(|v| v * v.transpose()).sum();
    let s2 = if n > 3 { best / (n - 3) as f64 } else { 0.0 };
    let cov = jtj.try_inverse().map(|m| m * s2).unwrap_or_else(|| Matrix3::from_element(f64::NAN));
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Fit(format!("decay constant {alpha} outside (0, 1]")));
    }
    if amp <= 0.0 {
        return Err(Error::Fit("survival does not decay".into()));
    }
    Ok(DecayFit {
        a: amp,
        b: off,
        alpha,
        a_err: cov[(0, 0)].max(0.0).sqrt(),
        b_err: cov[(1, 1)].max(0.0).sqrt(),
        alpha_err: cov[(2, 2)].max(0.0).sqrt(),
        residual: (best / n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbResult {
    pub lengths: Vec<usize>,
    pub mean_survival: Vec<f64>,
    pub std_survival: Vec<f64>,
    pub n_seq: usize,
    pub fit: DecayFit,
}

impl RbResult {
    pub fn error_per_clifford(&self) -> f64 {
        self.fit.error_per_clifford()
    }

    pub fn fidelity(&self) -> f64 {
        self.fit.fidelity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RbOptions {
    /// Projective shots per sequence; `None` records exact probabilities.
    pub shots: Option<u64>,
}

/// Noisy action of one Clifford on a two-qubit density matrix.
pub trait GateChannel: Sync {
    fn apply(&self, clifford: &CliffordElement, rho: &CMatrix) -> Result<CMatrix>;
}

impl<F> GateChannel for F
where
    F: Fn(&CliffordElement, &CMatrix) -> Result<CMatrix> + Sync,
{
    fn apply(&self, clifford: &CliffordElement, rho: &CMatrix) -> Result<CMatrix> {
        self(clifford, rho)
    }
}

pub fn apply_unitary(c: &CliffordElement, rho: &CMatrix) -> CMatrix {
    c.unitary() * rho * c.unitary().adjoint()
}

pub fn depolarize(rho: &CMatrix, p: f64) -> CMatrix {
    let tr = rho.trace();
    rho * num_complex::Complex64::new(1.0 - p, 0.0) + CMatrix::identity(4, 4) * (tr * p / DIM)
}

/// Ideal Clifford followed by global depolarizing noise of strength `p`.
pub fn depolarizing_channel(p: f64) -> impl Fn(&CliffordElement, &CMatrix) -> Result<CMatrix> + Sync {
    move |c, rho| Ok(depolarize(&apply_unitary(c, rho), p))
}

/// Ideal Clifford followed by T1/T2 relaxation over the Clifford's
/// estimated pulse duration.
pub fn relaxation_channel(q1: CoherenceParams, q2: CoherenceParams) -> impl Fn(&CliffordElement, &CMatrix) -> Result<CMatrix> + Sync {
    move |c, rho| {
        let tau = f64::from(pulse_count(c).duration_ns) * 1e-9;
        let kraus = relaxation_kraus_2q(&q1, &q2, tau)?;
        Ok(apply_kraus(&kraus, &apply_unitary(c, rho)))
    }
}

fn ground() -> CMatrix {
    let mut rho = CMatrix::zeros(4, 4);
    rho[(0, 0)] = num_complex::Complex64::new(1.0, 0.0);
    rho
}

/// One sequence of `m` random Cliffords, each optionally followed by the
/// interleaved gate, closed by the inverting Clifford. Returns the |00>
/// survival.
/// Interleaved Clifford and the channel that implements it.
type Interleaved<'a> = Option<(&'a CliffordElement, &'a (dyn Fn(&CMatrix) -> Result<CMatrix> + Sync))>;

fn run_sequence(
    m: usize,
    channel: &dyn GateChannel,
    interleaved: Interleaved<'_>,
    rng: &mut ChaCha8Rng,
    opts: &RbOptions,
) -> Result<f64> {
    let mut rho = ground();
    let mut total = CliffordElement::identity();
    for _ in 0..m {
        let c = CliffordElement::sample(rng);
        rho = channel.apply(&c, &rho)?;
        total = total.then(&c);
        if let Some((g, apply_g)) = interleaved {
            rho = apply_g(&rho)?;
            total = total.then(g);
        }
    }
    rho = channel.apply(&total.inverse(), &rho)?;
    let p = rho[(0, 0)].re.clamp(0.0, 1.0);
    Ok(match opts.shots {
        None => p,
        Some(n) => {
            let dist = Binomial::new(n, p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            dist.sample(rng) as f64 / n as f64
        }
    })
}

fn run_protocol(
    lengths: &[usize],
    n_seq: usize,
    channel: &dyn GateChannel,
    interleaved: Interleaved<'_>,
    seeds: &SeedStream,
    opts: &RbOptions,
) -> Result<RbResult> {
    if lengths.is_empty() || n_seq == 0 {
        return Err(Error::InvalidParameter("need at least one length and one sequence".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..lengths.len()).flat_map(|l| (0..n_seq).map(move |s| (l, s))).collect();
    let survival = jobs
        .par_iter()
        .map(|&(l, s)| {
            let mut rng = seeds.child(l as u64).substream(s as u64);
            run_sequence(lengths[l], channel, interleaved, &mut rng, opts)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut mean = Vec::with_capacity(lengths.len());
    let mut std = Vec::with_capacity(lengths.len());
    for chunk in survival.chunks(n_seq) {
        let mu = chunk.iter().sum::<f64>() / n_seq as f64;
        let var = if n_seq > 1 {
            chunk.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n_seq - 1) as f64
        } else {
            0.0
        };
        mean.push(mu);
        std.push(var.sqrt());
    }
    let m: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    let fit = fit_decay(&m, &mean)?;
    Ok(RbResult {
        lengths: lengths.to_vec(),
        mean_survival: mean,
        std_survival: std,
        n_seq,
        fit,
    })
}

/// Standard RB. Sequence `s` at length index `l` draws from
/// `seeds.child(l).substream(s)`.
pub fn run_rb(lengths: &[usize], n_seq: usize, channel: &dyn GateChannel, seeds: &SeedStream, opts: &RbOptions) -> Result<RbResult> {
    run_protocol(lengths, n_seq, channel, None, seeds, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleavedResult {
    pub reference: RbResult,
    pub interleaved: RbResult,
    pub gate_fidelity: f64,
    pub gate_fidelity_err: f64,
    /// The interleaved decay is slower than the reference beyond 2 sigma.
    pub unphysical: bool,
}

/// Gate fidelity 1 - (d - 1)(1 - alpha_int/alpha_ref)/d.
pub fn interleaved_gate_fidelity(alpha_ref: f64, alpha_int: f64) -> f64 {
    1.0 - (DIM - 1.0) * (1.0 - alpha_int / alpha_ref) / DIM
}

/// Reference and interleaved RB on the same random sequences.
pub fn interleaved_rb<G>(
    lengths: &[usize],
    n_seq: usize,
    reference: &dyn GateChannel,
    gate: &CliffordElement,
    gate_channel: G,
    seeds: &SeedStream,
    opts: &RbOptions,
) -> Result<InterleavedResult>
where
    G: Fn(&CMatrix) -> Result<CMatrix> + Sync,
{
    let r = run_protocol(lengths, n_seq, reference, None, seeds, opts)?;
    let i = run_protocol(lengths, n_seq, reference, Some((gate, &gate_channel)), seeds, opts)?;
    let (ar, ai) = (r.fit.alpha, i.fit.alpha);
    let ratio = ai / ar;
    let rel = ((r.fit.alpha_err / ar).powi(2) + (i.fit.alpha_err / ai).powi(2)).sqrt();
    let err = (DIM - 1.0) / DIM * ratio * rel;
    let unphysical = ai - ar > 2.0 * (r.fit.alpha_err.powi(2) + i.fit.alpha_err.powi(2)).sqrt();
    if unphysical {
        warn!("interleaved decay {ai:.5} exceeds reference {ar:.5}");
    }
    Ok(InterleavedResult {
        gate_fidelity: interleaved_gate_fidelity(ar, ai),
        gate_fidelity_err: err,
        unphysical,
        reference: r,
        interleaved: i,
    })
}

/// Uniform random Clifford from a stream; exposed for replaying sequences.
pub fn sample_clifford2<R: Rng + ?Sized>(rng: &mut R) -> CliffordElement {
    CliffordElement::sample(rng)
}

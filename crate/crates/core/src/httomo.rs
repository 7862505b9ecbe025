//! Hamiltonian tomography from conditional Rabi trajectories of the target.
//!
//! A target driven by H = (1/2)(W_x X + W_y Y - Delta Z) precesses as
//! dr/dt = G r with the generalized field (W_x, W_y, -Delta). Fitting both
//! control-state trajectories and taking half sums and differences of the
//! fields gives the six CR coefficients.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dynamics::BlochTrajectory;
use crate::error::{Error, Result};
use crate::numerics::{expm_real, nelder_mead, SimplexOptions};

/// Field acting on the target Bloch vector, B = (W_x, W_y, -Delta) in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneralizedField {
    pub omega_x: f64,
    pub omega_y: f64,
    pub delta: f64,
}

impl GeneralizedField {
    pub fn new(omega_x: f64, omega_y: f64, delta: f64) -> Self {
        Self { omega_x, omega_y, delta }
    }

    pub fn magnitude(&self) -> f64 {
        (self.omega_x.powi(2) + self.omega_y.powi(2) + self.delta.powi(2)).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.omega_x.is_finite() && self.omega_y.is_finite() && self.delta.is_finite()
    }
}

pub fn bloch_generator(field: &GeneralizedField) -> DMatrix<f64> {
    let (wx, wy, d) = (field.omega_x, field.omega_y, field.delta);
    DMatrix::from_row_slice(3, 3, &[0.0, d, wy, -d, 0.0, -wx, -wy, wx, 0.0])
}

/// exp(G t) r0 by matrix exponential; valid for any starting vector.
pub fn bloch_evolve(field: &GeneralizedField, t: f64, r0: [f64; 3]) -> [f64; 3] {
    let u = expm_real(&(bloch_generator(field) * t));
    let r = u * nalgebra::DVector::from_column_slice(&r0);
    [r[0], r[1], r[2]]
}

/// Evolution from (0, 0, 1):
///
/// x = [-W_x Delta (1 - cos Bt) + W_y B sin Bt] / B^2
/// y = [-W_y Delta (1 - cos Bt) - W_x B sin Bt] / B^2
/// z = [Delta^2 + (W_x^2 + W_y^2) cos Bt] / B^2
pub fn bloch_closed_form(field: &GeneralizedField, t: f64) -> [f64; 3] {
    let b = field.magnitude();
    if b == 0.0 {
        return [0.0, 0.0, 1.0];
    }
    let (wx, wy, d) = (field.omega_x, field.omega_y, field.delta);
    let (s, c) = (b * t).sin_cos();
    let one_minus_c = 2.0 * (0.5 * b * t).sin().powi(2);
    let b2 = b * b;
    [
        (-wx * d * one_minus_c + wy * b * s) / b2,
        (-wy * d * one_minus_c - wx * b * s) / b2,
        (d * d + (wx * wx + wy * wy) * c) / b2,
    ]
}

/// Closed form from the ground state, matrix exponential otherwise.
pub fn bloch_trajectory_point(field: &GeneralizedField, t: f64, r0: [f64; 3]) -> [f64; 3] {
    if r0 == [0.0, 0.0, 1.0] {
        bloch_closed_form(field, t)
    } else {
        bloch_evolve(field, t, r0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochFit {
    pub field: GeneralizedField,
    /// Decay rate of the envelope e^{-Gamma t} (1/s).
    pub gamma: f64,
    /// Root-mean-square residual over all fitted components.
    pub residual: f64,
    pub n_starts_converged: usize,
    /// Fewer than 12 samples or less than half an oscillation covered.
    pub low_confidence: bool,
}

impl BlochFit {
    pub fn predict(&self, t: f64) -> [f64; 3] {
        let r = bloch_closed_form(&self.field, t);
        let e = (-self.gamma * t).exp();
        [r[0] * e, r[1] * e, r[2] * e]
    }

    pub fn report(&self) -> String {
        let mhz = 2.0 * PI * 1e6;
        format!(
            "omega_x = {:.6} MHz, omega_y = {:.6} MHz, delta = {:.6} MHz, gamma = {:.6} 1/us, \
             residual = {:.3e}, starts_converged = {}{}",
            self.field.omega_x / mhz,
            self.field.omega_y / mhz,
            self.field.delta / mhz,
            self.gamma * 1e-6,
            self.residual,
            self.n_starts_converged,
            if self.low_confidence { ", low confidence" } else { "" }
        )
    }
}

pub const FIT_STARTS: usize = 4;
const MIN_SAMPLES: usize = 12;

fn sum_squares(times: &[f64], data: &[[f64; 3]], field: &GeneralizedField, gamma: f64) -> f64 {
    times
        .iter()
        .zip(data)
        .map(|(&t, d)| {
            let r = bloch_closed_form(field, t);
            let e = (-gamma * t).exp();
            (0..3).map(|k| (r[k] * e - d[k]).powi(2)).sum::<f64>()
        })
        .sum()
}

/// Dominant angular frequency of z(t) from a zero-padded FFT with
/// parabolic peak interpolation.
fn fft_frequency(times: &[f64], z: &[f64]) -> Result<f64> {
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(Error::InvalidParameter("fitting needs uniformly spaced samples".into()));
        }
    }
    let mean = z.iter().sum::<f64>() / n as f64;
    let padded = (16 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = z.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(padded, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let power: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm_sqr()).collect();
    let k = (1..power.len())
        .max_by(|&a, &b| power[a].total_cmp(&power[b]))
        .unwrap_or(1);
    let shift = if k + 1 < power.len() {
        let (a, b, c) = (power[k - 1], power[k], power[k + 1]);
        let den = a - 2.0 * b + c;
        if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 }
    } else {
        0.0
    };
    Ok(2.0 * PI * (k as f64 + shift) / (padded as f64 * dt))
}

/// Joint least-squares fit of e^{-Gamma t} r(t) to all three components.
///
/// The field magnitude starts at the FFT peak of z(t); the split between
/// transverse and longitudinal parts comes from the time averages
/// <z> = Delta^2/B^2 and <x> = -W_x Delta/B^2, and the transverse direction
/// from the initial slope (dx/dt, dy/dt)(0) = (W_y, -W_x). Four simplex
/// starts (the guess, Delta mirrored, B scaled by 0.95 and 1.05) run in
/// parallel; the lowest residual wins, ties to the earlier start.
pub fn fit_bloch_trajectory(traj: &BlochTrajectory) -> Result<BlochFit> {
    let n = traj.len();
    if n < 3 || traj.x.len() != n || traj.y.len() != n || traj.z.len() != n {
        return Err(Error::Fit("trajectory needs at least three complete samples".into()));
    }
    let times = &traj.times;
    let data: Vec<[f64; 3]> = (0..n).map(|i| traj.point(i)).collect();
    if data.iter().flatten().any(|v| !v.is_finite()) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("trajectory"));
    }
    let span = times[n - 1] - times[0];
    if span <= 0.0 {
        return Err(Error::Fit("trajectory has no time span".into()));
    }
    let transverse = data.iter().map(|d| d[0].hypot(d[1])).fold(0.0, f64::max);
    if transverse < 1e-3 {
        return fit_decay_only(times, &data);
    }

    let b0 = fft_frequency(times, &traj.z)?.max(PI / span);
    let avg = |k: usize| data.iter().map(|d| d[k]).sum::<f64>() / n as f64;
    let zbar = avg(2).clamp(0.0, 1.0);
    let perp = b0 * (1.0 - zbar).sqrt();
    let dtau = times[1] - times[0];
    let (vx, vy) = ((data[1][0] - data[0][0]) / dtau, (data[1][1] - data[0][1]) / dtau);
    let angle = f64::atan2(vx, -vy);
    let (wx, wy) = (perp * angle.cos(), perp * angle.sin());
    let mut delta = b0 * zbar.sqrt();
    let proj = avg(0) * wx + avg(1) * wy;
    if proj > 0.0 {
        delta = -delta;
    }
    let guesses = [
        [wx, wy, delta],
        [wx, wy, -delta],
        [0.95 * wx, 0.95 * wy, 0.95 * delta],
        [1.05 * wx, 1.05 * wy, 1.05 * delta],
    ];

    let scale = b0;
    let objective = |p: &[f64]| {
        let f = GeneralizedField::new(p[0] * scale, p[1] * scale, p[2] * scale);
        sum_squares(times, &data, &f, p[3].abs() * scale)
    };
    let simplex = SimplexOptions {
        x_tolerance: 1e-10,
        f_tolerance: 1e-18 * (3 * n) as f64,
        initial_step: 0.05,
        max_iterations: 20_000,
        ..SimplexOptions::adaptive(4)
    };
    let results = guesses
        .par_iter()
        .map(|g| {
            let x0 = [g[0] / scale, g[1] / scale, g[2] / scale, 0.0];
            let first = nelder_mead(objective, &x0, &simplex)?;
            // restart from the best vertex to escape premature collapse
            let polished = nelder_mead(
                objective,
                &first.x,
                &SimplexOptions {
                    initial_step: 1e-3,
                    ..simplex.clone()
                },
            )?;
            Ok(polished)
        })
        .collect::<Result<Vec<_>>>()?;
    let converged = results.iter().filter(|r| r.converged).count();
    let best = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)))
        .map(|(_, r)| r)
        .ok_or_else(|| Error::Fit("no fit starts".into()))?;
    if !best.f.is_finite() {
        return Err(Error::NoConvergence("fit residual is not finite".into()));
    }
    let field = GeneralizedField::new(best.x[0] * scale, best.x[1] * scale, best.x[2] * scale);
    let b = field.magnitude();
    Ok(BlochFit {
        field,
        gamma: best.x[3].abs() * scale,
        residual: (best.f / (3 * n) as f64).sqrt(),
        n_starts_converged: converged,
        low_confidence: n < MIN_SAMPLES || b * span < PI,
    })
}

fn fit_decay_only(times: &[f64], data: &[[f64; 3]]) -> Result<BlochFit> {
    let n = times.len();
    let span = times[n - 1] - times[0];
    let objective = |p: &[f64]| sum_squares(times, data, &GeneralizedField::default(), p[0].abs() / span);
    let opts = SimplexOptions {
        x_tolerance: 1e-12,
        f_tolerance: 1e-18 * (3 * n) as f64,
        initial_step: 0.1,
        ..SimplexOptions::default()
    };
    let res = nelder_mead(objective, &[0.0], &opts)?;
    Ok(BlochFit {
        field: GeneralizedField::default(),
        gamma: res.x[0].abs() / span,
        residual: (res.f / (3 * n) as f64).sqrt(),
        n_starts_converged: usize::from(res.converged),
        low_confidence: true,
    })
}

/// The six CR terms (rad/s) in the convention H = (1/2) sum c P (x) Q.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TomographyCoefficients {
    pub ix: f64,
    pub iy: f64,
    pub iz: f64,
    pub zx: f64,
    pub zy: f64,
    pub zz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub coefficients: TomographyCoefficients,
    /// Fits for control in |0> and |1>.
    pub fits: [BlochFit; 2],
    /// The two decay rates differ by more than a factor of three.
    pub gamma_mismatch: bool,
}

/// Half sums and differences of two fitted fields. The z component of the
/// field is -Delta, so IZ = -(Delta_0 + Delta_1)/2 and ZZ = -(Delta_0 - Delta_1)/2.
pub fn coefficients_from_fields(f0: &GeneralizedField, f1: &GeneralizedField) -> TomographyCoefficients {
    TomographyCoefficients {
        ix: 0.5 * (f0.omega_x + f1.omega_x),
        zx: 0.5 * (f0.omega_x - f1.omega_x),
        iy: 0.5 * (f0.omega_y + f1.omega_y),
        zy: 0.5 * (f0.omega_y - f1.omega_y),
        iz: -0.5 * (f0.delta + f1.delta),
        zz: -0.5 * (f0.delta - f1.delta),
    }
}

pub fn hamiltonian_tomography(traj0: &BlochTrajectory, traj1: &BlochTrajectory) -> Result<TomographyResult> {
    if traj0.control_state != 0 || traj1.control_state != 1 {
        return Err(Error::InvalidParameter(
            "tomography needs trajectories for control 0 then control 1".into(),
        ));
    }
    let fit0 = fit_bloch_trajectory(traj0)?;
    let fit1 = fit_bloch_trajectory(traj1)?;
    if !(fit0.field.is_finite() && fit1.field.is_finite()) {
        return Err(Error::NonFinite("fitted field"));
    }
    let (g0, g1) = (fit0.gamma, fit1.gamma);
    let gamma_mismatch = g0.max(g1) > 3.0 * g0.min(g1) && g0.max(g1) > 0.0;
    if gamma_mismatch {
        log::warn!("decay rates {g0:.3e} and {g1:.3e} 1/s differ by more than 3x");
    }
    Ok(TomographyResult {
        coefficients: coefficients_from_fields(&fit0.field, &fit1.field),
        fits: [fit0, fit1],
        gamma_mismatch,
    })
}

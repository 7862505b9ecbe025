//! Gate-error bounds from T1 and T2 alone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CMatrix;
use crate::qpt::{gate_fidelity_from_process, QptBasis};

/// Relaxation and echo dephasing times of one qubit (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceParams {
    pub t1: f64,
    pub t2: f64,
}

impl CoherenceParams {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let p = Self { t1, t2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t2 > 0.0 && self.t1.is_finite() && self.t2.is_finite()) {
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
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaVariant {
    /// Without the joint-decay terms; the error does not vanish at zero gate time.
    AsPrinted,
    /// Terms restored so the error vanishes at zero gate time.
    #[default]
    Completed,
}

impl std::str::FromStr for FormulaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_printed" => Ok(Self::AsPrinted),
            "completed" | "corrected" => Ok(Self::Completed),
            other => Err(Error::InvalidParameter(format!("unknown formula variant `{other}`"))),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("gate time must be non-negative".into()))
    }
}

/// Single-qubit error 1/2 [1 - (2/3) e^{-t/T2} -/+ (1/3) e^{-t/T1}].
pub fn coherence_limit_1q(p: &CoherenceParams, tau: f64, variant: FormulaVariant) -> Result<f64> {
    p.validate()?;
    check_tau(tau)?;
    let e1 = (-tau / p.t1).exp();
    let e2 = (-tau / p.t2).exp();
    let sign = match variant {
        FormulaVariant::AsPrinted => 1.0,
        FormulaVariant::Completed => -1.0,
    };
    Ok(0.5 * (1.0 - 2.0 / 3.0 * e2 + sign / 3.0 * e1))
}

/// Two-qubit error (3/4)(1 - zeta_T1 - zeta_T2).
pub fn coherence_limit_2q(p1: &CoherenceParams, p2: &CoherenceParams, tau: f64, variant: FormulaVariant) -> Result<f64> {
    p1.validate()?;
    p2.validate()?;
    check_tau(tau)?;
    let e = |t: f64| (-tau / t).exp();
    let mut zeta_t1 = (e(p1.t1) + e(p2.t1)) / 15.0;
    let mut zeta_t2 = 2.0 / 15.0 * (e(p1.t2) + e(p2.t2))
        + 2.0 / 15.0 * (-tau * (1.0 / p2.t2 + 1.0 / p1.t1)).exp()
        + 2.0 / 15.0 * (-tau * (1.0 / p1.t2 + 1.0 / p2.t1)).exp();
    if variant == FormulaVariant::Completed {
        zeta_t1 += (-tau * (1.0 / p1.t1 + 1.0 / p2.t1)).exp() / 15.0;
        zeta_t2 += 2.0 * 2.0 / 15.0 * (-tau * (1.0 / p1.t2 + 1.0 / p2.t2)).exp();
    }
    Ok(0.75 * (1.0 - zeta_t1 - zeta_t2))
}

/// Kraus operators of amplitude damping followed by pure dephasing for a
/// time `tau`, with coherences decaying as e^{-tau/T2}.
pub fn relaxation_kraus(p: &CoherenceParams, tau: f64) -> Result<Vec<CMatrix>> {
    p.validate()?;
    check_tau(tau)?;
    let gamma = 1.0 - (-tau / p.t1).exp();
    let rate_phi = (1.0 / p.t2 - 0.5 / p.t1).max(0.0);
    let keep = (-tau * rate_phi).exp();
    let lambda = 1.0 - keep * keep;
    let c = |x: f64| Complex64::new(x, 0.0);
    let z = c(0.0);
    let ad = [
        CMatrix::from_row_slice(2, 2, &[c(1.0), z, z, c((1.0 - gamma).sqrt())]),
        CMatrix::from_row_slice(2, 2, &[z, c(gamma.sqrt()), z, z]),
    ];
    let pd = [
        CMatrix::from_row_slice(2, 2, &[c(1.0), z, z, c(keep)]),
        CMatrix::from_row_slice(2, 2, &[z, z, z, c(lambda.sqrt())]),
    ];
    Ok(pd.iter().flat_map(|d| ad.iter().map(move |a| d * a)).collect())
}

/// Independent relaxation on both qubits (first factor is `p1`).
pub fn relaxation_kraus_2q(p1: &CoherenceParams, p2: &CoherenceParams, tau: f64) -> Result<Vec<CMatrix>> {
    let k1 = relaxation_kraus(p1, tau)?;
    let k2 = relaxation_kraus(p2, tau)?;
    Ok(k1.iter().flat_map(|a| k2.iter().map(move |b| a.kronecker(b))).collect())
}

pub fn apply_kraus(kraus: &[CMatrix], rho: &CMatrix) -> CMatrix {
    kraus
        .iter()
        .fold(CMatrix::zeros(rho.nrows(), rho.ncols()), |acc, k| acc + k * rho * k.adjoint())
}

/// Average gate infidelity of an idle of length `tau` under relaxation,
/// from the process matrix reconstructed over the 16 tomography inputs.
pub fn coherence_limit_2q_kraus(p1: &CoherenceParams, p2: &CoherenceParams, tau: f64) -> Result<f64> {
    let kraus = relaxation_kraus_2q(p1, p2, tau)?;
    let qb = QptBasis::new()?;
    let outputs: Vec<CMatrix> = qb.inputs.iter().map(|r| apply_kraus(&kraus, r)).collect();
    let chi = qb.chi_from_lambda(&qb.lambda(&outputs)?)?;
    Ok(1.0 - gate_fidelity_from_process(chi[(0, 0)].re, 4))
}

/// Single-qubit counterpart: F_pro = sum |tr K|^2 / 4.
pub fn coherence_limit_1q_kraus(p: &CoherenceParams, tau: f64) -> Result<f64> {
    let f_pro: f64 = relaxation_kraus(p, tau)?.iter().map(|k| k.trace().norm_sqr()).sum::<f64>() / 4.0;
    Ok(1.0 - gate_fidelity_from_process(f_pro, 2))
}

#[cfg(test)]
mod tests {
    use super::*;

    const US: f64 = 1e-6;
    const NS: f64 = 1e-9;

    fn exp2() -> (CoherenceParams, CoherenceParams) {
        (CoherenceParams::new(18.0 * US, 19.0 * US).unwrap(), CoherenceParams::new(14.0 * US, 8.0 * US).unwrap())
    }

    #[test]
    fn zero_time_limits() {
        let (a, b) = exp2();
        assert!(coherence_limit_1q(&a, 0.0, FormulaVariant::Completed).unwrap().abs() < 1e-15);
        assert!((coherence_limit_1q(&a, 0.0, FormulaVariant::AsPrinted).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(coherence_limit_2q(&a, &b, 0.0, FormulaVariant::Completed).unwrap().abs() < 1e-15);
        assert!((coherence_limit_2q(&a, &b, 0.0, FormulaVariant::AsPrinted).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_qubit_matches_kraus() {
        let p = CoherenceParams::new(14.0 * US, 8.0 * US).unwrap();
        let f = coherence_limit_1q(&p, 40.0 * NS, FormulaVariant::Completed).unwrap();
        assert!((f - 0.002138).abs() < 1e-6, "{f}");
        assert!((coherence_limit_1q_kraus(&p, 40.0 * NS).unwrap() - f).abs() < 1e-12);
    }

    #[test]
    fn two_qubit_matches_kraus() {
        let (a, b) = exp2();
        let eps = coherence_limit_2q(&a, &b, 220.0 * NS, FormulaVariant::Completed).unwrap();
        assert!((1.0 - eps - 0.9791).abs() < 1e-4, "{}", 1.0 - eps);
        for tau in [0.0, 50.0 * NS, 220.0 * NS, 2.0 * US] {
            let f = coherence_limit_2q(&a, &b, tau, FormulaVariant::Completed).unwrap();
            assert!((coherence_limit_2q_kraus(&a, &b, tau).unwrap() - f).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_time_and_coherence() {
        let (a, b) = exp2();
        let f = |a: &CoherenceParams, tau: f64| coherence_limit_2q(a, &b, tau, FormulaVariant::Completed).unwrap();
        let mut last = -1.0;
        for k in 0..50 {
            let e = f(&a, k as f64 * 20.0 * NS);
            assert!(e > last);
            last = e;
        }
        let longer_t1 = CoherenceParams::new(30.0 * US, 19.0 * US).unwrap();
        let longer_t2 = CoherenceParams::new(18.0 * US, 30.0 * US).unwrap();
        assert!(f(&longer_t1, 220.0 * NS) < f(&a, 220.0 * NS));
        assert!(f(&longer_t2, 220.0 * NS) < f(&a, 220.0 * NS));
    }

    #[test]
    fn kraus_sets_are_complete() {
        let (a, b) = exp2();
        let k = relaxation_kraus_2q(&a, &b, 300.0 * NS).unwrap();
        let s = k.iter().fold(CMatrix::zeros(4, 4), |acc, k| acc + k.adjoint() * k);
        assert!((s - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CoherenceParams::new(1.0 * US, 3.0 * US).is_err());
        assert!(CoherenceParams::new(-1.0, 1.0).is_err());
        let (a, b) = exp2();
        assert!(coherence_limit_2q(&a, &b, -1.0, FormulaVariant::Completed).is_err());
    }
}

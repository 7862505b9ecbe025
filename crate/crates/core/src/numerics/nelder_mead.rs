use crate::error::{Error, Result};

/// Tuning knobs for [`nelder_mead`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Convergence requires the simplex diameter (max-norm) below this.
    pub x_tolerance: f64,
    /// ... and the spread of function values below this.
    pub f_tolerance: f64,
    /// Edge length of the initial simplex along each coordinate axis.
    pub initial_step: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            x_tolerance: 1e-10,
            f_tolerance: 1e-14,
            initial_step: 0.1,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

impl SimplexOptions {
    /// Dimension-dependent coefficients (Gao & Han), which behave far better
    /// than the classic ones once the dimension exceeds ~10.
    pub fn adaptive(dimension: usize) -> Self {
        let n = dimension.max(2) as f64;
        Self {
            reflection: 1.0,
            expansion: 1.0 + 2.0 / n,
            contraction: 0.75 - 1.0 / (2.0 * n),
            shrink: 1.0 - 1.0 / n,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let coeffs = [self.reflection, self.expansion, self.contraction, self.shrink];
        if coeffs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidParameter(
                "simplex coefficients must be positive".into(),
            ));
        }
        if self.expansion <= self.reflection {
            return Err(Error::InvalidParameter(
                "expansion coefficient must exceed reflection".into(),
            ));
        }
        if self.contraction >= 1.0 || self.shrink >= 1.0 {
            return Err(Error::InvalidParameter(
                "contraction and shrink coefficients must be below 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Downhill simplex minimization of `f` starting from `x0`.
///
/// Hitting the iteration cap is not an error: the best vertex is returned
/// with `converged == false`. Non-finite function values away from the
/// initial simplex are treated as +inf.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> Result<SimplexResult>
where
    F: FnMut(&[f64]) -> f64,
{
    opts.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty parameter vector".into()));
    }
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    for p in &simplex {
        let v = eval(p, &mut evaluations);
        if !v.is_finite() {
            return Err(Error::InvalidParameter(
                "objective is not finite on the initial simplex".into(),
            ));
        }
        values.push(v);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut iterations = 0usize;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread = values[worst] - values[best];
        let diameter = simplex
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < opts.x_tolerance && spread < opts.f_tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &k in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[k]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        let xw = simplex[worst].clone();
        for i in 0..n {
            trial[i] = centroid[i] + opts.reflection * (centroid[i] - xw[i]);
        }
        let fr = eval(&trial, &mut evaluations);

        if fr < values[best] {
            for i in 0..n {
                trial2[i] = centroid[i] + opts.expansion * (trial[i] - centroid[i]);
            }
            let fe = eval(&trial2, &mut evaluations);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second_worst] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fr;
            continue;
        }
        if fr < values[worst] {
            // outside contraction
            for i in 0..n {
                trial2[i] = centroid[i] + opts.contraction * (trial[i] - centroid[i]);
            }
            let fc = eval(&trial2, &mut evaluations);
            if fc <= fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fc;
                continue;
            }
        } else {
            // inside contraction
            for i in 0..n {
                trial2[i] = centroid[i] + opts.contraction * (xw[i] - centroid[i]);
            }
            let fc = eval(&trial2, &mut evaluations);
            if fc < values[worst] {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fc;
                continue;
            }
        }
        // shrink towards the best vertex
        let xb = simplex[best].clone();
        for &k in &order[1..] {
            for i in 0..n {
                simplex[k][i] = xb[i] + opts.shrink * (simplex[k][i] - xb[i]);
            }
            values[k] = eval(&simplex[k], &mut evaluations);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    Ok(SimplexResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        evaluations,
        converged,
    })
}

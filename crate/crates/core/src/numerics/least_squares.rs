use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    /// Stop when every parameter changes by less than this, relatively.
    pub rel_step: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub rel_cost: f64,
    pub max_iterations: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            rel_step: 1e-8,
            rel_cost: 1e-12,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// Weighted sum of squared residuals at the solution.
    pub cost: f64,
    pub iterations: usize,
    /// `(JᵀWJ)⁻¹` at the solution, when it is invertible.
    pub covariance: Option<DMatrix<f64>>,
}

/// Weighted Levenberg–Marquardt.
///
/// `model(p, jac)` returns model values at every data point and fills
/// `jac` (rows = points, columns = parameters). Parameters outside
/// `valid(p)` are rejected like an uphill step.
pub fn levenberg_marquardt<M, V>(
    mut model: M,
    valid: V,
    data: &[f64],
    weights: &[f64],
    initial: &[f64],
    opts: &LmOptions,
) -> Result<LmFit>
where
    M: FnMut(&[f64], &mut DMatrix<f64>) -> Vec<f64>,
    V: Fn(&[f64]) -> bool,
{
    let n = data.len();
    let k = initial.len();
    if n < k {
        return Err(Error::InsufficientData { needed: k, got: n });
    }
    let mut p = initial.to_vec();
    let mut jac = DMatrix::zeros(n, k);
    let cost_of = |values: &[f64]| -> f64 {
        values
            .iter()
            .zip(data)
            .zip(weights)
            .map(|((m, y), w)| w * (y - m).powi(2))
            .sum()
    };
    let mut values = model(&p, &mut jac);
    let mut cost = cost_of(&values);
    if !cost.is_finite() {
        return Err(Error::Fit("initial parameters give a non-finite cost".into()));
    }
    let mut lambda: f64 = 1e-3;
    let mut trial_jac = DMatrix::zeros(n, k);

    for iter in 1..=opts.max_iterations {
        let mut jtj = DMatrix::<f64>::zeros(k, k);
        let mut jtr = DVector::zeros(k);
        for i in 0..n {
            let r = data[i] - values[i];
            for a in 0..k {
                let ja = jac[(i, a)] * weights[i];
                jtr[a] += ja * r;
                for b in 0..=a {
                    jtj[(a, b)] += ja * jac[(i, b)];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                jtj[(b, a)] = jtj[(a, b)];
            }
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = jtj.clone();
            for a in 0..k {
                damped[(a, a)] += lambda * jtj[(a, a)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            if !valid(&trial) {
                lambda *= 10.0;
                continue;
            }
            let trial_values = model(&trial, &mut trial_jac);
            let trial_cost = cost_of(&trial_values);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small = p
                    .iter()
                    .zip(&trial)
                    .all(|(old, new)| (new - old).abs() <= opts.rel_step * old.abs().max(1e-300))
                    || cost - trial_cost <= opts.rel_cost * cost;
                p = trial;
                values = trial_values;
                std::mem::swap(&mut jac, &mut trial_jac);
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small {
                    return Ok(finish(p, cost, iter, &jac, weights));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step exists at any damping: a stationary point
            return Ok(finish(p, cost, iter, &jac, weights));
        }
    }
    Err(Error::Convergence {
        what: "Levenberg-Marquardt fit".into(),
        last: cost,
        previous: f64::NAN,
    })
}

fn finish(params: Vec<f64>, cost: f64, iterations: usize, jac: &DMatrix<f64>, weights: &[f64]) -> LmFit {
    let k = params.len();
    let mut jtj = DMatrix::zeros(k, k);
    for i in 0..jac.nrows() {
        for a in 0..k {
            for b in 0..k {
                jtj[(a, b)] += jac[(i, a)] * weights[i] * jac[(i, b)];
            }
        }
    }
    LmFit {
        params,
        cost,
        iterations,
        covariance: jtj.try_inverse(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_decay() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-1.7 * x).exp() + 0.5).collect();
        let w = vec![1.0; xs.len()];
        let model = |p: &[f64], j: &mut DMatrix<f64>| {
            xs.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let e = (-p[1] * x).exp();
                    j[(i, 0)] = e;
                    j[(i, 1)] = -p[0] * x * e;
                    j[(i, 2)] = 1.0;
                    p[0] * e + p[2]
                })
                .collect()
        };
        let fit = levenberg_marquardt(model, |_| true, &ys, &w, &[1.0, 1.0, 0.0], &LmOptions::default()).unwrap();
        assert!((fit.params[0] - 3.0).abs() < 1e-7);
        assert!((fit.params[1] - 1.7).abs() < 1e-7);
        assert!((fit.params[2] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn too_few_points() {
        let r = levenberg_marquardt(
            |_p: &[f64], _j: &mut DMatrix<f64>| vec![0.0],
            |_| true,
            &[1.0],
            &[1.0],
            &[0.0, 0.0],
            &LmOptions::default(),
        );
        assert!(matches!(r, Err(Error::InsufficientData { .. })));
    }
}

//! Weighted nonlinear least squares by damped Gauss-Newton
//! (Levenberg-Marquardt with Marquardt diagonal scaling).

use nalgebra::{DMatrix, DVector};

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-10;

pub(crate) trait Model {
    fn n_params(&self) -> usize;

    fn eval(&self, p: &[f64], x: f64) -> f64;

    /// Partial derivatives of `eval` with respect to each parameter.
    /// Defaults to central differences.
    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]) {
        let mut q = p.to_vec();
        for i in 0..p.len() {
            let h = 1e-6 * p[i].abs().max(1e-12);
            q[i] = p[i] + h;
            let up = self.eval(&q, x);
            q[i] = p[i] - h;
            let dn = self.eval(&q, x);
            q[i] = p[i];
            out[i] = (up - dn) / (2.0 * h);
        }
    }

    /// Whether `p` is inside the model's domain.
    fn admissible(&self, _p: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LmResult {
    pub params: Vec<f64>,
    /// Covariance scaled by the reduced chi-square.
    pub covariance: DMatrix<f64>,
    /// Weighted sum of squared residuals.
    pub chi2: f64,
    pub converged: bool,
}

fn chi2<M: Model>(m: &M, p: &[f64], x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((&x, &y), &w)| {
            let r = y - m.eval(p, x);
            w * r * r
        })
        .sum()
}

fn normal_equations<M: Model>(m: &M, p: &[f64], x: &[f64], y: &[f64], w: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let k = m.n_params();
    let mut jtj = DMatrix::<f64>::zeros(k, k);
    let mut jtr = DVector::<f64>::zeros(k);
    let mut g = vec![0.0; k];
    for ((&x, &y), &w) in x.iter().zip(y).zip(w) {
        m.gradient(p, x, &mut g);
        let r = y - m.eval(p, x);
        for a in 0..k {
            jtr[a] += w * g[a] * r;
            for b in a..k {
                jtj[(a, b)] += w * g[a] * g[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
    }
    (jtj, jtr)
}

/// Minimizes `sum w (y - f(p, x))²` from `p0`. `scales` sets, per parameter,
/// the magnitude below which the relative-step test uses an absolute floor.
pub(crate) fn levenberg_marquardt<M: Model>(
    m: &M,
    p0: &[f64],
    scales: &[f64],
    x: &[f64],
    y: &[f64],
    w: &[f64],
) -> LmResult {
    let k = m.n_params();
    let mut p = p0.to_vec();
    let mut cost = chi2(m, &p, x, y, w);
    let mut lambda = 1e-3;
    let mut converged = false;

    'outer: for _ in 0..MAX_ITERATIONS {
        let (jtj, jtr) = normal_equations(m, &p, x, y, w);
        loop {
            let mut a = jtj.clone();
            for i in 0..k {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&jtr),
                None => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let trial_cost = if m.admissible(&trial) { chi2(m, &trial, x, y, w) } else { f64::INFINITY };
            let rel_step =
                step.iter().zip(&p).zip(scales).map(|((s, p), sc)| s.abs() / p.abs().max(*sc)).fold(0.0, f64::max);
            if trial_cost <= cost {
                p = trial;
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                if rel_step <= STEP_TOLERANCE {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no descent direction left: we sit on the numerical minimum
                converged = rel_step <= 1e-6;
                break 'outer;
            }
        }
    }

    let (jtj, _) = normal_equations(m, &p, x, y, w);
    let dof = x.len().saturating_sub(k).max(1) as f64;
    let covariance = jtj
        .clone()
        .try_inverse()
        .map(|inv| inv * (cost / dof))
        .unwrap_or_else(|| DMatrix::from_element(k, k, f64::NAN));
    LmResult { params: p, covariance, chi2: cost, converged }
}

//! Small dense Levenberg–Marquardt solver.
//!
//! Intended for a handful of parameters and up to a few thousand residuals.
//! The Jacobian is taken by central differences; the damped normal equations
//! are solved by Cholesky factorization.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative decrease of the cost falls below this.
    pub cost_tolerance: f64,
    /// Stop when every relative parameter step falls below this.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            cost_tolerance: 1e-12,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    /// (JᵀJ)⁻¹ at the solution, row major.
    pub covariance: Vec<f64>,
    pub iterations: usize,
}

impl LmSolution {
    pub fn stderr(&self, i: usize) -> f64 {
        let p = self.params.len();
        self.covariance[i * p + i].max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmFailure {
    pub cost: f64,
    pub iterations: usize,
}

/// Minimizes Σ rᵢ(θ)² where `residuals(θ, r)` fills `r` (length `n_residuals`).
pub fn minimize<F>(
    mut residuals: F,
    n_residuals: usize,
    initial: &[f64],
    opts: &LmOptions,
) -> Result<LmSolution, LmFailure>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let p = initial.len();
    let mut params = initial.to_vec();
    let mut r = vec![0.0; n_residuals];
    residuals(&params, &mut r);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(LmFailure { cost, iterations: 0 });
    }
    let mut jac = vec![0.0; n_residuals * p];
    let mut lambda = opts.initial_damping;
    let mut trial = vec![0.0; p];
    let mut r_trial = vec![0.0; n_residuals];

    for iter in 1..=opts.max_iterations {
        jacobian(&mut residuals, &params, n_residuals, &mut jac);
        let (jtj, jtr) = normal_equations(&jac, &r, p);

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..p {
                a[i * p + i] += lambda * jtj[i * p + i].max(1e-300);
            }
            let Some(step) = cholesky_solve(&a, &jtr, p) else {
                lambda *= 10.0;
                continue;
            };
            for i in 0..p {
                trial[i] = params[i] - step[i];
            }
            residuals(&trial, &mut r_trial);
            let c = sum_sq(&r_trial);
            if c.is_finite() && c <= cost {
                let small_step = step
                    .iter()
                    .zip(&params)
                    .all(|(s, x)| s.abs() <= opts.step_tolerance * (x.abs() + opts.step_tolerance));
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                params.copy_from_slice(&trial);
                core::mem::swap(&mut r, &mut r_trial);
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if rel < opts.cost_tolerance || small_step {
                    return Ok(finish(&mut residuals, params, cost, n_residuals, iter));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: a (local) minimum
            return Ok(finish(&mut residuals, params, cost, n_residuals, iter));
        }
    }
    Err(LmFailure {
        cost,
        iterations: opts.max_iterations,
    })
}

fn finish<F>(residuals: &mut F, params: Vec<f64>, cost: f64, n: usize, iterations: usize) -> LmSolution
where
    F: FnMut(&[f64], &mut [f64]),
{
    let p = params.len();
    let mut jac = vec![0.0; n * p];
    jacobian(residuals, &params, n, &mut jac);
    let zero = vec![0.0; n];
    let (jtj, _) = normal_equations(&jac, &zero, p);
    let covariance = invert_spd(&jtj, p).unwrap_or_else(|| vec![f64::INFINITY; p * p]);
    LmSolution {
        params,
        cost,
        covariance,
        iterations,
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F>(residuals: &mut F, params: &[f64], n: usize, jac: &mut [f64])
where
    F: FnMut(&[f64], &mut [f64]),
{
    let p = params.len();
    let mut x = params.to_vec();
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for j in 0..p {
        let h = 1e-6 * (params[j].abs() + 1e-3);
        x[j] = params[j] + h;
        residuals(&x, &mut plus);
        x[j] = params[j] - h;
        residuals(&x, &mut minus);
        x[j] = params[j];
        for i in 0..n {
            jac[i * p + j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
}

fn normal_equations(jac: &[f64], r: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jtj = vec![0.0; p * p];
    let mut jtr = vec![0.0; p];
    for (row, ri) in jac.chunks_exact(p).zip(r) {
        for a in 0..p {
            jtr[a] += row[a] * ri;
            for b in 0..=a {
                jtj[a * p + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            jtj[b * p + a] = jtj[a * p + b];
        }
    }
    (jtj, jtr)
}

fn cholesky(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let l = cholesky(a, p)?;
    let mut y = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            y[i] -= l[i * p + k] * y[k];
        }
        y[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            y[i] -= l[k * p + i] * y[k];
        }
        y[i] /= l[i * p + i];
    }
    Some(y)
}

fn invert_spd(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; p * p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let col = cholesky_solve(a, &e, p)?;
        for i in 0..p {
            inv[i * p + j] = col[i];
        }
    }
    Some(inv)
}

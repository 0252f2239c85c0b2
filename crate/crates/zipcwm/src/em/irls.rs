//! Iteratively reweighted least squares for the responsibility-weighted
//! Poisson regression block.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Linear predictors are clamped to this magnitude before exponentiation so
/// a wild interim beta cannot produce infinities inside the solve. A clamped
/// step always loses the step-halving comparison and gets rejected.
const ETA_CLAMP: f64 = 500.0;

#[derive(Debug, Clone, Copy)]
pub struct IrlsOptions {
    pub max_steps: usize,
    pub grad_tolerance: f64,
    pub ridge: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            max_steps: 25,
            grad_tolerance: 1e-8,
            ridge: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IrlsFit {
    pub beta: Vec<f64>,
    /// Infinity norm of the weighted score at the returned beta.
    pub score_norm: f64,
    pub steps: usize,
    /// Whether the ridge term changed a solution by more than 1e-6.
    pub ridge_engaged: bool,
}

/// Fisher scoring on the weighted Poisson log-likelihood
/// `sum_i z_i (y_i ln mu_i - mu_i)` with `mu_i = exp(x_i' beta)`: repeatedly
/// solve the weighted normal equations with working response
/// `delta_i = eta_i + (y_i - mu_i) / mu_i` and weights `z_i mu_i` until the
/// weighted score's infinity norm drops below tolerance. Steps are halved
/// toward the previous beta whenever they would decrease the objective, so
/// the returned beta never scores worse than `beta_init`.
pub fn irls_update_beta(
    x: &DMatrix<f64>,
    y: &[u64],
    z_column: &[f64],
    beta_init: &[f64],
    opts: &IrlsOptions,
) -> Result<IrlsFit> {
    let n = y.len();
    let d = x.ncols();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x.nrows(),
        });
    }
    if z_column.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: z_column.len(),
        });
    }
    if beta_init.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: beta_init.len(),
        });
    }

    let mut beta = DVector::from_column_slice(beta_init);
    let mut objective = weighted_objective(x, y, z_column, &beta);
    let mut score_norm = score_inf_norm(x, y, z_column, &beta);
    let mut ridge_engaged = false;
    let mut steps = 0;

    for _ in 0..opts.max_steps {
        if score_norm < opts.grad_tolerance {
            break;
        }
        steps += 1;

        let mut a = DMatrix::zeros(d, d);
        let mut b = DVector::zeros(d);
        for i in 0..n {
            let zi = z_column[i];
            if zi == 0.0 {
                continue;
            }
            let eta = clamped_eta(x, &beta, i);
            let mu = eta.exp();
            let s = zi * mu;
            let delta = eta + (y[i] as f64 - mu) / mu;
            for j in 0..d {
                let xij = x[(i, j)];
                b[j] += xij * s * delta;
                for k in j..d {
                    a[(j, k)] += s * xij * x[(i, k)];
                }
            }
        }
        for j in 0..d {
            for k in 0..j {
                a[(j, k)] = a[(k, j)];
            }
        }

        let plain = nalgebra::Cholesky::new(a.clone()).map(|c| c.solve(&b));
        let mut ridged = a;
        for j in 0..d {
            ridged[(j, j)] += opts.ridge;
        }
        let candidate = match nalgebra::Cholesky::new(ridged) {
            Some(chol) => chol.solve(&b),
            None => return Err(Error::SingularSystem),
        };
        if !candidate.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        match plain {
            Some(p) => {
                if (&p - &candidate).amax() > 1e-6 {
                    ridge_engaged = true;
                }
            }
            None => ridge_engaged = true,
        }

        // Step halving: accept the first point on the segment toward the
        // previous beta that does not lower the weighted objective.
        let mut next = candidate;
        let mut accepted = false;
        for _ in 0..40 {
            let obj = weighted_objective(x, y, z_column, &next);
            if obj >= objective - 1e-12 {
                objective = obj;
                accepted = true;
                break;
            }
            next = (&next + &beta) * 0.5;
        }
        if !accepted {
            break;
        }
        beta = next;
        score_norm = score_inf_norm(x, y, z_column, &beta);
    }

    Ok(IrlsFit {
        beta: beta.iter().copied().collect(),
        score_norm,
        steps,
        ridge_engaged,
    })
}

fn clamped_eta(x: &DMatrix<f64>, beta: &DVector<f64>, i: usize) -> f64 {
    let mut eta = 0.0;
    for j in 0..x.ncols() {
        eta += x[(i, j)] * beta[j];
    }
    eta.clamp(-ETA_CLAMP, ETA_CLAMP)
}

/// sum_i z_i (y_i eta_i - mu_i), the part of the weighted Poisson
/// log-likelihood that depends on beta.
fn weighted_objective(x: &DMatrix<f64>, y: &[u64], z: &[f64], beta: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..y.len() {
        if z[i] == 0.0 {
            continue;
        }
        let eta = clamped_eta(x, beta, i);
        total += z[i] * (y[i] as f64 * eta - eta.exp());
    }
    total
}

fn score_inf_norm(x: &DMatrix<f64>, y: &[u64], z: &[f64], beta: &DVector<f64>) -> f64 {
    let d = x.ncols();
    let mut score = vec![0.0; d];
    for i in 0..y.len() {
        if z[i] == 0.0 {
            continue;
        }
        let eta = clamped_eta(x, beta, i);
        let resid = y[i] as f64 - eta.exp();
        for (j, s) in score.iter_mut().enumerate() {
            *s += z[i] * x[(i, j)] * resid;
        }
    }
    score.iter().fold(0.0f64, |m, s| m.max(s.abs()))
}

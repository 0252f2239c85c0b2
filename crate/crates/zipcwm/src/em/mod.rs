//! Multi-restart EM fitting: E-step responsibilities, closed-form M-steps,
//! the IRLS inner solver for the regression coefficients, and likelihood
//! bookkeeping.

mod init;
mod irls;
mod mstep;

pub use irls::{irls_update_beta, IrlsFit, IrlsOptions};
pub use mstep::{m_step_alpha, m_step_gaussian, m_step_pi, VARIANCE_FLOOR};

use crate::error::{Error, Result};
use crate::math::{derive_seed, log_sum_exp};
use crate::model::{
    count_free_parameters, gaussian_log_density_prepared, poisson_log_pmf_from_eta,
    ComponentParameters, Dataset, MixtureParameters, ModelSpec,
};
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A component whose total responsibility falls below this threshold aborts
/// the restart instead of continuing into NaN territory.
pub const EMPTY_COMPONENT_THRESHOLD: f64 = 1e-8;

/// Posterior membership probabilities, one row per observation. Rows are
/// simplexes; for zero-inflated families column 0 is exactly zero whenever
/// the count is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Responsibilities {
    pub z: Vec<Vec<f64>>,
}

impl Responsibilities {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn n_components(&self) -> usize {
        self.z.first().map_or(0, Vec::len)
    }

    /// Shannon entropy of the posterior, -sum z ln z with 0 ln 0 = 0.
    pub fn entropy(&self) -> f64 {
        -self
            .z
            .iter()
            .flatten()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum::<f64>()
    }

    pub fn validate(&self, data: &Dataset, spec: &ModelSpec) -> Result<()> {
        if self.n() != data.n() {
            return Err(Error::DimensionMismatch {
                expected: data.n(),
                actual: self.n(),
            });
        }
        for (i, row) in self.z.iter().enumerate() {
            if row.len() != spec.n_components {
                return Err(Error::DimensionMismatch {
                    expected: spec.n_components,
                    actual: row.len(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-10 || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidData(format!(
                    "responsibility row {i} is not a simplex (sum {sum})"
                )));
            }
            if spec.family.has_degenerate() && data.y[i] > 0 && row[0] != 0.0 {
                return Err(Error::InvalidData(format!(
                    "row {i} has positive count but nonzero degenerate responsibility"
                )));
            }
        }
        Ok(())
    }
}

/// Knobs for [`fit_em`]. `restarts` controls how many independently seeded
/// runs compete; the best final log-likelihood wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iterations: usize,
    pub loglik_rel_tolerance: f64,
    pub irls_max_steps: usize,
    pub irls_grad_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub ridge: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 500,
            loglik_rel_tolerance: 1e-8,
            irls_max_steps: 25,
            irls_grad_tolerance: 1e-8,
            restarts: 10,
            seed: 0,
            ridge: 1e-8,
        }
    }
}

impl EmConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    fn irls_options(&self) -> IrlsOptions {
        IrlsOptions {
            max_steps: self.irls_max_steps,
            grad_tolerance: self.irls_grad_tolerance,
            ridge: self.ridge,
        }
    }
}

/// Result of a fit: canonicalized parameters, the winning restart's
/// log-likelihood trace, posterior responsibilities, and MAP labels
/// (1-based, component 1 is the point mass for zero-inflated families).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub params: MixtureParameters,
    pub loglik_trace: Vec<f64>,
    pub final_loglik: f64,
    pub responsibilities: Responsibilities,
    pub map_labels: Vec<usize>,
    pub converged: bool,
    pub iterations_used: usize,
    pub restart_index_of_best: usize,
    pub failed_restarts: Vec<(usize, String)>,
    pub ridge_engaged: bool,
    pub warnings: Vec<String>,
}

/// Observed-data log-likelihood: the sum over observations of the log
/// mixture density.
pub fn observed_loglik(
    data: &Dataset,
    params: &MixtureParameters,
    spec: &ModelSpec,
) -> Result<f64> {
    params.validate(&data.dims(), spec)?;
    let x_eff = effective_design(data, spec);
    let prepared = PreparedComponents::build(data, &x_eff, params, spec)?;
    let mut total = 0.0;
    let mut scratch = vec![0.0; spec.n_components];
    for i in 0..data.n() {
        prepared.log_terms(data, i, &mut scratch);
        let ll = log_sum_exp(&scratch);
        if ll == f64::NEG_INFINITY {
            return Err(Error::NoFiniteComponent { row: i });
        }
        total += ll;
    }
    Ok(total)
}

/// Complete-data log-likelihood at the given responsibilities: z-weighted
/// per-component log terms. Terms with zero responsibility contribute
/// nothing even when their log term is -inf.
pub fn complete_data_loglik(
    data: &Dataset,
    params: &MixtureParameters,
    spec: &ModelSpec,
    z: &Responsibilities,
) -> Result<f64> {
    params.validate(&data.dims(), spec)?;
    z.validate(data, spec)?;
    let x_eff = effective_design(data, spec);
    let prepared = PreparedComponents::build(data, &x_eff, params, spec)?;
    let mut total = 0.0;
    let mut scratch = vec![0.0; spec.n_components];
    for i in 0..data.n() {
        prepared.log_terms(data, i, &mut scratch);
        for (g, &term) in scratch.iter().enumerate() {
            let weight = z.z[i][g];
            if weight > 0.0 {
                total += weight * term;
            }
        }
    }
    Ok(total)
}

/// Posterior responsibilities under the current parameters. Rows are
/// normalized in log space; the degenerate column is identically zero for
/// positive counts.
pub fn e_step(data: &Dataset, params: &MixtureParameters, spec: &ModelSpec) -> Result<Responsibilities> {
    params.validate(&data.dims(), spec)?;
    let x_eff = effective_design(data, spec);
    let (z, _) = e_step_internal(data, &x_eff, params, spec)?;
    Ok(z)
}

/// Multi-restart EM. Each restart draws its own initialization stream from
/// `config.seed`, runs to convergence or `max_iterations`, and the restart
/// with the highest final observed log-likelihood is reported (ties within
/// 1e-10 go to the lowest restart index, independent of scheduling).
pub fn fit_em(data: &Dataset, spec: &ModelSpec, config: &EmConfig) -> Result<FitReport> {
    spec.validate()?;
    if data.n() == 0 {
        return Err(Error::InvalidData("empty dataset".into()));
    }
    if config.restarts == 0 {
        return Err(Error::InvalidSpec("at least one restart is required".into()));
    }
    let mut warnings = Vec::new();
    let k = count_free_parameters(spec, &data.dims());
    if data.n() <= k {
        warnings.push(format!(
            "n = {} does not exceed the {} free parameters; estimates will be unstable",
            data.n(),
            k
        ));
    }
    if spec.family.has_degenerate() && !data.y.iter().any(|&y| y == 0) {
        warnings.push("no zero counts in the data; the zero-inflation weight will collapse to 0".into());
    }

    let x_eff = effective_design(data, spec);
    let outcomes: Vec<(usize, std::result::Result<RestartOutcome, String>)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let outcome = run_restart(data, &x_eff, spec, config, r).map_err(|e| e.to_string());
            (r, outcome)
        })
        .collect();

    let mut failed: Vec<(usize, String)> = Vec::new();
    let mut best: Option<(usize, RestartOutcome)> = None;
    for (r, outcome) in outcomes {
        match outcome {
            Ok(out) => {
                let take = match &best {
                    None => true,
                    Some((_, b)) => out.final_loglik > b.final_loglik + 1e-10,
                };
                if take {
                    best = Some((r, out));
                }
            }
            Err(cause) => failed.push((r, cause)),
        }
    }
    let (restart_index_of_best, mut out) = best.ok_or(Error::AllRestartsFailed {
        attempted: config.restarts,
        causes: failed.clone(),
    })?;

    // Canonical label order: degenerate first, remaining components by
    // ascending mixing weight; responsibilities follow the same permutation.
    let perm = out.params.canonicalize(spec.family);
    let offset = usize::from(spec.family.has_degenerate());
    for row in &mut out.z.z {
        let old = row.clone();
        for (new_g, &old_g) in perm.iter().enumerate() {
            row[offset + new_g] = old[offset + old_g];
        }
    }
    let map_labels = map_labels(&out.z);

    Ok(FitReport {
        final_loglik: out.final_loglik,
        params: out.params,
        map_labels,
        converged: out.converged,
        iterations_used: out.loglik_trace.len(),
        loglik_trace: out.loglik_trace,
        responsibilities: out.z,
        restart_index_of_best,
        failed_restarts: failed,
        ridge_engaged: out.ridge_engaged,
        warnings,
    })
}

/// Row-wise argmax of the responsibilities, 1-based; ties go to the lowest
/// component index.
fn map_labels(z: &Responsibilities) -> Vec<usize> {
    z.z.iter()
        .map(|row| {
            let mut best = 0;
            for (g, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = g;
                }
            }
            best + 1
        })
        .collect()
}

/// The design the Poisson block actually regresses on: the full design
/// matrix, or its intercept column alone for the constant-rate mixture.
fn effective_design(data: &Dataset, spec: &ModelSpec) -> DMatrix<f64> {
    if spec.family.regresses_on_design() {
        data.x.clone()
    } else {
        DMatrix::from_element(data.n(), 1, 1.0)
    }
}

struct RestartOutcome {
    params: MixtureParameters,
    z: Responsibilities,
    loglik_trace: Vec<f64>,
    final_loglik: f64,
    converged: bool,
    ridge_engaged: bool,
}

fn run_restart(
    data: &Dataset,
    x_eff: &DMatrix<f64>,
    spec: &ModelSpec,
    config: &EmConfig,
    restart: usize,
) -> Result<RestartOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, restart as u64));
    let mut z = Responsibilities {
        z: init::initial_responsibilities(data, spec, &mut rng),
    };
    let offset = usize::from(spec.family.has_degenerate());
    let n_poisson = spec.n_poisson_components();
    let irls_opts = config.irls_options();

    let mut params: Option<MixtureParameters> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut ridge_engaged = false;

    for iteration in 0..config.max_iterations {
        let pi = m_step_pi(&z);
        let mut components = Vec::with_capacity(n_poisson);
        for g in 0..n_poisson {
            let z_col: Vec<f64> = z.z.iter().map(|row| row[offset + g]).collect();
            let weight: f64 = z_col.iter().sum();
            if weight < EMPTY_COMPONENT_THRESHOLD {
                return Err(Error::EmptyComponent { weight });
            }
            let beta_init: Vec<f64> = match &params {
                Some(p) => p.components[g].beta.clone(),
                None => {
                    let mean_y: f64 =
                        z_col.iter().zip(&data.y).map(|(z, &y)| z * y as f64).sum::<f64>() / weight;
                    let mut b = vec![0.0; x_eff.ncols()];
                    b[0] = mean_y.max(1e-3).ln();
                    b
                }
            };
            let fit = irls_update_beta(x_eff, &data.y, &z_col, &beta_init, &irls_opts)?;
            ridge_engaged |= fit.ridge_engaged;
            let (mu, sigma, alpha) = if spec.family.models_covariates() {
                let (mu, sigma) = m_step_gaussian(&data.q, &z_col, spec.covariance)?;
                let alpha = m_step_alpha(&data.w, &z_col)?;
                (mu, sigma, alpha)
            } else {
                (vec![], vec![], vec![])
            };
            components.push(ComponentParameters {
                beta: fit.beta,
                mu,
                sigma,
                alpha,
            });
        }
        let candidate = MixtureParameters { pi, components };
        let (z_new, loglik) = e_step_internal(data, x_eff, &candidate, spec)?;
        trace.push(loglik);
        params = Some(candidate);
        z = z_new;
        if iteration > 0 {
            let prev = trace[iteration - 1];
            if (loglik - prev).abs() < config.loglik_rel_tolerance * (1.0 + prev.abs()) {
                converged = true;
                break;
            }
        }
    }

    let params = params.expect("at least one EM iteration ran");
    let final_loglik = *trace.last().expect("nonempty trace");
    Ok(RestartOutcome {
        params,
        z,
        loglik_trace: trace,
        final_loglik,
        converged,
        ridge_engaged,
    })
}

/// Per-component quantities hoisted out of the observation loop: linear
/// predictors, Cholesky factors, and log alphas.
struct PreparedComponents {
    has_degenerate: bool,
    models_covariates: bool,
    pi_ln: Vec<f64>,
    etas: Vec<DVector<f64>>,
    gaussians: Vec<Option<(Vec<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)>>,
    ln_alphas: Vec<Vec<Vec<f64>>>,
}

impl PreparedComponents {
    fn build(
        data: &Dataset,
        x_eff: &DMatrix<f64>,
        params: &MixtureParameters,
        spec: &ModelSpec,
    ) -> Result<Self> {
        let mut etas = Vec::with_capacity(params.components.len());
        let mut gaussians = Vec::with_capacity(params.components.len());
        let mut ln_alphas = Vec::with_capacity(params.components.len());
        for comp in &params.components {
            let beta = DVector::from_column_slice(&comp.beta);
            etas.push(x_eff * &beta);
            if spec.family.models_covariates() && data.q_dim() > 0 {
                let chol = nalgebra::Cholesky::new(comp.sigma_matrix())
                    .ok_or(Error::CovarianceNotPositiveDefinite)?;
                gaussians.push(Some((comp.mu.clone(), chol)));
            } else {
                gaussians.push(None);
            }
            let ln_alpha: Vec<Vec<f64>> = comp
                .alpha
                .iter()
                .map(|probs| probs.iter().map(|&p| p.ln()).collect())
                .collect();
            ln_alphas.push(ln_alpha);
        }
        Ok(PreparedComponents {
            has_degenerate: spec.family.has_degenerate(),
            models_covariates: spec.family.models_covariates(),
            pi_ln: params.pi.iter().map(|&p| p.ln()).collect(),
            etas,
            gaussians,
            ln_alphas,
        })
    }

    /// Fill `out` with the per-component log joint terms of observation `i`.
    fn log_terms(&self, data: &Dataset, i: usize, out: &mut [f64]) {
        let offset = usize::from(self.has_degenerate);
        if self.has_degenerate {
            out[0] = if data.y[i] == 0 {
                self.pi_ln[0]
            } else {
                f64::NEG_INFINITY
            };
        }
        let q_row: Vec<f64> = (0..data.q_dim()).map(|j| data.q[(i, j)]).collect();
        for g in 0..self.etas.len() {
            let mut term = self.pi_ln[offset + g] + poisson_log_pmf_from_eta(data.y[i], self.etas[g][i]);
            if self.models_covariates {
                if let Some((mu, chol)) = &self.gaussians[g] {
                    term += gaussian_log_density_prepared(&q_row, mu, chol);
                }
                for (k, col) in data.w.iter().enumerate() {
                    term += self.ln_alphas[g][k][col.levels[i]];
                }
            }
            out[offset + g] = term;
        }
    }
}

fn e_step_internal(
    data: &Dataset,
    x_eff: &DMatrix<f64>,
    params: &MixtureParameters,
    spec: &ModelSpec,
) -> Result<(Responsibilities, f64)> {
    let prepared = PreparedComponents::build(data, x_eff, params, spec)?;
    let g_total = spec.n_components;
    let mut z = Vec::with_capacity(data.n());
    let mut total = 0.0;
    let mut scratch = vec![0.0; g_total];
    for i in 0..data.n() {
        prepared.log_terms(data, i, &mut scratch);
        let ll = log_sum_exp(&scratch);
        if ll == f64::NEG_INFINITY || ll.is_nan() {
            return Err(Error::NoFiniteComponent { row: i });
        }
        total += ll;
        let mut row = vec![0.0; g_total];
        let mut row_sum = 0.0;
        for (g, &term) in scratch.iter().enumerate() {
            let v = if term == f64::NEG_INFINITY {
                0.0
            } else {
                (term - ll).exp()
            };
            row[g] = v;
            row_sum += v;
        }
        // Exact renormalization so row sums are 1 to the last bit.
        for v in &mut row {
            *v /= row_sum;
        }
        z.push(row);
    }
    Ok((Responsibilities { z }, total))
}

//! Per-observation log densities, parameter counting, and the design-rank
//! identifiability check.

use crate::error::{Error, Result};
use crate::math::{ln_factorial, log_sum_exp};
use crate::model::{CovarianceStructure, DataDims, Dataset, MixtureParameters, ModelSpec};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Per-component log joint contributions of a single observation. For
/// zero-inflated families entry 0 belongs to the point mass at zero and is
/// -inf whenever y > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDensityRow {
    pub log_components: Vec<f64>,
}

impl LogDensityRow {
    pub fn total(&self) -> f64 {
        log_sum_exp(&self.log_components)
    }
}

/// ln Pois(y | mean) = y ln(mean) - mean - ln(y!).
pub fn poisson_log_pmf(y: u64, mean: f64) -> Result<f64> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::NonPositiveMean(mean));
    }
    Ok(y as f64 * mean.ln() - mean - ln_factorial(y))
}

/// Same pmf parameterized by the linear predictor eta = ln(mean). Stable for
/// extreme eta: exp saturates to +inf and the result drops to -inf instead of
/// producing NaN.
pub(crate) fn poisson_log_pmf_from_eta(y: u64, eta: f64) -> f64 {
    y as f64 * eta - eta.exp() - ln_factorial(y)
}

/// exp(x'beta), the log-linked Poisson mean.
pub fn poisson_mean(x_row: &[f64], beta: &[f64]) -> Result<f64> {
    if x_row.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: x_row.len(),
            actual: beta.len(),
        });
    }
    let eta: f64 = x_row.iter().zip(beta).map(|(x, b)| x * b).sum();
    Ok(eta.exp())
}

/// Multivariate Gaussian log density. A zero-dimensional input is the empty
/// product and evaluates to 0 in log space.
pub fn gaussian_log_density(q_row: &[f64], mu: &[f64], sigma: &DMatrix<f64>) -> Result<f64> {
    let q = mu.len();
    if q_row.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            actual: q_row.len(),
        });
    }
    if sigma.nrows() != q || sigma.ncols() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            actual: sigma.nrows(),
        });
    }
    if q == 0 {
        return Ok(0.0);
    }
    let chol = nalgebra::Cholesky::new(sigma.clone()).ok_or(Error::CovarianceNotPositiveDefinite)?;
    Ok(gaussian_log_density_prepared(q_row, mu, &chol))
}

/// Gaussian log density against a precomputed Cholesky factor; the EM loop
/// uses this to avoid refactorizing per observation.
pub(crate) fn gaussian_log_density_prepared(
    q_row: &[f64],
    mu: &[f64],
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
) -> f64 {
    let q = mu.len();
    if q == 0 {
        return 0.0;
    }
    let diff = DVector::from_fn(q, |i, _| q_row[i] - mu[i]);
    let l = chol.l_dirty();
    // Solve L z = diff in place; the quadratic form is |z|^2.
    let mut z = diff;
    l.solve_lower_triangular_mut(&mut z);
    let log_det: f64 = (0..q).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    -0.5 * (q as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared())
}

/// Joint log pmf of the categorical block: independent multinomial factors,
/// one per variable. Level probabilities of exactly zero are rejected (the
/// M-step floor keeps fitted alphas strictly positive).
pub fn categorical_log_pmf(levels: &[usize], alpha: &[Vec<f64>]) -> Result<f64> {
    if levels.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.len(),
            actual: levels.len(),
        });
    }
    let mut total = 0.0;
    for (k, (&s, probs)) in levels.iter().zip(alpha).enumerate() {
        let p = *probs.get(s).ok_or(Error::DimensionMismatch {
            expected: probs.len(),
            actual: s + 1,
        })?;
        if p <= 0.0 {
            return Err(Error::DegenerateParameter(format!(
                "alpha[{k}][{s}] is {p}; zero-probability levels are not representable in log space"
            )));
        }
        total += p.ln();
    }
    Ok(total)
}

/// Joint log density of observation `i` under the mixture: the log-sum-exp
/// total and the per-component contributions it was taken over.
pub fn joint_log_density(
    data: &Dataset,
    i: usize,
    params: &MixtureParameters,
    spec: &ModelSpec,
) -> Result<(f64, LogDensityRow)> {
    spec.validate()?;
    params.validate(&data.dims(), spec)?;
    let row = log_density_row(data, i, params, spec)?;
    Ok((row.total(), row))
}

pub(crate) fn log_density_row(
    data: &Dataset,
    i: usize,
    params: &MixtureParameters,
    spec: &ModelSpec,
) -> Result<LogDensityRow> {
    let y = data.y[i];
    let mut log_components = Vec::with_capacity(spec.n_components);
    if spec.family.has_degenerate() {
        log_components.push(if y == 0 {
            params.pi[0].ln()
        } else {
            f64::NEG_INFINITY
        });
    }
    let offset = usize::from(spec.family.has_degenerate());
    let q_row: Vec<f64> = (0..data.q_dim()).map(|j| data.q[(i, j)]).collect();
    let w_row = data.w_row(i);
    for (g, comp) in params.components.iter().enumerate() {
        let eta = if spec.family.regresses_on_design() {
            let mut acc = 0.0;
            for (j, b) in comp.beta.iter().enumerate() {
                acc += data.x[(i, j)] * b;
            }
            acc
        } else {
            comp.beta[0]
        };
        let mut term = params.pi[offset + g].ln() + poisson_log_pmf_from_eta(y, eta);
        if spec.family.models_covariates() {
            term += gaussian_log_density(&q_row, &comp.mu, &comp.sigma_matrix())?;
            term += categorical_log_pmf(&w_row, &comp.alpha)?;
        }
        log_components.push(term);
    }
    Ok(LogDensityRow { log_components })
}

/// Number of free parameters of the model: G-1 mixing weights plus, per
/// non-degenerate component, the regression coefficients and (for covariate
/// families) the Gaussian mean, the covariance parameters implied by the
/// structure, and r_k - 1 multinomial probabilities per categorical variable.
pub fn count_free_parameters(spec: &ModelSpec, dims: &DataDims) -> usize {
    let mut k = spec.n_components - 1;
    let per_component = {
        let mut c = if spec.family.regresses_on_design() {
            spec.design_cols(dims.design_cols)
        } else {
            1
        };
        if spec.family.models_covariates() {
            let q = dims.q_dim;
            c += q;
            c += match spec.covariance {
                CovarianceStructure::Spherical => usize::from(q > 0),
                CovarianceStructure::Diagonal => q,
                CovarianceStructure::Full => q * (q + 1) / 2,
            };
            c += dims.level_counts.iter().map(|r| r - 1).sum::<usize>();
        }
        c
    };
    k += spec.n_poisson_components() * per_component;
    k
}

/// Numerical-rank report for the regression design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub n_cols: usize,
    pub full_rank: bool,
    pub tolerance: f64,
}

/// Numerical rank of X from its singular values, with the usual tolerance of
/// machine epsilon scaled by the matrix size and largest singular value.
/// Diagnostic only: fitting proceeds on rank deficiency, the ridge term in
/// the IRLS solve absorbs it.
pub fn check_identifiability(x: &DMatrix<f64>) -> RankReport {
    let n_cols = x.ncols();
    let svd = x.clone().svd(false, false);
    let sv_max = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let tolerance = f64::EPSILON * x.nrows().max(n_cols) as f64 * sv_max;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > tolerance)
        .count();
    RankReport {
        rank,
        n_cols,
        full_rank: rank == n_cols,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CategoricalCoding, CategoricalColumn, ComponentParameters, Family};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn poisson_log_pmf_known_values() {
        // ln pmf(0 | 1) = -mu
        assert_abs_diff_eq!(poisson_log_pmf(0, 1.0).unwrap(), -1.0, epsilon = 1e-15);
        // ln pmf(2 | 2) = ln(2 e^-2)
        assert_relative_eq!(
            poisson_log_pmf(2, 2.0).unwrap(),
            -1.3068528194400547,
            max_relative = 1e-14
        );
        // ln pmf(5 | 3.7), frozen from a 40-digit evaluation of the series
        // term exp(-mu) mu^y / y!.
        assert_relative_eq!(
            poisson_log_pmf(5, 3.7).unwrap(),
            -1.9458276445311522,
            max_relative = 1e-14
        );
    }

    #[test]
    fn poisson_log_pmf_rejects_bad_mean() {
        assert!(poisson_log_pmf(1, 0.0).is_err());
        assert!(poisson_log_pmf(1, -2.0).is_err());
        assert!(poisson_log_pmf(1, f64::INFINITY).is_err());
    }

    #[test]
    fn poisson_pmf_normalizes() {
        for &mu in &[0.1, 1.0, 3.7, 10.0, 50.0] {
            let y_star = (mu + 20.0 * mu.sqrt() + 20.0) as u64;
            let total: f64 = (0..=y_star)
                .map(|y| poisson_log_pmf(y, mu).unwrap().exp())
                .sum();
            assert!(total >= 1.0 - 1e-10, "mu={mu}: mass {total}");
            assert!(total <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn poisson_mean_basics() {
        assert_abs_diff_eq!(
            poisson_mean(&[1.0, 0.0, 0.0], &[0.0, 5.0, -3.0]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            poisson_mean(&[1.0, 1.0], &[0.5, 0.5]).unwrap(),
            std::f64::consts::E,
            max_relative = 1e-15
        );
        assert!(poisson_mean(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn poisson_mean_matches_simulation_truth_row() {
        // x = (1, 0.1, 2.0, 1.0, 1, 2) against the component-2 truth
        // beta = (0.00, 0.88, 0.28, 0.96, 0.09, 0.33).
        let x = [1.0, 0.1, 2.0, 1.0, 1.0, 2.0];
        let beta = [0.00, 0.88, 0.28, 0.96, 0.09, 0.33];
        let dot: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        assert_relative_eq!(
            poisson_mean(&x, &beta).unwrap(),
            dot.exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn gaussian_log_density_known_values() {
        let eye3 = DMatrix::identity(3, 3);
        let mu = [0.4, -1.0, 2.0];
        assert_relative_eq!(
            gaussian_log_density(&mu, &mu, &eye3).unwrap(),
            -1.5 * (2.0 * std::f64::consts::PI).ln(),
            max_relative = 1e-14
        );
        let sigma1 = DMatrix::from_row_slice(1, 1, &[4.0]);
        assert_relative_eq!(
            gaussian_log_density(&[0.0], &[0.0], &sigma1).unwrap(),
            -1.6120857137646181,
            max_relative = 1e-14
        );
        // Frozen from a 40-digit direct evaluation of the quadratic form:
        // q = (0.3, -1.2), mu = (-0.5, 0.7), sigma = [[2.0, 0.6], [0.6, 1.5]].
        let sigma2 = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.5]);
        assert_relative_eq!(
            gaussian_log_density(&[0.3, -1.2], &[-0.5, 0.7], &sigma2).unwrap(),
            -4.217963494685428,
            max_relative = 1e-13
        );
    }

    #[test]
    fn gaussian_log_density_rejects_non_pd() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            gaussian_log_density(&[0.0, 0.0], &[0.0, 0.0], &sigma),
            Err(Error::CovarianceNotPositiveDefinite)
        ));
    }

    #[test]
    fn categorical_log_pmf_values_and_errors() {
        assert_relative_eq!(
            categorical_log_pmf(&[0], &[vec![0.5, 0.5]]).unwrap(),
            0.5f64.ln(),
            max_relative = 1e-15
        );
        let eps = 1e-6;
        let alpha = vec![vec![1.0 - eps, eps], vec![1.0 / 3.0; 3]];
        assert_relative_eq!(
            categorical_log_pmf(&[0, 1], &alpha).unwrap(),
            (1.0 - eps).ln() + (1.0f64 / 3.0).ln(),
            max_relative = 1e-14
        );
        assert!(categorical_log_pmf(&[1], &[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn categorical_pmf_sums_to_one_over_all_cells() {
        // Exhaustive over r = (2, 3, 4) with p = 3 variables.
        let alpha = vec![
            vec![0.5, 0.5],
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            vec![0.1, 0.2, 0.3, 0.4],
        ];
        let mut total = 0.0;
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..4 {
                    total += categorical_log_pmf(&[a, b, c], &alpha).unwrap().exp();
                }
            }
        }
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    fn simulation_truth_params() -> MixtureParameters {
        let comp = |mu: [f64; 3], beta: [f64; 6]| ComponentParameters {
            beta: beta.to_vec(),
            mu: mu.to_vec(),
            sigma: vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            alpha: vec![vec![0.5, 0.5], vec![1.0 / 3.0; 3]],
        };
        MixtureParameters {
            pi: vec![0.5, 0.3, 0.2],
            components: vec![
                comp([0.10, 2.00, 1.00], [0.00, 0.88, 0.28, 0.96, 0.09, 0.33]),
                comp([-2.00, 0.00, 3.00], [0.00, 0.77, 0.53, 0.98, 0.07, 0.37]),
            ],
        }
    }

    fn one_observation(y: u64) -> Dataset {
        let q = DMatrix::from_row_slice(1, 3, &[0.3, 1.7, 0.9]);
        let w = vec![
            CategoricalColumn::new(vec![1], 2).unwrap(),
            CategoricalColumn::new(vec![2], 3).unwrap(),
        ];
        Dataset::new(vec![y], q, w, CategoricalCoding::Numeric, None).unwrap()
    }

    #[test]
    fn joint_log_density_excludes_degenerate_for_positive_counts() {
        let spec = ModelSpec::new(Family::Zipcwm, 3)
            .unwrap()
            .with_coding(CategoricalCoding::Numeric);
        let data = one_observation(3);
        let params = simulation_truth_params();
        let (total, row) = joint_log_density(&data, 0, &params, &spec).unwrap();
        assert_eq!(row.log_components[0], f64::NEG_INFINITY);
        assert!(total.is_finite());
        assert!(row.log_components[1..].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn joint_log_density_zero_count_dominated_by_degenerate() {
        let spec = ModelSpec::new(Family::Zipcwm, 3)
            .unwrap()
            .with_coding(CategoricalCoding::Numeric);
        let data = one_observation(0);
        let mut params = simulation_truth_params();
        let delta = 1e-9;
        params.pi = vec![1.0 - 2.0 * delta, delta, delta];
        let (total, _) = joint_log_density(&data, 0, &params, &spec).unwrap();
        assert_abs_diff_eq!(total, (1.0 - 2.0 * delta).ln(), epsilon = 1e-8);
    }

    #[test]
    fn joint_log_density_matches_three_term_sum_oracle() {
        // Independent accumulation of the three component terms in plain
        // probability space, then compared in log space.
        let spec = ModelSpec::new(Family::Zipcwm, 3)
            .unwrap()
            .with_coding(CategoricalCoding::Numeric);
        let params = simulation_truth_params();
        for y in [0u64, 2, 7] {
            let data = one_observation(y);
            let (total, row) = joint_log_density(&data, 0, &params, &spec).unwrap();

            let x_row: Vec<f64> = (0..6).map(|j| data.x[(0, j)]).collect();
            let q_row = [0.3, 1.7, 0.9];
            let mut oracle = if y == 0 { 0.5 } else { 0.0 };
            for (g, comp) in params.components.iter().enumerate() {
                let mean: f64 = x_row
                    .iter()
                    .zip(&comp.beta)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .exp();
                let mut fact = 1.0;
                for k in 1..=y {
                    fact *= k as f64;
                }
                let pois = (-mean).exp() * mean.powi(y as i32) / fact;
                let mut gauss = 1.0;
                for (j, &qj) in q_row.iter().enumerate() {
                    let d = qj - comp.mu[j];
                    gauss *= (-0.5 * d * d).exp() / (2.0 * std::f64::consts::PI).sqrt();
                }
                let cat = comp.alpha[0][1] * comp.alpha[1][2];
                oracle += params.pi[1 + g] * pois * gauss * cat;
            }
            assert_relative_eq!(total, oracle.ln(), max_relative = 1e-12);
            assert_relative_eq!(
                total,
                crate::math::log_sum_exp(&row.log_components),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn zipcwm_with_empty_covariate_blocks_equals_fzip() {
        let y = vec![0, 1, 4, 0, 2];
        let q = DMatrix::from_fn(5, 1, |i, _| i as f64 * 0.5 - 1.0);
        let data = Dataset::new(y, q, vec![], CategoricalCoding::Dummy, None).unwrap();
        let bare = |b0: f64, b1: f64| ComponentParameters {
            beta: vec![b0, b1],
            mu: vec![],
            sigma: vec![],
            alpha: vec![],
        };
        let params = MixtureParameters {
            pi: vec![0.4, 0.35, 0.25],
            components: vec![bare(0.2, 0.3), bare(1.0, -0.2)],
        };
        // A dataset with no gaussian/categorical covariates makes the
        // covariate densities empty products, so the full family must agree
        // with the reduced one exactly.
        let zipcwm = ModelSpec::new(Family::Zipcwm, 3).unwrap();
        let fzip = ModelSpec::new(Family::Fzip, 3).unwrap();
        for i in 0..5 {
            let (a, _) = joint_log_density(&data, i, &params, &zipcwm).unwrap();
            let (b, _) = joint_log_density(&data, i, &params, &fzip).unwrap();
            if a.is_finite() || b.is_finite() {
                assert_relative_eq!(a, b, max_relative = 1e-12);
            }
        }
    }

    fn dims(q_dim: usize, level_counts: Vec<usize>, design_cols: usize) -> DataDims {
        DataDims {
            n: 100,
            q_dim,
            level_counts,
            design_cols,
        }
    }

    #[test]
    fn count_free_parameters_known_values() {
        let pm = ModelSpec::new(Family::PoissonMixture, 2).unwrap();
        assert_eq!(count_free_parameters(&pm, &dims(0, vec![], 1)), 3);

        let zip = ModelSpec::new(Family::Zip, 2).unwrap();
        for d in 0..4 {
            assert_eq!(count_free_parameters(&zip, &dims(0, vec![], 1 + d)), 1 + (1 + d));
        }

        // Hand count: 2 weights + 2 x (6 beta + 3 mean + 1 spherical + (1 + 2) alpha) = 28.
        let zipcwm = ModelSpec::new(Family::Zipcwm, 3)
            .unwrap()
            .with_coding(CategoricalCoding::Numeric);
        assert_eq!(count_free_parameters(&zipcwm, &dims(3, vec![2, 3], 6)), 28);
    }

    #[test]
    fn count_free_parameters_increases_with_g() {
        let d = dims(3, vec![2, 3], 6);
        let mut last = 0;
        for g in 2..6 {
            let spec = ModelSpec::new(Family::Zipcwm, g).unwrap();
            let k = count_free_parameters(&spec, &d);
            assert!(k > last);
            last = k;
        }
    }

    #[test]
    fn count_free_parameters_additive_over_blocks() {
        let d = dims(2, vec![3], 4);
        let full = ModelSpec::new(Family::Zipcwm, 3).unwrap();
        let no_cov = ModelSpec::new(Family::Fzip, 3).unwrap();
        let gaussian_and_alpha = 2 * (2 + 1 + 2); // two components x (mean + spherical + (r-1))
        assert_eq!(
            count_free_parameters(&full, &d),
            count_free_parameters(&no_cov, &d) + gaussian_and_alpha
        );
    }

    #[test]
    fn identifiability_rank_detection() {
        let full = DMatrix::from_fn(6, 3, |i, j| if i == j { 1.0 } else { 0.1 * (i + j) as f64 });
        let report = check_identifiability(&full);
        assert!(report.full_rank);
        assert_eq!(report.rank, 3);

        let mut dup = DMatrix::zeros(6, 3);
        for i in 0..6 {
            dup[(i, 0)] = 1.0;
            dup[(i, 1)] = i as f64;
            dup[(i, 2)] = 2.0 * i as f64; // exact multiple of column 1
        }
        let report = check_identifiability(&dup);
        assert!(!report.full_rank);
        assert_eq!(report.rank, 2);
    }
}

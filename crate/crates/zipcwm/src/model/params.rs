//! Mixture parameter containers and the canonical label order.

use crate::error::{Error, Result};
use crate::model::{DataDims, Family, ModelSpec};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Parameters of one non-degenerate component. `sigma` is stored row-major;
/// families without covariate densities carry empty `mu`/`sigma`/`alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentParameters {
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
}

impl ComponentParameters {
    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let q = self.mu.len();
        DMatrix::from_fn(q, q, |i, j| self.sigma[i][j])
    }

    pub fn validate(&self, dims: &DataDims, spec: &ModelSpec) -> Result<()> {
        let expected_beta = spec.design_cols(dims.design_cols);
        if self.beta.len() != expected_beta {
            return Err(Error::DimensionMismatch {
                expected: expected_beta,
                actual: self.beta.len(),
            });
        }
        if spec.family.models_covariates() {
            if self.mu.len() != dims.q_dim {
                return Err(Error::DimensionMismatch {
                    expected: dims.q_dim,
                    actual: self.mu.len(),
                });
            }
            if self.sigma.len() != dims.q_dim
                || self.sigma.iter().any(|row| row.len() != dims.q_dim)
            {
                return Err(Error::InvalidSpec("sigma must be q x q".into()));
            }
            if self.alpha.len() != dims.level_counts.len() {
                return Err(Error::DimensionMismatch {
                    expected: dims.level_counts.len(),
                    actual: self.alpha.len(),
                });
            }
            for (k, probs) in self.alpha.iter().enumerate() {
                if probs.len() != dims.level_counts[k] {
                    return Err(Error::DimensionMismatch {
                        expected: dims.level_counts[k],
                        actual: probs.len(),
                    });
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > 1e-10 || probs.iter().any(|&a| a <= 0.0) {
                    return Err(Error::DegenerateParameter(format!(
                        "alpha[{k}] must be a strictly positive simplex (sum {sum})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Full mixture parameter set. For zero-inflated families `pi[0]` belongs to
/// the point mass at zero and `components[g]` to mixture component `g + 2`
/// (1-based); otherwise `components[g]` pairs with `pi[g]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParameters {
    pub pi: Vec<f64>,
    pub components: Vec<ComponentParameters>,
}

impl MixtureParameters {
    /// Weights of the non-degenerate components, in component order.
    pub fn poisson_weights(&self, family: Family) -> &[f64] {
        if family.has_degenerate() {
            &self.pi[1..]
        } else {
            &self.pi
        }
    }

    pub fn validate(&self, dims: &DataDims, spec: &ModelSpec) -> Result<()> {
        if self.pi.len() != spec.n_components {
            return Err(Error::DimensionMismatch {
                expected: spec.n_components,
                actual: self.pi.len(),
            });
        }
        if self.components.len() != spec.n_poisson_components() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_poisson_components(),
                actual: self.components.len(),
            });
        }
        let sum: f64 = self.pi.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::DegenerateParameter(format!(
                "mixing weights sum to {sum}, expected 1"
            )));
        }
        if self.pi.iter().any(|&p| !(0.0..1.0).contains(&p) || p == 0.0) {
            return Err(Error::DegenerateParameter(
                "every mixing weight must lie strictly inside (0, 1)".into(),
            ));
        }
        for comp in &self.components {
            comp.validate(dims, spec)?;
        }
        Ok(())
    }

    /// Canonical label order: the degenerate component stays first; the
    /// non-degenerate components are sorted by ascending mixing weight (ties
    /// keep their original order). Returns the permutation applied to the
    /// non-degenerate block: `perm[k]` is the old index of new component `k`.
    pub fn canonicalize(&mut self, family: Family) -> Vec<usize> {
        let offset = usize::from(family.has_degenerate());
        let weights = &self.pi[offset..];
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| {
            weights[a]
                .partial_cmp(&weights[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let new_pi: Vec<f64> = order.iter().map(|&k| weights[k]).collect();
        let new_components: Vec<ComponentParameters> =
            order.iter().map(|&k| self.components[k].clone()).collect();
        self.pi[offset..].copy_from_slice(&new_pi);
        self.components = new_components;
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_component(beta: Vec<f64>) -> ComponentParameters {
        ComponentParameters {
            beta,
            mu: vec![],
            sigma: vec![],
            alpha: vec![],
        }
    }

    #[test]
    fn canonicalize_sorts_poisson_weights_ascending_with_degenerate_pinned() {
        let mut params = MixtureParameters {
            pi: vec![0.5, 0.3, 0.2],
            components: vec![bare_component(vec![1.0]), bare_component(vec![2.0])],
        };
        let perm = params.canonicalize(Family::Fzip);
        assert_eq!(params.pi, vec![0.5, 0.2, 0.3]);
        assert_eq!(params.components[0].beta, vec![2.0]);
        assert_eq!(params.components[1].beta, vec![1.0]);
        assert_eq!(perm, vec![1, 0]);
    }

    #[test]
    fn canonicalize_without_degenerate_sorts_all() {
        let mut params = MixtureParameters {
            pi: vec![0.6, 0.1, 0.3],
            components: vec![
                bare_component(vec![1.0]),
                bare_component(vec![2.0]),
                bare_component(vec![3.0]),
            ],
        };
        params.canonicalize(Family::PoissonMixture);
        assert_eq!(params.pi, vec![0.1, 0.3, 0.6]);
        assert_eq!(params.components[0].beta, vec![2.0]);
    }

    #[test]
    fn validate_rejects_bad_weights() {
        let params = MixtureParameters {
            pi: vec![0.7, 0.4],
            components: vec![bare_component(vec![0.0])],
        };
        let dims = DataDims {
            n: 3,
            q_dim: 0,
            level_counts: vec![],
            design_cols: 1,
        };
        let spec = ModelSpec::new(Family::Zip, 2).unwrap();
        assert!(params.validate(&dims, &spec).is_err());
    }
}

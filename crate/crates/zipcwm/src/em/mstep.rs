//! Closed-form M-step updates for the mixing weights, the Gaussian block,
//! and the multinomial block.

use crate::em::{Responsibilities, EMPTY_COMPONENT_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{CategoricalColumn, CovarianceStructure};
use nalgebra::DMatrix;

/// Smallest admissible eigenvalue / variance of a fitted covariance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Smallest admissible multinomial probability; fitted alphas are floored
/// here and renormalized so log pmfs stay finite.
pub const ALPHA_FLOOR: f64 = 1e-8;

/// Mixing weights: column means of the responsibilities, degenerate
/// component included.
pub fn m_step_pi(z: &Responsibilities) -> Vec<f64> {
    let n = z.n() as f64;
    let g = z.n_components();
    let mut pi = vec![0.0; g];
    for row in &z.z {
        for (acc, &v) in pi.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for p in &mut pi {
        *p /= n;
    }
    pi
}

/// Responsibility-weighted mean and covariance of the continuous block,
/// projected to the requested structure (spherical: one shared variance,
/// the average of the diagonal; diagonal: off-diagonal zeroed; full: as
/// computed) with eigenvalues floored for positive definiteness.
pub fn m_step_gaussian(
    q: &DMatrix<f64>,
    z_column: &[f64],
    structure: CovarianceStructure,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = q.ncols();
    let weight: f64 = z_column.iter().sum();
    if weight < EMPTY_COMPONENT_THRESHOLD {
        return Err(Error::EmptyComponent { weight });
    }
    if dim == 0 {
        return Ok((vec![], vec![]));
    }
    if q.nrows() != z_column.len() {
        return Err(Error::DimensionMismatch {
            expected: q.nrows(),
            actual: z_column.len(),
        });
    }

    let mut mu = vec![0.0; dim];
    for (i, &zi) in z_column.iter().enumerate() {
        if zi == 0.0 {
            continue;
        }
        for (j, m) in mu.iter_mut().enumerate() {
            *m += zi * q[(i, j)];
        }
    }
    for m in &mut mu {
        *m /= weight;
    }

    let mut cov = DMatrix::zeros(dim, dim);
    let mut diff = vec![0.0; dim];
    for (i, &zi) in z_column.iter().enumerate() {
        if zi == 0.0 {
            continue;
        }
        for (j, d) in diff.iter_mut().enumerate() {
            *d = q[(i, j)] - mu[j];
        }
        for j in 0..dim {
            for k in j..dim {
                cov[(j, k)] += zi * diff[j] * diff[k];
            }
        }
    }
    for j in 0..dim {
        for k in j..dim {
            cov[(j, k)] /= weight;
            cov[(k, j)] = cov[(j, k)];
        }
    }

    let sigma = match structure {
        CovarianceStructure::Spherical => {
            let avg = (cov.trace() / dim as f64).max(VARIANCE_FLOOR);
            DMatrix::from_diagonal_element(dim, dim, avg)
        }
        CovarianceStructure::Diagonal => {
            DMatrix::from_fn(dim, dim, |j, k| {
                if j == k {
                    cov[(j, j)].max(VARIANCE_FLOOR)
                } else {
                    0.0
                }
            })
        }
        CovarianceStructure::Full => {
            let eigen = nalgebra::SymmetricEigen::new(cov);
            let floored = nalgebra::DVector::from_iterator(
                dim,
                eigen.eigenvalues.iter().map(|&v| v.max(VARIANCE_FLOOR)),
            );
            &eigen.eigenvectors
                * DMatrix::from_diagonal(&floored)
                * eigen.eigenvectors.transpose()
        }
    };

    let sigma_rows: Vec<Vec<f64>> = (0..dim)
        .map(|j| (0..dim).map(|k| sigma[(j, k)]).collect())
        .collect();
    Ok((mu, sigma_rows))
}

/// Responsibility-weighted level frequencies per categorical variable,
/// floored at [`ALPHA_FLOOR`] and renormalized.
pub fn m_step_alpha(w: &[CategoricalColumn], z_column: &[f64]) -> Result<Vec<Vec<f64>>> {
    let weight: f64 = z_column.iter().sum();
    if weight < EMPTY_COMPONENT_THRESHOLD {
        return Err(Error::EmptyComponent { weight });
    }
    let mut alphas = Vec::with_capacity(w.len());
    for col in w {
        if col.levels.len() != z_column.len() {
            return Err(Error::DimensionMismatch {
                expected: col.levels.len(),
                actual: z_column.len(),
            });
        }
        let mut probs = vec![0.0; col.n_levels];
        for (&level, &zi) in col.levels.iter().zip(z_column) {
            probs[level] += zi;
        }
        let mut total = 0.0;
        for p in &mut probs {
            *p = (*p / weight).max(ALPHA_FLOOR);
            total += *p;
        }
        for p in &mut probs {
            *p /= total;
        }
        alphas.push(probs);
    }
    Ok(alphas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn resp(rows: Vec<Vec<f64>>) -> Responsibilities {
        Responsibilities { z: rows }
    }

    #[test]
    fn pi_uniform_and_counting() {
        let z = resp(vec![vec![1.0 / 3.0; 3]; 9]);
        for p in m_step_pi(&z) {
            assert_relative_eq!(p, 1.0 / 3.0, max_relative = 1e-14);
        }

        let mut rows = Vec::new();
        for _ in 0..50 {
            rows.push(vec![1.0, 0.0, 0.0]);
        }
        for _ in 0..30 {
            rows.push(vec![0.0, 1.0, 0.0]);
        }
        for _ in 0..20 {
            rows.push(vec![0.0, 0.0, 1.0]);
        }
        assert_eq!(m_step_pi(&resp(rows)), vec![0.5, 0.3, 0.2]);
    }

    #[test]
    fn gaussian_unit_weights_give_sample_moments() {
        let q = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 0.0, -1.0, 2.0]);
        let z = vec![1.0; 4];
        let (mu, sigma) = m_step_gaussian(&q, &z, CovarianceStructure::Full).unwrap();
        assert_relative_eq!(mu[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(mu[1], 2.0, max_relative = 1e-14);
        // Biased (1/n) covariance.
        let mut expect = [[0.0; 2]; 2];
        for i in 0..4 {
            let d = [q[(i, 0)] - 2.0, q[(i, 1)] - 2.0];
            for j in 0..2 {
                for k in 0..2 {
                    expect[j][k] += d[j] * d[k] / 4.0;
                }
            }
        }
        for j in 0..2 {
            for k in 0..2 {
                assert_relative_eq!(sigma[j][k], expect[j][k], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_single_atom_floors_covariance() {
        let q = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 9.9, 9.9, 9.9, 9.9]);
        let z = vec![1.0, 0.0, 0.0];
        let (mu, sigma) = m_step_gaussian(&q, &z, CovarianceStructure::Spherical).unwrap();
        assert_abs_diff_eq!(mu[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[1], -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sigma[0][0], VARIANCE_FLOOR, epsilon = 1e-18);
        assert_abs_diff_eq!(sigma[1][1], VARIANCE_FLOOR, epsilon = 1e-18);
        assert_abs_diff_eq!(sigma[0][1], 0.0, epsilon = 1e-18);
    }

    #[test]
    fn gaussian_empty_component_errors() {
        let q = DMatrix::from_element(3, 1, 0.0);
        let z = vec![0.0, 1e-12, 0.0];
        assert!(matches!(
            m_step_gaussian(&q, &z, CovarianceStructure::Spherical),
            Err(Error::EmptyComponent { .. })
        ));
    }

    #[test]
    fn alpha_frequencies_and_weight_cancellation() {
        let col = CategoricalColumn::new(vec![0, 1, 0, 1], 2).unwrap();
        let all_ones = m_step_alpha(&[col.clone()], &[1.0; 4]).unwrap();
        assert_relative_eq!(all_ones[0][0], 0.5, max_relative = 1e-12);

        // A constant weight cancels out of the frequency ratio.
        let half = m_step_alpha(&[col], &[0.5; 4]).unwrap();
        assert_relative_eq!(half[0][0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(half[0][1], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn alpha_floor_keeps_unseen_levels_positive() {
        let col = CategoricalColumn::new(vec![0, 0, 0], 3).unwrap();
        let alpha = m_step_alpha(&[col], &[1.0; 3]).unwrap();
        assert!(alpha[0][1] > 0.0 && alpha[0][2] > 0.0);
        assert_relative_eq!(alpha[0].iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }
}

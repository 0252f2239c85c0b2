//! Restart initialization.
//!
//! Zero counts must seed the degenerate component or it collapses, so rows
//! with y = 0 start with half their mass there and the rest spread uniformly
//! over the Poisson components. Rows with positive counts are partitioned by
//! a short k-means pass over the standardized continuous block joined with
//! ln(1 + y), using restart-specific random centers, and lean 0.95 toward
//! their cluster.

use crate::model::{Dataset, ModelSpec};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const CLUSTER_LEAN: f64 = 0.95;
const KMEANS_ITERATIONS: usize = 10;

pub(crate) fn initial_responsibilities(
    data: &Dataset,
    spec: &ModelSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = data.n();
    let g_total = spec.n_components;
    let n_poisson = spec.n_poisson_components();
    let offset = usize::from(spec.family.has_degenerate());

    let features = feature_matrix(data);
    let clusters = kmeans_partition(&features, n_poisson, rng);

    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0.0; g_total];
        if spec.family.has_degenerate() && data.y[i] == 0 {
            row[0] = 0.5;
            for g in 0..n_poisson {
                row[offset + g] = 0.5 / n_poisson as f64;
            }
        } else if n_poisson == 1 {
            row[offset] = 1.0;
        } else {
            let spread = (1.0 - CLUSTER_LEAN) / (n_poisson - 1) as f64;
            for g in 0..n_poisson {
                row[offset + g] = if g == clusters[i] { CLUSTER_LEAN } else { spread };
            }
        }
        z.push(row);
    }
    z
}

/// Standardized continuous covariates plus standardized ln(1 + y), row-major.
fn feature_matrix(data: &Dataset) -> Vec<Vec<f64>> {
    let n = data.n();
    let q_dim = data.q_dim();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(q_dim + 1);
    for j in 0..q_dim {
        columns.push((0..n).map(|i| data.q[(i, j)]).collect());
    }
    columns.push(data.y.iter().map(|&y| (1.0 + y as f64).ln()).collect());

    for col in &mut columns {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt().max(1e-9);
        for v in col.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }

    (0..n)
        .map(|i| columns.iter().map(|col| col[i]).collect())
        .collect()
}

fn kmeans_partition(features: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = features.len();
    if k <= 1 {
        return vec![0; n];
    }
    let dim = features[0].len();

    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let mut centers: Vec<Vec<f64>> = indices.iter().take(k).map(|&i| features[i].clone()).collect();
    while centers.len() < k {
        centers.push(features[rng.random_range(0..n)].clone());
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..KMEANS_ITERATIONS {
        for (i, row) in features.iter().enumerate() {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dist: f64 = row
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if dist < best_dist {
                    best_dist = dist;
                    best = c;
                }
            }
            assignment[i] = best;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = features
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(f, _)| f)
                .collect();
            if members.is_empty() {
                *center = features[rng.random_range(0..n)].clone();
                continue;
            }
            for j in 0..dim {
                center[j] = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    assignment
}

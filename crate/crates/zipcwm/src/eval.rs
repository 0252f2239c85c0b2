//! Classification scoring: label alignment, confusion matrices, the adjusted
//! Rand index, and the Pearson dispersion diagnostic.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Label-aligned confusion matrix (rows = true component, columns =
/// predicted after alignment) with per-class and overall misclassification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub matrix: Vec<Vec<usize>>,
    pub per_class_misclassification: Vec<f64>,
    pub overall_misclassification: f64,
    pub accuracy: f64,
    /// `permutation_used[j]` is the true-side label that predicted label
    /// `j + 1` was mapped to.
    pub permutation_used: Vec<usize>,
    pub n: usize,
}

/// Find the relabeling of predicted components that maximizes the diagonal
/// count against the true labels, by exhaustive search over permutations.
/// With `pin_first` the first label stays fixed — the zero component of a
/// zero-inflated fit is structurally identified and must not be permuted.
/// Returns the mapping as 1-based labels: `perm[j]` is the new label for
/// predicted label `j + 1`.
pub fn align_labels(
    true_labels: &[usize],
    predicted_labels: &[usize],
    g: usize,
    pin_first: bool,
) -> Result<Vec<usize>> {
    check_labels(true_labels, predicted_labels, g)?;

    // counts[t][p]: true label t+1 against predicted label p+1.
    let mut counts = vec![vec![0usize; g]; g];
    for (&t, &p) in true_labels.iter().zip(predicted_labels) {
        counts[t - 1][p - 1] += 1;
    }

    let movable: Vec<usize> = if pin_first { (1..g).collect() } else { (0..g).collect() };
    let mut best_perm: Vec<usize> = (0..g).collect();
    let mut best_diag = diagonal_count(&counts, &best_perm);

    let mut arrangement = movable.clone();
    permute(&mut arrangement, 0, &mut |candidate| {
        let mut perm: Vec<usize> = (0..g).collect();
        for (slot, &target) in movable.iter().zip(candidate) {
            perm[*slot] = target;
        }
        let diag = diagonal_count(&counts, &perm);
        if diag > best_diag {
            best_diag = diag;
            best_perm = perm;
        }
    });

    Ok(best_perm.iter().map(|&t| t + 1).collect())
}

/// diagonal under mapping predicted j -> perm[j]
fn diagonal_count(counts: &[Vec<usize>], perm: &[usize]) -> usize {
    let mut total = 0;
    for (p, &t) in perm.iter().enumerate() {
        total += counts[t][p];
    }
    total
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Confusion matrix after internal label alignment. Per-class
/// misclassification is the off-diagonal row mass over the row total.
pub fn confusion(
    true_labels: &[usize],
    predicted_labels: &[usize],
    g: usize,
    pin_first: bool,
) -> Result<ConfusionReport> {
    let perm = align_labels(true_labels, predicted_labels, g, pin_first)?;
    let n = true_labels.len();
    let mut matrix = vec![vec![0usize; g]; g];
    for (&t, &p) in true_labels.iter().zip(predicted_labels) {
        let aligned = perm[p - 1];
        matrix[t - 1][aligned - 1] += 1;
    }
    let mut per_class = vec![0.0; g];
    let mut correct = 0usize;
    for (t, row) in matrix.iter().enumerate() {
        let row_total: usize = row.iter().sum();
        correct += row[t];
        per_class[t] = if row_total == 0 {
            0.0
        } else {
            (row_total - row[t]) as f64 / row_total as f64
        };
    }
    let accuracy = correct as f64 / n as f64;
    Ok(ConfusionReport {
        matrix,
        per_class_misclassification: per_class,
        overall_misclassification: 1.0 - accuracy,
        accuracy,
        permutation_used: perm,
        n,
    })
}

/// Chance-corrected pair-counting agreement between two partitions. When the
/// correction denominator vanishes (both partitions trivial) the convention
/// is 1 for identical partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidData("need at least two observations".into()));
    }

    let index_of = |labels: &[usize]| -> (Vec<usize>, usize) {
        let mut map = BTreeMap::new();
        let mut compact = Vec::with_capacity(labels.len());
        for &l in labels {
            let next = map.len();
            let idx = *map.entry(l).or_insert(next);
            compact.push(idx);
        }
        (compact, map.len())
    };
    let (a_idx, a_k) = index_of(a);
    let (b_idx, b_k) = index_of(b);

    let mut table = vec![vec![0u64; b_k]; a_k];
    for (&i, &j) in a_idx.iter().zip(&b_idx) {
        table[i][j] += 1;
    }
    let comb2 = |x: u64| -> f64 { (x as f64) * (x as f64 - 1.0) / 2.0 };

    let mut sum_cells = 0.0;
    let mut row_sums = vec![0u64; a_k];
    let mut col_sums = vec![0u64; b_k];
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            sum_cells += comb2(c);
            row_sums[i] += c;
            col_sums[j] += c;
        }
    }
    let sum_a: f64 = row_sums.iter().map(|&x| comb2(x)).sum();
    let sum_b: f64 = col_sums.iter().map(|&x| comb2(x)).sum();
    let total_pairs = comb2(n as u64);

    let expected = sum_a * sum_b / total_pairs;
    let max_index = 0.5 * (sum_a + sum_b);
    let denominator = max_index - expected;
    if denominator.abs() < 1e-12 {
        return Ok(if same_partition(&a_idx, &b_idx) { 1.0 } else { 0.0 });
    }
    Ok((sum_cells - expected) / denominator)
}

/// Two labelings induce the same partition iff their label correspondence is
/// a bijection.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut fwd: BTreeMap<usize, usize> = BTreeMap::new();
    let mut back: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if *fwd.entry(x).or_insert(y) != y || *back.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

/// Pearson dispersion: sum (y - mu)^2 / mu over the residual degrees of
/// freedom n - n_params. Values near 1 indicate equidispersion under a
/// Poisson fit.
pub fn dispersion_statistic(y: &[u64], fitted_means: &[f64], n_params: usize) -> Result<f64> {
    if y.len() != fitted_means.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: fitted_means.len(),
        });
    }
    if let Some(&bad) = fitted_means.iter().find(|&&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::NonPositiveMean(bad));
    }
    if y.len() <= n_params {
        return Err(Error::InvalidData(format!(
            "no residual degrees of freedom: n = {} with {} parameters",
            y.len(),
            n_params
        )));
    }
    let chi2: f64 = y
        .iter()
        .zip(fitted_means)
        .map(|(&yi, &mi)| {
            let r = yi as f64 - mi;
            r * r / mi
        })
        .sum();
    Ok(chi2 / (y.len() - n_params) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn align_identity_and_transposition() {
        let truth = vec![1, 2, 3, 1, 2, 3, 1];
        assert_eq!(align_labels(&truth, &truth, 3, true).unwrap(), vec![1, 2, 3]);
        let swapped: Vec<usize> = truth
            .iter()
            .map(|&l| match l {
                2 => 3,
                3 => 2,
                other => other,
            })
            .collect();
        assert_eq!(align_labels(&truth, &swapped, 3, true).unwrap(), vec![1, 3, 2]);
    }

    #[test]
    fn align_matches_exhaustive_search_with_pinned_first_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let truth: Vec<usize> = (0..30).map(|_| rng.random_range(1..=3)).collect();
            let predicted: Vec<usize> = (0..30).map(|_| rng.random_range(1..=3)).collect();
            let perm = align_labels(&truth, &predicted, 3, true).unwrap();
            let accuracy = |p: &[usize]| {
                truth
                    .iter()
                    .zip(&predicted)
                    .filter(|(&t, &pr)| p[pr - 1] == t)
                    .count()
            };
            // Only two candidate permutations keep label 1 pinned.
            let best = accuracy(&[1, 2, 3]).max(accuracy(&[1, 3, 2]));
            assert_eq!(accuracy(&perm), best);
            assert_eq!(perm[0], 1);
        }
    }

    #[test]
    fn confusion_on_perfect_prediction() {
        let labels = vec![1, 2, 3, 2, 1];
        let report = confusion(&labels, &labels, 3, true).unwrap();
        assert_eq!(report.overall_misclassification, 0.0);
        assert_eq!(report.accuracy, 1.0);
        assert!(report.per_class_misclassification.iter().all(|&r| r == 0.0));
    }

    /// Expand a confusion matrix into label vectors realizing it.
    fn realize(matrix: &[[usize; 3]; 3]) -> (Vec<usize>, Vec<usize>) {
        let mut truth = Vec::new();
        let mut predicted = Vec::new();
        for (t, row) in matrix.iter().enumerate() {
            for (p, &count) in row.iter().enumerate() {
                for _ in 0..count {
                    truth.push(t + 1);
                    predicted.push(p + 1);
                }
            }
        }
        (truth, predicted)
    }

    #[test]
    fn confusion_benchmark_blocks() {
        // Rows (485,0,0), (45,253,0), (0,22,195): overall 6.70%, accuracy
        // 93.30%, class-2 rate 15.10%.
        let (truth, predicted) = realize(&[[485, 0, 0], [45, 253, 0], [0, 22, 195]]);
        let report = confusion(&truth, &predicted, 3, true).unwrap();
        assert_relative_eq!(report.overall_misclassification, 0.067, epsilon = 1e-12);
        assert_relative_eq!(report.accuracy, 0.933, epsilon = 1e-12);
        assert_relative_eq!(
            report.per_class_misclassification[1],
            45.0 / 298.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(45.0 / 298.0, 0.1510, epsilon = 5e-5);

        // Rows (485,0,0), (45,167,86), (0,0,217): overall 13.10%.
        let (truth, predicted) = realize(&[[485, 0, 0], [45, 167, 86], [0, 0, 217]]);
        let report = confusion(&truth, &predicted, 3, true).unwrap();
        assert_relative_eq!(report.overall_misclassification, 0.131, epsilon = 1e-12);
    }

    #[test]
    fn confusion_alignment_maximizes_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let truth: Vec<usize> = (0..40).map(|_| rng.random_range(1..=3)).collect();
            let predicted: Vec<usize> = (0..40).map(|_| rng.random_range(1..=3)).collect();
            let aligned = confusion(&truth, &predicted, 3, false).unwrap();
            // Accuracy of the identity mapping can never beat the aligned one.
            let identity_correct = truth
                .iter()
                .zip(&predicted)
                .filter(|(&t, &p)| t == p)
                .count();
            assert!(aligned.accuracy >= identity_correct as f64 / 40.0);
        }
    }

    #[test]
    fn ari_identical_partitions() {
        let labels = vec![1, 1, 2, 3, 2, 1];
        assert_eq!(adjusted_rand_index(&labels, &labels).unwrap(), 1.0);
        // Relabeled but identical as a partition.
        let relabeled = vec![7, 7, 5, 9, 5, 7];
        assert_eq!(adjusted_rand_index(&labels, &relabeled).unwrap(), 1.0);
    }

    #[test]
    fn ari_degenerate_single_cluster_cases() {
        let ones = vec![1; 8];
        assert_eq!(adjusted_rand_index(&ones, &ones).unwrap(), 1.0);
        // All singletons on both sides: identical trivial partitions.
        let singletons: Vec<usize> = (0..8).collect();
        assert_eq!(adjusted_rand_index(&singletons, &singletons).unwrap(), 1.0);
        // One cluster against all singletons: different trivial partitions.
        assert_eq!(adjusted_rand_index(&ones, &singletons).unwrap(), 0.0);
    }

    #[test]
    fn ari_matches_pair_counting_oracle() {
        // Direct enumeration over all C(20, 2) pairs.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let a: Vec<usize> = (0..20).map(|_| rng.random_range(1..=3)).collect();
            let b: Vec<usize> = (0..20).map(|_| rng.random_range(1..=4)).collect();
            let n = a.len();
            let mut n11 = 0.0;
            let mut n00 = 0.0;
            let mut n10 = 0.0;
            let mut n01 = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let same_a = a[i] == a[j];
                    let same_b = b[i] == b[j];
                    match (same_a, same_b) {
                        (true, true) => n11 += 1.0,
                        (false, false) => n00 += 1.0,
                        (true, false) => n10 += 1.0,
                        (false, true) => n01 += 1.0,
                    }
                }
            }
            let total = n11 + n00 + n10 + n01;
            let expected =
                ((n11 + n10) * (n11 + n01) + (n01 + n00) * (n10 + n00)) / total;
            let oracle = (n11 + n00 - expected) / (total - expected);
            let ari = adjusted_rand_index(&a, &b).unwrap();
            assert_relative_eq!(ari, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn ari_symmetric_and_relabel_invariant() {
        let a = vec![1, 1, 2, 2, 3, 3, 1, 2];
        let b = vec![2, 2, 2, 1, 1, 3, 3, 3];
        let ab = adjusted_rand_index(&a, &b).unwrap();
        let ba = adjusted_rand_index(&b, &a).unwrap();
        assert_relative_eq!(ab, ba, epsilon = 1e-14);
        let relabeled: Vec<usize> = a.iter().map(|&l| 10 - l).collect();
        assert_relative_eq!(
            adjusted_rand_index(&relabeled, &b).unwrap(),
            ab,
            epsilon = 1e-14
        );
    }

    #[test]
    fn ari_one_cluster_versus_finer_partition_is_nonpositive() {
        let coarse = vec![1; 12];
        let finer: Vec<usize> = (0..12).map(|i| 1 + i % 3).collect();
        let ari = adjusted_rand_index(&coarse, &finer).unwrap();
        assert!(ari <= 0.0 + 1e-12);
    }

    #[test]
    fn dispersion_zero_residuals() {
        let y = vec![2u64, 5, 1];
        let mu = vec![2.0, 5.0, 1.0];
        assert_eq!(dispersion_statistic(&y, &mu, 1).unwrap(), 0.0);
    }

    #[test]
    fn dispersion_near_one_for_poisson_samples() {
        // Intercept-only scoring of genuine Poisson draws.
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut within = 0;
        for _ in 0..5 {
            let n = 4000;
            let lambda = 4.0;
            let y: Vec<u64> = (0..n)
                .map(|_| {
                    let mut k = 0u64;
                    let mut cum = (-lambda as f64).exp();
                    let mut pmf = cum;
                    let u: f64 = rng.random();
                    while u > cum && k < 100 {
                        k += 1;
                        pmf *= lambda / k as f64;
                        cum += pmf;
                    }
                    k
                })
                .collect();
            let mean = y.iter().sum::<u64>() as f64 / n as f64;
            let mu = vec![mean; n];
            let stat = dispersion_statistic(&y, &mu, 1).unwrap();
            if (0.9..1.1).contains(&stat) {
                within += 1;
            }
        }
        assert!(within >= 4, "only {within}/5 seeds landed in (0.9, 1.1)");
    }

    #[test]
    fn dispersion_flags_zero_inflated_data_scored_by_a_pooled_poisson_fit() {
        // Structural zeros inflate the variance relative to the pooled mean,
        // so the statistic moves away from 1 (upward) on such data.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 3000;
        let y: Vec<u64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.5 {
                    0
                } else {
                    let lambda = 6.0f64;
                    let mut k = 0u64;
                    let mut cum = (-lambda).exp();
                    let mut pmf = cum;
                    let u: f64 = rng.random();
                    while u > cum && k < 100 {
                        k += 1;
                        pmf *= lambda / k as f64;
                        cum += pmf;
                    }
                    k
                }
            })
            .collect();
        let mean = y.iter().sum::<u64>() as f64 / n as f64;
        let stat = dispersion_statistic(&y, &vec![mean; n], 1).unwrap();
        assert!(stat > 1.5, "zero inflation should overdisperse, got {stat}");
    }

    #[test]
    fn dispersion_rejects_bad_inputs() {
        assert!(dispersion_statistic(&[1, 2], &[1.0, 0.0], 1).is_err());
        assert!(dispersion_statistic(&[1, 2], &[1.0, 1.0], 2).is_err());
        assert!(dispersion_statistic(&[1], &[1.0, 1.0], 0).is_err());
    }
}

//! Dataset container and regression design construction.

use crate::error::{Error, Result};
use crate::model::CategoricalCoding;
use nalgebra::DMatrix;

/// One categorical covariate, stored as 0-based level indices. An index `s`
/// stands for the one-hot vector with a single 1 in position `s`, so one-hot
/// validity holds by construction; level codes in files and reports are
/// 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalColumn {
    pub levels: Vec<usize>,
    pub n_levels: usize,
}

impl CategoricalColumn {
    pub fn new(levels: Vec<usize>, n_levels: usize) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::InvalidData(format!(
                "categorical variables need at least 2 levels, got {n_levels}"
            )));
        }
        if let Some(&bad) = levels.iter().find(|&&s| s >= n_levels) {
            return Err(Error::InvalidData(format!(
                "level index {bad} out of range for a {n_levels}-level variable"
            )));
        }
        Ok(CategoricalColumn { levels, n_levels })
    }
}

/// Observed sample: counts, continuous covariates, categorical covariates,
/// and the intercept-augmented regression design built from them. Optional
/// ground-truth component labels (1-based) ride along for simulation and
/// evaluation workflows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<u64>,
    pub q: DMatrix<f64>,
    pub w: Vec<CategoricalColumn>,
    pub x: DMatrix<f64>,
    pub true_labels: Option<Vec<usize>>,
}

/// Dimensions needed for parameter counting and validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDims {
    pub n: usize,
    pub q_dim: usize,
    pub level_counts: Vec<usize>,
    pub design_cols: usize,
}

impl Dataset {
    /// Assemble a dataset, building the design matrix as
    /// `[1 | continuous columns | coded categorical columns]`.
    pub fn new(
        y: Vec<u64>,
        q: DMatrix<f64>,
        w: Vec<CategoricalColumn>,
        coding: CategoricalCoding,
        true_labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = y.len();
        if q.nrows() != n && !(q.ncols() == 0 && q.nrows() == 0) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: q.nrows(),
            });
        }
        for col in &w {
            if col.levels.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: col.levels.len(),
                });
            }
        }
        if let Some(labels) = &true_labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: labels.len(),
                });
            }
            if labels.iter().any(|&l| l == 0) {
                return Err(Error::InvalidData("labels are 1-based; found 0".into()));
            }
        }
        let q = if q.ncols() == 0 {
            DMatrix::zeros(n, 0)
        } else {
            q
        };
        let x = design_matrix(&q, &w, coding);
        Ok(Dataset {
            y,
            q,
            w,
            x,
            true_labels,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q_dim(&self) -> usize {
        self.q.ncols()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.w.iter().map(|c| c.n_levels).collect()
    }

    pub fn dims(&self) -> DataDims {
        DataDims {
            n: self.n(),
            q_dim: self.q_dim(),
            level_counts: self.level_counts(),
            design_cols: self.x.ncols(),
        }
    }

    /// Level indices of observation `i` across the categorical block.
    pub fn w_row(&self, i: usize) -> Vec<usize> {
        self.w.iter().map(|c| c.levels[i]).collect()
    }
}

/// Build the intercept-augmented design matrix. Dummy coding emits r-1
/// indicators per categorical variable (level 1 is the reference); numeric
/// coding emits the 1-based level code as a single column.
pub fn design_matrix(
    q: &DMatrix<f64>,
    w: &[CategoricalColumn],
    coding: CategoricalCoding,
) -> DMatrix<f64> {
    let n = if q.ncols() > 0 {
        q.nrows()
    } else {
        w.first().map_or(q.nrows(), |c| c.levels.len())
    };
    let w_cols: usize = match coding {
        CategoricalCoding::Dummy => w.iter().map(|c| c.n_levels - 1).sum(),
        CategoricalCoding::Numeric => w.len(),
    };
    let mut x = DMatrix::zeros(n, 1 + q.ncols() + w_cols);
    for i in 0..n {
        x[(i, 0)] = 1.0;
    }
    for j in 0..q.ncols() {
        for i in 0..n {
            x[(i, 1 + j)] = q[(i, j)];
        }
    }
    let mut col = 1 + q.ncols();
    for var in w {
        match coding {
            CategoricalCoding::Dummy => {
                for level in 1..var.n_levels {
                    for (i, &s) in var.levels.iter().enumerate() {
                        x[(i, col)] = if s == level { 1.0 } else { 0.0 };
                    }
                    col += 1;
                }
            }
            CategoricalCoding::Numeric => {
                for (i, &s) in var.levels.iter().enumerate() {
                    x[(i, col)] = (s + 1) as f64;
                }
                col += 1;
            }
        }
    }
    x
}

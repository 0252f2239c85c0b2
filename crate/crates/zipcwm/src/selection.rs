//! Information criteria and the component-count sweep.

use crate::em::{complete_data_loglik, fit_em, EmConfig, FitReport};
use crate::error::{Error, Result};
use crate::model::{count_free_parameters, Dataset, ModelSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// The eight selection criteria, all reported so that smaller is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    Icl,
    Awe,
    Aic3,
    Aicc,
    Aicu,
    Caic,
}

impl Criterion {
    pub const ALL: [Criterion; 8] = [
        Criterion::Aic,
        Criterion::Bic,
        Criterion::Icl,
        Criterion::Awe,
        Criterion::Aic3,
        Criterion::Aicc,
        Criterion::Aicu,
        Criterion::Caic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Icl => "icl",
            Criterion::Awe => "awe",
            Criterion::Aic3 => "aic3",
            Criterion::Aicc => "aicc",
            Criterion::Aicu => "aicu",
            Criterion::Caic => "caic",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One row of the selection table. `aicc`/`aicu` are `None` when the sample
/// is too small for their correction term (n <= k + 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaRow {
    pub g: usize,
    pub loglik: f64,
    pub complete_loglik: f64,
    pub entropy: f64,
    pub k: usize,
    pub n: usize,
    pub aic: f64,
    pub bic: f64,
    pub icl: f64,
    pub awe: f64,
    pub aic3: f64,
    pub aicc: Option<f64>,
    pub aicu: Option<f64>,
    pub caic: f64,
}

impl CriteriaRow {
    pub fn value(&self, criterion: Criterion) -> Option<f64> {
        match criterion {
            Criterion::Aic => Some(self.aic),
            Criterion::Bic => Some(self.bic),
            Criterion::Icl => Some(self.icl),
            Criterion::Awe => Some(self.awe),
            Criterion::Aic3 => Some(self.aic3),
            Criterion::Aicc => self.aicc,
            Criterion::Aicu => self.aicu,
            Criterion::Caic => Some(self.caic),
        }
    }
}

/// Evaluate all eight criteria from the fit summaries. The entropy is the
/// Shannon entropy of the posterior responsibilities; tiny negative values
/// from floating-point accumulation are clamped to zero.
pub fn compute_criteria(
    loglik: f64,
    complete_loglik: f64,
    entropy: f64,
    k: usize,
    n: usize,
    g: usize,
) -> CriteriaRow {
    let entropy = entropy.max(0.0);
    let kf = k as f64;
    let nf = n as f64;
    let aic = -2.0 * loglik + 2.0 * kf;
    let bic = -2.0 * loglik + kf * nf.ln();
    let (aicc, aicu) = if n > k + 1 {
        let aicc = aic + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0);
        let aicu = aicc + nf * (nf / (nf - kf - 1.0)).ln();
        (Some(aicc), Some(aicu))
    } else {
        (None, None)
    };
    CriteriaRow {
        g,
        loglik,
        complete_loglik,
        entropy,
        k,
        n,
        aic,
        bic,
        icl: bic + 2.0 * entropy,
        awe: -2.0 * complete_loglik + 2.0 * kf * (1.5 + nf.ln()),
        aic3: -2.0 * loglik + 3.0 * kf,
        aicc,
        aicu,
        caic: -2.0 * loglik + kf * (nf.ln() + 1.0),
    }
}

/// Sweep result: one criteria row per surviving candidate G, the argmin per
/// criterion (ties break toward the smaller G), and the fit reports that
/// produced them. Failed candidates are recorded and excluded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub rows: Vec<CriteriaRow>,
    pub chosen: BTreeMap<Criterion, usize>,
    pub failed: Vec<(usize, String)>,
    #[serde(skip)]
    pub fits: Vec<(usize, FitReport)>,
}

impl SelectionReport {
    pub fn fit_for(&self, g: usize) -> Option<&FitReport> {
        self.fits.iter().find(|(fg, _)| *fg == g).map(|(_, f)| f)
    }
}

/// Fit each candidate component count and assemble the criteria table.
/// Deterministic given `config.seed`: every candidate reuses the same
/// restart seed stream.
pub fn sweep_components(
    data: &Dataset,
    spec_template: &ModelSpec,
    g_candidates: &[usize],
    config: &EmConfig,
) -> Result<SelectionReport> {
    if g_candidates.is_empty() {
        return Err(Error::InvalidSpec("empty candidate list for G".into()));
    }
    let outcomes: Vec<(usize, std::result::Result<(CriteriaRow, FitReport), String>)> = g_candidates
        .iter()
        .map(|&g| {
            let mut spec = *spec_template;
            spec.n_components = g;
            let outcome = fit_candidate(data, &spec, config).map_err(|e| e.to_string());
            (g, outcome)
        })
        .collect();

    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut failed = Vec::new();
    for (g, outcome) in outcomes {
        match outcome {
            Ok((row, fit)) => {
                rows.push(row);
                fits.push((g, fit));
            }
            Err(cause) => failed.push((g, cause)),
        }
    }
    if rows.is_empty() {
        return Err(Error::AllRestartsFailed {
            attempted: g_candidates.len(),
            causes: failed,
        });
    }

    let mut chosen = BTreeMap::new();
    for criterion in Criterion::ALL {
        let mut best: Option<(usize, f64)> = None;
        for row in &rows {
            if let Some(value) = row.value(criterion) {
                let better = match best {
                    None => true,
                    Some((_, b)) => value < b,
                };
                if better {
                    best = Some((row.g, value));
                }
            }
        }
        if let Some((g, _)) = best {
            chosen.insert(criterion, g);
        }
    }

    Ok(SelectionReport {
        rows,
        chosen,
        failed,
        fits,
    })
}

fn fit_candidate(
    data: &Dataset,
    spec: &ModelSpec,
    config: &EmConfig,
) -> Result<(CriteriaRow, FitReport)> {
    spec.validate()?;
    let fit = fit_em(data, spec, config)?;
    let k = count_free_parameters(spec, &data.dims());
    let entropy = fit.responsibilities.entropy();
    let complete = complete_data_loglik(data, &fit.params, spec, &fit.responsibilities)?;
    let row = compute_criteria(fit.final_loglik, complete, entropy, k, data.n(), spec.n_components);
    Ok((row, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn zero_loglik_zero_parameters() {
        let row = compute_criteria(0.0, 0.0, 0.0, 0, 50, 1);
        assert_eq!(row.aic, 0.0);
        assert_eq!(row.bic, 0.0);
        assert_eq!(row.caic, 0.0);
        assert_eq!(row.icl, 0.0);
    }

    #[test]
    fn textbook_arithmetic() {
        let row = compute_criteria(-100.0, -110.0, 0.0, 5, 100, 3);
        assert_abs_diff_eq!(row.aic, 210.0, epsilon = 1e-12);
        assert_relative_eq!(row.bic, 223.02585092994046, max_relative = 1e-14);
        assert_relative_eq!(row.caic, 228.02585092994046, max_relative = 1e-14);
        assert_abs_diff_eq!(row.aic3, 215.0, epsilon = 1e-12);
        let aicc = row.aicc.unwrap();
        assert_relative_eq!(aicc, 210.0 + 2.0 * 5.0 * 6.0 / 94.0, max_relative = 1e-14);
        assert!(row.aicu.unwrap() > aicc);
    }

    #[test]
    fn hard_assignment_makes_icl_equal_bic() {
        let row = compute_criteria(-40.0, -40.0, 0.0, 3, 30, 2);
        assert_eq!(row.icl, row.bic);
    }

    #[test]
    fn icl_minus_bic_is_twice_entropy() {
        let row = compute_criteria(-40.0, -45.0, 3.25, 3, 30, 2);
        assert_relative_eq!(row.icl - row.bic, 6.5, max_relative = 1e-14);
        assert!(row.icl >= row.bic);
    }

    #[test]
    fn small_sample_corrections_unavailable() {
        let row = compute_criteria(-10.0, -10.0, 0.0, 9, 10, 2);
        assert!(row.aicc.is_none());
        assert!(row.aicu.is_none());
    }

    #[test]
    fn corrected_criteria_dominate_their_bases() {
        for k in 1..6 {
            let row = compute_criteria(-55.0, -60.0, 1.0, k, 40, 2);
            assert!(row.aicc.unwrap() >= row.aic);
            assert!(row.caic >= row.bic);
        }
    }

    #[test]
    fn argmin_invariant_under_constant_loglik_shift() {
        let build = |shift: f64| -> Vec<CriteriaRow> {
            (2..=5)
                .map(|g| {
                    let ll = -100.0 - 10.0 / g as f64 + shift;
                    compute_criteria(ll, ll - 5.0, 2.0, 4 * g, 200, g)
                })
                .collect()
        };
        let base = build(0.0);
        let shifted = build(123.0);
        for criterion in Criterion::ALL {
            let pick = |rows: &[CriteriaRow]| {
                rows.iter()
                    .filter_map(|r| r.value(criterion).map(|v| (r.g, v)))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .map(|(g, _)| g)
            };
            assert_eq!(pick(&base), pick(&shifted), "{criterion}");
        }
    }
}

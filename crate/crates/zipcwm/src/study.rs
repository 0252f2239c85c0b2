//! The end-to-end simulation study: generate replicate datasets at several
//! sample sizes, sweep the component count with the full model, score
//! classification against the reduced fixed-weight family, and summarize
//! parameter recovery. Everything is seed-derived, so a study is
//! reproducible byte for byte.

use crate::em::EmConfig;
use crate::error::Result;
use crate::eval::{adjusted_rand_index, align_labels, confusion};
use crate::math::{derive_seed, fmt_f64, median};
use crate::model::{Family, ModelSpec};
use crate::selection::{sweep_components, CriteriaRow, Criterion};
use crate::sim::{generate, SimulationDesign};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const TRUE_COMPONENTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub g_min: usize,
    pub g_max: usize,
    #[serde(skip, default)]
    pub em: EmConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: 0,
            sizes: vec![200, 500, 1000],
            replicates: 10,
            g_min: 2,
            g_max: 5,
            em: EmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScore {
    pub misclassification: f64,
    pub ari: f64,
}

/// Recovered parameters of the true-G fit, reordered to the generating
/// component order (zero component, then the two Poisson components).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub pi: Vec<f64>,
    pub gaussian_means: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub n: usize,
    pub replicate: usize,
    pub dataset_seed: u64,
    pub chosen: BTreeMap<Criterion, usize>,
    pub criteria_rows: Vec<CriteriaRow>,
    pub sweep_failures: Vec<(usize, String)>,
    pub recovery: Option<RecoverySummary>,
    pub zipcwm: Option<ClassificationScore>,
    pub fzip: Option<ClassificationScore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    /// Per criterion, how many replicates selected the generating G.
    pub criteria_select_true_g: BTreeMap<Criterion, usize>,
    pub median_misclassification: Option<f64>,
    pub median_ari: Option<f64>,
    pub median_fzip_misclassification: Option<f64>,
    /// Replicates where the full model strictly beat the reduced family.
    pub zipcwm_beats_fzip: usize,
    pub scored_pairs: usize,
    pub median_pi: Option<Vec<f64>>,
    pub median_gaussian_means: Option<Vec<Vec<f64>>>,
    pub median_beta: Option<Vec<Vec<f64>>>,
    pub replicates: Vec<ReplicateOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub seed: u64,
    pub replicates: usize,
    pub g_min: usize,
    pub g_max: usize,
    pub sizes: Vec<SizeSummary>,
}

pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    let mut sizes = Vec::with_capacity(config.sizes.len());
    for &n in &config.sizes {
        let outcomes: Vec<Result<ReplicateOutcome>> = (0..config.replicates)
            .into_par_iter()
            .map(|r| run_replicate(config, n, r))
            .collect();
        let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
        sizes.push(summarize_size(n, outcomes));
    }
    Ok(StudyReport {
        seed: config.seed,
        replicates: config.replicates,
        g_min: config.g_min,
        g_max: config.g_max,
        sizes,
    })
}

fn run_replicate(config: &StudyConfig, n: usize, replicate: usize) -> Result<ReplicateOutcome> {
    let dataset_seed = derive_seed(config.seed, n as u64 * 1009 + replicate as u64);
    let design = SimulationDesign::new(n, dataset_seed);
    let data = generate(&design)?;
    let truth = data.true_labels.clone().expect("generator provides labels");

    let template = design.truth_spec();
    let g_candidates: Vec<usize> = (config.g_min..=config.g_max).collect();
    let sweep_config = EmConfig {
        seed: derive_seed(dataset_seed, 101),
        ..config.em.clone()
    };
    let sweep = sweep_components(&data, &template, &g_candidates, &sweep_config)?;

    let mut recovery = None;
    let mut zipcwm_score = None;
    if let Some(fit) = sweep.fit_for(TRUE_COMPONENTS) {
        let perm = align_labels(&truth, &fit.map_labels, TRUE_COMPONENTS, true)?;
        let conf = confusion(&truth, &fit.map_labels, TRUE_COMPONENTS, true)?;
        let ari = adjusted_rand_index(&truth, &fit.map_labels)?;
        zipcwm_score = Some(ClassificationScore {
            misclassification: conf.overall_misclassification,
            ari,
        });
        // Predicted label assigned to each true Poisson component.
        let predicted_for = |true_label: usize| -> Option<usize> {
            (1..=TRUE_COMPONENTS).find(|&p| perm[p - 1] == true_label)
        };
        if let (Some(p2), Some(p3)) = (predicted_for(2), predicted_for(3)) {
            let params = &fit.params;
            recovery = Some(RecoverySummary {
                pi: vec![params.pi[0], params.pi[p2 - 1], params.pi[p3 - 1]],
                gaussian_means: vec![
                    params.components[p2 - 2].mu.clone(),
                    params.components[p3 - 2].mu.clone(),
                ],
                beta: vec![
                    params.components[p2 - 2].beta.clone(),
                    params.components[p3 - 2].beta.clone(),
                ],
            });
        }
    }

    let fzip_spec = ModelSpec {
        family: Family::Fzip,
        ..template
    };
    let fzip_config = EmConfig {
        seed: derive_seed(dataset_seed, 202),
        ..config.em.clone()
    };
    let fzip_score = match crate::em::fit_em(&data, &fzip_spec, &fzip_config) {
        Ok(fit) => {
            let conf = confusion(&truth, &fit.map_labels, TRUE_COMPONENTS, true)?;
            let ari = adjusted_rand_index(&truth, &fit.map_labels)?;
            Some(ClassificationScore {
                misclassification: conf.overall_misclassification,
                ari,
            })
        }
        Err(_) => None,
    };

    Ok(ReplicateOutcome {
        n,
        replicate,
        dataset_seed,
        chosen: sweep.chosen.clone(),
        criteria_rows: sweep.rows.clone(),
        sweep_failures: sweep.failed.clone(),
        recovery,
        zipcwm: zipcwm_score,
        fzip: fzip_score,
    })
}

fn summarize_size(n: usize, replicates: Vec<ReplicateOutcome>) -> SizeSummary {
    let mut criteria_select_true_g = BTreeMap::new();
    for criterion in Criterion::ALL {
        let count = replicates
            .iter()
            .filter(|rep| rep.chosen.get(&criterion) == Some(&TRUE_COMPONENTS))
            .count();
        criteria_select_true_g.insert(criterion, count);
    }

    let misclass: Vec<f64> = replicates
        .iter()
        .filter_map(|r| r.zipcwm.as_ref().map(|s| s.misclassification))
        .collect();
    let aris: Vec<f64> = replicates
        .iter()
        .filter_map(|r| r.zipcwm.as_ref().map(|s| s.ari))
        .collect();
    let fzip_misclass: Vec<f64> = replicates
        .iter()
        .filter_map(|r| r.fzip.as_ref().map(|s| s.misclassification))
        .collect();
    let pairs: Vec<(&ClassificationScore, &ClassificationScore)> = replicates
        .iter()
        .filter_map(|r| r.zipcwm.as_ref().zip(r.fzip.as_ref()))
        .collect();
    let zipcwm_beats_fzip = pairs
        .iter()
        .filter(|(z, f)| z.misclassification < f.misclassification)
        .count();

    let median_vec = |extract: &dyn Fn(&RecoverySummary) -> &Vec<f64>| -> Option<Vec<f64>> {
        let rows: Vec<&Vec<f64>> = replicates
            .iter()
            .filter_map(|r| r.recovery.as_ref().map(extract))
            .collect();
        if rows.is_empty() {
            return None;
        }
        let len = rows[0].len();
        Some(
            (0..len)
                .map(|j| median(&rows.iter().map(|v| v[j]).collect::<Vec<_>>()))
                .collect(),
        )
    };
    let median_pi = median_vec(&|r| &r.pi);
    let median_gaussian_means = (0..2)
        .map(|c| median_vec(&move |r: &RecoverySummary| &r.gaussian_means[c]))
        .collect::<Option<Vec<_>>>();
    let median_beta = (0..2)
        .map(|c| median_vec(&move |r: &RecoverySummary| &r.beta[c]))
        .collect::<Option<Vec<_>>>();

    SizeSummary {
        n,
        criteria_select_true_g,
        median_misclassification: if misclass.is_empty() { None } else { Some(median(&misclass)) },
        median_ari: if aris.is_empty() { None } else { Some(median(&aris)) },
        median_fzip_misclassification: if fzip_misclass.is_empty() {
            None
        } else {
            Some(median(&fzip_misclass))
        },
        zipcwm_beats_fzip,
        scored_pairs: pairs.len(),
        median_pi,
        median_gaussian_means,
        median_beta,
        replicates,
    }
}

/// Write the consolidated report: `study.json` plus per-size CSV tables for
/// selection, recovery, and classification.
pub fn write_study(report: &StudyReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    let mut files = Vec::new();
    let json_path = dir.join("study.json");
    crate::io::write_json(&json_path, report)?;
    files.push(json_path);

    for size in &report.sizes {
        let selection_path = dir.join(format!("selection_n{}.csv", size.n));
        write_selection_table(&selection_path, size)?;
        files.push(selection_path);

        let recovery_path = dir.join(format!("recovery_n{}.csv", size.n));
        write_recovery_table(&recovery_path, size)?;
        files.push(recovery_path);

        let classification_path = dir.join(format!("classification_n{}.csv", size.n));
        write_classification_table(&classification_path, size)?;
        files.push(classification_path);
    }
    Ok(files)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| crate::error::Error::io(path, e))?,
    ))
}

fn write_selection_table(path: &Path, size: &SizeSummary) -> Result<()> {
    let mut out = create(path)?;
    let io_err = |e| crate::error::Error::io(path, e);
    writeln!(out, "replicate,g,loglik,k,aic,bic,icl,awe,aic3,aicc,aicu,caic").map_err(io_err)?;
    for rep in &size.replicates {
        for row in &rep.criteria_rows {
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                rep.replicate,
                row.g,
                fmt_f64(row.loglik),
                row.k,
                fmt_f64(row.aic),
                fmt_f64(row.bic),
                fmt_f64(row.icl),
                fmt_f64(row.awe),
                fmt_f64(row.aic3),
                opt(row.aicc),
                opt(row.aicu),
                fmt_f64(row.caic),
            )
            .map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

fn write_recovery_table(path: &Path, size: &SizeSummary) -> Result<()> {
    let mut out = create(path)?;
    let io_err = |e| crate::error::Error::io(path, e);
    let mut header = vec!["replicate".to_string(), "pi1".into(), "pi2".into(), "pi3".into()];
    for c in 2..=3 {
        for j in 1..=3 {
            header.push(format!("mu{c}_{j}"));
        }
    }
    for c in 2..=3 {
        for j in 0..6 {
            header.push(format!("beta{c}_{j}"));
        }
    }
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for rep in &size.replicates {
        let Some(recovery) = &rep.recovery else { continue };
        let mut cells = vec![rep.replicate.to_string()];
        cells.extend(recovery.pi.iter().map(|v| fmt_f64(*v)));
        for mu in &recovery.gaussian_means {
            cells.extend(mu.iter().map(|v| fmt_f64(*v)));
        }
        for beta in &recovery.beta {
            cells.extend(beta.iter().map(|v| fmt_f64(*v)));
        }
        writeln!(out, "{}", cells.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn write_classification_table(path: &Path, size: &SizeSummary) -> Result<()> {
    let mut out = create(path)?;
    let io_err = |e| crate::error::Error::io(path, e);
    writeln!(out, "replicate,zipcwm_misclassification,zipcwm_ari,fzip_misclassification,fzip_ari")
        .map_err(io_err)?;
    for rep in &size.replicates {
        let score = |s: &Option<ClassificationScore>, f: &dyn Fn(&ClassificationScore) -> f64| {
            s.as_ref().map(|v| fmt_f64(f(v))).unwrap_or_default()
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            rep.replicate,
            score(&rep.zipcwm, &|s| s.misclassification),
            score(&rep.zipcwm, &|s| s.ari),
            score(&rep.fzip, &|s| s.misclassification),
            score(&rep.fzip, &|s| s.ari),
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

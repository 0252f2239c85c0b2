//! Zero-inflated Poisson cluster-weighted models (ZIPCWM) and their reduced
//! families: density evaluation, multi-restart EM fitting with an IRLS inner
//! solver for the Poisson regression block, information-criterion model
//! selection, seedable synthetic benchmarks, and classification scoring.
//!
//! A ZIPCWM mixes a point mass at zero (the "degenerate" component) with
//! Poisson regression components, each of which also carries a density over
//! the covariates: a Gaussian block for continuous covariates and independent
//! multinomial blocks for categorical ones. Setting those covariate densities
//! to one recovers fixed zero-inflated Poisson mixtures (FZIP) and the
//! two-component ZIP distribution; dropping the zero component recovers the
//! Poisson cluster-weighted model (PCWM) and the standard Poisson mixture.
//!
//! Note that the degenerate component carries no covariate density at all, so
//! responsibilities for zero counts weigh a bare mixing proportion against
//! pmf-times-density products of the other components. That asymmetry is part
//! of the model definition, not an artifact of this implementation.

pub mod em;
pub mod error;
pub mod eval;
pub mod io;
pub mod math;
pub mod model;
pub mod selection;
pub mod sim;
pub mod study;

pub use em::{fit_em, EmConfig, FitReport, Responsibilities};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{adjusted_rand_index, align_labels, confusion, ConfusionReport};
pub use model::{
    CategoricalCoding, ComponentParameters, CovarianceStructure, Dataset, Family,
    MixtureParameters, ModelSpec,
};
pub use selection::{compute_criteria, sweep_components, CriteriaRow, Criterion, SelectionReport};
pub use sim::{generate, SimulationDesign};

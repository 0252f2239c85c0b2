//! Model families, datasets, parameters, and per-observation densities.

mod data;
mod density;
mod params;

pub use data::{design_matrix, CategoricalColumn, DataDims, Dataset};
pub use density::{
    categorical_log_pmf, check_identifiability, count_free_parameters, gaussian_log_density,
    joint_log_density, poisson_log_pmf, poisson_mean, LogDensityRow, RankReport,
};
pub(crate) use density::{gaussian_log_density_prepared, poisson_log_pmf_from_eta};
pub use params::{ComponentParameters, MixtureParameters};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Mixture family. `Zipcwm` is the full model; the others are its reductions:
/// `Pcwm` drops the zero component, `Fzip` and `Zip` drop the covariate
/// densities, and `PoissonMixture` additionally holds each component's mean
/// constant (one rate per component, no regression).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Zipcwm,
    Pcwm,
    Fzip,
    Zip,
    PoissonMixture,
}

impl Family {
    /// Whether component 1 is the point mass at zero.
    pub fn has_degenerate(self) -> bool {
        matches!(self, Family::Zipcwm | Family::Fzip | Family::Zip)
    }

    /// Whether component densities include the Gaussian/multinomial
    /// covariate blocks (p(x) != 1).
    pub fn models_covariates(self) -> bool {
        matches!(self, Family::Zipcwm | Family::Pcwm)
    }

    /// Whether the Poisson mean regresses on the design matrix. The standard
    /// Poisson mixture keeps one constant rate per component instead.
    pub fn regresses_on_design(self) -> bool {
        !matches!(self, Family::PoissonMixture)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Zipcwm => "zipcwm",
            Family::Pcwm => "pcwm",
            Family::Fzip => "fzip",
            Family::Zip => "zip",
            Family::PoissonMixture => "poisson-mixture",
        };
        f.write_str(name)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zipcwm" => Ok(Family::Zipcwm),
            "pcwm" => Ok(Family::Pcwm),
            "fzip" => Ok(Family::Fzip),
            "zip" => Ok(Family::Zip),
            "poisson-mixture" | "poisson_mixture" => Ok(Family::PoissonMixture),
            other => Err(Error::Parse(format!(
                "unknown family `{other}` (expected zipcwm|pcwm|fzip|zip|poisson-mixture)"
            ))),
        }
    }
}

/// Constraint applied to each component's Gaussian covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceStructure {
    #[default]
    Spherical,
    Diagonal,
    Full,
}

impl FromStr for CovarianceStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spherical" => Ok(CovarianceStructure::Spherical),
            "diagonal" => Ok(CovarianceStructure::Diagonal),
            "full" => Ok(CovarianceStructure::Full),
            other => Err(Error::Parse(format!(
                "unknown covariance structure `{other}` (expected spherical|diagonal|full)"
            ))),
        }
    }
}

/// How categorical covariates enter the regression design matrix: `Dummy`
/// expands each variable into r-1 indicator columns (level 1 is the
/// reference), `Numeric` uses the 1-based level code as a single column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoricalCoding {
    #[default]
    Dummy,
    Numeric,
}

impl FromStr for CategoricalCoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dummy" => Ok(CategoricalCoding::Dummy),
            "numeric" => Ok(CategoricalCoding::Numeric),
            other => Err(Error::Parse(format!(
                "unknown categorical coding `{other}` (expected dummy|numeric)"
            ))),
        }
    }
}

/// Which model to fit: family, total component count (the zero component of
/// zero-inflated families counts toward `n_components`), and the covariance
/// and coding conventions. The covariate blocks themselves are carried by the
/// [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub n_components: usize,
    pub covariance: CovarianceStructure,
    pub coding: CategoricalCoding,
}

impl ModelSpec {
    pub fn new(family: Family, n_components: usize) -> Result<Self> {
        let spec = ModelSpec {
            family,
            n_components,
            covariance: CovarianceStructure::default(),
            coding: CategoricalCoding::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_covariance(mut self, covariance: CovarianceStructure) -> Self {
        self.covariance = covariance;
        self
    }

    pub fn with_coding(mut self, coding: CategoricalCoding) -> Self {
        self.coding = coding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.n_components;
        match self.family {
            Family::Zip if g != 2 => Err(Error::InvalidSpec(format!(
                "the zip family has exactly 2 components (point mass + one Poisson), got {g}"
            ))),
            Family::Zipcwm | Family::Fzip if g < 2 => Err(Error::InvalidSpec(format!(
                "zero-inflated families need at least 2 components, got {g}"
            ))),
            Family::Pcwm | Family::PoissonMixture if g < 1 => Err(Error::InvalidSpec(
                "at least one component is required".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Number of non-degenerate (Poisson) components.
    pub fn n_poisson_components(&self) -> usize {
        if self.family.has_degenerate() {
            self.n_components - 1
        } else {
            self.n_components
        }
    }

    /// Width of the effective regression design for this family.
    pub fn design_cols(&self, data_design_cols: usize) -> usize {
        if self.family.regresses_on_design() {
            data_design_cols
        } else {
            1
        }
    }
}

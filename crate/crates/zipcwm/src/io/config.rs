//! Flat key-value run configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown and duplicate keys
//! are rejected so typos fail loudly instead of silently using defaults.

use crate::error::{Error, Result};
use crate::model::{CategoricalCoding, CovarianceStructure, Family};
use std::path::Path;

/// Optional settings shared by the CLI subcommands; anything left `None`
/// falls back to the command-line flag or its default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub family: Option<Family>,
    pub components: Option<usize>,
    pub covariance: Option<CovarianceStructure>,
    pub coding: Option<CategoricalCoding>,
    pub schema: Option<String>,
    pub input: Option<String>,
    pub output_dir: Option<String>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub replicates: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub g_min: Option<usize>,
    pub g_max: Option<usize>,
    pub em_max_iterations: Option<usize>,
    pub em_loglik_rel_tolerance: Option<f64>,
    pub em_irls_max_steps: Option<usize>,
    pub em_irls_grad_tolerance: Option<f64>,
    pub em_restarts: Option<usize>,
    pub em_ridge: Option<f64>,
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(Error::Parse(format!("line {line_no}: empty value for `{key}`")));
            }
            if seen.iter().any(|k| k == key) {
                return Err(Error::Parse(format!("line {line_no}: duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            config.apply(key, value, line_no)?;
        }
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str, line_no: usize) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str, line_no: usize) -> Result<T> {
            value.parse().map_err(|_| {
                Error::Parse(format!("line {line_no}: invalid value `{value}` for `{key}`"))
            })
        }
        match key {
            "family" => self.family = Some(value.parse()?),
            "components" => self.components = Some(parse(key, value, line_no)?),
            "covariance" => self.covariance = Some(value.parse()?),
            "coding" => self.coding = Some(value.parse()?),
            "schema" => self.schema = Some(value.to_string()),
            "input" => self.input = Some(value.to_string()),
            "output_dir" => self.output_dir = Some(value.to_string()),
            "seed" => self.seed = Some(parse(key, value, line_no)?),
            "n" => self.n = Some(parse(key, value, line_no)?),
            "replicates" => self.replicates = Some(parse(key, value, line_no)?),
            "sizes" => {
                let sizes = value
                    .split(',')
                    .map(|s| parse::<usize>(key, s.trim(), line_no))
                    .collect::<Result<Vec<_>>>()?;
                if sizes.is_empty() {
                    return Err(Error::Parse(format!("line {line_no}: empty size list")));
                }
                self.sizes = Some(sizes);
            }
            "g_min" => self.g_min = Some(parse(key, value, line_no)?),
            "g_max" => self.g_max = Some(parse(key, value, line_no)?),
            "em_max_iterations" => self.em_max_iterations = Some(parse(key, value, line_no)?),
            "em_loglik_rel_tolerance" => {
                self.em_loglik_rel_tolerance = Some(parse(key, value, line_no)?)
            }
            "em_irls_max_steps" => self.em_irls_max_steps = Some(parse(key, value, line_no)?),
            "em_irls_grad_tolerance" => {
                self.em_irls_grad_tolerance = Some(parse(key, value, line_no)?)
            }
            "em_restarts" => self.em_restarts = Some(parse(key, value, line_no)?),
            "em_ridge" => self.em_ridge = Some(parse(key, value, line_no)?),
            other => {
                return Err(Error::Parse(format!("line {line_no}: unknown key `{other}`")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# fitting setup
family = zipcwm
components = 3
covariance = spherical
coding = numeric
seed = 42
sizes = 200, 500, 1000
em_restarts = 10
em_loglik_rel_tolerance = 1e-8
";
        let config = RunConfig::parse(text).unwrap();
        assert_eq!(config.family, Some(Family::Zipcwm));
        assert_eq!(config.components, Some(3));
        assert_eq!(config.sizes, Some(vec![200, 500, 1000]));
        assert_eq!(config.em_loglik_rel_tolerance, Some(1e-8));
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(RunConfig::parse("familly = zipcwm").is_err());
        assert!(RunConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(RunConfig::parse("seed =").is_err());
        assert!(RunConfig::parse("seed").is_err());
        assert!(RunConfig::parse("components = -3").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let config = RunConfig::parse("\n# nothing\n  \nseed = 7 # trailing\n").unwrap();
        assert_eq!(config.seed, Some(7));
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }
}

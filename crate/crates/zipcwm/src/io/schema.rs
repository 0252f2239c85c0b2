//! Column-role schemas for CSV ingestion.

use crate::error::{Error, Result};
use crate::model::Dataset;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Role of one CSV column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "role", content = "levels")]
pub enum ColumnRole {
    Response,
    Continuous,
    Categorical(usize),
    Ignore,
    TrueLabel,
}

/// Header-driven schema: every column of the file must be declared, exactly
/// one as the response. Categorical declarations carry their level count;
/// codes in the file are 1-based integers.
///
/// The text form is a comma-separated list of `name:role` entries, e.g.
/// `y:response,age:continuous,educ:categorical(4),id:ignore`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<(String, ColumnRole)>,
}

impl DatasetSchema {
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for entry in text.split(',') {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (name, role) = entry.split_once(':').ok_or_else(|| {
                Error::Parse(format!("schema entry `{entry}` is not of the form name:role"))
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::Parse(format!("schema entry `{entry}` has an empty name")));
            }
            let role = role.trim();
            let role = if let Some(rest) = role.strip_prefix("categorical") {
                let inner = rest
                    .trim()
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| {
                        Error::Parse(format!(
                            "categorical role for `{name}` must state its level count, e.g. categorical(3)"
                        ))
                    })?;
                let levels: usize = inner.trim().parse().map_err(|_| {
                    Error::Parse(format!("invalid level count `{inner}` for column `{name}`"))
                })?;
                if levels < 2 {
                    return Err(Error::Parse(format!(
                        "column `{name}`: categorical variables need at least 2 levels"
                    )));
                }
                ColumnRole::Categorical(levels)
            } else {
                match role {
                    "response" => ColumnRole::Response,
                    "continuous" => ColumnRole::Continuous,
                    "ignore" => ColumnRole::Ignore,
                    "true_label" => ColumnRole::TrueLabel,
                    other => {
                        return Err(Error::Parse(format!(
                            "unknown role `{other}` for column `{name}` \
                             (expected response|continuous|categorical(N)|ignore|true_label)"
                        )))
                    }
                }
            };
            columns.push((name.to_string(), role));
        }
        let schema = DatasetSchema { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Parse("empty schema".into()));
        }
        let responses = self
            .columns
            .iter()
            .filter(|(_, r)| *r == ColumnRole::Response)
            .count();
        if responses != 1 {
            return Err(Error::Parse(format!(
                "schema must declare exactly one response column, found {responses}"
            )));
        }
        let labels = self
            .columns
            .iter()
            .filter(|(_, r)| *r == ColumnRole::TrueLabel)
            .count();
        if labels > 1 {
            return Err(Error::Parse("at most one true_label column is allowed".into()));
        }
        for (i, (name, _)) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::Parse(format!("duplicate column `{name}` in schema")));
            }
        }
        Ok(())
    }

    pub fn has_true_label(&self) -> bool {
        self.columns.iter().any(|(_, r)| *r == ColumnRole::TrueLabel)
    }

    /// The schema matching how [`write_dataset_csv`](crate::io::write_dataset_csv)
    /// lays out a dataset: `y`, `q1..qQ`, `w1..wP`, and `true_label` when
    /// labels are present.
    pub fn canonical_for(dataset: &Dataset) -> Self {
        let mut columns = vec![("y".to_string(), ColumnRole::Response)];
        for j in 0..dataset.q_dim() {
            columns.push((format!("q{}", j + 1), ColumnRole::Continuous));
        }
        for (k, col) in dataset.w.iter().enumerate() {
            columns.push((format!("w{}", k + 1), ColumnRole::Categorical(col.n_levels)));
        }
        if dataset.true_labels.is_some() {
            columns.push(("true_label".to_string(), ColumnRole::TrueLabel));
        }
        DatasetSchema { columns }
    }
}

impl fmt::Display for DatasetSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, role) in &self.columns {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            match role {
                ColumnRole::Response => write!(f, "{name}:response")?,
                ColumnRole::Continuous => write!(f, "{name}:continuous")?,
                ColumnRole::Categorical(r) => write!(f, "{name}:categorical({r})")?,
                ColumnRole::Ignore => write!(f, "{name}:ignore")?,
                ColumnRole::TrueLabel => write!(f, "{name}:true_label")?,
            }
        }
        Ok(())
    }
}

impl FromStr for DatasetSchema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetSchema::parse(s)
    }
}

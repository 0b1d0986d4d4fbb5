//! Observed time series on a shared time grid, and the CSV form they are
//! stored in:
//!
//! ```text
//! # free-form comment lines
//! t,C1,C2
//! 0,100,0
//! 10,54.1,31.7
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::spline::{self, SplineError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset has no species columns")]
    NoSpecies,
    #[error("species `{name}` has {got} values, expected {expected}")]
    Ragged { name: String, expected: usize, got: usize },
    #[error("{0} species names for {1} value columns")]
    NameCount(usize, usize),
    #[error("value for species {species} at index {index} is not finite")]
    NonFinite { species: usize, index: usize },
    #[error(transparent)]
    Grid(#[from] SplineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    times: Vec<f64>,
    /// `values[s][j]` is species `s` at `times[j]`.
    values: Vec<Vec<f64>>,
    species_names: Vec<String>,
    comments: Vec<String>,
}

impl Dataset {
    pub fn new(
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
        species_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        if times.len() < 4 {
            return Err(SplineError::InsufficientData {
                required: 4,
                degree: 3,
                got: times.len(),
            }
            .into());
        }
        spline::validate_grid(&times)?;
        if values.is_empty() {
            return Err(DatasetError::NoSpecies);
        }
        if species_names.len() != values.len() {
            return Err(DatasetError::NameCount(species_names.len(), values.len()));
        }
        for (s, (col, name)) in values.iter().zip(&species_names).enumerate() {
            if col.len() != times.len() {
                return Err(DatasetError::Ragged {
                    name: name.clone(),
                    expected: times.len(),
                    got: col.len(),
                });
            }
            if let Some(index) = col.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { species: s, index });
            }
        }
        Ok(Self {
            times,
            values,
            species_names,
            comments: Vec::new(),
        })
    }

    /// Attaches comment lines (stored without the leading `#`).
    pub fn with_comments(mut self, comments: Vec<String>) -> Self {
        self.comments = comments;
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn species(&self, s: usize) -> &[f64] {
        &self.values[s]
    }

    pub fn species_names(&self) -> &[String] {
        &self.species_names
    }

    pub fn comments(&self) -> &[String] {
        &self.comments
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn species_count(&self) -> usize {
        self.values.len()
    }

    /// Reorders species columns: new column `i` is old column `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            times: self.times.clone(),
            values: order.iter().map(|&i| self.values[i].clone()).collect(),
            species_names: order.iter().map(|&i| self.species_names[i].clone()).collect(),
            comments: self.comments.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "#{c}");
        }
        out.push('t');
        for name in &self.species_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (j, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t}");
            for col in &self.values {
                let _ = write!(out, ",{}", col[j]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, DatasetError> {
        let mut comments = Vec::new();
        let mut header: Option<(usize, Vec<String>)> = None;
        let mut times = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            match &header {
                None => {
                    if fields[0] != "t" {
                        return Err(DatasetError::Parse {
                            line: line_no,
                            message: format!("header must start with `t`, found `{}`", fields[0]),
                        });
                    }
                    let names: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
                    if names.is_empty() {
                        return Err(DatasetError::Parse {
                            line: line_no,
                            message: "header names no species".into(),
                        });
                    }
                    if let Some(n) = names.iter().find(|n| n.is_empty()) {
                        return Err(DatasetError::Parse {
                            line: line_no,
                            message: format!("empty species name `{n}`"),
                        });
                    }
                    columns = vec![Vec::new(); names.len()];
                    header = Some((line_no, names));
                }
                Some((_, names)) => {
                    if fields.len() != names.len() + 1 {
                        return Err(DatasetError::Parse {
                            line: line_no,
                            message: format!("expected {} fields, found {}", names.len() + 1, fields.len()),
                        });
                    }
                    let parse = |s: &str| -> Result<f64, DatasetError> {
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| DatasetError::Parse {
                                line: line_no,
                                message: format!("`{s}` is not a finite number"),
                            })
                    };
                    let t = parse(fields[0])?;
                    if let Some(&prev) = times.last() {
                        if !(t > prev) {
                            return Err(DatasetError::Parse {
                                line: line_no,
                                message: format!("time {t} does not increase on {prev}"),
                            });
                        }
                    }
                    times.push(t);
                    for (col, f) in columns.iter_mut().zip(&fields[1..]) {
                        col.push(parse(f)?);
                    }
                }
            }
        }

        let Some((header_line, names)) = header else {
            return Err(DatasetError::Parse {
                line: text.lines().count().max(1),
                message: "missing `t,...` header".into(),
            });
        };
        if times.len() < 4 {
            return Err(DatasetError::Parse {
                line: header_line,
                message: format!("a cubic spline needs at least 4 rows, found {}", times.len()),
            });
        }
        Ok(Self::new(times, columns, names)?.with_comments(comments))
    }
}

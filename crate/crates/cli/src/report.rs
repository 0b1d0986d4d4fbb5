//! Run report (JSON) and the grid trace (CSV).

use std::fmt::Write as _;

use anyhow::Result;
use genprof::profiling::{FitError, IterationRecord, Warnings};
use genprof::{FitResult, Spline};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Named {
    pub name: String,
    pub value: f64,
}

fn named(names: &[String], values: &[f64]) -> Vec<Named> {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| Named {
            name: n.clone(),
            value: *v,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub model: String,
    pub noise: String,
    /// The run's seed, or the one recorded in the dataset header.
    pub seed: Option<u64>,
    pub species_names: Vec<String>,
    pub param_names: Vec<String>,
    pub grid_k: Option<usize>,
    pub config: RunConfig,
    pub iterations: Vec<IterationRecord>,
    pub final_params: Vec<Named>,
    pub final_sigma: Option<f64>,
    pub initial_condition_estimates: Vec<Named>,
    pub warnings: Warnings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Fields shared by successful and failed reports.
pub struct Header {
    pub model: String,
    pub noise: String,
    pub seed: Option<u64>,
    pub species_names: Vec<String>,
    pub param_names: Vec<String>,
    pub config: RunConfig,
}

impl RunReport {
    pub fn from_fit(h: Header, r: &FitResult, timings: Option<Timings>) -> Self {
        let last = r.final_record();
        Self {
            status: Status::Ok,
            error: None,
            model: h.model,
            noise: h.noise,
            seed: h.seed,
            grid_k: Some(r.grid.len()),
            config: h.config,
            iterations: r.records.clone(),
            final_params: named(&h.param_names, &last.theta),
            final_sigma: last.sigma,
            initial_condition_estimates: named(&h.species_names, &r.initial_condition_estimates),
            warnings: r.warnings,
            species_names: h.species_names,
            param_names: h.param_names,
            timings,
        }
    }

    /// Report for an aborted fit, carrying the history recorded so far.
    pub fn from_failure(h: Header, e: &FitError) -> Self {
        let last = e.records.last();
        Self {
            status: Status::Failed,
            error: Some(e.to_string()),
            model: h.model,
            noise: h.noise,
            seed: h.seed,
            grid_k: None,
            config: h.config,
            iterations: e.records.clone(),
            final_params: last.map(|r| named(&h.param_names, &r.theta)).unwrap_or_default(),
            final_sigma: last.and_then(|r| r.sigma),
            initial_condition_estimates: Vec::new(),
            warnings: e.warnings,
            species_names: h.species_names,
            param_names: h.param_names,
            timings: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// `t,f_1,...,f_S,xi_1,...,xi_S` on the enforcement grid.
pub fn trace_csv(r: &FitResult) -> Result<String> {
    let s_count = r.splines.len();
    let mut out = String::from("t");
    for s in 1..=s_count {
        write!(out, ",f_{s}")?;
    }
    for s in 1..=s_count {
        write!(out, ",xi_{s}")?;
    }
    out.push('\n');
    for (k, t) in r.grid.iter().enumerate() {
        write!(out, "{t}")?;
        for sp in &r.splines {
            write!(out, ",{}", sp.eval(*t)?)?;
        }
        for xi in &r.xi_samples {
            write!(out, ",{}", xi[k])?;
        }
        out.push('\n');
    }
    Ok(out)
}

/// `t,f_1,...,f_S,df_1,...,df_S` for the interpolants on `grid`.
pub fn interp_csv(splines: &[Spline], grid: &[f64]) -> Result<String> {
    let mut out = String::from("t");
    for s in 1..=splines.len() {
        write!(out, ",f_{s}")?;
    }
    for s in 1..=splines.len() {
        write!(out, ",df_{s}")?;
    }
    out.push('\n');
    for t in grid {
        write!(out, "{t}")?;
        let both = splines.iter().map(|s| s.eval_both(*t)).collect::<Result<Vec<_>, _>>()?;
        for (v, _) in &both {
            write!(out, ",{v}")?;
        }
        for (_, d) in &both {
            write!(out, ",{d}")?;
        }
        out.push('\n');
    }
    Ok(out)
}

/// Columns of a numeric CSV with a header row; `#` lines are skipped.
#[derive(Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, head) = lines.next().ok_or("file is empty")?;
        let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
        let mut columns = vec![Vec::new(); header.len()];
        for (i, line) in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(format!("line {}: expected {} fields, found {}", i + 1, header.len(), cells.len()));
            }
            for (col, c) in columns.iter_mut().zip(cells) {
                col.push(c.trim().parse().map_err(|_| format!("line {}: `{}` is not a number", i + 1, c.trim()))?);
            }
        }
        Ok(Self { header, columns })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    /// Columns named `{prefix}1, {prefix}2, ...` in order.
    pub fn numbered(&self, prefix: &str) -> Vec<&[f64]> {
        (1..)
            .map_while(|s| self.column(&format!("{prefix}{s}")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_reads_numbered_columns() {
        let t = Table::parse("# c\nt,f_1,f_2,xi_1,xi_2\n0,1,2,3,4\n1,5,6,7,8\n").unwrap();
        assert_eq!(t.numbered("f_").len(), 2);
        assert_eq!(t.column("xi_2").unwrap(), &[4.0, 8.0]);
        assert!(Table::parse("t,a\n1\n").unwrap_err().contains("line 2"));
        assert!(Table::parse("").is_err());
    }
}

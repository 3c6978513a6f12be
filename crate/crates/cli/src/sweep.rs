//! Parameter sweeps.
use rayon::prelude::*;
use toml::{Table, Value};

use crate::config::{from_table, is_known_path, set_path};
use crate::metric::{Cell, MetricSpec};
use crate::report::{num, Csv};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
    /// Points equally spaced in dB; the parameter receives 10^(v/10).
    Db,
}

impl std::str::FromStr for Spacing {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "linear" | "lin" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            "db" | "dB" => Ok(Spacing::Db),
            other => Err(CliError::Usage(format!("unknown grid spacing '{other}' (linear, log, db)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Grid {
    /// Parses `start:stop:points`.
    pub fn parse(text: &str, spacing: Spacing) -> Result<Self, CliError> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || CliError::Usage(format!("grid '{text}' is not start:stop:points"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let grid = Grid { start, stop, points, spacing };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.points < 2 {
            return Err(CliError::Usage(format!("a sweep grid needs at least 2 points, got {}", self.points)));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::Usage("grid end points must be finite".into()));
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(CliError::Usage("log grid end points must be positive".into()));
        }
        Ok(())
    }

    /// Axis values as printed in the CSV (dB values for a dB grid).
    pub fn axis(&self) -> Vec<f64> {
        let n = self.points;
        let t = |i: usize| i as f64 / (n - 1) as f64;
        match self.spacing {
            Spacing::Linear | Spacing::Db => (0..n).map(|i| self.start + (self.stop - self.start) * t(i)).collect(),
            Spacing::Log => {
                let (a, b) = (self.start.ln(), self.stop.ln());
                (0..n).map(|i| (a + (b - a) * t(i)).exp()).collect()
            }
        }
    }

    /// Value assigned to the swept parameter at an axis point.
    pub fn assigned(&self, axis_value: f64) -> f64 {
        match self.spacing {
            Spacing::Db => 10f64.powf(axis_value / 10.0),
            _ => axis_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub grid: Grid,
    pub metrics: Vec<MetricSpec>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if !is_known_path(&self.param) {
            return Err(CliError::Usage(format!("unknown sweep parameter '{}'", self.param)));
        }
        if self.metrics.is_empty() {
            return Err(CliError::Usage("a sweep needs at least one metric".into()));
        }
        self.grid.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub csv: String,
    /// One line per failed cell.
    pub diagnostics: Vec<String>,
}

fn evaluate_point(base: &Table, spec: &SweepSpec, axis_value: f64) -> Vec<Result<Cell, CliError>> {
    let mut table = base.clone();
    let cfg = set_path(&mut table, &spec.param, Value::Float(spec.grid.assigned(axis_value)))
        .and_then(|_| from_table(table));
    match cfg {
        Ok(cfg) => spec.metrics.iter().map(|m| m.evaluate(&cfg)).collect(),
        Err(e) => spec.metrics.iter().map(|_| Err(e.clone())).collect(),
    }
}

/// Evaluates every grid point (concurrently on the current rayon pool) and
/// assembles the CSV in grid order.
pub fn run_sweep(base: &Table, spec: &SweepSpec) -> Result<SweepOutput, CliError> {
    spec.validate()?;
    let axis = spec.grid.axis();
    let results: Vec<Vec<Result<Cell, CliError>>> =
        axis.par_iter().map(|&v| evaluate_point(base, spec, v)).collect();
    let err_suffix = |m: &MetricSpec| if m.simulated { "_se" } else { "_err" };
    let mut header = vec![spec.param.clone()];
    for m in &spec.metrics {
        header.push(m.label().to_string());
        header.push(format!("{}{}", m.label(), err_suffix(m)));
    }
    let mut csv = Csv::new(&header);
    let mut diagnostics = Vec::new();
    for (v, row) in axis.iter().zip(results) {
        let mut cells = vec![num(*v)];
        for (m, r) in spec.metrics.iter().zip(row) {
            match r {
                Ok(c) => {
                    cells.push(num(c.value));
                    cells.push(num(c.error));
                    if c.unstable {
                        diagnostics.push(format!("{}={}: {}: heavy-tailed 1/gamma sample, estimate unstable", spec.param, num(*v), m.label()));
                    }
                }
                Err(e) => {
                    cells.push(String::new());
                    cells.push(String::new());
                    diagnostics.push(format!("{}={}: {}: {e}", spec.param, num(*v), m.label()));
                }
            }
        }
        csv.row(&cells);
    }
    Ok(SweepOutput { csv: csv.as_str().to_string(), diagnostics })
}

//! Metric names accepted by `eval` and `sweep`, and their evaluation.
use afrelay::endtoend::EndToEnd;
use afrelay::mcsim::{simulate_aser, simulate_capacity, simulate_cdf, Policy, SimBatch};
use afrelay::metrics::{
    aser, capacity_cifr, capacity_opra, capacity_ora, capacity_tcifr, opra_cutoff, ModulationParams,
};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Cdf(f64),
    Pdf(f64),
    /// `None` uses the configured modulation.
    Aser(Option<String>),
    Ora,
    Opra,
    Cifr,
    Tcifr,
    OpraCutoff,
}

/// A metric together with the engine that computes it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub metric: Metric,
    pub simulated: bool,
    label: String,
}

/// One evaluated cell: value, error estimate (or standard error) and
/// evaluation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub error: f64,
    pub nodes: usize,
    pub terms: usize,
    pub unstable: bool,
}

fn parse_point(name: &str, arg: Option<&str>) -> Result<f64, CliError> {
    let text = arg.ok_or_else(|| CliError::Usage(format!("{name} needs an evaluation point, e.g. {name}@1.5")))?;
    let z: f64 = text
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid evaluation point '{text}' for {name}")))?;
    if !(z >= 0.0 && z.is_finite()) {
        return Err(CliError::Usage(format!("evaluation point of {name} must be nonnegative, got {z}")));
    }
    Ok(z)
}

impl MetricSpec {
    /// Parses `name[@z][:modulation]`, optionally prefixed with `mc-` for the
    /// simulated estimate.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let label = text.trim().to_string();
        let (simulated, body) = match label.strip_prefix("mc-") {
            Some(rest) => (true, rest),
            None => (false, label.as_str()),
        };
        let (body, modulation) = match body.split_once(':') {
            Some((b, m)) => (b, Some(m.to_string())),
            None => (body, None),
        };
        let (name, arg) = match body.split_once('@') {
            Some((n, a)) => (n, Some(a)),
            None => (body, None),
        };
        if modulation.is_some() && name != "aser" {
            return Err(CliError::Usage(format!("only aser takes a modulation suffix: '{label}'")));
        }
        let metric = match name {
            "cdf" => Metric::Cdf(parse_point(name, arg)?),
            "pdf" => Metric::Pdf(parse_point(name, arg)?),
            "aser" => Metric::Aser(modulation),
            "ora" => Metric::Ora,
            "opra" => Metric::Opra,
            "cifr" => Metric::Cifr,
            "tcifr" => Metric::Tcifr,
            "opra-cutoff" => Metric::OpraCutoff,
            other => return Err(CliError::Usage(format!("unknown metric '{other}'"))),
        };
        if arg.is_some() && !matches!(metric, Metric::Cdf(_) | Metric::Pdf(_)) {
            return Err(CliError::Usage(format!("metric '{name}' takes no evaluation point")));
        }
        if simulated && matches!(metric, Metric::Pdf(_) | Metric::OpraCutoff) {
            return Err(CliError::Usage(format!("'{name}' has no simulated estimate")));
        }
        Ok(MetricSpec { metric, simulated, label })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluation point of cdf/pdf, for report rows.
    pub fn argument(&self) -> Option<f64> {
        match self.metric {
            Metric::Cdf(z) | Metric::Pdf(z) => Some(z),
            _ => None,
        }
    }

    fn modulation(&self, cfg: &RunConfig) -> Result<ModulationParams, CliError> {
        match &self.metric {
            Metric::Aser(Some(name)) => ModulationParams::preset(name)
                .ok_or_else(|| CliError::Usage(format!("unknown modulation preset '{name}'"))),
            _ => cfg.modulation(),
        }
    }

    pub fn evaluate(&self, cfg: &RunConfig) -> Result<Cell, CliError> {
        let sys = cfg.system()?;
        let model = EndToEnd::new(sys)?;
        if self.simulated {
            return self.simulate(cfg, &model);
        }
        let r = match &self.metric {
            Metric::Cdf(z) => model.cdf(*z)?,
            Metric::Pdf(z) => model.pdf(*z)?,
            Metric::Aser(_) => aser(&model, &self.modulation(cfg)?)?,
            Metric::Ora => capacity_ora(&model)?,
            Metric::Opra => capacity_opra(&model)?,
            Metric::Cifr => capacity_cifr(&model)?,
            Metric::Tcifr => capacity_tcifr(&model, tcifr_cutoff(cfg, &model)?)?,
            Metric::OpraCutoff => {
                let cut = opra_cutoff(&model)?;
                return Ok(Cell { value: cut.gamma_star, error: cut.residual.abs(), nodes: 0, terms: 0, unstable: false });
            }
        };
        Ok(Cell {
            value: r.value,
            error: r.error_estimate,
            nodes: r.diagnostics.nodes,
            terms: r.diagnostics.terms,
            unstable: false,
        })
    }

    fn simulate(&self, cfg: &RunConfig, model: &EndToEnd) -> Result<Cell, CliError> {
        let batch = sim_batch(cfg, model.config);
        let stats = match &self.metric {
            Metric::Cdf(z) => {
                let s = simulate_cdf(&batch, &[*z])?;
                let p = s.cdf[0];
                return Ok(Cell { value: p.cdf, error: p.std_error, nodes: 0, terms: 0, unstable: false });
            }
            Metric::Aser(_) => simulate_aser(&batch, &self.modulation(cfg)?)?,
            Metric::Ora => simulate_capacity(&batch, Policy::Ora, None)?,
            Metric::Opra => simulate_capacity(&batch, Policy::Opra, Some(opra_cutoff(model)?.gamma_star))?,
            Metric::Cifr => simulate_capacity(&batch, Policy::Cifr, None)?,
            Metric::Tcifr => simulate_capacity(&batch, Policy::Tcifr, Some(tcifr_cutoff(cfg, model)?))?,
            Metric::Pdf(_) | Metric::OpraCutoff => unreachable!("rejected at parse time"),
        };
        Ok(Cell { value: stats.estimate, error: stats.std_error, nodes: 0, terms: 0, unstable: stats.unstable })
    }
}

pub fn sim_batch(cfg: &RunConfig, sys: afrelay::endtoend::SystemConfig) -> SimBatch {
    let s = &cfg.simulation;
    let mut batch = SimBatch::new(sys, s.draws, s.seed).with_mode(s.mode);
    batch.streams = s.streams;
    batch
}

/// γ₀ of truncated channel inversion: configured, else the OPRA cutoff.
pub fn tcifr_cutoff(cfg: &RunConfig, model: &EndToEnd) -> Result<f64, CliError> {
    match cfg.policy.tcifr_cutoff {
        Some(g) if g > 0.0 && g.is_finite() => Ok(g),
        Some(g) => Err(CliError::Config(format!("policy.tcifr_cutoff must be positive, got {g}"))),
        None => Ok(opra_cutoff(model)?.gamma_star),
    }
}

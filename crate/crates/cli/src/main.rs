use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use afrelay::endtoend::EndToEnd;
use afrelay::mcsim::{default_grid, simulate_aser, simulate_capacity, simulate_cdf, Policy, SimMode};
use afrelay::metrics::opra_cutoff;
use afrelay::specfun::{
    fox_h_with, incomplete_fox_h_with, ContourPolicy, EvalOptions, GammaPair, GammaTriple, HFunctionSpec,
    IncompleteHSpec,
};
use afrelay_cli::config::{self, RunConfig};
use afrelay_cli::metric::{sim_batch, tcifr_cutoff, MetricSpec};
use afrelay_cli::report::{emit, num, Csv};
use afrelay_cli::sweep::{run_sweep, Grid, SweepSpec};
use afrelay_cli::validate::{run_validate, to_csv, Status};
use afrelay_cli::CliError;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "afrelay", version, about = "Dual-hop energy-harvesting relay link analysis")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file (built-in reference system when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration entry, e.g. `--set energy.ps_n1_db=30`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    set: Vec<String>,
    /// Output CSV path (standard output when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation seed (same as `--set simulation.seed=N`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulation draws (same as `--set simulation.draws=N`).
    #[arg(long, global = true)]
    draws: Option<u64>,
    /// Worker threads (all cores when omitted).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one metric: cdf, pdf, aser, ora, opra, cifr, tcifr, opra-cutoff.
    Eval {
        metric: String,
        /// Evaluation point of cdf and pdf.
        #[arg(long)]
        z: Option<f64>,
        /// Modulation preset for aser (configured modulation when omitted).
        #[arg(long)]
        modulation: Option<String>,
    },
    /// Sweep one configuration entry over a grid.
    Sweep {
        /// Configuration path, e.g. energy.ps_n1_db.
        #[arg(long)]
        param: String,
        /// start:stop:points
        #[arg(long)]
        grid: String,
        #[arg(long, default_value = "linear")]
        spacing: String,
        /// Comma-separated metrics; `mc-` prefix for simulated estimates,
        /// `@z` for cdf/pdf points, `:NAME` for aser modulation.
        #[arg(long, value_delimiter = ',', required = true)]
        metrics: Vec<String>,
    },
    /// Monte-Carlo estimates of every metric, or the empirical CDF.
    Simulate {
        /// coupled or independent (configured mode when omitted).
        #[arg(long)]
        mode: Option<String>,
        /// Emit the empirical CDF on the default grid instead of metrics.
        #[arg(long)]
        cdf: bool,
    },
    /// Closed form vs quadrature vs Monte-Carlo at the configured point.
    Validate,
    /// Print the effective configuration.
    Config,
    /// Special-function utilities.
    Specfun {
        #[command(subcommand)]
        command: SpecfunCommand,
    },
}

#[derive(Subcommand, Debug)]
enum SpecfunCommand {
    /// Evaluate H^{m,n}_{p,q}(z); parameters as `a,A[,x];a,A[,x]`, where a
    /// third entry makes that gamma factor upper-incomplete.
    Eval {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        upper: String,
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        lower: String,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        /// saddle, midpoint or a fixed abscissa.
        #[arg(long, default_value = "saddle", allow_hyphen_values = true)]
        policy: String,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = common.set.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("simulation.seed={seed}"));
    }
    if let Some(draws) = common.draws {
        overrides.push(format!("simulation.draws={draws}"));
    }
    config::load(&text, &overrides)
}

fn base_table(cfg: &RunConfig) -> Result<toml::Table, CliError> {
    cfg.echo().parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}

fn diag_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".diag.txt");
    PathBuf::from(name)
}

fn parse_params(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|group| {
            let v: Result<Vec<f64>, _> = group.split(',').map(|x| x.trim().parse::<f64>()).collect();
            match v {
                Ok(v) if v.len() == 2 || v.len() == 3 => Ok(v),
                _ => Err(CliError::Usage(format!("parameter group '{group}' is not a,A or a,A,x"))),
            }
        })
        .collect()
}

fn specfun_eval(m: usize, n: usize, upper: &str, lower: &str, z: f64, policy: &str) -> Result<String, CliError> {
    let policy = match policy {
        "saddle" => ContourPolicy::Saddle,
        "midpoint" => ContourPolicy::Midpoint,
        other => ContourPolicy::Fixed(
            other
                .parse()
                .map_err(|_| CliError::Usage(format!("policy '{other}' is not saddle, midpoint or a number")))?,
        ),
    };
    let opts = EvalOptions::with_policy(policy);
    let (up, lo) = (parse_params(upper)?, parse_params(lower)?);
    let incomplete = up.iter().chain(&lo).any(|g| g.len() == 3);
    let r = if incomplete {
        let triple = |g: &Vec<f64>| GammaTriple::new(g[0], g[1], g.get(2).copied().unwrap_or(0.0));
        let spec = IncompleteHSpec::new(m, n, up.iter().map(triple).collect(), lo.iter().map(triple).collect(), z);
        incomplete_fox_h_with(&spec, &opts)?
    } else {
        let pair = |g: &Vec<f64>| GammaPair::new(g[0], g[1]);
        let spec = HFunctionSpec::new(m, n, up.iter().map(pair).collect(), lo.iter().map(pair).collect(), z);
        fox_h_with(&spec, &opts)?
    };
    let contour = r.diagnostics.contours.first().map(|c| format!("{c:.14e}")).unwrap_or_default();
    Ok(format!(
        "value,error_estimate,contour,nodes\n{:.14e},{:.14e},{},{}\n",
        r.value, r.error_estimate, contour, r.diagnostics.nodes
    ))
}

fn simulate(cfg: &RunConfig, mode: Option<&str>, cdf: bool) -> Result<String, CliError> {
    let mut cfg = cfg.clone();
    if let Some(mode) = mode {
        cfg.simulation.mode = match mode {
            "coupled" => SimMode::Coupled,
            "independent" => SimMode::IndependentApproximation,
            other => return Err(CliError::Usage(format!("unknown simulation mode '{other}'"))),
        };
    }
    let sys = cfg.system()?;
    let batch = sim_batch(&cfg, sys);
    if cdf {
        let stats = simulate_cdf(&batch, &default_grid(&sys))?;
        let mut csv = Csv::new(&["z", "cdf", "std_error"]);
        for p in &stats.cdf {
            csv.row(&[num(p.z), num(p.cdf), num(p.std_error)]);
        }
        return Ok(csv.as_str().to_string());
    }
    let model = EndToEnd::new(sys)?;
    let modulation = cfg.modulation()?;
    let cut = opra_cutoff(&model)?.gamma_star;
    let g0 = tcifr_cutoff(&cfg, &model)?;
    let rows = [
        ("aser", simulate_aser(&batch, &modulation)?),
        ("ora", simulate_capacity(&batch, Policy::Ora, None)?),
        ("opra", simulate_capacity(&batch, Policy::Opra, Some(cut))?),
        ("cifr", simulate_capacity(&batch, Policy::Cifr, None)?),
        ("tcifr", simulate_capacity(&batch, Policy::Tcifr, Some(g0))?),
    ];
    let mut csv = Csv::new(&["metric", "estimate", "std_error", "draws", "unstable"]);
    for (name, s) in rows {
        csv.row(&[name.to_string(), num(s.estimate), num(s.std_error), s.draws.to_string(), s.unstable.to_string()]);
    }
    Ok(csv.as_str().to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    let cfg = load_config(common)?;
    let out = common.out.as_deref();
    match &cli.command {
        Command::Eval { metric, z, modulation } => {
            let mut name = metric.clone();
            if let Some(z) = z {
                name = format!("{name}@{z}");
            }
            if let Some(m) = modulation {
                name = format!("{name}:{m}");
            }
            let spec = MetricSpec::parse(&name)?;
            let cell = spec.evaluate(&cfg)?;
            let mut csv = Csv::new(&["metric", "argument", "value", "error_estimate", "nodes", "terms"]);
            csv.row(&[
                metric.clone(),
                spec.argument().map(num).unwrap_or_default(),
                num(cell.value),
                num(cell.error),
                cell.nodes.to_string(),
                cell.terms.to_string(),
            ]);
            emit(csv.as_str(), out)
        }
        Command::Sweep { param, grid, spacing, metrics } => {
            let spec = SweepSpec {
                param: param.clone(),
                grid: Grid::parse(grid, spacing.parse()?)?,
                metrics: metrics.iter().map(|m| MetricSpec::parse(m)).collect::<Result<_, _>>()?,
            };
            let started = Instant::now();
            let result = run_sweep(&base_table(&cfg)?, &spec)?;
            emit(&result.csv, out)?;
            if !result.diagnostics.is_empty() {
                let text = result.diagnostics.join("\n") + "\n";
                match out {
                    Some(path) => std::fs::write(diag_path(path), text)?,
                    None => eprint!("{text}"),
                }
            }
            eprintln!("sweep: {} points in {:.2?}", spec.grid.points, started.elapsed());
            Ok(())
        }
        Command::Simulate { mode, cdf } => emit(&simulate(&cfg, mode.as_deref(), *cdf)?, out),
        Command::Validate => {
            let started = Instant::now();
            let rows = run_validate(&cfg)?;
            emit(&to_csv(&rows), out)?;
            eprintln!("validate: {:.2?}", started.elapsed());
            for r in rows.iter().filter(|r| r.status == Status::Inconclusive) {
                eprintln!("warning: {}: {}", r.metric, r.note);
            }
            let failed: Vec<&str> = rows.iter().filter(|r| r.status == Status::Fail).map(|r| r.metric.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Validation(failed.join(", ")))
            }
        }
        Command::Config => emit(&cfg.echo(), out),
        Command::Specfun { command: SpecfunCommand::Eval { m, n, upper, lower, z, policy } } => {
            emit(&specfun_eval(*m, *n, upper, lower, *z, policy)?, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let workers = cli.common.workers;
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

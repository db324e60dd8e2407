//! `tsconformal` command-line driver.
//!
//! Exit codes: 0 success, 1 invalid input or runtime error, 2 a verification
//! check or bound comparison failed.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tsconformal::dependence::{score_law, CoefficientTable};
use tsconformal::harness::config::ScoreKind;
use tsconformal::harness::simulate::{applicable_bounds, TrialSetup};
use tsconformal::harness::{
    predict_next, read_history, run_coverage_sim, run_cyclic_experiment, run_exact_coverage,
    run_ma_grid, CyclicExperiment, ExperimentConfig, MaGrid, PredictConfig,
};
use tsconformal::verify::{run_verification_suite, Budget};
use tsconformal::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "tsconformal",
    version,
    about = "Conformal prediction for time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, global = true, value_enum)]
    jitter: Option<Switch>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo coverage of one experiment config.
    CoverageSim,
    /// Exact coverage of a finite-process config by enumeration.
    ExactCoverage,
    /// Exact switch and mixing coefficients of a finite process.
    SwitchExact,
    /// Coverage bounds that apply to a config.
    Bounds,
    /// Coverage of MA(t) residual scores over a (t, n) grid, as CSV.
    #[command(name = "figure1")]
    MaGrid,
    /// Cyclic-mixture experiment against its coverage ceiling.
    #[command(name = "thm2")]
    CyclicCeiling {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Invariant checks, optionally with the acceptance criteria.
    Verify {
        /// Also run the acceptance criteria.
        #[arg(long)]
        criteria: bool,
        /// Divide every Monte Carlo size by this factor.
        #[arg(long, default_value_t = 1)]
        scale_down: u64,
    },
    /// Prediction interval for the last row of an `x,y` history.
    Predict {
        /// History CSV with header `x,y`; the last row's `y` is ignored.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        memory: Option<usize>,
        #[arg(long)]
        n0: Option<usize>,
    },
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors; 2 is reserved for failed checks
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Runs the command; `Ok(false)` means a check or bound comparison failed.
fn run(cli: Cli) -> Result<bool> {
    let c = &cli.common;
    match cli.command {
        Command::CoverageSim => {
            let cfg = experiment(c)?;
            let r = run_coverage_sim(&cfg)?;
            let ok = r.bounds.iter().all(|b| b.satisfied);
            emit(c, &r, |w| {
                csv_rows(
                    w,
                    &["coverage", "stderr", "trials", "covered", "wall_time_secs"],
                    [[
                        r.empirical_coverage.to_string(),
                        r.standard_error.to_string(),
                        r.trials.to_string(),
                        r.covered.to_string(),
                        r.wall_time_secs.to_string(),
                    ]],
                )
            })?;
            Ok(ok)
        }
        Command::ExactCoverage => {
            let cfg = experiment(c)?;
            let r = run_exact_coverage(&cfg)?;
            emit(c, &r, |w| {
                csv_rows(
                    w,
                    &["coverage", "support_size"],
                    [[r.coverage.to_string(), r.support_size.to_string()]],
                )
            })?;
            Ok(true)
        }
        Command::SwitchExact => {
            let cfg = experiment(c)?;
            let report = switch_exact(&cfg)?;
            emit(c, &report, |w| report.write_csv(w))?;
            Ok(true)
        }
        Command::Bounds => {
            let cfg = experiment(c)?;
            let setup = TrialSetup::from_config(&cfg)?;
            let bounds = applicable_bounds(&cfg, &setup)?;
            emit(c, &bounds, |w| {
                csv_rows(
                    w,
                    &[
                        "name",
                        "direction",
                        "value",
                        "minimizing_tau",
                        "minimizing_tau_star",
                        "vacuous",
                    ],
                    bounds.iter().map(|b| {
                        [
                            b.name.clone(),
                            format!("{:?}", b.direction).to_lowercase(),
                            b.value.to_string(),
                            b.minimizing_tau.to_string(),
                            b.minimizing_tau_star.to_string(),
                            b.vacuous.to_string(),
                        ]
                    }),
                )
            })?;
            Ok(true)
        }
        Command::MaGrid => {
            let mut grid: MaGrid = match &c.config {
                Some(p) => read_json(p)?,
                None => MaGrid::default(),
            };
            override_opt(&mut grid.seed, c.seed);
            override_opt(&mut grid.trials, c.trials);
            let rows = run_ma_grid(&grid)?;
            emit(c, &rows, |w| {
                tsconformal::harness::grid::write_grid_csv(&rows, w)
            })?;
            Ok(true)
        }
        Command::CyclicCeiling { alpha, n, b, k } => {
            let mut exp: CyclicExperiment = match &c.config {
                Some(p) => read_json(p)?,
                None => CyclicExperiment::default(),
            };
            override_opt(&mut exp.alpha, alpha);
            override_opt(&mut exp.n, n);
            override_opt(&mut exp.b, b);
            override_opt(&mut exp.k, k);
            override_opt(&mut exp.seed, c.seed);
            override_opt(&mut exp.trials, c.trials);
            let r = run_cyclic_experiment(&exp)?;
            emit(c, &r, |w| {
                csv_rows(
                    w,
                    &["coverage", "stderr", "trials", "ceiling", "below_ceiling"],
                    [[
                        r.report.empirical_coverage.to_string(),
                        r.report.standard_error.to_string(),
                        r.report.trials.to_string(),
                        r.ceiling.to_string(),
                        r.below_ceiling.to_string(),
                    ]],
                )
            })?;
            Ok(r.below_ceiling)
        }
        Command::Verify {
            criteria,
            scale_down,
        } => {
            let budget = if scale_down <= 1 {
                Budget::full()
            } else {
                Budget::scaled_down(scale_down)
            };
            let summary = run_verification_suite(c.seed.unwrap_or(0), &budget, criteria);
            emit(c, &summary, |w| {
                let checks = summary.checks.iter().map(|r| {
                    [
                        "check".into(),
                        r.name.clone(),
                        r.passed.to_string(),
                        r.detail.clone(),
                    ]
                });
                let crit = summary.criteria.iter().map(|r| {
                    [
                        "criterion".into(),
                        format!("{} {}", r.id, r.name),
                        r.passed.to_string(),
                        r.detail.clone(),
                    ]
                });
                csv_rows(w, &["kind", "name", "passed", "detail"], checks.chain(crit))
            })?;
            Ok(summary.passed)
        }
        Command::Predict {
            input,
            alpha,
            memory,
            n0,
        } => {
            let mut cfg: PredictConfig = match &c.config {
                Some(p) => read_json(p)?,
                None => PredictConfig {
                    alpha: 0.1,
                    ..PredictConfig::default()
                },
            };
            override_opt(&mut cfg.alpha, alpha);
            override_opt(&mut cfg.memory, memory);
            if n0.is_some() {
                cfg.n0 = n0;
            }
            let history = read_history(File::open(&input)?)?;
            let r = predict_next(&history, &cfg)?;
            emit(c, &r, |w| {
                csv_rows(
                    w,
                    &["lower", "upper", "threshold", "m_cal", "unbounded", "bound"],
                    [[
                        r.lower.to_string(),
                        r.upper.to_string(),
                        r.threshold.to_string(),
                        r.m_cal.to_string(),
                        r.unbounded.to_string(),
                        r.bound
                            .as_ref()
                            .map(|b| b.value.to_string())
                            .unwrap_or_default(),
                    ]],
                )
            })?;
            Ok(true)
        }
    }
}

fn override_opt<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// The experiment config from `--config` with flag overrides applied.
fn experiment(c: &Common) -> Result<ExperimentConfig> {
    let path = c
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("this command needs --config <path>".into()))?;
    let mut cfg = ExperimentConfig::from_json_file(path)?;
    override_opt(&mut cfg.seed, c.seed);
    override_opt(&mut cfg.trials, c.trials);
    override_opt(&mut cfg.jitter, c.jitter.map(|s| s == Switch::On));
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct SwitchReport {
    data: CoefficientTable,
    /// Present for pretrained scores.
    scores: Option<CoefficientTable>,
}

impl SwitchReport {
    fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        let mut rows = Vec::new();
        let mut push = |series: &str, t: &CoefficientTable| {
            for e in &t.psi {
                rows.push([
                    series.into(),
                    "psi".into(),
                    e.k.to_string(),
                    e.tau.to_string(),
                    e.psi.to_string(),
                ]);
            }
            for e in &t.psi_bar {
                rows.push([
                    series.into(),
                    "psi_bar".into(),
                    String::new(),
                    e.tau.to_string(),
                    e.psi_bar.to_string(),
                ]);
            }
            for e in &t.beta {
                rows.push([
                    series.into(),
                    "beta".into(),
                    String::new(),
                    e.tau.to_string(),
                    e.beta.to_string(),
                ]);
            }
        };
        push("data", &self.data);
        if let Some(s) = &self.scores {
            push("scores", s);
        }
        csv_rows(w, &["series", "quantity", "k", "tau", "value"], rows)
    }
}

fn switch_exact(cfg: &ExperimentConfig) -> Result<SwitchReport> {
    let setup = TrialSetup::from_config(cfg)?;
    let joint = setup.process.joint_pmf(cfg.n + 1)?;
    let taus: Vec<usize> = (0..=cfg.n).collect();
    let data = CoefficientTable::exact(&joint, &taus, true)?;
    let scores = match &setup.score {
        ScoreKind::Pretrained(score) => {
            let (law, _) = score_law(&joint, score.as_ref())?;
            let taus: Vec<usize> = (0..law.len()).collect();
            Some(CoefficientTable::exact(&law, &taus, false)?)
        }
        ScoreKind::Trained(_) => None,
    };
    Ok(SwitchReport { data, scores })
}

fn csv_rows<const N: usize>(
    w: &mut dyn Write,
    header: &[&str],
    rows: impl IntoIterator<Item = [String; N]>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(&r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `value` as pretty JSON, or through `csv` when `--format csv`.
fn emit<T: Serialize>(
    c: &Common,
    value: &T,
    csv: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    let mut out: Box<dyn Write> = match &c.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match c.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
        }
        Format::Csv => csv(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mixlab_core::experiment::{emit_plot_data, run_suite, ExperimentConfig, Report};

#[derive(Parser)]
#[command(name = "mixlab", version, about = "Glauber mixing-time inequality checks for ferromagnetic Ising models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run checkers and write a JSON report.
    Check {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated checker ids, or `all` (the default without a config).
        #[arg(long)]
        suite: Option<String>,
    },
    /// Run the two-branch lower-bound pipeline and write a JSON report.
    Pipeline {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Extract one series of a report as CSV.
    Plot {
        #[arg(long)]
        report: PathBuf,
        /// `<checker>/<series>`, or a bare series name when unambiguous.
        #[arg(long)]
        series: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Model file, or `gen:<kind>:<key=value,...>`.
    #[arg(long, required_unless_present = "config")]
    model: Option<String>,
    /// JSON experiment config; flags given alongside it override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tv_threshold: Option<f64>,
    #[arg(long)]
    enum_limit: Option<usize>,
}

impl RunArgs {
    fn config(&self, suite: Option<Vec<String>>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::new("", &[], 0),
        };
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        match suite {
            Some(ids) => cfg.suite = ids,
            None if self.config.is_none() => cfg.suite = vec!["all".into()],
            None => {}
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.display().to_string());
        }
        let p = &mut cfg.params;
        if let Some(r) = self.replicas {
            p.replicas = r;
            p.pipeline.replicas = r;
            p.pipeline.pilot_replicas = (r / 4).max(1);
        }
        if let Some(k) = self.k {
            p.k = Some(k);
            p.pipeline.k = Some(k);
        }
        if let Some(t) = self.tv_threshold {
            p.tv_threshold = t;
            p.pipeline.tv_threshold = t;
        }
        if let Some(e) = self.enum_limit {
            p.enum_limit = e;
        }
        Ok(cfg)
    }
}

fn summarize(report: &Report) {
    for c in &report.checks {
        let margin = c.margin.map_or("-".to_string(), |m| format!("{m:.6e}"));
        let note = c.error.as_deref().unwrap_or("");
        eprintln!("{:<18} {:<13} margin {margin} {note}", c.statement, format!("{:?}", c.verdict).to_lowercase());
    }
    if let Some(p) = &report.pipeline {
        eprintln!(
            "pipeline           {:?}/{:?} t_mix^+ >= {} ({:.3} n ln n)",
            p.branch,
            p.outcome,
            p.lower_bound,
            p.lower_bound / p.n_log_n.max(f64::MIN_POSITIVE)
        );
    }
    let s = &report.summary;
    eprintln!(
        "pass {} fail {} indeterminate {} error {}",
        s.pass, s.fail, s.indeterminate, s.error
    );
}

fn execute(cfg: &ExperimentConfig) -> Result<ExitCode> {
    let report = run_suite(cfg)?;
    let text = report.to_json();
    match &cfg.output {
        Some(path) => fs::write(path, &text).with_context(|| format!("writing {path}"))?,
        None => print!("{text}"),
    }
    summarize(&report);
    Ok(ExitCode::from(report.exit_code() as u8))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Check { run, suite } => {
            let ids = suite.map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
            execute(&run.config(ids)?)
        }
        Command::Pipeline { run } => execute(&run.config(Some(vec!["pipeline".into()]))?),
        Command::Plot { report, series, out } => {
            let text = fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let csv = emit_plot_data(&Report::from_json(&text)?, &series)?;
            fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use ttlab::config::{Law, ScenarioConfig};
use ttlab::engine::run;
use ttlab::experiments::{compare, default_lambda_grid, sweep_lambda};
use ttlab::output::{fmt_f64, fmt_summary, write_run};
use ttlab::promises::{PromiseRule, PromiseRuleConfig};

#[derive(Parser)]
#[command(
    name = "ttlab",
    version,
    about = "Team-triggered coordination simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write lyapunov.csv, messages.csv, trace.csv and metrics.json.
    Run(Common),
    /// Sweep the promise tightness and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated λ values.
        #[arg(long, value_delimiter = ',', default_values_t = default_lambda_grid())]
        lambda_grid: Vec<f64>,
    },
    /// Compare the self-triggered baseline with FPFD, FPAD, APFD and APAD and write compare.csv.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file; the built-in four-agent scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    law: Option<Law>,
    #[arg(long)]
    duration: Option<f64>,
    /// Run independent simulations concurrently.
    #[arg(long)]
    parallel: bool,
}

impl Common {
    fn load(&self) -> ttlab::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::formation4(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(law) = self.law {
            cfg.law = law;
        }
        if let Some(duration) = self.duration {
            cfg.duration = duration;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn cmd_run(common: &Common) -> ttlab::Result<()> {
    let cfg = common.load()?;
    info!(
        "running {} law for {} s, seed {}",
        cfg.law, cfg.duration, cfg.seed
    );
    let start = Instant::now();
    let out = run(&cfg)?;
    let wall = start.elapsed();
    write_run(&out, wall, &common.out)?;
    println!(
        "V(T_end)={} N_comm={} wall={:.3}s",
        fmt_summary(out.metrics.v_final),
        out.metrics.n_comm,
        wall.as_secs_f64()
    );
    Ok(())
}

fn create_csv(dir: &Path, name: &str) -> ttlab::Result<csv::Writer<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(csv::Writer::from_path(dir.join(name))?)
}

fn cmd_sweep(common: &Common, lambdas: &[f64]) -> ttlab::Result<()> {
    let cfg = common.load()?;
    let start = Instant::now();
    let rows = sweep_lambda(&cfg, lambdas, common.parallel)?;
    let mut w = create_csv(&common.out, "sweep.csv")?;
    w.write_record(["lambda", "V_at_30s", "N_comm_at_30s"])?;
    for r in &rows {
        w.write_record([
            fmt_f64(r.lambda),
            fmt_f64(r.v_at_horizon),
            r.n_comm_at_horizon.to_string(),
        ])?;
    }
    w.flush()?;
    println!(
        "{} sweep points in {:.3}s",
        rows.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_compare(common: &Common) -> ttlab::Result<()> {
    let mut base = common.load()?;
    let dynamic = match base.promise.rule {
        PromiseRule::DynamicBall { .. } => {
            let d = base.promise;
            base.promise = PromiseRuleConfig {
                expiration: d.expiration,
                ..ScenarioConfig::formation4().promise
            };
            d
        }
        PromiseRule::StaticBall { .. } => PromiseRuleConfig {
            expiration: base.promise.expiration,
            ..PromiseRuleConfig::dynamic_ball(0.5, 1e-6)
        },
    };
    let start = Instant::now();
    let cmp = compare(&base, dynamic, base.trace_stride as usize, common.parallel)?;
    let mut w = create_csv(&common.out, "compare.csv")?;
    let mut header = vec!["t".to_string()];
    header.extend(cmp.variants.iter().map(|v| format!("N_comm_{}", v.label())));
    header.extend(cmp.variants.iter().map(|v| format!("V_{}", v.label())));
    w.write_record(&header)?;
    for (k, t) in cmp.times.iter().enumerate() {
        let mut rec = vec![fmt_f64(*t)];
        rec.extend(cmp.n_comm.iter().map(|c| c[k].to_string()));
        rec.extend(cmp.v.iter().map(|v| fmt_f64(v[k])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let finals: Vec<String> = cmp
        .variants
        .iter()
        .zip(&cmp.n_comm)
        .map(|(v, c)| format!("{}={}", v.label(), c.last().copied().unwrap_or(0)))
        .collect();
    println!(
        "N_comm {} ({:.3}s)",
        finals.join(" "),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TTLAB_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => cmd_run(common),
        Command::Sweep {
            common,
            lambda_grid,
        } => cmd_sweep(common, lambda_grid),
        Command::Compare(common) => cmd_compare(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::FAILURE
        }
    }
}

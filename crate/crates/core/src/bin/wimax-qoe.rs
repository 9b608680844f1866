use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use wimax_qoe::config::{load_config, ScenarioConfig, Scheduler};
use wimax_qoe::scenario::{run_scenario, run_sweep, write_outputs, RunOutput};
use wimax_qoe::SimTime;

/// Simulate UGS uplink flows under the fixed-rate baseline or the QoE
/// rate controller and write per-flow QoS metrics as CSV.
#[derive(Parser, Debug)]
#[command(name = "wimax-qoe", version, about)]
struct Cli {
    /// Scenario file (TOML); defaults apply when omitted
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Scheduler for a single run
    #[arg(long, value_parser = parse_scheduler)]
    scheduler: Option<Scheduler>,

    /// Loss threshold in percent for a single run, applied to every user
    #[arg(long, value_name = "PCT")]
    threshold: Option<f64>,

    /// Run the baseline and the QoE scheduler at every configured threshold
    #[arg(long)]
    sweep: bool,

    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Controller epoch length in seconds
    #[arg(long, value_name = "SECONDS")]
    epoch: Option<f64>,

    /// Suppress the summary table on stdout
    #[arg(long, short)]
    quiet: bool,
}

fn parse_scheduler(s: &str) -> Result<Scheduler, String> {
    s.parse()
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn build_config(cli: &Cli) -> Result<ScenarioConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path).map_err(|e| e.to_string())?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.scheduler {
        cfg.scheduler = s;
    }
    if let Some(pct) = cli.threshold {
        if !(pct > 0.0 && pct <= 100.0) {
            return Err(format!(
                "threshold out of range: {pct}% (expected (0, 100])"
            ));
        }
        cfg.set_threshold(pct / 100.0);
    }
    if let Some(secs) = cli.epoch {
        if !(secs.is_finite() && secs > 0.0) {
            return Err(format!("epoch must be positive, got {secs}"));
        }
        cfg.epoch = SimTime::from_secs_f64(secs);
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn print_summary(runs: &[RunOutput]) {
    println!(
        "{:<10} {:>6} {:>4} {:>14} {:>9} {:>9} {:>11} {:>11} {:>12}",
        "scheduler",
        "thr%",
        "flow",
        "throughput B/s",
        "(kB/s)",
        "loss",
        "delay ms",
        "jitter ms",
        "final rate"
    );
    for run in runs {
        for (i, m) in run.summary.iter().enumerate() {
            let thr = run
                .threshold_label(i)
                .map(|t| format!("{:.0}", t * 100.0))
                .unwrap_or_else(|| "-".into());
            println!(
                "{:<10} {:>6} {:>4} {:>14.1} {:>9.2} {:>9.4} {:>11.3} {:>11.4} {:>12.1}",
                run.scheduler.as_str(),
                thr,
                m.flow_id,
                m.throughput,
                m.throughput / 1000.0,
                m.loss_rate,
                m.mean_delay * 1e3,
                m.mean_jitter * 1e3,
                run.final_rates[i],
            );
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    let runs = if cli.sweep {
        run_sweep(&cfg)
    } else {
        run_scenario(&cfg).map(|r| vec![r])
    };
    let runs = match runs {
        Ok(runs) => runs,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_config() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            });
        }
    };

    if let Err(e) = write_outputs(&cli.out, &runs) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    if !cli.quiet {
        print_summary(&runs);
        println!("wrote {}", cli.out.display());
    }
    ExitCode::SUCCESS
}

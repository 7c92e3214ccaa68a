use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use kitecycle::guidance::CyclePhase;
use kitecycle::harness::{
    energy_accounting, read_telemetry, round9, run_simulation_with, write_report, SimConfig,
    TelemetryWriter, TELEMETRY_COLUMNS,
};
use kitecycle::optimizer::{
    fit_winch_law_samples, loyd_limit, optimize_cycle, read_cycle_csv, seed_decision,
    select_transfer_branch, write_cycle_csv, OptimizerSummary, WinchLawFit,
};
use kitecycle::{KiteError, Result};

#[derive(Parser)]
#[command(
    name = "kitecycle",
    version,
    about = "Pumping-cycle kite simulator and cycle optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed loop and write telemetry plus per-cycle energy report.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Optimize a reduced-model cycle and write the trajectory and a summary.
    Optimize {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit the reel-in winch law to an optimizer cycle or a telemetry file.
    FitWinchLaw {
        csv: PathBuf,
        /// Wind speed the winch speed is normalized with (m/s).
        #[arg(long, default_value_t = 10.0)]
        wind: f64,
    },
    /// Print the Loyd limit for the configured kite and wind.
    Loyd {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load(path: &Path, o: &Overrides) -> Result<SimConfig> {
    let mut cfg = SimConfig::from_file(path)?;
    if let Some(dt) = o.dt {
        cfg.sim.dt = dt;
    }
    if let Some(d) = o.duration {
        cfg.sim.duration = d;
    }
    if let Some(s) = o.seed {
        cfg.sim.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| KiteError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| KiteError::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn simulate(cfg: &SimConfig, out: &Path) -> Result<()> {
    let mut writer = TelemetryWriter::new(create(out, &cfg.output.telemetry)?)?;
    let run = run_simulation_with(cfg, |rec| writer.write(rec))?;
    writer.finish()?;
    let reports = match energy_accounting(&run.records) {
        Ok(r) => r,
        Err(KiteError::NoCompleteCycle) => Vec::new(),
        Err(e) => return Err(e),
    };
    let mut report = create(out, &cfg.output.report)?;
    write_report(&mut report, &reports)?;
    report.flush()?;
    println!(
        "{} samples, {} complete cycles -> {}",
        run.records.len(),
        reports.len(),
        out.display()
    );
    for r in &reports {
        println!(
            "cycle {}: T {:.1} s, W_out {:.0} J, W_in {:.0} J, P_bar {:.1} W",
            r.cycle_index, r.period, r.w_out, r.w_in, r.p_bar_cycle
        );
    }
    match run.abort {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn optimize(cfg: &SimConfig, out: &Path) -> Result<()> {
    let opt = &cfg.optimizer;
    let cycle = optimize_cycle(opt, &cfg.wind.nominal(), &cfg.kite, &seed_decision(opt))?;
    let mut csv = create(out, "optimal_cycle.csv")?;
    write_cycle_csv(&mut csv, &cycle.samples)?;
    csv.flush()?;
    let s = OptimizerSummary::from_cycle(&cycle);
    let summary = OptimizerSummary {
        p_bar: round9(s.p_bar),
        ratio: round9(s.ratio),
        max_residual: round9(s.max_residual),
        ..s
    };
    let mut f = create(out, "optimizer_summary.json")?;
    serde_json::to_writer_pretty(&mut f, &summary).map_err(|e| KiteError::Io(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;
    println!(
        "P_bar {:.1} W, ratio {:.4}, {} iterations{}",
        cycle.p_bar,
        cycle.ratio,
        cycle.iterations,
        if cycle.converged {
            ""
        } else {
            " (iteration limit)"
        }
    );
    Ok(())
}

/// Reel-in samples of a telemetry file: transfer and return phases while
/// the elevation rises, without samples pinned at the drive limits.
fn telemetry_branch(path: &Path, v_w: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = read_telemetry(File::open(path)?)?;
    let y_max = rows
        .iter()
        .map(|r| r.v_winch_actual)
        .fold(f64::MIN, f64::max);
    let y_min = rows
        .iter()
        .map(|r| r.v_winch_actual)
        .fold(f64::MAX, f64::min);
    let mut theta = Vec::new();
    let mut y = Vec::new();
    for w in rows.windows(2) {
        let r = &w[0];
        let phase = r.cycle_phase()?;
        let rising = w[1].theta > r.theta;
        let pinned =
            (r.v_winch_actual - y_max).abs() < 1e-9 || (r.v_winch_actual - y_min).abs() < 1e-9;
        if matches!(phase, CyclePhase::Transfer | CyclePhase::Return) && rising && !pinned {
            theta.push(r.theta);
            y.push(r.v_winch_actual / v_w);
        }
    }
    Ok((theta, y))
}

fn fit(path: &Path, v_w: f64) -> Result<WinchLawFit> {
    if !(v_w > 0.0 && v_w.is_finite()) {
        return Err(KiteError::InvalidParameter {
            name: "wind",
            reason: "must be > 0".into(),
        });
    }
    let text =
        fs::read_to_string(path).map_err(|e| KiteError::Io(format!("{}: {e}", path.display())))?;
    let header = text.lines().next().unwrap_or_default();
    let (theta, y) = if header == TELEMETRY_COLUMNS.join(",") {
        telemetry_branch(path, v_w)?
    } else {
        let samples = read_cycle_csv(text.as_bytes())?;
        select_transfer_branch(&samples, v_w)
    };
    fit_winch_law_samples(&theta, &y)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            overrides,
        } => simulate(&load(&config, &overrides)?, &out),
        Command::Optimize {
            config,
            out,
            overrides,
        } => optimize(&load(&config, &overrides)?, &out),
        Command::FitWinchLaw { csv, wind } => {
            let f = fit(&csv, wind)?;
            let v = json!({
                "theta0": round9(f.theta0),
                "slope": round9(f.slope),
                "slope_lower": round9(f.slope_lower),
                "slope_upper": round9(f.slope_upper),
                "samples": f.samples,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&v).map_err(|e| KiteError::Io(e.to_string()))?
            );
            Ok(())
        }
        Command::Loyd { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            println!("{} W", loyd_limit(&cfg.wind.nominal(), &cfg.kite));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

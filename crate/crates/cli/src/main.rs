use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stepchirp::scenario::{self, exit_code, Format, Mode, ScenarioConfig};
use stepchirp::Error;

/// Frequency-stepped chirp radar simulator.
#[derive(Parser)]
#[command(name = "stepchirp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario's plan and scene and print the constraint table.
    Validate {
        config: PathBuf,
    },
    /// Run a scenario exactly as configured.
    Run(Common),
    /// Range-profile sweep over subpulse counts.
    SweepResolution {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Form ISAR images.
    Isar(Common),
    /// Range profiles with and without gap reconstruction; needs an [interference] section.
    Gapfill(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides receiver.rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_parser = ["csv", "raw"])]
    format: Option<String>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(d) = &self.out_dir {
            cfg.output.directory = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.receiver.rng_seed = s;
        }
        match self.format.as_deref() {
            Some("raw") => cfg.output.format = Format::Raw,
            Some("csv") => cfg.output.format = Format::Csv,
            _ => {}
        }
        if let Some(t) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| Error::Config(format!("--threads: {e}")))?;
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (cfg, label) = match cli.command {
        Command::Validate { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let summary = scenario::validate(&cfg)?;
            print!("{}", summary.table());
            if !summary.is_valid() {
                return Err(Error::PlanViolations(
                    summary.report.violations.iter().map(|v| v.to_string()).collect(),
                ));
            }
            return Ok(());
        }
        Command::Run(c) => (c.load()?, "run"),
        Command::SweepResolution { common, n_min, n_max } => {
            let mut cfg = common.load()?;
            let hi = n_max.unwrap_or(cfg.plan.subpulses);
            if n_min == 0 || n_min > hi {
                return Err(Error::Config(format!("empty sweep {n_min}..={hi}")));
            }
            cfg.processing.mode = Mode::Profile;
            cfg.processing.n_used = (n_min..=hi).collect();
            (cfg, "sweep-resolution")
        }
        Command::Isar(c) => {
            let mut cfg = c.load()?;
            cfg.processing.mode = Mode::Isar;
            (cfg, "isar")
        }
        Command::Gapfill(c) => {
            let mut cfg = c.load()?;
            if cfg.interference.is_none() {
                return Err(Error::Config("gapfill needs an [interference] section".into()));
            }
            cfg.processing.mode = Mode::Profile;
            (cfg, "gapfill")
        }
    };

    let report = scenario::run(&cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for r in &report.resolution {
        let measured = match (r.mainlobe_width_hz, r.measured_resolution_m) {
            (Some(w), Some(m)) => format!("width={:.3} kHz R={:.3} mm", w / 1e3, m * 1e3),
            _ => "width=n/a".to_string(),
        };
        println!(
            "N={} B_eq={:.1} GHz {measured} (theory {:.3} mm) peaks={}",
            r.n,
            r.equivalent_bandwidth_hz / 1e9,
            r.theoretical_resolution_m * 1e3,
            r.peak_count
        );
    }
    for s in &report.sidelobes {
        match s.filled_db {
            Some(f) => println!(
                "N={} spurious sidelobe {:.1} dB unfilled, {:.1} dB filled",
                s.n, s.unfilled_db, f
            ),
            None => println!("N={} spurious sidelobe {:.1} dB unfilled", s.n, s.unfilled_db),
        }
    }
    for i in &report.images {
        let corr = match i.correlation_db_vs_clean {
            Some(c) => format!(", dB correlation with clean {c:.4}"),
            None => String::new(),
        };
        println!(
            "N={} {} image {}x{} peak at ({:.4} m, {:+.4} m){corr}",
            i.n, i.variant, i.n_range, i.n_cross, i.peak_range_m, i.peak_crossrange_m
        );
    }
    println!(
        "{label}: {} files in {}",
        report.files.len(),
        cfg.output.directory.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::PlanViolations(v) => {
                    eprintln!("error: plan violates {} constraint(s):", v.len());
                    for line in v {
                        eprintln!("  {line}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

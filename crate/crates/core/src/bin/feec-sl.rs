use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use feec_sl::harness::{self, config, output, Experiment};
use feec_sl::Error;

#[derive(Parser)]
#[command(name = "feec-sl", version, about = "Semi-Lagrangian FEEC solver for 2D incompressible flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment
    Run(Common),
    /// Run a mesh-refinement study and report convergence orders
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_parser = parse_exp)]
    exp: Option<Experiment>,
    /// Flat key = value file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: Option<u8>,
    #[arg(long)]
    conservative: bool,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    tau_per_h: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_exp(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn spec(&self) -> feec_sl::Result<harness::ExperimentSpec> {
        let mut pairs = match &self.config {
            Some(path) => config::load_pairs(path)?,
            None => Vec::new(),
        };
        let mut set = |k: &str, v: String| pairs.push((k.to_string(), v));
        if let Some(e) = self.exp {
            set("exp", e.name().to_string());
        }
        if let Some(m) = &self.mesh {
            set("mesh", m.display().to_string());
        }
        if let Some(o) = self.order {
            set("order", o.to_string());
        }
        if self.conservative {
            set("conservative", "true".into());
        }
        if let Some(e) = self.eps {
            set("eps", e.to_string());
        }
        if let Some(c) = self.tau_per_h {
            set("tau_per_h", c.to_string());
        }
        if let Some(o) = &self.out {
            set("out", o.display().to_string());
        }
        let spec = config::spec_from_pairs(None, &pairs)?;
        spec.validate()?;
        Ok(spec)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Topology(_) | Error::DegenerateTriangle { .. } | Error::Io(_) => 3,
        _ => 2,
    }
}

fn execute(cli: Cli) -> feec_sl::Result<()> {
    match cli.command {
        Command::Run(common) => {
            let spec = common.spec()?;
            let outcome = harness::run(&spec)?;
            let last = outcome.trace.last().copied().unwrap_or_default();
            println!(
                "{}: h={:.6} tau={:.6} steps={} energy={:.12e} max_div={:.3e}",
                spec.experiment.name(),
                outcome.h,
                outcome.tau,
                last.step,
                last.energy,
                outcome.max_divergence_residual()
            );
            if let Some(e) = outcome.l2_error {
                println!("l2_error={e:.6e}");
            }
            let dir = spec.out.clone().unwrap_or_else(|| PathBuf::from("."));
            for p in output::write_run(&dir, &outcome)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Converge { common, levels } => {
            let spec = common.spec()?;
            let (report, runs) = harness::convergence(&spec, levels)?;
            print!("{}", output::errors_csv(&report));
            let dir = spec.out.clone().unwrap_or_else(|| PathBuf::from("."));
            for p in output::write_convergence(&dir, &report, runs.last().unwrap())? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

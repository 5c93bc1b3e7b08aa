use clap::{Parser, Subcommand};
use homoclinic_lab::config::{load_config, RunConfig};
use homoclinic_lab::{pipeline, Error};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical laboratory for homoclinic orbits of first-order Hamiltonian
/// systems: spectra, relative Morse indices by inertia and by spectral flow,
/// saddle point reduction, orbit search, and linear-system cross-checks.
#[derive(Parser)]
#[command(name = "hamlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// output directory (overrides [output].dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// seed for randomized search (overrides [search].seed)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// comma-separated stage list (restricts a multi-stage command)
    #[arg(long, global = true, value_delimiter = ',')]
    stages: Option<Vec<String>>,

    /// force one grid refinement round for stability certificates
    #[arg(long, global = true)]
    refine: bool,
}

#[derive(Subcommand)]
enum Command {
    /// eigenvalues with residual certificates (CSV + JSON)
    Spectrum,
    /// relative index pairs (mu, nu) for B0 and B_inf
    Index,
    /// spectral flow crosscheck mu = -Sf on a coarsened copy
    Flow,
    /// saddle point reduction summary (beta, d0, contraction)
    Reduce,
    /// full pipeline: indices, guarantee, search, verification
    Solve,
    /// symplectic integration and nullity crosscheck
    Linear,
    /// quick property suite with measured values
    Verify,
    /// aggregate existing JSON outputs into report.json
    Report,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => homoclinic_lab::config::desk_config(),
    };
    if let Some(s) = cli.seed {
        cfg.search.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.display().to_string();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = effective_config(cli)?;
    let out = PathBuf::from(&cfg.output.dir);
    let all: Vec<String> = match cli.command {
        Command::Spectrum => vec!["spectrum".into()],
        Command::Index => vec!["index".into()],
        Command::Flow => vec!["flow".into()],
        Command::Reduce => vec!["reduce".into()],
        Command::Solve => vec!["spectrum", "index", "reduce", "solve", "report"]
            .into_iter()
            .map(String::from)
            .collect(),
        Command::Linear => vec!["linear".into()],
        Command::Verify => vec!["verify".into()],
        Command::Report => vec!["report".into()],
    };
    let stages: Vec<String> = match &cli.stages {
        Some(filter) => all.iter().filter(|s| filter.contains(s)).cloned().collect(),
        None => all,
    };
    let rec = pipeline::run_stages(&cfg, &stages, &out, cli.refine)?;
    for st in &rec.stages {
        eprintln!("stage {:10} {:8.2}s -> {}", st.name, st.seconds, out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::from(0),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::InvalidArg(_) => 1,
                Error::Unconverged(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

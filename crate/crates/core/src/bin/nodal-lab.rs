use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nodal_lab::config::RunConfig;
use nodal_lab::pipeline;
use nodal_lab::{fixtures, Error};

/// Nodal domains, inner radii and good/bad cube coverings of Laplace
/// eigenfunctions on flat tori and Dirichlet boxes.
#[derive(Parser)]
#[command(name = "nodal-lab", version)]
struct Cli {
    /// TOML run configuration (defaults to the built-in 3-torus scan).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent analyses (overrides `output.jobs`).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Replace `ensemble.base_seed`.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one eigenfunction spec file per (λ, seed).
    Gen,
    /// Run the full pipeline on one spec file.
    Analyze { spec: PathBuf },
    /// Analyse the whole ensemble and fit the scaling regressions.
    Scan,
    /// Run the closed-form fixture suite.
    Verify,
}

const ASSERTION: u8 = 1;
const USAGE: u8 = 2;

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default_torus_scan(),
    };
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(j) = cli.jobs {
        cfg.output.jobs = j;
    }
    if let Some(s) = cli.seed_override {
        cfg.ensemble.base_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_for(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Parse { .. } | Error::Io { .. } => USAGE,
        _ => match e {
            Error::Stage { stage: "parse", .. } => USAGE,
            _ => ASSERTION,
        },
    }
}

fn report_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_for(e))
}

fn gen(cfg: &RunConfig, out: &Path) -> ExitCode {
    match pipeline::cmd_gen(cfg, out) {
        Ok(g) => {
            for l in &g.skipped {
                eprintln!("warning: no modes at target eigenvalue {l}; skipped");
            }
            println!("wrote {} spec files to {}", g.written.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => report_error(&e),
    }
}

fn analyze(cfg: &RunConfig, spec: &Path, out: &Path) -> ExitCode {
    match pipeline::cmd_analyze(spec, cfg, out) {
        Ok((a, paths)) => {
            let r = &a.report;
            println!(
                "λ = {:.6}: {} domains, fat inradius {:.5}, good mass {:.4} (κ_δ = {}, γ = {})",
                r.lambda, r.domain_count, r.fat_domain_inradius, r.covering.good_mass, r.covering.kappa_delta, r.covering.gamma
            );
            println!("reports: {}", paths.bounds_json.display());
            let failures = r.checks.failures();
            if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed: {}", failures.join(", "));
                ExitCode::from(ASSERTION)
            }
        }
        Err(e) => report_error(&e),
    }
}

fn scan(cfg: &RunConfig, out: &Path) -> ExitCode {
    match pipeline::cmd_scan(cfg, out, cfg.output.jobs) {
        Ok(o) => {
            for l in &o.regression.skipped_lambdas {
                eprintln!("warning: no modes at target eigenvalue {l}; skipped");
            }
            println!("{} members analysed; reports in {}", o.members.len(), out.display());
            if let Some(f) = &o.regression.fat_domain {
                println!("fat-domain slope {:.4} [{:.4}, {:.4}]", f.fit.slope, f.fit.ci_low, f.fit.ci_high);
            }
            if let Some(e) = &o.regression.fat_domain_error {
                println!("fat-domain fit skipped: {e}");
            }
            for w in pipeline::window_failures(&o) {
                eprintln!("outside window: {w}");
            }
            let failures = pipeline::scan_failures(&o);
            for f in &failures {
                eprintln!("failed: {f}");
            }
            if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(ASSERTION)
            }
        }
        Err(e) => report_error(&e),
    }
}

fn verify() -> ExitCode {
    let results = fixtures::run_all();
    let mut ok = true;
    for r in &results {
        println!("[{}] {} — {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
        ok &= r.pass;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(ASSERTION)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    if let Command::Verify = cli.command {
        return verify();
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let out = cfg.output.dir.clone();
    match &cli.command {
        Command::Gen => gen(&cfg, &out),
        Command::Analyze { spec } => analyze(&cfg, spec, &out),
        Command::Scan => scan(&cfg, &out),
        Command::Verify => unreachable!(),
    }
}

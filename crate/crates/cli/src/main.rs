use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use simplex_orlicz::harness::{
    run_apply, run_convergence, run_modulus, run_norm, run_verify_lemmas, write_csv, write_csv_file,
    ExperimentConfig,
};
use simplex_orlicz::{Error, Result};

/// Kantorovich-type operators on the simplex, measured in Orlicz norms.
#[derive(Parser, Debug)]
#[command(name = "simplex-orlicz", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partition of unity, cell identity, constant reproduction, operator
    /// norm bounds and moment decay for the chosen operator.
    VerifyLemmas(Common),
    /// Error norms over the n list, rate fit and ratio checks; CSV output.
    Converge(Common),
    /// Orlicz norm of the field (JSON).
    Norm(Common),
    /// Second-order modulus of the field for each radius (JSON).
    Modulus(Common),
    /// Operator values at the configured points (JSON).
    Apply(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `mkz` or `stancu`.
    #[arg(long)]
    operator: Option<String>,
    /// Comma-separated degrees.
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated stancu shifts.
    #[arg(long)]
    s: Option<String>,
    /// N-function key(s), e.g. `power:p=2` or `powerlog:p=2,expm:`.
    #[arg(long)]
    phi: Option<String>,
    /// Built-in field: const, affine, quadratic, lipschitz, oscillatory.
    #[arg(long)]
    field: Option<String>,
    #[arg(long)]
    quad_order: Option<String>,
    #[arg(long)]
    quad_levels: Option<String>,
    #[arg(long)]
    tail_eps: Option<String>,
    #[arg(long)]
    directions: Option<String>,
    #[arg(long)]
    t_samples: Option<String>,
    /// Comma-separated radii for `modulus`.
    #[arg(long)]
    r: Option<String>,
    /// Evaluation point `x1,x2` for `apply`; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    x: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Record wall-clock time per CSV row (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("operator", &self.operator),
            ("n", &self.n),
            ("s", &self.s),
            ("phi", &self.phi),
            ("field", &self.field),
            ("quad_order", &self.quad_order),
            ("quad_levels", &self.quad_levels),
            ("tail_eps", &self.tail_eps),
            ("directions", &self.directions),
            ("t_samples", &self.t_samples),
            ("r", &self.r),
            ("seed", &self.seed),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if !self.x.is_empty() {
            cfg.set("points", &self.x.join(";"))?;
        }
        if self.timing {
            cfg.timing = true;
        }
        if let Some(out) = &self.out {
            cfg.output_path = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn emit_json(value: &impl Serialize, cfg: &ExperimentConfig) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    println!("{text}");
    if let Some(path) = &cfg.output_path {
        fs::write(path, format!("{text}\n"))
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cmd: &Command) -> Result<bool> {
    match cmd {
        Command::VerifyLemmas(args) => {
            let cfg = args.config()?;
            let report = run_verify_lemmas(&cfg)?;
            for row in &report.rows {
                println!("{}", row.line());
            }
            if let Some(path) = &cfg.output_path {
                let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
                fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            }
            Ok(report.all_passed())
        }
        Command::Converge(args) => {
            let cfg = args.config()?;
            let report = run_convergence(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            match &cfg.output_path {
                Some(path) => write_csv_file(path, &report.records)?,
                None => write_csv(std::io::stdout().lock(), &report.records)?,
            }
            for fit in &report.fits {
                match (&fit.fit, &fit.skipped) {
                    (Some(f), _) => eprintln!(
                        "fit {} s={} phi={}: slope {:.4} (max log residual {:.3e})",
                        fit.kind, fit.s, fit.phi, f.slope, f.max_residual
                    ),
                    (None, Some(why)) => {
                        eprintln!("fit {} s={} phi={}: skipped ({why})", fit.kind, fit.s, fit.phi)
                    }
                    (None, None) => {}
                }
            }
            let checks = report.checks();
            for row in &checks {
                eprintln!("{}", row.line());
            }
            Ok(checks.iter().all(|r| r.passed))
        }
        Command::Norm(args) => {
            let cfg = args.config()?;
            emit_json(&run_norm(&cfg)?, &cfg)?;
            Ok(true)
        }
        Command::Modulus(args) => {
            let cfg = args.config()?;
            emit_json(&run_modulus(&cfg)?, &cfg)?;
            Ok(true)
        }
        Command::Apply(args) => {
            let cfg = args.config()?;
            emit_json(&run_apply(&cfg)?, &cfg)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use conical_core::scenario::{run_scenario, validate, ScenarioConfig};
use conical_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Action {
    Run,
    Validate,
}

/// Wave packets through a conical crossing: scenario runner.
///
/// Exit status: 0 on success, 2 for configuration errors, 3 when the regime
/// inequalities fail, 4 for numerical failures.
#[derive(Debug, Parser)]
#[command(name = "conical", version)]
struct Cli {
    /// What to do; `validate` is the same as `--validate`.
    #[arg(value_enum, default_value_t = Action::Run)]
    action: Action,
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// isotropic-crossing, lz-table or convergence.
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated list of ε values.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dry run: report the regime ratios, compute nothing else.
    #[arg(long)]
    validate: bool,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownPotential(_) | Error::Shape(_) | Error::Resolution(_) => 2,
        Error::Regime { .. } => 3,
        _ => 4,
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = &cli.scenario {
        cfg.scenario = s.clone();
    }
    if let Some(e) = &cli.eps {
        cfg.eps = e.clone();
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let cfg = load(cli)?;
    if cli.print_config {
        let text = toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    if cli.validate || cli.action == Action::Validate {
        let report = validate(&cfg)?;
        print!("{}", report.render());
        report.into_result()?;
        println!("validation passed");
        return Ok(());
    }
    let summary = run_scenario(&cfg)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(defect) = summary.lz_max_defect {
        println!("lz-table: max |a² + |b|² - 1| = {defect:.3e}");
    }
    for r in &summary.runs {
        let mut line = format!(
            "eps {:e}: delta {:.4}, transferred mass {:.6} ({:.4} of {:.6})",
            r.eps, r.transition.delta, r.transferred_mass, r.transferred_fraction, r.transition.mass_in
        );
        if let Some(c) = &r.reference {
            line.push_str(&format!(
                ", grid {:.6} (rel err {:+.3e}), L2 error {:.4e}",
                if r.transition.start == conical_core::ModeSign::Minus { c.mass_plus_grid } else { c.mass_minus_grid },
                c.transferred_rel_err,
                c.l2_error
            ));
        }
        println!("{line}");
    }
    if let Some(m) = summary.l2_monotone {
        println!("L2 error monotone in eps: {}", if m { "yes" } else { "no" });
    }
    println!("wrote {} files to {}", summary.files.len(), cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

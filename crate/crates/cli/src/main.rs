use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use visco::checks;
use visco::config::{parse_config, OutputFormat, RunSpec};
use visco::error::{CliError, Result};
use visco::export;
use visco::preset::build_preset;
use visco::report::{self, EnergyReportDto};
use visco::study::{run_convergence_study, SLOPE_WINDOW};
use visco_core::equilibrium::{self, EquilConfig, EquilState};
use visco_core::relax::{self, RelaxConfig};

/// Viscoelastic stress-relaxation toolbox: simulate the relaxation and
/// equilibrium systems, sweep the relaxation parameter, and verify the
/// energy structures connecting the two.
#[derive(Parser)]
#[command(name = "visco", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory (overrides the config's [output] dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress progress/summary lines
    #[arg(long)]
    quiet: bool,
    /// Exit with code 4 when the command's acceptance thresholds fail
    #[arg(long)]
    assert: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
    Both,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SimFormat {
    Csv,
    Bin,
    Both,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum System {
    Relax,
    Equilibrium,
}

#[derive(Subcommand)]
enum Command {
    /// Symmetrizer defect and positivity over a (d, alpha, eps, mu) grid
    AlgebraCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
    },
    /// Integrate one system and export trajectory snapshots
    Simulate {
        /// Which system to integrate (the first sweep eps is used for relax)
        #[arg(long, value_enum)]
        system: System,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        format: Option<SimFormat>,
    },
    /// Full eps sweep with rate fits against the equilibrium solution
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        format: Option<ReportFormat>,
    },
    /// Modulated-energy identity residual at two resolutions
    ModulatedCheck {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        format: Option<ReportFormat>,
    },
    /// Fading-memory stress representation against the evolved stress
    MemoryCheck {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        format: Option<ReportFormat>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn load_spec(path: &Path) -> Result<RunSpec> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

fn resolve_format(spec: &RunSpec, flag: Option<ReportFormat>) -> OutputFormat {
    match flag {
        Some(ReportFormat::Csv) => OutputFormat::Csv,
        Some(ReportFormat::Json) => OutputFormat::Json,
        Some(ReportFormat::Both) => OutputFormat::Both,
        None => spec.format,
    }
}

fn out_dir(spec: &RunSpec, common: &CommonArgs) -> PathBuf {
    common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&spec.out_dir))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::AlgebraCheck { common, format } => algebra_check_cmd(common, format),
        Command::Simulate {
            system,
            config,
            common,
            format,
        } => simulate_cmd(system, &config, common, format),
        Command::Converge {
            config,
            common,
            format,
        } => converge_cmd(&config, common, format),
        Command::ModulatedCheck {
            config,
            common,
            format,
        } => modulated_cmd(&config, common, format),
        Command::MemoryCheck {
            config,
            common,
            format,
        } => memory_cmd(&config, common, format),
    }
}

fn algebra_check_cmd(common: CommonArgs, format: ReportFormat) -> Result<()> {
    let rows = checks::algebra_check()?;
    let csv = checks::algebra_csv(&rows);
    if let Some(dir) = &common.out {
        report::ensure_dir(dir)?;
        if format != ReportFormat::Json {
            report::write_text(&dir.join("algebra_check.csv"), &csv)?;
        }
        if format != ReportFormat::Csv {
            let json = serde_json::to_string_pretty(&rows)
                .map_err(|e| CliError::AssertFailed(format!("json serialization failed: {e}")))?;
            report::write_text(&dir.join("algebra_check.json"), &format!("{json}\n"))?;
        }
    } else {
        print!("{csv}");
    }
    let worst = rows
        .iter()
        .map(|r| r.asym / (r.mu / r.eps))
        .fold(0.0, f64::max);
    let min_eig = rows.iter().map(|r| r.min_eig).fold(f64::INFINITY, f64::min);
    if !common.quiet {
        eprintln!(
            "algebra-check: {} rows, worst asymmetry {worst:.3e} x mu/eps, smallest eigenvalue {min_eig:.3e}",
            rows.len()
        );
    }
    if common.assert {
        for r in &rows {
            if r.asym > 1e-13 * (r.mu / r.eps) {
                return Err(CliError::AssertFailed(format!(
                    "symmetrizer defect {:.3e} exceeds 1e-13 mu/eps at d={} alpha={} eps={} mu={}",
                    r.asym, r.d, r.alpha, r.eps, r.mu
                )));
            }
            if r.min_eig <= 0.0 {
                return Err(CliError::AssertFailed(format!(
                    "symmetrizer loses positivity at d={} eps={} mu={}",
                    r.d, r.eps, r.mu
                )));
            }
        }
    }
    Ok(())
}

fn simulate_cmd(
    system: System,
    config: &Path,
    common: CommonArgs,
    format: Option<SimFormat>,
) -> Result<()> {
    let spec = load_spec(config)?;
    let format = format.unwrap_or(SimFormat::Both);
    let dir = out_dir(&spec, &common);
    report::ensure_dir(&dir)?;
    let grid = spec.grid()?;
    let model = spec.stress_model()?;
    let (f0, v0) = build_preset(&spec)?;
    match system {
        System::Relax => {
            let eps = spec.eps_list[0];
            let cfg = RelaxConfig::new(eps, spec.mu, model, grid, spec.t_final, spec.cfl_safety)?;
            let init = relax::well_prepared_init(&f0, &v0, &cfg)?;
            let traj = relax::run(&init, &cfg, spec.sample_every)?;
            if format != SimFormat::Bin {
                report::write_text(&dir.join("trajectory_relax.csv"), &export::relax_csv(&traj))?;
            }
            if format != SimFormat::Csv {
                report::write_bytes(
                    &dir.join("trajectory_relax.vrlx"),
                    &export::relax_binary(&traj),
                )?;
            }
            if !common.quiet {
                eprintln!(
                    "simulate relax: eps = {eps}, dt = {:.3e}, {} samples to t = {}",
                    traj.step_dt,
                    traj.times.len(),
                    spec.t_final
                );
                if traj.max_aliasing_fraction > 1e-8 {
                    eprintln!(
                        "warning: highest-third spectral energy fraction reached {:.3e}",
                        traj.max_aliasing_fraction
                    );
                }
            }
        }
        System::Equilibrium => {
            let cfg = EquilConfig::new(spec.mu, model, grid, spec.t_final, spec.cfl_safety)?;
            let init = EquilState::new(f0, v0)?;
            let traj = equilibrium::run(&init, &cfg, spec.sample_every)?;
            if format != SimFormat::Bin {
                report::write_text(
                    &dir.join("trajectory_equilibrium.csv"),
                    &export::equil_csv(&traj),
                )?;
            }
            if format != SimFormat::Csv {
                report::write_bytes(
                    &dir.join("trajectory_equilibrium.vrlx"),
                    &export::equil_binary(&traj),
                )?;
            }
            if !common.quiet {
                eprintln!(
                    "simulate equilibrium: dt = {:.3e}, {} samples to t = {}",
                    traj.step_dt,
                    traj.times.len(),
                    spec.t_final
                );
            }
        }
    }
    Ok(())
}

fn converge_cmd(config: &Path, common: CommonArgs, format: Option<ReportFormat>) -> Result<()> {
    let spec = load_spec(config)?;
    let format = resolve_format(&spec, format);
    let dir = out_dir(&spec, &common);
    let report = run_convergence_study(&spec)?;
    let written = report::write_convergence_report(&report, &dir, format)?;
    if !common.quiet {
        for row in &report.rows {
            let sup = row
                .sup_e_sobolev
                .map_or_else(|| "blown up".into(), |v| format!("{v:.6e}"));
            eprintln!(
                "eps = {:>9.3e}: sup energy = {sup} ({:.2}s)",
                row.eps, row.wall_s
            );
        }
        match (&report.fit_energy, &report.fit_phi) {
            (Some(fe), Some(fp)) => eprintln!(
                "slopes: energy {:.3}, phi {:.3}; C_T = {:.3}",
                fe.slope,
                fp.slope,
                report.c_t.unwrap_or(f64::NAN)
            ),
            _ => eprintln!("degenerate sweep: rate fits unavailable"),
        }
        for path in &written {
            eprintln!("wrote {}", path.display());
        }
    }
    if common.assert {
        if report.rows.iter().any(|r| r.blown_up) {
            return Err(CliError::AssertFailed("a sweep run blew up".into()));
        }
        let (lo, hi) = SLOPE_WINDOW;
        match (&report.fit_energy, &report.fit_phi) {
            (Some(fe), Some(fp)) => {
                for (name, slope) in [("energy", fe.slope), ("phi", fp.slope)] {
                    if !(lo..=hi).contains(&slope) {
                        return Err(CliError::AssertFailed(format!(
                            "{name} slope {slope:.3} outside [{lo}, {hi}]"
                        )));
                    }
                }
            }
            _ => return Err(CliError::AssertFailed("degenerate fit".into())),
        }
    }
    Ok(())
}

fn modulated_cmd(config: &Path, common: CommonArgs, format: Option<ReportFormat>) -> Result<()> {
    let spec = load_spec(config)?;
    let format = resolve_format(&spec, format);
    let dir = out_dir(&spec, &common);
    report::ensure_dir(&dir)?;
    let outcome = checks::modulated_check(&spec)?;
    for (name, run) in [("base", &outcome.base), ("refined", &outcome.refined)] {
        if format != OutputFormat::Json {
            report::write_text(
                &dir.join(format!("modulated_{name}.csv")),
                &report::energy_csv(&run.report),
            )?;
        }
        if format != OutputFormat::Csv {
            let dto = EnergyReportDto::new(
                &run.report,
                outcome.eps,
                spec.mu,
                spec.lambda,
                outcome.gamma,
            );
            report::write_text(&dir.join(format!("modulated_{name}.json")), &dto.to_json()?)?;
        }
    }
    if !common.quiet {
        let b = &outcome.base.report;
        eprintln!(
            "modulated-check: eps = {}, Gamma = {:.4}, C1 = {:.4}, C2 = {:.4}, C3 = {:.4}, K1 = {:.4}, K2 = {:.4}",
            outcome.eps, outcome.gamma, b.c1, b.c2, b.c3, b.k1, b.k2
        );
        eprintln!(
            "identity residual: {:.4e} (N = {}, {} intervals) -> {:.4e} (N = {}, {}), ratio {:.2}",
            b.identity_residual_l1,
            outcome.base.n_points,
            outcome.base.n_intervals,
            outcome.refined.report.identity_residual_l1,
            outcome.refined.n_points,
            outcome.refined.n_intervals,
            outcome.ratio
        );
    }
    if common.assert {
        let b = &outcome.base.report;
        if outcome.ratio < 3.5 {
            return Err(CliError::AssertFailed(format!(
                "identity residual ratio {:.2} below 3.5",
                outcome.ratio
            )));
        }
        if b.c1 <= 0.0 || b.c3 <= 0.0 {
            return Err(CliError::AssertFailed(format!(
                "coercivity lost: C1 = {:.4}, C3 = {:.4}",
                b.c1, b.c3
            )));
        }
    }
    Ok(())
}

fn memory_cmd(config: &Path, common: CommonArgs, format: Option<ReportFormat>) -> Result<()> {
    let spec = load_spec(config)?;
    let format = resolve_format(&spec, format);
    let dir = out_dir(&spec, &common);
    report::ensure_dir(&dir)?;
    let outcome = checks::memory_check(&spec)?;
    if format != OutputFormat::Json {
        report::write_text(&dir.join("memory_check.csv"), &checks::memory_csv(&outcome))?;
    }
    if format != OutputFormat::Csv {
        let summary = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "eps": outcome.eps,
            "dt_s": outcome.dt_s,
            "window_start": outcome.window_start,
            "sup_mismatch": outcome.sup_base,
            "sup_mismatch_half_step": outcome.sup_half,
            "ratio": outcome.ratio,
        });
        report::write_text(
            &dir.join("memory_check.json"),
            &format!(
                "{}\n",
                serde_json::to_string_pretty(&summary).expect("static json")
            ),
        )?;
    }
    if !common.quiet {
        eprintln!(
            "memory-check: eps = {}, window [{:.3}, {}], sup mismatch {:.4e} -> {:.4e} on halving (ratio {:.2})",
            outcome.eps,
            outcome.window_start,
            spec.t_final,
            outcome.sup_base,
            outcome.sup_half,
            outcome.ratio
        );
    }
    if common.assert {
        if outcome.sup_base > 1e-4 {
            return Err(CliError::AssertFailed(format!(
                "memory mismatch {:.4e} above 1e-4",
                outcome.sup_base
            )));
        }
        if outcome.ratio < 3.5 {
            return Err(CliError::AssertFailed(format!(
                "memory mismatch ratio {:.2} below 3.5",
                outcome.ratio
            )));
        }
    }
    Ok(())
}

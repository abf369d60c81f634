//! `sve` — command-line runner for the channel stabilization library.
//!
//! Three subcommands, all driven by scenario files:
//!
//! - `sve eigen --config <file>...` prints the characteristic speeds, the
//!   Froude number, and the flow regime;
//! - `sve kernels --config <file>...` solves the backstepping kernel
//!   equations and writes kernel/gain CSVs and plots;
//! - `sve simulate --config <file>...` runs the closed-loop simulation and
//!   writes the full report bundle (trace, snapshots, kernels, plots,
//!   summary).
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or validation
//! error, 3 kernel solver non-convergence, 4 simulation breakdown (CFL
//! violation or non-finite state).

mod config;
mod report;
mod svg;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_boundary_terms, parse_controller, ConfigError, Scenario};
use sve_control::{
    char_coefficients, kernel_residual, observer_gains, run, solve_controller_kernels,
    solve_observer_kernels, spectrum, AbstractCoefficients, KernelError, SimError, SolverOptions,
};

#[derive(Parser)]
#[command(
    name = "sve",
    about = "Backstepping boundary control of a sediment-carrying channel",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print characteristic speeds, Froude number, and flow regime.
    Eigen(CommonArgs),
    /// Solve the backstepping kernel equations and write CSVs and plots.
    Kernels(CommonArgs),
    /// Run the closed-loop simulation and write the full report bundle.
    Simulate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file(s); processed in order.
    #[arg(long = "config", required = true, num_args = 1..)]
    config: Vec<PathBuf>,

    /// Report directory (with several scenarios: the parent directory,
    /// one subdirectory per scenario).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the scenario's cell count.
    #[arg(long)]
    cells: Option<usize>,

    /// Override the scenario's CFL number.
    #[arg(long)]
    cfl: Option<f64>,

    /// Override the controller: none, state, or output.
    #[arg(long)]
    controller: Option<String>,

    /// Override the boundary terms used by the output-feedback law:
    /// measured or estimated.
    #[arg(long = "boundary-terms")]
    boundary_terms: Option<String>,

    /// Override the kernel grid resolution (nodes per side).
    #[arg(long = "kernel-n")]
    kernel_n: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{0}")]
    BadOverride(String),
    #[error("writing report: {0}")]
    Report(io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Report(_) => 1,
            CliError::Config(_) | CliError::BadOverride(_) => 2,
            CliError::Sim(SimError::Config(_)) | CliError::Sim(SimError::Characteristics(_)) => 2,
            CliError::Sim(SimError::Kernel(_)) | CliError::Kernel(_) => 3,
            CliError::Sim(SimError::CflViolation { .. })
            | CliError::Sim(SimError::NonFinite { .. }) => 4,
        }
    }
}

/// Best-effort console write: a vanished reader (`sve ... | head`) must not
/// abort the run — the report files are the product, the console an echo.
fn emit(text: &str) {
    use io::Write;
    let _ = io::stdout().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            use io::Write;
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let args = match &cli.cmd {
        Cmd::Eigen(a) | Cmd::Kernels(a) | Cmd::Simulate(a) => a,
    };
    let multi = args.config.len() > 1;
    for path in &args.config {
        let mut scenario = config::load_scenario(path)?;
        apply_overrides(&mut scenario, args)?;
        let out_dir = resolve_out_dir(args, multi, &scenario);
        match &cli.cmd {
            Cmd::Eigen(_) => cmd_eigen(&scenario)?,
            Cmd::Kernels(_) => cmd_kernels(&scenario, &out_dir)?,
            Cmd::Simulate(_) => cmd_simulate(&scenario, &out_dir)?,
        }
    }
    Ok(())
}

fn apply_overrides(scenario: &mut Scenario, args: &CommonArgs) -> Result<(), CliError> {
    if let Some(c) = args.cells {
        scenario.cells = c;
    }
    if let Some(c) = args.cfl {
        scenario.cfl = c;
    }
    if let Some(n) = args.kernel_n {
        scenario.kernel_n = n;
    }
    if let Some(s) = &args.controller {
        scenario.controller = parse_controller(s).ok_or_else(|| {
            CliError::BadOverride(format!(
                "--controller: unknown value '{s}' (expected none, state, or output)"
            ))
        })?;
    }
    if let Some(s) = &args.boundary_terms {
        scenario.boundary_terms = parse_boundary_terms(s).ok_or_else(|| {
            CliError::BadOverride(format!(
                "--boundary-terms: unknown value '{s}' (expected measured or estimated)"
            ))
        })?;
    }
    Ok(())
}

fn resolve_out_dir(args: &CommonArgs, multi: bool, scenario: &Scenario) -> PathBuf {
    match (&args.out, multi) {
        (Some(base), true) => base.join(&scenario.name),
        (Some(dir), false) => dir.clone(),
        (None, _) => scenario
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("report").join(&scenario.name)),
    }
}

fn cmd_eigen(scenario: &Scenario) -> Result<(), CliError> {
    let cfg = scenario.to_sim_config()?;
    let sp = spectrum(&cfg.setup).map_err(SimError::from)?;
    emit(&report::eigen_text(
        scenario,
        &sp,
        cfg.setup.froude(),
        cfg.setup.sediment_coefficient(),
    ));
    Ok(())
}

fn cmd_kernels(scenario: &Scenario, out_dir: &std::path::Path) -> Result<(), CliError> {
    let cfg = scenario.to_sim_config()?;
    let sp = spectrum(&cfg.setup).map_err(SimError::from)?;
    let cc = char_coefficients(&cfg.setup, &sp).map_err(SimError::from)?;
    let coeffs = AbstractCoefficients::from_channel(&cfg.setup, &cc);
    let opts = SolverOptions {
        tol: scenario.kernel_tol,
        ..SolverOptions::default()
    };
    let controller = solve_controller_kernels(&coeffs, scenario.kernel_n, &opts)?;
    let ctrl_res = kernel_residual(&controller.field, &coeffs);
    let observer = solve_observer_kernels(&coeffs, scenario.kernel_n, &opts)?;
    let obs_res = kernel_residual(&observer.field, &coeffs);
    let gains = observer_gains(&observer.field, coeffs.mu);
    let rep = report::write_kernel_report(
        out_dir,
        scenario,
        &controller,
        &ctrl_res,
        Some((&observer, &obs_res, &gains)),
    )
    .map_err(CliError::Report)?;
    emit(&rep.text);
    emit(&format!(
        "report directory: {} ({} files)\n",
        out_dir.display(),
        rep.files.len()
    ));
    Ok(())
}

fn cmd_simulate(scenario: &Scenario, out_dir: &std::path::Path) -> Result<(), CliError> {
    let cfg = scenario.to_sim_config()?;
    let out = run(&cfg)?;
    let rep = report::write_simulation_report(out_dir, scenario, cfg.setup.froude(), &out)
        .map_err(CliError::Report)?;
    let summary = std::fs::read_to_string(&rep.summary_path).map_err(CliError::Report)?;
    emit(&summary);
    emit(&format!(
        "report directory: {} ({} files)\n",
        out_dir.display(),
        rep.files.len()
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use sve_control::{BoundaryTerms, Controller};

    fn code(e: CliError) -> u8 {
        e.exit_code()
    }

    #[test]
    fn exit_codes_partition_the_failure_modes() {
        let io = || io::Error::new(io::ErrorKind::NotFound, "gone");
        assert_eq!(
            code(CliError::Config(ConfigError::Io {
                path: "x.conf".into(),
                source: io(),
            })),
            1
        );
        assert_eq!(code(CliError::Report(io())), 1);
        assert_eq!(
            code(CliError::Config(ConfigError::UnknownKey {
                path: "x.conf".into(),
                line: 3,
                key: "bogus".into(),
            })),
            2
        );
        assert_eq!(code(CliError::BadOverride("bad".into())), 2);
        assert_eq!(code(CliError::Sim(SimError::Config("cells".into()))), 2);
        let nc = || KernelError::NonConvergence {
            iterations: 200,
            change: 1.0,
        };
        assert_eq!(code(CliError::Kernel(nc())), 3);
        assert_eq!(code(CliError::Sim(SimError::Kernel(nc()))), 3);
        assert_eq!(
            code(CliError::Sim(SimError::CflViolation {
                dt: 1.0,
                bound: 0.5,
            })),
            4
        );
        assert_eq!(code(CliError::Sim(SimError::NonFinite { t: 0.25 })), 4);
    }

    fn scenario_named(name: &str, out_dir: Option<PathBuf>) -> Scenario {
        Scenario {
            name: name.into(),
            g: 9.81,
            cf: 0.1,
            ag: 0.008,
            pg: 0.002,
            hstar: 2.0,
            vstar: 3.0,
            bstar: 0.4,
            rho1: 1.5,
            rho2: 1.5,
            q1: 1.0,
            q2: 1.2,
            cells: 100,
            cfl: 0.95,
            t_final: 8.0,
            kernel_n: 201,
            kernel_tol: 1e-10,
            controller: Controller::FullState,
            boundary_terms: BoundaryTerms::Measured,
            out_dir,
        }
    }

    fn args_with_out(out: Option<&str>) -> CommonArgs {
        CommonArgs {
            config: vec![PathBuf::from("a.conf")],
            out: out.map(PathBuf::from),
            cells: None,
            cfl: None,
            controller: None,
            boundary_terms: None,
            kernel_n: None,
        }
    }

    #[test]
    fn out_dir_resolution_prefers_flag_then_scenario_then_default() {
        let s = scenario_named("chan", Some(PathBuf::from("custom/dir")));
        // Single scenario: --out names the directory itself.
        assert_eq!(
            resolve_out_dir(&args_with_out(Some("here")), false, &s),
            PathBuf::from("here")
        );
        // Several scenarios: --out is the parent.
        assert_eq!(
            resolve_out_dir(&args_with_out(Some("here")), true, &s),
            PathBuf::from("here/chan")
        );
        // No flag: the scenario's own out_dir key.
        assert_eq!(
            resolve_out_dir(&args_with_out(None), false, &s),
            PathBuf::from("custom/dir")
        );
        // Neither: report/<name>.
        let bare = scenario_named("chan", None);
        assert_eq!(
            resolve_out_dir(&args_with_out(None), true, &bare),
            PathBuf::from("report/chan")
        );
    }

    #[test]
    fn overrides_validate_enum_values() {
        let mut s = scenario_named("chan", None);
        let mut args = args_with_out(None);
        args.cells = Some(40);
        args.controller = Some("output".into());
        args.boundary_terms = Some("estimated".into());
        apply_overrides(&mut s, &args).unwrap();
        assert_eq!(s.cells, 40);
        assert_eq!(s.controller, Controller::OutputFeedback);
        assert_eq!(s.boundary_terms, BoundaryTerms::Estimated);

        args.controller = Some("pid".into());
        let err = apply_overrides(&mut s, &args).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("pid"));
    }
}

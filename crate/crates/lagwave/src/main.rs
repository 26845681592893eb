use clap::{Parser, Subcommand};
use lagwave::driver::{
    error_metric, exact_acoustic_solution, run_acoustic, run_elastic, RunReport, Seismogram,
    SimulationConfig, Snapshot,
};
use lagwave::medium::{Grid2D, RasterModel};
use lagwave::scenario::{load_scenario, MediumConfig, Physics, Scenario};
use lagwave::selftest::{run_selftests_with_faults, FaultInjection};
use lagwave::tridiag::{comm_time_allreduce, comm_time_dichotomy};
use lagwave::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lagwave",
    about = "Axisymmetric acoustic/elastic wave modeling by the Laguerre spectral-time method"
)]
struct Cli {
    /// Worker count (overrides the WORKERS environment variable and the scenario file)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed for the randomized oracle checks
    #[arg(long, global = true, default_value_t = 17)]
    seed: u64,

    /// Directory for output files
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write seismograms, snapshots, and the run report
    Simulate {
        /// Scenario file (TOML)
        scenario: PathBuf,
    },
    /// Rerun a scenario across meshes and tabulate trace errors
    Convergence {
        /// Scenario file (TOML)
        scenario: PathBuf,
        /// Radial cell counts, coarsest to finest; the z count scales proportionally
        #[arg(long, value_delimiter = ',', required = true)]
        meshes: Vec<usize>,
    },
    /// Evaluate the communication-time models for parallel tridiagonal solves
    Costmodel {
        /// Process counts, each a power of two
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<u64>,
        /// Message latency
        #[arg(long, default_value_t = 1.0)]
        alpha_lat: f64,
        /// Per-word transfer time
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// Per-word overhead
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// Right-hand-side batch size for the dichotomy model
        #[arg(long, default_value_t = 1.0)]
        l: f64,
    },
    /// Run the embedded oracle checks
    Selftest {
        /// Relative perturbation of the convolution weights (fault-injection hook)
        #[arg(long, hide = true, default_value_t = 0.0)]
        fault_conv_weight: f64,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::NoConvergence(_)
        | Error::NotPositiveDefinite(_)
        | Error::Stagnation { .. }
        | Error::SingularSystem { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { scenario } => cmd_simulate(&cli, scenario),
        Command::Convergence { scenario, meshes } => cmd_convergence(&cli, scenario, meshes),
        Command::Costmodel { p, alpha_lat, beta, gamma, l } => {
            cmd_costmodel(p, *alpha_lat, *beta, *gamma, *l)
        }
        Command::Selftest { fault_conv_weight } => cmd_selftest(&cli, *fault_conv_weight),
    }
}

/// flag > WORKERS environment variable > scenario file value
fn resolve_workers(cli: &Cli, scenario_value: usize) -> Result<usize, String> {
    if let Some(w) = cli.workers {
        return Ok(w);
    }
    match std::env::var("WORKERS") {
        Ok(s) => s
            .parse::<usize>()
            .map_err(|_| format!("WORKERS must be a positive integer, got {s:?}")),
        Err(_) => Ok(scenario_value),
    }
}

fn load_for_run(cli: &Cli, path: &Path) -> Result<Scenario, (u8, String)> {
    let mut scenario =
        load_scenario(path).map_err(|e| (exit_for(&e), e.to_string()))?;
    scenario.config.workers =
        resolve_workers(cli, scenario.config.workers).map_err(|m| (EXIT_CONFIG, m))?;
    if scenario.config.workers == 0 {
        return Err((EXIT_CONFIG, "worker count must be at least 1".into()));
    }
    Ok(scenario)
}

fn run_scenario(
    scenario: &Scenario,
) -> lagwave::Result<(Seismogram, Vec<Snapshot>, RunReport)> {
    match &scenario.medium {
        MediumConfig::Acoustic(m) => run_acoustic(&scenario.config, m),
        MediumConfig::Elastic(m) => run_elastic(&scenario.config, m),
    }
}

fn component_names(physics: Physics) -> &'static [&'static str] {
    match physics {
        Physics::Acoustic => &["u"],
        Physics::Elastic => &["ur", "uz"],
    }
}

fn seismogram_text(seismogram: &Seismogram, physics: Physics) -> String {
    let names = component_names(physics);
    let mut s = String::from("# time");
    for (idx, trace) in seismogram.traces.iter().enumerate() {
        for name in names {
            s.push_str(&format!(
                " r{idx}_{name}[{r},{z}]",
                r = trace.position.0,
                z = trace.position.1
            ));
        }
    }
    s.push('\n');
    for (j, t) in seismogram.times.iter().enumerate() {
        s.push_str(&format!("{t}"));
        for trace in &seismogram.traces {
            for comp in &trace.components {
                s.push_str(&format!(" {}", comp[j]));
            }
        }
        s.push('\n');
    }
    s
}

/// Snapshots reuse the raster container and byte layout but hold signed
/// wavefield samples, so the struct is built directly instead of through the
/// material-model constructor (which enforces positive values).
fn snapshot_raster(snapshot: &Snapshot, grid: &Grid2D, physics: Physics) -> RasterModel {
    let names = component_names(physics);
    RasterModel {
        origin: (grid.r(0), grid.z(0)),
        spacing: (grid.h_r, grid.h_z),
        dims: (grid.n_r, grid.n_z),
        params: snapshot
            .fields
            .iter()
            .zip(names)
            .map(|(f, name)| (name.to_string(), f.as_slice().to_vec()))
            .collect(),
    }
}

fn cmd_simulate(cli: &Cli, path: &Path) -> ExitCode {
    let scenario = match load_for_run(cli, path) {
        Ok(s) => s,
        Err((code, msg)) => return fail(code, msg),
    };
    let (seismogram, snapshots, report) = match run_scenario(&scenario) {
        Ok(out) => out,
        Err(e) => return fail(exit_for(&e), e),
    };
    if let Err(e) = std::fs::create_dir_all(&cli.output_dir) {
        return fail(EXIT_CONFIG, format!("cannot create output dir: {e}"));
    }
    let mut manifest: Vec<String> = Vec::new();

    let seis_name = "seismogram.txt".to_string();
    if let Err(e) = std::fs::write(
        cli.output_dir.join(&seis_name),
        seismogram_text(&seismogram, scenario.physics),
    ) {
        return fail(EXIT_CONFIG, e);
    }
    manifest.push(seis_name);

    for (idx, snapshot) in snapshots.iter().enumerate() {
        let name = format!("snapshot_{idx}.rast");
        let raster = snapshot_raster(snapshot, &scenario.config.grid, scenario.physics);
        if let Err(e) = raster.write_binary(&cli.output_dir.join(&name)) {
            return fail(EXIT_CONFIG, e);
        }
        manifest.push(name);
    }

    let report_name = "report.txt".to_string();
    manifest.push(report_name.clone());
    let mut text = scenario.echo.clone();
    text.push_str(&report.to_text());
    text.push_str("# snapshots\n");
    for (idx, snapshot) in snapshots.iter().enumerate() {
        text.push_str(&format!("snapshot_{idx} time {}\n", snapshot.time));
    }
    text.push_str("# manifest\n");
    for name in &manifest {
        text.push_str(name);
        text.push('\n');
    }
    if let Err(e) = std::fs::write(cli.output_dir.join(&report_name), text) {
        return fail(EXIT_CONFIG, e);
    }
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "wrote {} files to {}: {}",
        manifest.len(),
        cli.output_dir.display(),
        manifest.join(", ")
    );
    ExitCode::SUCCESS
}

struct MeshRun {
    n_r: usize,
    h_r: f64,
    grid: Grid2D,
    source_cell: (usize, usize),
    seismogram: Seismogram,
}

fn cmd_convergence(cli: &Cli, path: &Path, meshes: &[usize]) -> ExitCode {
    let scenario = match load_for_run(cli, path) {
        Ok(s) => s,
        Err((code, msg)) => return fail(code, msg),
    };
    let base = scenario.config.grid;
    let analytic = scenario.physics == Physics::Acoustic && scenario.medium_kind == "homogeneous";
    if !analytic && meshes.len() < 2 {
        return fail(
            EXIT_CONFIG,
            "self-convergence without an analytic reference needs at least two meshes",
        );
    }
    let mut sorted = meshes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != meshes.len() || sorted != meshes {
        return fail(EXIT_CONFIG, "mesh list must be strictly increasing radial cell counts");
    }

    let mut runs: Vec<MeshRun> = Vec::new();
    for &n_r in meshes {
        let n_z = ((n_r as f64 * base.n_z as f64 / base.n_r as f64).round() as usize).max(2);
        let grid = match Grid2D::build(base.l1, base.l2, n_r, n_z) {
            Ok(g) => g,
            Err(e) => return fail(EXIT_CONFIG, e),
        };
        let config = SimulationConfig { grid, snapshot_times: Vec::new(), ..scenario.config.clone() };
        let run = match &scenario.medium {
            MediumConfig::Acoustic(m) => run_acoustic(&config, m),
            MediumConfig::Elastic(m) => run_elastic(&config, m),
        };
        let (seismogram, _, _) = match run {
            Ok(out) => out,
            Err(e) => return fail(exit_for(&e), e),
        };
        let source_cell = match scenario.config.source.cell(&grid) {
            Ok(c) => c,
            Err(e) => return fail(EXIT_CONFIG, e),
        };
        runs.push(MeshRun { n_r, h_r: grid.h_r, grid, source_cell, seismogram });
    }

    let (c_ref, kappa_ref) = reference_speed(&scenario);
    let lambda = c_ref / scenario.config.source.f0;
    let dt = scenario.config.dt;
    let source = &scenario.config.source;

    // errors[mesh][receiver]
    let mut errors: Vec<Vec<f64>> = Vec::new();
    let compared = if analytic { runs.len() } else { runs.len() - 1 };
    for run in runs.iter().take(compared) {
        let mut row = Vec::new();
        for (r_idx, trace) in run.seismogram.traces.iter().enumerate() {
            let result = if analytic {
                // distances between effective (cell-center) positions, not the
                // requested ones; the source keeps its nominal radius (an axis
                // ring of radius h_r/2 acts as an on-axis point to O(h^2))
                let dr = run.grid.r(trace.cell.0) - source.r0;
                let dz = run.grid.z(trace.cell.1) - run.grid.z(run.source_cell.1);
                let dist = (dr * dr + dz * dz).sqrt();
                let exact: Result<Vec<f64>, _> = run
                    .seismogram
                    .times
                    .iter()
                    .map(|&t| exact_acoustic_solution(dist, t, c_ref, source).map(|u| u / kappa_ref))
                    .collect();
                exact.and_then(|e| {
                    error_metric(&e, &trace.components[0], dt)
                })
            } else {
                let reference = &runs.last().unwrap().seismogram.traces[r_idx];
                // compare the first component; both meshes share the time grid
                error_metric(&reference.components[0], &trace.components[0], dt)
            };
            match result {
                Ok(eps) => row.push(eps),
                Err(e) => return fail(exit_for(&e), e),
            }
        }
        errors.push(row);
    }

    let mut table = String::new();
    table.push_str(&format!(
        "# convergence table ({} reference)\n",
        if analytic { "analytic" } else { "finest-mesh" }
    ));
    table.push_str("# n_r h_r h_over_lambda receiver_r receiver_z distance epsilon order\n");
    for (mi, row) in errors.iter().enumerate() {
        for (ri, &eps) in row.iter().enumerate() {
            let run = &runs[mi];
            let trace = &run.seismogram.traces[ri];
            let dr = run.grid.r(trace.cell.0) - source.r0;
            let dz = run.grid.z(trace.cell.1) - run.grid.z(run.source_cell.1);
            let dist = (dr * dr + dz * dz).sqrt();
            let order = if mi > 0 {
                let ratio_h = runs[mi - 1].h_r / runs[mi].h_r;
                let e_prev = errors[mi - 1][ri];
                format!("{:.3}", (e_prev / eps).ln() / ratio_h.ln())
            } else {
                String::new()
            };
            table.push_str(&format!(
                "{} {} {} {} {} {} {} {}\n",
                runs[mi].n_r,
                runs[mi].h_r,
                runs[mi].h_r / lambda,
                trace.position.0,
                trace.position.1,
                dist,
                eps,
                order
            ));
        }
    }
    print!("{table}");
    if let Err(e) = std::fs::create_dir_all(&cli.output_dir) {
        return fail(EXIT_CONFIG, format!("cannot create output dir: {e}"));
    }
    if let Err(e) = std::fs::write(cli.output_dir.join("convergence.txt"), &table) {
        return fail(EXIT_CONFIG, e);
    }
    ExitCode::SUCCESS
}

/// Fastest wave speed at the source location, and the stiffness used to
/// scale the analytic point-source amplitude.
fn reference_speed(scenario: &Scenario) -> (f64, f64) {
    let (r, z) = (scenario.config.source.r0.max(0.0), scenario.config.source.z0);
    match &scenario.medium {
        MediumConfig::Acoustic(m) => {
            let kappa = m.kappa.value(r, z);
            (
                (kappa / m.rho.value(r, z)).sqrt(),
                kappa,
            )
        }
        MediumConfig::Elastic(m) => {
            let lp = m.lambda.value(r, z) + 2.0 * m.mu.value(r, z);
            ((lp / m.rho.value(r, z)).sqrt(), lp)
        }
    }
}

fn cmd_costmodel(p_list: &[u64], alpha_lat: f64, beta: f64, gamma: f64, l: f64) -> ExitCode {
    let mut out = String::from("# p allreduce dichotomy ratio\n");
    for &p in p_list {
        let allreduce = match comm_time_allreduce(p, alpha_lat, beta, gamma) {
            Ok(v) => v,
            Err(e) => return fail(EXIT_CONFIG, e),
        };
        let dichotomy = match comm_time_dichotomy(p, l, alpha_lat, beta, gamma) {
            Ok(v) => v,
            Err(e) => return fail(EXIT_CONFIG, e),
        };
        let ratio = if p >= 2 && allreduce != 0.0 {
            format!("{}", dichotomy / allreduce)
        } else {
            "-".to_string()
        };
        out.push_str(&format!("{p} {allreduce} {dichotomy} {ratio}\n"));
    }
    print!("{out}");
    ExitCode::SUCCESS
}

fn cmd_selftest(cli: &Cli, fault_conv_weight: f64) -> ExitCode {
    let report = run_selftests_with_faults(
        cli.seed,
        FaultInjection { conv_weight_perturbation: fault_conv_weight },
    );
    print!("{}", report.to_text());
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failing checks: {}", report.failing_names().join(", "));
        ExitCode::from(1)
    }
}

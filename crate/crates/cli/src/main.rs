//! Batch front-end: runs abstraction jobs described by JSON manifests and
//! writes the abstraction, verification, and plot artifacts.

mod config;
mod plot;

use affabs::abstraction::{
    load_abstraction, plan_increments, run_incremental, run_onestep, save_abstraction,
    AbstractionError, FinalAbstraction,
};
use affabs::mesh::{interpolation_radius, mesh_diameter};
use affabs::verify::{
    check_continuous_sandwich, check_dominance, check_grid_sandwich, render_report_table,
    CheckResult, MethodComparison, VerificationReport,
};
use clap::{Args, Parser, Subcommand};
use config::{apply_overrides, load_run_config, prepare, ConfigError, Job, Method, Overrides};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "affabs",
    about = "Bracketing affine abstractions of nonlinear vector fields over gridded boxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the abstraction job described by a config file.
    Abstract(AbstractArgs),
    /// Re-check a previously saved abstraction.
    Verify(VerifyArgs),
    /// Run several configs and print their method comparisons.
    Bench(BenchArgs),
    /// Export CSV slices of a saved abstraction.
    PlotData(PlotArgs),
    /// Print grid statistics and the increment plan for a config.
    MeshInfo(MeshInfoArgs),
}

#[derive(Args, Clone)]
struct CommonOverrides {
    /// Override the per-increment point budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Override the method: onestep, incremental, or both.
    #[arg(long)]
    method: Option<Method>,
    /// Override the emulated cap on simultaneously active points.
    #[arg(long)]
    memory_cap: Option<usize>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the artifact directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl CommonOverrides {
    fn as_overrides(&self) -> Overrides {
        Overrides {
            budget: self.budget,
            method: self.method,
            memory_cap: self.memory_cap,
            seed: self.seed,
            out_dir: self.out_dir.clone(),
        }
    }
}

#[derive(Args)]
struct AbstractArgs {
    /// JSON run configuration.
    config: PathBuf,
    #[command(flatten)]
    overrides: CommonOverrides,
}

#[derive(Args)]
struct VerifyArgs {
    config: PathBuf,
    /// Previously written abstraction file.
    #[arg(long)]
    abstraction: PathBuf,
    /// Also sample the continuous domain with this many points (>= 10000).
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    overrides: CommonOverrides,
}

#[derive(Args)]
struct BenchArgs {
    /// One config file per case.
    configs: Vec<PathBuf>,
    #[command(flatten)]
    overrides: CommonOverrides,
}

#[derive(Args)]
struct PlotArgs {
    config: PathBuf,
    #[arg(long)]
    abstraction: PathBuf,
    /// Fixed dimensions, e.g. "1=0.0,2=0.5"; all but 1-2 dims must be fixed.
    #[arg(long, default_value = "")]
    plot_slice: String,
    /// Increment overlays to include, e.g. "1,3,5,7".
    #[arg(long, value_delimiter = ',')]
    increments: Vec<usize>,
    /// Output CSV path; defaults to <out-dir>/plot.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: CommonOverrides,
}

#[derive(Args)]
struct MeshInfoArgs {
    config: PathBuf,
    #[command(flatten)]
    overrides: CommonOverrides,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_RESOURCE_CAP: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Abstract(args) => cmd_abstract(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::PlotData(args) => cmd_plot(&args),
        Command::MeshInfo(args) => cmd_mesh_info(&args),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load_job(path: &Path, overrides: &CommonOverrides) -> Result<Job, ConfigError> {
    let mut run = load_run_config(path)?;
    apply_overrides(&mut run, &overrides.as_overrides());
    prepare(&run)
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), ConfigError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| ConfigError::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| ConfigError::Io { path, source })
}

fn report_json(report: &VerificationReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

fn metrics_line(method: &str, result: &FinalAbstraction, elapsed: f64) {
    let peak = result.log.iter().map(|l| l.peak_active_points).max().unwrap_or(0);
    println!(
        "method={method} theta={:.6} kappa={} sigma={:.6} peak_points={peak} elapsed={elapsed:.3}s",
        result.overall_theta, result.kappa, result.sigma
    );
}

fn run_job(
    job: &Job,
) -> Result<(Option<FinalAbstraction>, Option<FinalAbstraction>, bool), AbstractionError> {
    let mut capped = false;
    let onestep = if job.method.runs_onestep() {
        match run_onestep(&job.mesh, &job.spec, job.config.smoothness.as_ref(), job.config.memory_cap)
        {
            Ok(a) => Some(a),
            Err(AbstractionError::MemoryBudgetExceeded { needed, cap }) => {
                eprintln!("one-step aborted: {needed} active points exceed the cap {cap} (N/A)");
                capped = true;
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let incremental = if job.method.runs_incremental() {
        Some(run_incremental(&job.mesh, &job.spec, &job.config)?)
    } else {
        None
    };
    Ok((onestep, incremental, capped))
}

fn build_report(
    job: &Job,
    case: &str,
    onestep: Option<&FinalAbstraction>,
    incremental: Option<&FinalAbstraction>,
    onestep_na: bool,
) -> VerificationReport {
    let mut checks: Vec<CheckResult> = Vec::new();
    if let Some(one) = onestep {
        let mut c = check_grid_sandwich(one, &job.mesh, &job.spec);
        c.id = "grid_sandwich_onestep".into();
        checks.push(c);
    }
    if let Some(inc) = incremental {
        let mut c = check_grid_sandwich(inc, &job.mesh, &job.spec);
        c.id = "grid_sandwich_incremental".into();
        checks.push(c);
        checks.push(check_dominance(&inc.log, &job.mesh));
        if let Some(one) = onestep {
            let violation = one.overall_theta - inc.overall_theta;
            checks.push(CheckResult {
                id: "incremental_suboptimality".into(),
                pass: violation <= 1e-6,
                worst_violation: violation,
                witness: None,
                tolerance: 1e-6,
                advisory: false,
            });
        }
    }
    let comparison = (job.method == Method::Both || onestep_na).then(|| {
        let n = job.spec.dim_state();
        MethodComparison {
            theta_onestep: onestep.map(|a| a.overall_theta),
            theta_incremental: incremental.map(|a| a.overall_theta),
            ratio: match (onestep, incremental) {
                (Some(o), Some(i)) if o.overall_theta.abs() > 1e-300 => {
                    Some(i.overall_theta / o.overall_theta)
                }
                _ => None,
            },
            kappa_incremental: incremental.map(|a| a.kappa),
            peak_points_onestep: onestep
                .map(|a| a.log.iter().map(|l| l.peak_active_points).max().unwrap_or(0)),
            peak_points_incremental: incremental
                .map(|a| a.log.iter().map(|l| l.peak_active_points).max().unwrap_or(0)),
            theta_onestep_replicated: onestep.map(|a| a.overall_theta * n as f64),
            theta_incremental_replicated: incremental.map(|a| a.overall_theta * n as f64),
            onestep_na,
        }
    });
    VerificationReport { case: case.to_string(), checks, method_comparison: comparison }
}

fn cmd_abstract(args: &AbstractArgs) -> Result<u8, ConfigError> {
    let job = load_job(&args.config, &args.overrides)?;
    let started = Instant::now();
    let (onestep, incremental, capped) =
        run_job(&job).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let elapsed = started.elapsed().as_secs_f64();

    if let Some(one) = &onestep {
        write_artifact(
            &job.out_dir,
            "abstraction_onestep.json",
            &save_abstraction(one, job.mesh.domain()),
        )?;
        metrics_line("onestep", one, elapsed);
    }
    if let Some(inc) = &incremental {
        write_artifact(
            &job.out_dir,
            "abstraction_incremental.json",
            &save_abstraction(inc, job.mesh.domain()),
        )?;
        metrics_line("incremental", inc, elapsed);
    }
    let case = args.config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let report = build_report(&job, case, onestep.as_ref(), incremental.as_ref(), capped);
    write_artifact(&job.out_dir, "report.json", &report_json(&report))?;
    write_artifact(&job.out_dir, "report.txt", &render_report_table(&report))?;
    print!("{}", render_report_table(&report));

    if capped {
        return Ok(EXIT_RESOURCE_CAP);
    }
    if !report.all_passed() {
        return Ok(EXIT_CHECK_FAILED);
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, ConfigError> {
    let job = load_job(&args.config, &args.overrides)?;
    let text = std::fs::read_to_string(&args.abstraction)
        .map_err(|source| ConfigError::Io { path: args.abstraction.clone(), source })?;
    let (abstraction, domain) =
        load_abstraction(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if &domain != job.mesh.domain() {
        return Err(ConfigError::Invalid(
            "abstraction file domain does not match the config".into(),
        ));
    }
    let mut checks = vec![check_grid_sandwich(&abstraction, &job.mesh, &job.spec)];
    if abstraction.log.len() > 1 {
        checks.push(check_dominance(&abstraction.log, &job.mesh));
    }
    if let Some(samples) = args.samples {
        if samples < 10_000 {
            return Err(ConfigError::Invalid("--samples must be at least 10000".into()));
        }
        checks.push(check_continuous_sandwich(&abstraction, &job.spec, &domain, samples, job.seed));
    }
    let case = args.config.file_stem().and_then(|s| s.to_str()).unwrap_or("verify");
    let report =
        VerificationReport { case: case.to_string(), checks, method_comparison: None };
    write_artifact(&job.out_dir, "report.json", &report_json(&report))?;
    write_artifact(&job.out_dir, "report.txt", &render_report_table(&report))?;
    print!("{}", render_report_table(&report));
    if !report.all_passed() {
        return Ok(EXIT_CHECK_FAILED);
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<u8, ConfigError> {
    if args.configs.is_empty() {
        return Err(ConfigError::Invalid("bench needs at least one config".into()));
    }
    // Independent cases fan out to threads; results print in input order.
    let results: Vec<Result<(String, VerificationReport, f64), ConfigError>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = args
                .configs
                .iter()
                .map(|path| {
                    let overrides = &args.overrides;
                    scope.spawn(move || {
                        let job = load_job(path, overrides)?;
                        let started = Instant::now();
                        let report = affabs::verify::compare_methods(
                            &job.mesh,
                            &job.spec,
                            &job.config,
                        )
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                        let case = path
                            .file_stem()
                            .and_then(|s| s.to_str())
                            .unwrap_or("case")
                            .to_string();
                        let elapsed = started.elapsed().as_secs_f64();
                        Ok((case, report, elapsed))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
        });

    let mut failed = false;
    let out_dir = args.overrides.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    for result in results {
        let (case, mut report, elapsed) = result?;
        report.case = case.clone();
        println!("== {case} ({elapsed:.3}s)");
        print!("{}", render_report_table(&report));
        write_artifact(&out_dir, &format!("bench_{case}_report.json"), &report_json(&report))?;
        failed |= !report.all_passed();
    }
    Ok(if failed { EXIT_CHECK_FAILED } else { 0 })
}

fn parse_slice(text: &str) -> Result<BTreeMap<usize, f64>, ConfigError> {
    let mut slice = BTreeMap::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (dim, value) = part
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("bad slice entry `{part}`")))?;
        let dim: usize = dim
            .trim()
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("bad slice dimension `{dim}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("bad slice value `{value}`")))?;
        if slice.insert(dim, value).is_some() {
            return Err(ConfigError::Invalid(format!("dimension {dim} sliced twice")));
        }
    }
    Ok(slice)
}

fn cmd_plot(args: &PlotArgs) -> Result<u8, ConfigError> {
    let job = load_job(&args.config, &args.overrides)?;
    let text = std::fs::read_to_string(&args.abstraction)
        .map_err(|source| ConfigError::Io { path: args.abstraction.clone(), source })?;
    let (abstraction, _) =
        load_abstraction(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let slice = parse_slice(&args.plot_slice)?;
    let csv = plot::emit_plot_data(&abstraction, &job.spec, &job.mesh, &slice, &args.increments)
        .map_err(ConfigError::Invalid)?;
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .map_err(|source| ConfigError::Io { path: parent.to_path_buf(), source })?;
            }
            std::fs::write(path, &csv)
                .map_err(|source| ConfigError::Io { path: path.clone(), source })?;
        }
        None => write_artifact(&job.out_dir, "plot.csv", &csv)?,
    }
    Ok(0)
}

fn cmd_mesh_info(args: &MeshInfoArgs) -> Result<u8, ConfigError> {
    let job = load_job(&args.config, &args.overrides)?;
    let mesh = &job.mesh;
    let d = mesh.dim();
    let delta = mesh_diameter(mesh);
    println!("dimensions:            {d}");
    println!("points per dim:        {:?}", mesh.points_per_dim());
    println!("total grid points:     {}", mesh.s_max());
    println!("spacing:               {:?}", mesh.spacing());
    println!("cell diameter:         {delta:.6}");
    println!("interpolation radius:  {:.6}", interpolation_radius(d, delta));
    println!("box corners:           {}", 1usize << d);
    if job.method.runs_incremental() {
        match plan_increments(mesh.s_max(), job.config.budget, 1usize << d, d) {
            Ok((kappa, (lo, hi))) => {
                println!("budget:                {}", job.config.budget);
                println!("planned increments:    {kappa} (bounds {lo}..{hi})");
            }
            Err(e) => println!("increment plan:        {e}"),
        }
    }
    Ok(0)
}

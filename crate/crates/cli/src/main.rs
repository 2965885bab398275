use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bwalloc::admm::{solve_mopc, solve_num, Init, SolveOptions};
use bwalloc::baseline::{run_baseline, Baseline, FwOptions, StepRule};
use bwalloc::gen::{generate_instance, EmpiricalCdf, GenConfig, SubflowSize};
use bwalloc::model::{load_instance, save_instance, ProblemInstance};
use bwalloc::report::{read_trace, write_trace, SolveReport, Status, TraceKind, TraceRecord};

#[derive(Parser)]
#[command(name = "bwalloc", version, about = "Bandwidth allocation and path selection solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic instance.
    Generate(GenerateArgs),
    /// Run one scheme on an instance.
    Solve(SolveArgs),
    /// Run the six comparison schemes on one instance.
    Compare(CompareArgs),
    /// Turn trace files into plot-ready columns.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Desk,
    Wan,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    Num,
    Mopc,
    CvxMopc,
    Fw,
    FwRelaxed,
    FwProjected,
    FwRelaxedProjected,
}

impl Scheme {
    fn name(self) -> &'static str {
        match self {
            Scheme::Num => "num",
            Scheme::Mopc => "mopc",
            Scheme::CvxMopc => "cvx-mopc",
            Scheme::Fw => "fw",
            Scheme::FwRelaxed => "fw-relaxed",
            Scheme::FwProjected => "fw-projected",
            Scheme::FwRelaxedProjected => "fw-relaxed-projected",
        }
    }
}

/// Rows of the comparison table, in output order.
const COMPARE_SCHEMES: [Scheme; 6] = [
    Scheme::Fw,
    Scheme::FwRelaxed,
    Scheme::FwProjected,
    Scheme::FwRelaxedProjected,
    Scheme::CvxMopc,
    Scheme::Mopc,
];

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Step {
    LineSearch,
    Harmonic,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    num_flows: Option<usize>,
    #[arg(long)]
    num_links: Option<usize>,
    /// Two-column (value, cumulative probability) file for sub-flow sizes.
    #[arg(long)]
    cdf: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Output directory; the instance is written to `instance.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Override the instance's α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the instance's β.
    #[arg(long)]
    beta: Option<f64>,
    /// Seed for a random ADMM starting point (uniform start if absent).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho0: Option<f64>,
    /// ADMM iteration limit.
    #[arg(long, default_value_t = 1500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    eps_abs: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps_rel: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps_tol1: f64,
    #[arg(long, default_value_t = 1e-10)]
    eps_tol2: f64,
    /// Check the sufficient-decrease inequality at every fixed-ρ step.
    #[arg(long)]
    audit: bool,
    /// Frank–Wolfe iteration limit.
    #[arg(long, default_value_t = 20_000)]
    fw_max_iters: usize,
    #[arg(long, value_enum, default_value = "line-search")]
    fw_step: Step,
}

impl SolverArgs {
    fn admm(&self) -> SolveOptions {
        SolveOptions {
            rho0: self.rho0,
            max_iters: self.max_iters,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            eps_tol1: self.eps_tol1,
            eps_tol2: self.eps_tol2,
            audit_decrease: self.audit,
            init: self.seed.map_or(Init::Uniform, |seed| Init::Random { seed }),
            ..SolveOptions::default()
        }
    }

    fn fw(&self) -> FwOptions {
        FwOptions {
            step: match self.fw_step {
                Step::LineSearch => StepRule::LineSearch,
                Step::Harmonic => StepRule::Harmonic,
            },
            max_iters: self.fw_max_iters,
            ..FwOptions::default()
        }
    }

    fn apply_weights(&self, instance: ProblemInstance) -> Result<ProblemInstance> {
        if self.alpha.is_none() && self.beta.is_none() {
            return Ok(instance);
        }
        let alpha = self.alpha.unwrap_or(instance.alpha());
        let beta = self.beta.unwrap_or(instance.beta());
        Ok(instance.with_weights(alpha, beta)?)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    scheme: Scheme,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory for `report.json` and `trace.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory: `summary.csv` plus one subdirectory per scheme.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Trace files; repeat to combine several runs.
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    /// Output directory for `plot.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    command: &'a str,
    error: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, out) = match &cli.command {
        Command::Generate(a) => ("generate", a.out.clone()),
        Command::Solve(a) => ("solve", a.out.clone()),
        Command::Compare(a) => ("compare", a.out.clone()),
        Command::Report(a) => ("report", a.out.clone()),
    };
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Compare(args) => compare(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}");
            eprintln!("error: {message}");
            let record = ErrorRecord { command: name, error: message };
            if fs::create_dir_all(&out).is_ok() {
                if let Ok(json) = serde_json::to_string_pretty(&record) {
                    let _ = fs::write(out.join("error.json"), json + "\n");
                }
            }
            ExitCode::FAILURE
        }
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut cfg = match args.preset {
        Preset::Desk => GenConfig::desk(args.seed),
        Preset::Wan => GenConfig::wan(args.seed),
    };
    if let Some(k) = args.num_flows {
        cfg.num_flows = k;
        cfg.target_total_paths = None;
    }
    if let Some(l) = args.num_links {
        cfg.num_links = l;
    }
    if let Some(path) = &args.cdf {
        cfg.subflow_size = SubflowSize::Empirical { cdf: EmpiricalCdf::load(path)? };
    }
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if let Some(beta) = args.beta {
        cfg.beta = beta;
    }
    let instance = generate_instance(&cfg)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    save_instance(&instance, args.out.join("instance.json"))?;
    Ok(())
}

fn run_scheme(instance: &ProblemInstance, scheme: Scheme, solver: &SolverArgs) -> Result<SolveReport> {
    let mut report = match scheme {
        Scheme::Num => solve_num(instance, &solver.admm())?,
        Scheme::Mopc => solve_mopc(instance, &solver.admm())?,
        Scheme::CvxMopc => solve_mopc(&instance.uncapped(), &solver.admm())?,
        Scheme::Fw => run_baseline(instance, Baseline::Convex, &solver.fw())?,
        Scheme::FwRelaxed => run_baseline(instance, Baseline::Relaxed, &solver.fw())?,
        Scheme::FwProjected => run_baseline(instance, Baseline::ConvexProjected, &solver.fw())?,
        Scheme::FwRelaxedProjected => run_baseline(instance, Baseline::RelaxedProjected, &solver.fw())?,
    };
    report.scheme = scheme.name().to_string();
    Ok(report)
}

fn write_outputs(dir: &Path, report: &SolveReport) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("report.json"), report.to_json() + "\n")?;
    let file = fs::File::create(dir.join("trace.csv"))?;
    let mut out = BufWriter::new(file);
    write_trace(&mut out, report.trace_kind, &report.trace)?;
    out.flush()?;
    Ok(())
}

fn load(path: &Path, solver: &SolverArgs) -> Result<ProblemInstance> {
    let instance = load_instance(path).with_context(|| format!("loading {}", path.display()))?;
    solver.apply_weights(instance)
}

fn solve(args: SolveArgs) -> Result<()> {
    let instance = load(&args.instance, &args.solver)?;
    let report = run_scheme(&instance, args.scheme, &args.solver)?;
    write_outputs(&args.out, &report)?;
    if report.status == Status::Error {
        bail!(
            "{} failed: {}",
            report.scheme,
            report.message.as_deref().unwrap_or("solver reported an error")
        );
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let instance = load(&args.instance, &args.solver)?;
    fs::create_dir_all(&args.out)?;
    let mut summary = String::from("scheme,obj,delay,fairness,load,status,card_ok\n");
    let mut all_ok = true;
    for scheme in COMPARE_SCHEMES {
        let report = run_scheme(&instance, scheme, &args.solver)?;
        write_outputs(&args.out.join(scheme.name()), &report)?;
        let status = match report.status {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::Error => "error",
        };
        all_ok &= report.status != Status::Error;
        let card_ok = report.x.respects_caps(&instance);
        match report.metrics {
            Some(m) => summary.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{status},{card_ok}\n",
                scheme.name(),
                m.obj,
                m.delay,
                m.fairness,
                m.load
            )),
            None => summary.push_str(&format!("{},NaN,NaN,NaN,NaN,{status},{card_ok}\n", scheme.name())),
        }
    }
    fs::write(args.out.join("summary.csv"), summary)?;
    if !all_ok {
        bail!("at least one scheme ended with an error; see summary.csv");
    }
    Ok(())
}

fn log10_or_nan(v: f64) -> f64 {
    if v > 0.0 {
        v.log10()
    } else {
        f64::NAN
    }
}

fn report(args: ReportArgs) -> Result<()> {
    let mut plot = String::from("label,kind,iter,p_res,second,vio,obj,log10_p_res,log10_second,log10_vio\n");
    for path in &args.traces {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let (kind, records) = read_trace(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
        let label = path
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| path.display().to_string());
        append_rows(&mut plot, &label, kind, &records)?;
    }
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("plot.csv"), plot)?;
    Ok(())
}

fn append_rows(plot: &mut String, label: &str, kind: TraceKind, records: &[TraceRecord]) -> Result<()> {
    let mut last = 0;
    for r in records {
        if r.iter <= last {
            bail!("trace {label} is not increasing in iteration at {}", r.iter);
        }
        last = r.iter;
        plot.push_str(&format!(
            "{label},{},{},{:e},{:e},{:e},{:e},{},{},{}\n",
            kind.second_column(),
            r.iter,
            r.p_res,
            r.second,
            r.vio,
            r.obj,
            log10_or_nan(r.p_res),
            log10_or_nan(r.second),
            log10_or_nan(r.vio)
        ));
    }
    Ok(())
}

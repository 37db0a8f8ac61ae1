use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use ianpe::driver::{self, IanpeConfig, Mode, RunOutput};
use ianpe::io::{read_libsvm, save_libsvm, write_trace};
use ianpe::numerics::{self, DenseSymMatrix};
use ianpe::oracle::OracleKind;
use ianpe::problem::{CompositeProblem, LogisticRegression, QuadraticProblem, Regularizer, SmoothFunction};
use ianpe::verify::{self, Battery};
use ianpe::{synth, Error, ErrorClass, Result};

#[derive(Parser)]
#[command(name = "ianpe", version, about = "Accelerated second-order solver with certified line search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver on a LIBSVM dataset or a generated instance.
    Solve(SolveArgs),
    /// Run the step-length inequality batteries.
    Verify(VerifyArgs),
    /// Sweep seeds and modes on synthetic logistic problems.
    Bench(BenchArgs),
    /// Write a synthetic instance together with its reference minimizer.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Logreg,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModeArg {
    /// Adaptive heuristic with sub-sampled Hessians
    Ianpe,
    /// Certified outer loop
    IanpeStrict,
    GrNewton,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Ianpe => Mode::Heuristic,
            ModeArg::IanpeStrict => Mode::Strict,
            ModeArg::GrNewton => Mode::GrNewton,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Exact,
    Subsample,
    Sketch,
}

impl From<OracleArg> for OracleKind {
    fn from(o: OracleArg) -> OracleKind {
        match o {
            OracleArg::Exact => OracleKind::Exact,
            OracleArg::Subsample => OracleKind::SubSample,
            OracleArg::Sketch => OracleKind::Sketch,
        }
    }
}

#[derive(Args, Clone)]
struct RunFlags {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-7)]
    grad_tol: f64,
    #[arg(long)]
    max_outer: Option<usize>,
    /// JSON solver configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Standard deviation of the Gaussian starting point; 0 starts at the origin.
    #[arg(long, default_value_t = 1e5f64.sqrt())]
    init_std: f64,
    /// Write zero wall times so identical runs give identical traces.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value = "logreg")]
    problem: ProblemArg,
    /// LIBSVM file.
    #[arg(long, conflicts_with = "instance")]
    data: Option<PathBuf>,
    /// Instance written by `gen`.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-5)]
    alpha: f64,
    /// Weight of an added l1 term.
    #[arg(long, default_value_t = 0.0)]
    l1: f64,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 1e-5)]
    alpha: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ianpe,gr-newton")]
    modes: Vec<ModeArg>,
    /// Per-run summary CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Quadratic,
    Logistic,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Number of samples (logistic only).
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 1e-5)]
    alpha: f64,
    /// Smallest eigenvalue shift (quadratic only).
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Instance JSON; logistic data goes next to it with extension `svm`.
    #[arg(long, default_value = "instance.json")]
    out: PathBuf,
}

/// On-disk form of a generated instance.
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum InstanceFile {
    Quadratic {
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
        x_star: Vec<f64>,
        f_star: f64,
    },
    Logistic {
        data: String,
        alpha: f64,
        x_star: Vec<f64>,
        f_star: f64,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn load_instance(path: &Path) -> Result<Arc<dyn SmoothFunction>> {
    match read_json::<InstanceFile>(path)? {
        InstanceFile::Quadratic { q, c, .. } => Ok(Arc::new(QuadraticProblem::new(DenseSymMatrix::from_rows(&q)?, c)?)),
        InstanceFile::Logistic { data, alpha, .. } => {
            let data_path = path.parent().unwrap_or(Path::new(".")).join(data);
            let ds = read_libsvm(&data_path, None)?;
            Ok(Arc::new(LogisticRegression::new(ds.matrix, ds.labels, alpha)?))
        }
    }
}

fn build_config(flags: &RunFlags) -> Result<IanpeConfig> {
    let mut cfg = match &flags.config {
        Some(path) => read_json(path)?,
        None => IanpeConfig {
            mode: Mode::Heuristic,
            oracle: ianpe::oracle::OracleConfig {
                kind: OracleKind::SubSample,
                ..Default::default()
            },
            ..Default::default()
        },
    };
    if let Some(m) = flags.mode {
        cfg.mode = m.into();
    }
    if let Some(o) = flags.oracle {
        cfg.oracle.kind = o.into();
    }
    if let Some(k) = flags.max_outer {
        cfg.max_outer = k;
    }
    cfg.oracle.seed = flags.seed;
    cfg.grad_tol = flags.grad_tol;
    if flags.omit_timing {
        cfg.record_timing = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn initial_point(d: usize, flags: &RunFlags) -> Vec<f64> {
    if flags.init_std == 0.0 {
        vec![0.0; d]
    } else {
        numerics::scale(&synth::gaussian_vector(d, flags.seed), flags.init_std)
    }
}

fn summary_line(out: &RunOutput) -> String {
    let last = out.records.last();
    format!(
        "status={} stop={} iterations={} f={:e} grad_norm={:e} oracle_calls={} data_passes={}",
        if out.converged() { "converged" } else { "not_converged" },
        out.stop.as_str(),
        out.state.k,
        out.state.f_y,
        last.map_or(f64::NAN, |r| r.grad_norm),
        out.state.counters.oracle_calls,
        out.state.data_passes(),
    )
}

fn solve(args: &SolveArgs) -> Result<()> {
    let cfg = build_config(&args.run)?;
    let smooth: Arc<dyn SmoothFunction> = match (&args.instance, &args.data, args.problem) {
        (Some(path), _, _) => load_instance(path)?,
        (None, Some(path), ProblemArg::Logreg) => {
            let ds = read_libsvm(path, None)?;
            Arc::new(LogisticRegression::new(ds.matrix, ds.labels, args.alpha)?)
        }
        (None, None, _) => return Err(Error::InvalidConfig("solve needs --data or --instance".into())),
    };
    let reg = if args.l1 > 0.0 {
        Regularizer::L1 { weight: args.l1 }
    } else {
        Regularizer::Zero
    };
    let problem = CompositeProblem::new(smooth, reg);
    let x0 = initial_point(problem.dim(), &args.run);
    let out = driver::run(&problem, &x0, &cfg)?;
    if let Some(path) = &args.trace {
        let mut header = driver::trace_header(&cfg, &out.resolved, &problem);
        header["seed"] = json!(args.run.seed);
        write_trace(path, &out.records, &header)?;
    }
    println!("{}", summary_line(&out));
    if out.converged() {
        Ok(())
    } else {
        Err(Error::AssertionFailed(format!(
            "stopped by {} before reaching the tolerance",
            out.stop.as_str()
        )))
    }
}

fn run_verify(args: &VerifyArgs) -> Result<()> {
    let mut failed = Vec::new();
    for b in Battery::ALL {
        let s = verify::run_battery(b, args.instances, args.seed);
        println!("{s}");
        if !s.passed() {
            failed.push(format!("{} ({})", b.name(), s.first_failure.unwrap_or_default()));
        }
        let neg = verify::negative_control(b, args.seed)?;
        let ok = !neg.passed;
        println!(
            "check={}_negative_control status={} margin={:e}",
            b.name(),
            if ok { "pass" } else { "fail" },
            neg.margin
        );
        if !ok {
            failed.push(format!("{} negative control", b.name()));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::AssertionFailed(failed.join(", ")))
    }
}

fn bench(args: &BenchArgs) -> Result<()> {
    let base = build_config(&args.run)?;
    let jobs: Vec<(u64, ModeArg)> = (0..args.seeds)
        .flat_map(|s| args.modes.iter().map(move |&m| (s, m)))
        .collect();
    let rows: Vec<Result<(u64, ModeArg, RunOutput)>> = jobs
        .par_iter()
        .map(|&(seed, mode)| {
            let lr = synth::logistic_instance(args.n, args.d, args.alpha, 2.0, seed)?;
            let problem = CompositeProblem::smooth_only(Arc::new(lr));
            let mut cfg = base.clone();
            cfg.mode = mode.into();
            cfg.oracle.seed = seed;
            let flags = RunFlags { seed, ..args.run.clone() };
            let x0 = initial_point(args.d, &flags);
            Ok((seed, mode, driver::run(&problem, &x0, &cfg)?))
        })
        .collect();
    let mut table = String::from("seed,mode,converged,iterations,oracle_calls,data_passes,final_grad_norm\n");
    for row in rows {
        let (seed, mode, out) = row?;
        let mode_name = mode.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
        table.push_str(&format!(
            "{seed},{mode_name},{},{},{},{},{:e}\n",
            out.converged(),
            out.state.k,
            out.state.counters.oracle_calls,
            out.state.data_passes(),
            out.records.last().map_or(f64::NAN, |r| r.grad_norm)
        ));
    }
    if let Some(path) = &args.out {
        fs::write(path, &table).map_err(|e| Error::io(path, e))?;
    }
    // per-mode aggregate
    for &mode in &args.modes {
        let name = mode.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
        let mine: Vec<Vec<&str>> = table
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|c| c[1] == name)
            .collect();
        let converged = mine.iter().filter(|c| c[2] == "true").count();
        let mean = |i: usize| mine.iter().map(|c| c[i].parse::<f64>().unwrap_or(f64::NAN)).sum::<f64>() / mine.len().max(1) as f64;
        println!(
            "mode={name} runs={} converged={converged} mean_iterations={} mean_data_passes={}",
            mine.len(),
            mean(3),
            mean(5)
        );
    }
    Ok(())
}

fn gen(args: &GenArgs) -> Result<()> {
    let x0 = vec![0.0; args.d];
    let file = match args.kind {
        Kind::Quadratic => {
            let q = synth::quadratic_instance(args.d, args.mu, args.seed)?;
            let problem = CompositeProblem::smooth_only(Arc::new(q.clone()));
            let x_star = verify::reference_minimizer(&problem, &x0, 1e-12)?;
            let rows = (0..args.d).map(|i| q.q().row(i).to_vec()).collect();
            InstanceFile::Quadratic {
                q: rows,
                c: q.c().to_vec(),
                f_star: problem.value(&x_star),
                x_star,
            }
        }
        Kind::Logistic => {
            let lr = synth::logistic_instance(args.n, args.d, args.alpha, 2.0, args.seed)?;
            let data_path = args.out.with_extension("svm");
            save_libsvm(&data_path, lr.data(), lr.labels())?;
            // reload so the optimum matches the decimal form on disk
            let ds = read_libsvm(&data_path, Some(args.d))?;
            let lr = LogisticRegression::new(ds.matrix, ds.labels, args.alpha)?;
            let problem = CompositeProblem::smooth_only(Arc::new(lr));
            let x_star = verify::reference_minimizer(&problem, &x0, 1e-12)?;
            InstanceFile::Logistic {
                data: data_path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                alpha: args.alpha,
                f_star: problem.value(&x_star),
                x_star,
            }
        }
    };
    write_json(&args.out, &file)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("IANPE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("IANPE_THREADS = {v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Verify(a) => run_verify(a),
        Command::Bench(a) => bench(a),
        Command::Gen(a) => gen(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\\', "\\\\").replace('"', "\\\"");
            eprintln!("error kind={} message=\"{message}\"", e.kind());
            ExitCode::from(exit_code(&e))
        }
    }
}

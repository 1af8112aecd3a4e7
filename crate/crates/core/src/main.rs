use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::json;

use vopt_core::analysis::{self, Grid};
use vopt_core::bench::{self, BenchConfig, ConeSpec, SolverParams, TableFormat, Transform};
use vopt_core::problems::{problem_by_name, VectorProblem};
use vopt_core::{Algorithm, Error, PolyhedralCone, SolveTrace};

#[derive(Parser)]
#[command(name = "vopt", version, about = "Vector optimization under polyhedral ordering cones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark configuration and write the aggregated table.
    Bench(BenchArgs),
    /// Solve one problem from one seeded start.
    Run(RunArgs),
    /// Export terminal objective values of many seeded runs.
    Pareto(ParetoArgs),
    /// Check a saved trace against the convergence theory.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha_min: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    /// Line search: armijo or mm.
    #[arg(long)]
    ls: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Stopping tolerance on the direction norm.
    #[arg(long)]
    tol: Option<f64>,
    /// Constant for MM-fixed-L.
    #[arg(long)]
    fixed_l: Option<f64>,
}

impl Overrides {
    fn apply(&self, p: &mut SolverParams) {
        if let Some(v) = self.sigma {
            p.sigma = v;
        }
        if let Some(v) = self.gamma {
            p.gamma = v;
        }
        if let Some(v) = self.alpha_min {
            p.alpha_min = v;
        }
        if let Some(v) = self.alpha_max {
            p.alpha_max = v;
        }
        if let Some(v) = &self.ls {
            p.line_search = v.clone();
        }
        if let Some(v) = self.max_iter {
            p.max_iter = v;
        }
        if let Some(v) = self.tol {
            p.tol = v;
        }
        if self.fixed_l.is_some() {
            p.fixed_l = self.fixed_l;
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Markdown,
}

impl From<FormatArg> for TableFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => TableFormat::Csv,
            FormatArg::Json => TableFormat::Json,
            FormatArg::Markdown => TableFormat::Markdown,
        }
    }
}

#[derive(Args)]
struct ConeArgs {
    /// R2+, K1 or K2.
    #[arg(long, default_value = "R2+")]
    cone: String,
    /// Explicit transform rows, e.g. "5,-1;-1,5"; overrides --cone.
    #[arg(long)]
    cone_rows: Option<String>,
}

impl ConeArgs {
    fn build(&self) -> vopt_core::Result<PolyhedralCone> {
        let spec = match &self.cone_rows {
            Some(text) => ConeSpec { name: self.cone.clone(), rows: Some(parse_rows(text)?) },
            None => ConeSpec::named(&self.cone),
        };
        spec.build()
    }
}

fn parse_rows(text: &str) -> vopt_core::Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad cone entry `{v}`: {e}"))))
                .collect()
        })
        .collect()
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    cone: ConeArgs,
    #[arg(long)]
    algo: String,
    /// Use the gradient-scaled transform matrix.
    #[arg(long)]
    scaled: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the iteration trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ParetoArgs {
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    cone: ConeArgs,
    #[arg(long)]
    algo: String,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Rate,
    U0,
    Majorization,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum)]
    check: Check,
    /// Grid points per axis for the merit-function estimate.
    #[arg(long, default_value_t = 101)]
    grid: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(a) => cmd_bench(a),
        Command::Run(a) => cmd_run(a),
        Command::Pareto(a) => cmd_pareto(a),
        Command::Analyze(a) => cmd_analyze(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config = err.downcast_ref::<Error>().is_some_and(Error::is_config);
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = BenchConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = a.runs {
        cfg.runs = runs;
    }
    a.overrides.apply(&mut cfg.solver);
    let resolved = cfg.resolve()?;
    let out = bench::run_benchmark(&resolved, a.jobs)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let format = TableFormat::from(a.format);
    let path = a.out.join(format!("{}.{}", resolved.name, format.extension()));
    bench::export_table(&out.rows, format, &path)?;
    bench::export::write_table(&out.rows, TableFormat::Markdown, io::stdout().lock())?;
    eprintln!("wrote {}", path.display());
    if out.errors > 0 {
        eprintln!("{} runs ended with a non-finite iterate:", out.errors);
        for &(i, n) in &out.error_rows {
            let r = &out.rows[i];
            eprintln!("  {} / {} / {} {}: {n}", r.problem, r.cone, r.algorithm, r.transform);
        }
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let problem = problem_by_name(&a.problem)?;
    let cone = a.cone.build()?;
    let algorithm: Algorithm = a.algo.parse()?;
    let mut params = SolverParams::default();
    a.overrides.apply(&mut params);
    let transform = if a.scaled { Transform::Ahat } else { Transform::A };
    let cfg = params.solver_config(algorithm, cone, transform)?;
    let start = problem.sample_start(a.seed);
    let trace = match vopt_core::run(&cfg, &problem, &start) {
        Ok(t) => t,
        Err(Error::NonFiniteIterate { trace }) => {
            if let Some(path) = &a.trace {
                trace.write_jsonl(BufWriter::new(File::create(path)?))?;
            }
            eprintln!("last point: x = {:?}, F = {:?}", trace.x_final, trace.f_final);
            return Err(Error::NonFiniteIterate { trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &a.trace {
        trace.write_jsonl(BufWriter::new(File::create(path)?))?;
    }
    let summary = json!({
        "problem": trace.problem,
        "cone": trace.cone,
        "algorithm": trace.algorithm,
        "termination": trace.termination,
        "iterations": trace.iterations,
        "fevals": trace.fevals,
        "wall_ms": trace.wall_ms,
        "x_final": trace.x_final,
        "f_final": trace.f_final,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_pareto(a: ParetoArgs) -> anyhow::Result<ExitCode> {
    let problem = problem_by_name(&a.problem)?;
    let cone = a.cone.build()?;
    let algorithm: Algorithm = a.algo.parse()?;
    let mut params = SolverParams::default();
    a.overrides.apply(&mut params);
    params.solver_config(algorithm, cone.clone(), Transform::A)?;
    let summary = bench::export_pareto_points(&problem, &cone, algorithm, a.runs, a.seed, &params, a.jobs, &a.out)?;
    println!("{} points, {} clusters", summary.points.len(), summary.clusters);
    Ok(ExitCode::SUCCESS)
}

fn trace_context(trace: &SolveTrace) -> vopt_core::Result<(VectorProblem, PolyhedralCone)> {
    let problem = problem_by_name(&trace.problem)?;
    let cone = PolyhedralCone::from_rows(trace.cone.clone(), &trace.cone_rows)?;
    Ok((problem, cone))
}

fn cmd_analyze(a: AnalyzeArgs) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
    let trace = SolveTrace::read_jsonl(&text)?;
    let (problem, cone) = trace_context(&trace)?;
    let certs = problem
        .certificates_for(&cone)
        .cloned()
        .ok_or_else(|| Error::Config(format!("{} has no curvature certificates under {}", problem.name(), cone.name())))?;
    let report = match a.check {
        Check::Rate => {
            let rate = match trace.algorithm {
                Algorithm::MmFixedL => {
                    let big_l = trace.records.first().and_then(|r| r.scales.as_ref()).map_or_else(
                        || analysis::l_max(&certs.ell, &cone),
                        |s| s[0],
                    );
                    (1.0 - analysis::mu_min(&certs.mu, &cone) / big_l).sqrt()
                }
                _ => (1.0 - 1.0 / analysis::condition_number(&certs.mu, &certs.ell, &cone)?).sqrt(),
            };
            let xstar = DVector::from_column_slice(&trace.x_final);
            serde_json::to_value(analysis::verify_linear_rate(&trace, &xstar, rate))?
        }
        Check::U0 => {
            let values = Grid::uniform(&problem, a.grid)?.evaluate(&problem);
            let l_max = analysis::l_max(&certs.ell, &cone);
            serde_json::to_value(analysis::merit_envelope(&trace, &values, &cone, l_max, 1.05)?)?
        }
        Check::Majorization => {
            let scale = cone.matrix() * &certs.ell;
            let mut worst = f64::NEG_INFINITY;
            for x in trace.iterates() {
                worst = worst.max(analysis::majorization_violation(&problem, &cone, &x, &scale, 200, 0x5eed)?);
            }
            json!({ "max_violation": worst, "pass": worst <= analysis::MAJORIZATION_TOL })
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

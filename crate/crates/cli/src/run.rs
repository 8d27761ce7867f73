use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use fwlasso::dataset::{generate_synthetic, parse_csv, parse_libsvm, standardize, write_libsvm};
use fwlasso::path::{bootstrap_delta_max, build_grid, PathAggregate};
use fwlasso::report::{write_header, write_json, write_path_csv, write_solution_csv, write_trace_csv};
use fwlasso::sampling::child_seed;
use fwlasso::{
    fw, run_path, solve_penalized, CdOptions, CdOrder, CdProblem, Dataset, Error, FwOptions, FwProblem,
    GridSpec, LassoData, PathOptions, SamplingMode, SamplingPlan, SolverKind, StandardizeMode, StopRule,
    SyntheticSpec, TraceLevel, DEFAULT_SEED,
};
use serde_json::{json, Value};

use crate::args::*;

/// A failure mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Solver(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Solver(m) => m,
        }
    }

    /// Classifies a core error raised while solving.
    fn solving(e: Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

pub fn dispatch(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Solve(a) => solve(a),
        Command::Path(a) => path(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
    }
}

fn resolve_seed(seed: Option<SeedArg>) -> u64 {
    match seed {
        None => DEFAULT_SEED,
        Some(SeedArg::Fixed(s)) => s,
        Some(SeedArg::Random) => rand::random(),
    }
}

fn synth(a: SynthArgs) -> Outcome<()> {
    let spec = SyntheticSpec {
        m_train: a.m,
        m_test: a.m_test.unwrap_or(a.m),
        p: a.p,
        n_informative: a.informative,
        noise_sd: a.noise,
        coef_scale: a.coef_scale,
        seed: resolve_seed(a.seed),
    };
    let data = generate_synthetic(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    let test_out = a.test_out.unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".test");
        s.into()
    });
    for (ds, path) in [(&data.train, &a.out), (&data.test, &test_out)] {
        let file = create(path)?;
        write_libsvm(ds, BufWriter::new(file)).map_err(|e| io_failure(path, e))?;
    }
    Ok(())
}

fn create(path: &Path) -> Outcome<File> {
    File::create(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn load(path: &Path, format: Format, num_features: Option<usize>) -> Outcome<Dataset> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    let reader = BufReader::new(file);
    match format {
        Format::Libsvm => parse_libsvm(reader, num_features),
        Format::Csv => parse_csv(reader),
    }
    .map_err(|e| io_failure(path, e))
}

fn standardize_mode(s: Standardize) -> StandardizeMode {
    match s {
        Standardize::Unit => StandardizeMode::UnitNormColumns,
        Standardize::Center => StandardizeMode::CenterAndUnitNorm,
        Standardize::None => StandardizeMode::None,
    }
}

struct Loaded {
    data: LassoData,
    test: Option<Dataset>,
}

fn load_problem(d: &DataArgs, test_path: Option<&Path>) -> Outcome<Loaded> {
    let raw = load(&d.data, d.format, d.num_features)?;
    let (train, report) = standardize(&raw, standardize_mode(d.standardize));
    let test = match test_path {
        None => None,
        Some(tp) => {
            let raw_test = load(tp, d.format, Some(raw.n_features()))?;
            Some(report.apply(&raw_test).map_err(|e| io_failure(tp, e))?)
        }
    };
    let data = LassoData::from_dataset(&train).map_err(|e| io_failure(&d.data, e))?;
    Ok(Loaded { data, test })
}

fn sampling_mode(s: &SolverArgs) -> Option<SamplingMode> {
    let g = &s.sampling;
    match (g.sample_size, g.sample_frac, g.sample_confidence) {
        (Some(size), _, _) => Some(SamplingMode::FixedSize { size }),
        (_, Some(fraction), _) => Some(SamplingMode::FractionOfP { fraction }),
        (_, _, Some(confidence)) => Some(match s.sample_top {
            Some(top) => SamplingMode::ConfidenceTopFraction { confidence, top },
            None => SamplingMode::ConfidenceActiveSet { confidence, active: s.active_est },
        }),
        _ => None,
    }
}

fn solver_kind(s: Solver) -> SolverKind {
    match s {
        Solver::Fw => SolverKind::Fw,
        Solver::Cd => SolverKind::Cd,
        Solver::Scd => SolverKind::Scd,
    }
}

fn kappa_label(plan: &SamplingPlan, p: usize) -> Value {
    if plan.is_adaptive() {
        json!("adaptive")
    } else {
        json!(plan.kappa(p, 0))
    }
}

/// Options for every solver family, validated against the flags.
struct Resolved {
    fw: FwOptions,
    cd: CdOptions,
    seed: u64,
}

fn resolve_solver(s: &SolverArgs, p: usize, trace: bool) -> Outcome<Resolved> {
    let seed = resolve_seed(s.seed);
    let mode = sampling_mode(s);
    if s.solver != Solver::Fw && (mode.is_some() || s.stop_rule != StopRuleArg::Change || s.audit_gap.is_some()) {
        return usage("--sample-*, --stop-rule and --audit-gap apply only to --solver fw");
    }
    let sampling = match mode {
        Some(m) => SamplingPlan::new(m, seed),
        None => SamplingPlan::deterministic(),
    };
    let fw = FwOptions {
        epsilon: s.epsilon,
        stop_rule: match s.stop_rule {
            StopRuleArg::Change => StopRule::CoefficientChange,
            StopRuleArg::Gap => StopRule::DualityGap,
        },
        max_iter: s.max_iter,
        sampling,
        trace: if trace { TraceLevel::Every(1) } else { TraceLevel::Off },
        audit_gap: s.audit_gap,
        ..FwOptions::default()
    };
    let cd = CdOptions {
        epsilon: s.epsilon,
        max_epochs: s.max_iter,
        order: if s.solver == Solver::Scd { CdOrder::IidUniform } else { CdOrder::Cyclic },
        seed,
        ..CdOptions::default()
    };
    let checked = match s.solver {
        Solver::Fw => fw.validate(p),
        _ if !(s.epsilon > 0.0) || s.max_iter == 0 => {
            Err(Error::Contract("--epsilon must be > 0 and --max-iter >= 1".into()))
        }
        _ => Ok(()),
    };
    checked.map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Resolved { fw, cd, seed })
}

fn base_config(command: &str, d: &DataArgs, s: &SolverArgs, r: &Resolved, p: usize) -> Value {
    json!({
        "command": command,
        "data": d.data.display().to_string(),
        "format": format!("{:?}", d.format).to_lowercase(),
        "num_features": p,
        "standardize": format!("{:?}", d.standardize).to_lowercase(),
        "solver": solver_kind(s.solver).name(),
        "epsilon": s.epsilon,
        "max_iter": s.max_iter,
        "seed": r.seed,
        "sampling": r.fw.sampling,
        "kappa": kappa_label(&r.fw.sampling, p),
        "stop_rule": r.fw.stop_rule,
        "cd_order": r.cd.order,
    })
}

fn open_output(out: &OutputArgs) -> Outcome<Box<dyn Write>> {
    Ok(match &out.out {
        Some(path) => Box::new(BufWriter::new(create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn finish(out: &OutputArgs, written: fwlasso::Result<()>, mut sink: Box<dyn Write>) -> Outcome<()> {
    let name = out.out.as_deref().unwrap_or(Path::new("<stdout>"));
    written.map_err(|e| io_failure(name, e))?;
    sink.flush().map_err(|e| io_failure(name, e))
}

fn solve(a: SolveArgs) -> Outcome<()> {
    let loaded = load_problem(&a.data, None)?;
    let data = &loaded.data;
    let p = data.n_features();
    if a.trace && a.solver.solver != Solver::Fw {
        return usage("--trace applies only to --solver fw");
    }
    let r = resolve_solver(&a.solver, p, a.trace)?;
    let mut config = base_config("solve", &a.data, &a.solver, &r, p);

    let (sol, trace) = match (a.solver.solver, a.delta, a.lambda) {
        (Solver::Fw, Some(delta), None) => {
            config["delta"] = json!(delta);
            let problem = FwProblem::new(data, delta).map_err(|e| Failure::Usage(format!("--delta: {e}")))?;
            let (sol, trace) = fw::solve(&problem, &r.fw, None).map_err(Failure::solving)?;
            (sol, Some(trace))
        }
        (Solver::Cd | Solver::Scd, None, Some(lambda)) => {
            config["lambda"] = json!(lambda);
            let problem = CdProblem::new(data, lambda).map_err(|e| Failure::Usage(format!("--lambda: {e}")))?;
            (solve_penalized(&problem, &r.cd, None).map_err(Failure::solving)?, None)
        }
        (Solver::Fw, _, _) => return usage("--solver fw needs --delta (and not --lambda)"),
        _ => return usage("--solver cd/scd needs --lambda (and not --delta)"),
    };

    let mut sink = open_output(&a.output)?;
    let written = match a.output.out_format {
        OutFormat::Json => write_json(&mut sink, &json!({ "solution": sol, "trace": trace }), &config),
        OutFormat::Csv if a.trace => write_header(&mut sink, &config)
            .and_then(|_| write_trace_csv(&mut sink, trace.as_deref().unwrap_or(&[]), a.solver.audit_gap.is_some())),
        OutFormat::Csv => write_solution_csv(&mut sink, &sol, &config),
    };
    finish(&a.output, written, sink)
}

fn grid_for(data: &LassoData, kind: SolverKind, g: &GridArgs) -> Outcome<Vec<f64>> {
    let spec = GridSpec { points: g.grid_points, ratio: g.grid_ratio };
    let top = if kind.ascending_grid() {
        bootstrap_delta_max(data, g.grid_ratio, 1e-8)
    } else {
        data.lambda_max()
    }
    .map_err(Failure::solving)?;
    build_grid(top, spec, kind.ascending_grid()).map_err(|e| Failure::Usage(format!("--grid-points/--grid-ratio: {e}")))
}

fn grid_config(config: &mut Value, grid: &[f64], g: &GridArgs, seed: u64) {
    config["grid_points"] = json!(g.grid_points);
    config["grid_ratio"] = json!(g.grid_ratio);
    config["grid_first"] = json!(grid.first());
    config["grid_last"] = json!(grid.last());
    config["parallel_cold"] = json!(g.parallel_cold);
    config["child_seeds"] = json!((0..grid.len() as u64).map(|i| child_seed(seed, i)).collect::<Vec<_>>());
    config["test_data"] = json!(g.test_data.as_ref().map(|t| t.display().to_string()));
}

fn path(a: PathArgs) -> Outcome<()> {
    let loaded = load_problem(&a.data, a.grid.test_data.as_deref())?;
    let data = &loaded.data;
    let p = data.n_features();
    let r = resolve_solver(&a.solver, p, false)?;
    let kind = solver_kind(a.solver.solver);
    let grid = grid_for(data, kind, &a.grid)?;
    let mut config = base_config("path", &a.data, &a.solver, &r, p);
    grid_config(&mut config, &grid, &a.grid, r.seed);

    let options = PathOptions {
        fw: r.fw,
        cd: r.cd,
        seed: r.seed,
        parallel_cold: a.grid.parallel_cold,
    };
    let result = run_path(data, kind, &grid, &options, loaded.test.as_ref()).map_err(Failure::solving)?;

    let mut sink = open_output(&a.output)?;
    let written = match a.output.out_format {
        OutFormat::Json => write_json(&mut sink, &result, &config),
        OutFormat::Csv => write_path_csv(&mut sink, &result, &config),
    };
    finish(&a.output, written, sink)?;
    if result.partial {
        let failed = result.records.iter().filter(|r| r.error.is_some()).count();
        return Err(Failure::Solver(format!("{failed} grid point(s) failed; see the error column")));
    }
    Ok(())
}

/// Column label for a bench configuration.
fn bench_label(kind: SolverKind, frac: Option<f64>) -> String {
    match frac {
        Some(f) => format!("{} {}%", kind.name(), f * 100.0),
        None => kind.name().to_string(),
    }
}

fn bench(a: BenchArgs) -> Outcome<()> {
    let loaded = load_problem(&a.data, a.grid.test_data.as_deref())?;
    let data = &loaded.data;
    let p = data.n_features();
    let seed = resolve_seed(a.seed);
    if !(a.epsilon > 0.0) || a.max_iter == 0 {
        return usage("--epsilon must be > 0 and --max-iter >= 1");
    }
    if let Some(f) = a.sample_frac.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return usage(format!("--sample-frac: {f} is not in (0, 1]"));
    }

    let mut columns: Vec<(SolverKind, Option<f64>)> = Vec::new();
    for s in &a.solvers {
        let kind = solver_kind(*s);
        if kind == SolverKind::Fw {
            columns.extend(a.sample_frac.iter().map(|f| (kind, Some(*f))));
        } else {
            columns.push((kind, None));
        }
    }

    let mut config = json!({
        "command": "bench",
        "data": a.data.data.display().to_string(),
        "format": format!("{:?}", a.data.format).to_lowercase(),
        "num_features": p,
        "standardize": format!("{:?}", a.data.standardize).to_lowercase(),
        "epsilon": a.epsilon,
        "max_iter": a.max_iter,
        "seed": seed,
    });

    let mut grids: Vec<(SolverKind, Vec<f64>)> = Vec::new();
    let mut rows: Vec<Value> = Vec::new();
    let mut aggregates: Vec<(String, PathAggregate)> = Vec::new();
    for (kind, frac) in columns {
        let grid = match grids.iter().find(|(k, _)| k.ascending_grid() == kind.ascending_grid()) {
            Some((_, g)) => g.clone(),
            None => {
                let g = grid_for(data, kind, &a.grid)?;
                grids.push((kind, g.clone()));
                g
            }
        };
        let sampling = match frac {
            Some(fraction) => SamplingPlan::new(SamplingMode::FractionOfP { fraction }, seed),
            None => SamplingPlan::deterministic(),
        };
        let options = PathOptions {
            fw: FwOptions { epsilon: a.epsilon, max_iter: a.max_iter, sampling, ..FwOptions::default() },
            cd: CdOptions {
                epsilon: a.epsilon,
                max_epochs: a.max_iter,
                order: if kind == SolverKind::Scd { CdOrder::IidUniform } else { CdOrder::Cyclic },
                seed,
                ..CdOptions::default()
            },
            seed,
            parallel_cold: a.grid.parallel_cold,
        };
        let label = bench_label(kind, frac);
        rows.push(json!({
            "label": label,
            "solver": kind.name(),
            "sample_frac": frac,
            "kappa": frac.map(|_| sampling.kappa(p, 0)),
            "grid_first": grid.first(),
            "grid_last": grid.last(),
        }));
        let result = run_path(data, kind, &grid, &options, loaded.test.as_ref()).map_err(Failure::solving)?;
        if result.partial {
            return Err(Failure::Solver(format!("{label}: some grid points failed")));
        }
        aggregates.push((label, result.aggregate));
    }
    config["columns"] = json!(rows);
    config["grid_points"] = json!(a.grid.grid_points);
    config["grid_ratio"] = json!(a.grid.grid_ratio);
    config["child_seeds"] = json!((0..a.grid.grid_points as u64).map(|i| child_seed(seed, i)).collect::<Vec<_>>());

    let mut sink = open_output(&a.output)?;
    let written = match a.output.out_format {
        OutFormat::Json => {
            let body: Vec<Value> = aggregates
                .iter()
                .map(|(l, g)| json!({ "label": l, "aggregate": g }))
                .collect();
            write_json(&mut sink, &json!({ "columns": body }), &config)
        }
        OutFormat::Csv => write_bench_csv(&mut sink, &aggregates, &config),
    };
    finish(&a.output, written, sink)
}

/// Metrics as rows, one column per configuration.
fn write_bench_csv(out: &mut dyn Write, cols: &[(String, PathAggregate)], config: &Value) -> fwlasso::Result<()> {
    let mut out = out;
    write_header(&mut out, config)?;
    let labels: Vec<&str> = cols.iter().map(|(l, _)| l.as_str()).collect();
    writeln!(out, "metric,{}", labels.join(","))?;
    let row = |name: &str, f: &dyn Fn(&PathAggregate) -> String| {
        format!("{name},{}", cols.iter().map(|(_, g)| f(g)).collect::<Vec<_>>().join(","))
    };
    writeln!(out, "{}", row("Time", &|g| format!("{:.3}", g.total_time_s)))?;
    writeln!(out, "{}", row("Iterations", &|g| g.total_iterations.to_string()))?;
    writeln!(out, "{}", row("Dot products", &|g| g.total_dot_products.to_string()))?;
    writeln!(out, "{}", row("Active features", &|g| format!("{:.1}", g.mean_nnz)))?;
    Ok(())
}

fn verify(a: VerifyArgs) -> Outcome<()> {
    let Suite::Appendix = a.suite;
    let seed = resolve_seed(a.seed);
    let results = fwlasso::verify::run_all_suites(seed).map_err(Failure::solving)?;
    println!("# seed={seed}");
    for r in &results {
        println!("{:<28} {}  {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::Solver(format!("{failed} suite(s) failed")));
    }
    Ok(())
}

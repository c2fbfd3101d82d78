//! Command-line front end: config parsing, subcommands, deterministic
//! outputs, and a stable exit-code contract.
//!
//! Exit codes: `0` success (for `scenario`, additionally: every verdict
//! passed); `1` argument, config, or expression errors; `2` assumption
//! violations, with the offending node list in the printed report; `3`
//! solver failures (structured JSON diagnostic) or a scenario whose
//! verdicts did not all pass (the diagram itself is the diagnostic).
//!
//! All output on stdout is JSON with sorted keys; identical (config, seed)
//! pairs produce byte-identical bytes.  `--out DIR` additionally writes the
//! JSON (and, for record-bearing commands, a flat CSV) to files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use foldscape_core::branch::{find_lambda_bar, sweep, verify_scenario, BranchError};
use foldscape_core::expr;
use foldscape_core::mesh::{Field, Mesh};
use foldscape_core::model::ProblemSpec;
use foldscape_core::solve::{construct_barrier, newton_q, SolveOptions};
use foldscape_core::spectral::{assemble_linearized, compute_md, principal_eigenvalue};
use foldscape_core::tolerances::TOL_ZERO;

/// Cap on how many node indices a single violation entry lists verbatim;
/// the full count is always reported.
const NODE_LIST_CAP: usize = 1000;

#[derive(Parser)]
#[command(
    name = "foldscape",
    version,
    about = "Explores the solution landscape of a Dirichlet problem with \
             critical quadratic gradient growth: minimal and mountain-pass \
             solutions, coercivity indicator, principal eigenvalue, λ-sweeps \
             and fold location."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory that receives JSON/CSV output files (stdout always gets
    /// the JSON as well).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for multistart randomization; overrides the config's `seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Grid override: interior nodes per axis.
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the sign and splitting assumptions nodewise.
    Check,
    /// Solve at `lambda.single`: minimal solution plus a second-solution
    /// attempt.
    Solve,
    /// Walk `lambda.grid` (solutions per λ) or bisect `lambda.bracket`
    /// (fold location).
    Sweep,
    /// Principal eigenvalue of the linearization at the λ = 0 solution,
    /// weighted by c⁺.
    Eigen,
    /// Coercivity indicator of the energy at the config's λ.
    Md,
    /// Run a shipped verification scenario and evaluate its verdicts.
    Scenario {
        /// One of: example1d, th2_fold, th3_sign, th_h0_flip, coercive_iff.
        name: String,
    },
}

enum Failure {
    /// Argument / config / expression problem → exit 1 (message on stderr).
    Usage(String),
    /// Assumption violation → exit 2 (report on stdout).
    Violation(Value),
    /// Solver failure or failing scenario verdicts → exit 3 (JSON on stdout).
    Diagnostic(Value),
}

// ---------------------------------------------------------------------------
// Configuration file
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    domain: DomainSection,
    problem: ProblemSection,
    #[serde(default)]
    lambda: LambdaSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    /// 1 or 2.
    dim: usize,
    /// `[a, b]` in 1D; `[ax, bx, ay, by]` in 2D.
    bounds: Vec<f64>,
    /// Interior nodes: `n`, or `[nx, ny]` in 2D.
    grid: GridSpec,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(untagged)]
enum GridSpec {
    Isotropic(usize),
    PerAxis([usize; 2]),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    mu: f64,
    cplus: String,
    #[serde(default = "zero_expr")]
    cminus: String,
    #[serde(default = "zero_expr")]
    h: String,
}

fn zero_expr() -> String {
    "0".to_string()
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct LambdaSection {
    single: Option<f64>,
    grid: Option<Vec<f64>>,
    bracket: Option<[f64; 2]>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    newton_tol: Option<f64>,
    max_newton: Option<usize>,
    damping_factor: Option<f64>,
    max_damping_steps: Option<usize>,
    mp_path_points: Option<usize>,
    mp_descent_step: Option<f64>,
    mp_tol: Option<f64>,
    max_mp_iters: Option<usize>,
    ps_guard: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    /// JSON file name (joined under `--out` when both are given).
    json: Option<String>,
    /// CSV file name for record-bearing commands.
    csv: Option<String>,
}

fn load_config(path: &Path) -> Result<ConfigFile, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
}

fn solve_options(s: &SolverSection) -> SolveOptions {
    let mut o = SolveOptions::default();
    if let Some(v) = s.newton_tol {
        o.newton_tol = v;
    }
    if let Some(v) = s.max_newton {
        o.max_newton = v;
    }
    if let Some(v) = s.damping_factor {
        o.damping_factor = v;
    }
    if let Some(v) = s.max_damping_steps {
        o.max_damping_steps = v;
    }
    if let Some(v) = s.mp_path_points {
        o.mp_path_points = v;
    }
    if let Some(v) = s.mp_descent_step {
        o.mp_descent_step = v;
    }
    if let Some(v) = s.mp_tol {
        o.mp_tol = v;
    }
    if let Some(v) = s.max_mp_iters {
        o.max_mp_iters = v;
    }
    if let Some(v) = s.ps_guard {
        o.ps_guard = v;
    }
    o
}

// ---------------------------------------------------------------------------
// Validated inputs
// ---------------------------------------------------------------------------

struct SampledInputs {
    mesh: Arc<Mesh>,
    mu: f64,
    cplus: Field,
    cminus: Field,
    h: Field,
    grid: Vec<usize>,
}

fn build_mesh(d: &DomainSection, grid_override: Option<usize>) -> Result<(Arc<Mesh>, Vec<usize>), Failure> {
    let sizes: Vec<usize> = match (grid_override, d.grid) {
        (Some(n), _) => vec![n; d.dim.max(1)],
        (None, GridSpec::Isotropic(n)) => vec![n; d.dim.max(1)],
        (None, GridSpec::PerAxis(ns)) => ns.to_vec(),
    };
    let mesh = match (d.dim, d.bounds.as_slice()) {
        (1, [a, b]) => Mesh::line(*a, *b, sizes[0]),
        (2, [ax, bx, ay, by]) => Mesh::rectangle(
            (*ax, *bx),
            (*ay, *by),
            sizes[0],
            *sizes.get(1).unwrap_or(&sizes[0]),
        ),
        (1, other) => {
            return Err(Failure::Usage(format!(
                "domain.bounds must be [a, b] in 1D (got {} numbers)",
                other.len()
            )))
        }
        (2, other) => {
            return Err(Failure::Usage(format!(
                "domain.bounds must be [ax, bx, ay, by] in 2D (got {} numbers)",
                other.len()
            )))
        }
        (dim, _) => return Err(Failure::Usage(format!("domain.dim must be 1 or 2 (got {dim})"))),
    };
    let mesh = mesh.map_err(|e| Failure::Usage(format!("domain: {e}")))?;
    let sizes = if d.dim == 2 && grid_override.is_none() {
        match d.grid {
            GridSpec::Isotropic(n) => vec![n, n],
            GridSpec::PerAxis(ns) => ns.to_vec(),
        }
    } else if d.dim == 2 {
        vec![sizes[0], sizes[0]]
    } else {
        vec![sizes[0]]
    };
    Ok((mesh, sizes))
}

fn sample_field(name: &str, text: &str, mesh: &Arc<Mesh>) -> Result<Field, Failure> {
    let parsed = expr::parse(text)
        .map_err(|e| Failure::Usage(format!("problem.{name}: {e}")))?;
    expr::sample(&parsed, mesh).map_err(|e| Failure::Usage(format!("problem.{name}: {e}")))
}

fn sampled_inputs(cfg: &ConfigFile, grid_override: Option<usize>) -> Result<SampledInputs, Failure> {
    let (mesh, grid) = build_mesh(&cfg.domain, grid_override)?;
    let cplus = sample_field("cplus", &cfg.problem.cplus, &mesh)?;
    let cminus = sample_field("cminus", &cfg.problem.cminus, &mesh)?;
    let h = sample_field("h", &cfg.problem.h, &mesh)?;
    Ok(SampledInputs {
        mesh,
        mu: cfg.problem.mu,
        cplus,
        cminus,
        h,
        grid,
    })
}

/// Nodewise scan of the sign and splitting assumptions; returns the full
/// violation list (empty = pass).
fn scan_assumptions(inp: &SampledInputs) -> Vec<Value> {
    let mut violations = Vec::new();
    let mut push = |rule: &str, nodes: Vec<usize>, detail: String| {
        let count = nodes.len();
        violations.push(json!({
            "rule": rule,
            "detail": detail,
            "node_count": count,
            "nodes": nodes.into_iter().take(NODE_LIST_CAP).collect::<Vec<_>>(),
            "truncated": count > NODE_LIST_CAP,
        }));
    };
    if !(inp.mu.is_finite() && inp.mu > 0.0) {
        push(
            "mu_positive",
            vec![],
            format!("the gradient coefficient must be a positive number (got {})", inp.mu),
        );
    }
    let n = inp.cplus.len();
    let neg_plus: Vec<usize> = (0..n).filter(|&i| inp.cplus[i] < -TOL_ZERO).collect();
    if !neg_plus.is_empty() {
        push(
            "cplus_nonnegative",
            neg_plus,
            "cplus must be ≥ 0 at every node".to_string(),
        );
    }
    let neg_minus: Vec<usize> = (0..n).filter(|&i| inp.cminus[i] < -TOL_ZERO).collect();
    if !neg_minus.is_empty() {
        push(
            "cminus_nonnegative",
            neg_minus,
            "cminus must be ≥ 0 at every node".to_string(),
        );
    }
    if !(0..n).any(|i| inp.cplus[i] > TOL_ZERO) {
        push(
            "cplus_not_identically_zero",
            vec![],
            "cplus must be positive somewhere".to_string(),
        );
    }
    let overlap: Vec<usize> = (0..n)
        .filter(|&i| (inp.cplus[i] * inp.cminus[i]).abs() > TOL_ZERO)
        .collect();
    if !overlap.is_empty() {
        push(
            "splitting_product_zero",
            overlap,
            "cplus·cminus must vanish at every node (disjoint supports)".to_string(),
        );
    }
    violations
}

/// Builds the validated problem family (violations → exit 2).
fn build_problem(inp: SampledInputs, lambda: f64) -> Result<ProblemSpec, Failure> {
    let scan = scan_assumptions(&inp);
    if !scan.is_empty() {
        return Err(Failure::Violation(json!({
            "command": "check",
            "status": "violation",
            "grid": inp.grid,
            "mu": inp.mu,
            "violations": scan,
        })));
    }
    ProblemSpec::new(&inp.mesh, inp.mu, inp.cplus, inp.cminus, inp.h, lambda).map_err(|e| {
        Failure::Violation(json!({
            "command": "check",
            "status": "violation",
            "grid": inp.grid,
            "mu": inp.mu,
            "violations": [{"rule": "model", "detail": e.to_string(), "node_count": 0, "nodes": [], "truncated": false}],
        }))
    })
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("finite JSON values");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    fs::write(path, text)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Prints the JSON to stdout and mirrors it (plus the CSV, when given) to
/// files under `--out` / the config's `[output]` names.
fn emit(
    cli: &Cli,
    output: &OutputSection,
    stem: &str,
    json_text: &str,
    csv_text: Option<&str>,
) -> Result<(), Failure> {
    print!("{json_text}");
    let join = |name: &str| -> PathBuf {
        match &cli.out {
            Some(dir) => dir.join(name),
            None => PathBuf::from(name),
        }
    };
    if let Some(name) = &output.json {
        write_file(&join(name), json_text)?;
    } else if cli.out.is_some() {
        write_file(&join(&format!("{stem}.json")), json_text)?;
    }
    if let Some(csv) = csv_text {
        if let Some(name) = &output.csv {
            write_file(&join(name), csv)?;
        } else if cli.out.is_some() {
            write_file(&join(&format!("{stem}.csv")), csv)?;
        }
    }
    Ok(())
}

fn branch_failure(command: &str, e: BranchError) -> Failure {
    match e {
        BranchError::GridNotIncreasing { .. } | BranchError::UnknownScenario(_) => {
            Failure::Usage(format!("{command}: {e}"))
        }
        other => Failure::Diagnostic(json!({
            "error": {"command": command, "kind": "solver", "message": other.to_string()},
        })),
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn require_config<'a>(cli: &'a Cli, command: &str) -> Result<&'a PathBuf, Failure> {
    cli.config
        .as_ref()
        .ok_or_else(|| Failure::Usage(format!("{command} requires --config PATH")))
}

fn cmd_check(cli: &Cli, cfg: &ConfigFile) -> Result<(), Failure> {
    let inp = sampled_inputs(cfg, cli.grid)?;
    let violations = scan_assumptions(&inp);
    let status = if violations.is_empty() { "ok" } else { "violation" };
    let report = json!({
        "command": "check",
        "status": status,
        "grid": inp.grid,
        "mu": inp.mu,
        "violations": violations,
    });
    if status == "ok" {
        emit(cli, &cfg.output, "check", &pretty(&report), None)
    } else {
        Err(Failure::Violation(report))
    }
}

fn cmd_solve(cli: &Cli, cfg: &ConfigFile) -> Result<(), Failure> {
    let lam = cfg
        .lambda
        .single
        .ok_or_else(|| Failure::Usage("solve requires lambda.single in the config".into()))?;
    let inp = sampled_inputs(cfg, cli.grid)?;
    let base = build_problem(inp, 0.0)?;
    let opts = solve_options(&cfg.solver);
    let diagram =
        sweep(&base, &[lam], &opts, "solve", true).map_err(|e| branch_failure("solve", e))?;
    emit(
        cli,
        &cfg.output,
        "solve",
        &diagram.to_json_string(),
        Some(&diagram.to_csv()),
    )
}

fn cmd_sweep(cli: &Cli, cfg: &ConfigFile, seed: u64) -> Result<(), Failure> {
    let inp = sampled_inputs(cfg, cli.grid)?;
    let base = build_problem(inp, 0.0)?;
    let opts = solve_options(&cfg.solver);
    match (&cfg.lambda.grid, &cfg.lambda.bracket) {
        (Some(_), Some(_)) => Err(Failure::Usage(
            "sweep takes lambda.grid or lambda.bracket, not both".into(),
        )),
        (Some(grid), None) => {
            let diagram = sweep(&base, grid, &opts, "sweep", true)
                .map_err(|e| branch_failure("sweep", e))?;
            emit(
                cli,
                &cfg.output,
                "sweep",
                &diagram.to_json_string(),
                Some(&diagram.to_csv()),
            )
        }
        (None, Some([lo, hi])) => {
            let (l, r) = find_lambda_bar(&base, *lo, *hi, seed, &opts)
                .map_err(|e| branch_failure("sweep", e))?;
            let report = json!({
                "command": "sweep",
                "lambda_bar": {
                    "left": l,
                    "right": r,
                    "width": r - l,
                    "midpoint": 0.5 * (l + r),
                },
                "seed": seed,
            });
            emit(cli, &cfg.output, "sweep", &pretty(&report), None)
        }
        (None, None) => Err(Failure::Usage(
            "sweep requires lambda.grid or lambda.bracket in the config".into(),
        )),
    }
}

fn cmd_eigen(cli: &Cli, cfg: &ConfigFile) -> Result<(), Failure> {
    let inp = sampled_inputs(cfg, cli.grid)?;
    let grid = inp.grid.clone();
    let base = build_problem(inp, 0.0)?;
    let opts = solve_options(&cfg.solver);
    let solver_err = |e: foldscape_core::solve::SolveError| {
        Failure::Diagnostic(json!({
            "error": {"command": "eigen", "kind": "solver", "message": e.to_string()},
        }))
    };
    let barrier = construct_barrier(&base, &[]).map_err(solver_err)?;
    let u0 = newton_q(&base, &barrier, &Field::zeros(base.mesh()), &opts).map_err(solver_err)?;
    let lin = assemble_linearized(&base, &u0.u);
    let pair = principal_eigenvalue(base.ops(), &lin, base.cplus()).map_err(|e| {
        Failure::Diagnostic(json!({
            "error": {"command": "eigen", "kind": "spectral", "message": e.to_string()},
        }))
    })?;
    let report = json!({
        "command": "eigen",
        "gamma1": pair.gamma1,
        "residual": pair.residual,
        "grid": grid,
    });
    emit(cli, &cfg.output, "eigen", &pretty(&report), None)
}

fn cmd_md(cli: &Cli, cfg: &ConfigFile) -> Result<(), Failure> {
    let lam = cfg.lambda.single.unwrap_or(0.0);
    let inp = sampled_inputs(cfg, cli.grid)?;
    let grid = inp.grid.clone();
    let base = build_problem(inp, lam)?;
    let d = base.c_lambda();
    let result = compute_md(base.ops(), &d, base.h(), base.mu()).map_err(|e| {
        Failure::Diagnostic(json!({
            "error": {"command": "md", "kind": "spectral", "message": e.to_string()},
        }))
    })?;
    let report = json!({
        "command": "md",
        "value": result.value,
        "subspace_dim": result.subspace_dim,
        "lambda": lam,
        "grid": grid,
    });
    emit(cli, &cfg.output, "md", &pretty(&report), None)
}

fn cmd_scenario(cli: &Cli, cfg: Option<&ConfigFile>, name: &str, seed: u64) -> Result<(), Failure> {
    let opts = cfg
        .map(|c| solve_options(&c.solver))
        .unwrap_or_default();
    let diagram = verify_scenario(name, cli.grid, seed, &opts)
        .map_err(|e| branch_failure("scenario", e))?;
    let default_output = OutputSection::default();
    let output = cfg.map(|c| &c.output).unwrap_or(&default_output);
    let stem = format!("scenario_{name}");
    emit(
        cli,
        output,
        &stem,
        &diagram.to_json_string(),
        Some(&diagram.to_csv()),
    )?;
    if diagram.all_pass() {
        Ok(())
    } else {
        // The diagram was already printed; exit 3 without re-printing.
        Err(Failure::Diagnostic(Value::Null))
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Check => {
            let cfg = load_config(require_config(cli, "check")?)?;
            cmd_check(cli, &cfg)
        }
        Command::Solve => {
            let cfg = load_config(require_config(cli, "solve")?)?;
            cmd_solve(cli, &cfg)
        }
        Command::Sweep => {
            let cfg = load_config(require_config(cli, "sweep")?)?;
            let seed = cli.seed.or(cfg.seed).unwrap_or(0);
            cmd_sweep(cli, &cfg, seed)
        }
        Command::Eigen => {
            let cfg = load_config(require_config(cli, "eigen")?)?;
            cmd_eigen(cli, &cfg)
        }
        Command::Md => {
            let cfg = load_config(require_config(cli, "md")?)?;
            cmd_md(cli, &cfg)
        }
        Command::Scenario { name } => {
            let cfg = match &cli.config {
                Some(path) => Some(load_config(path)?),
                None => None,
            };
            let seed = cli.seed.or(cfg.as_ref().and_then(|c| c.seed)).unwrap_or(0);
            cmd_scenario(cli, cfg.as_ref(), name, seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(report)) => {
            print!("{}", pretty(&report));
            ExitCode::from(2)
        }
        Err(Failure::Diagnostic(v)) => {
            if !v.is_null() {
                print!("{}", pretty(&v));
            }
            ExitCode::from(3)
        }
    }
}

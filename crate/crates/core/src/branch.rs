//! Continuation in λ and assembly of verification scenarios.
//!
//! A *sweep* walks a strictly increasing λ grid, building a truncation
//! barrier at each point, continuing the minimal branch from the previous
//! λ's solution (Newton seeded by natural continuation, certified by a
//! monotone pass whenever the seed is a valid one-sided solution), and then
//! attempting a second solution by a mountain-pass run anchored on a
//! certified descent ray — with a scan of negative starts as fallback for
//! the regime past the principal eigenvalue, where the pass geometry
//! degenerates.
//!
//! [`find_lambda_bar`] brackets the fold where the minimal branch ceases to
//! exist by bisection on empirical solvability: a point counts as solvable
//! when a multi-start Newton probe or a monotone run between validated
//! bounds produces a solution whose c⁺-weighted sign is admissible.
//!
//! [`verify_scenario`] runs one of the shipped named configurations and
//! reduces every claim it makes to a named boolean verdict with numeric
//! evidence; diagrams serialize to JSON and flat CSV.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::mesh::{Field, Mesh, MeshError};
use crate::model::{
    check_ordering, energy, inverse_cole_hopf, Barrier, ModelError, OrderRelation, ProblemSpec,
};
use crate::solve::{
    construct_barrier, is_lower_solution, is_upper_solution, linear_solve, monotone_iteration,
    mountain_pass, newton_q, random_smooth_field, ray_blowdown, uniqueness_probe, Direction,
    SolutionKind, SolutionRecord, SolveError, SolveOptions,
};
use crate::spectral::{assemble_linearized, compute_md, principal_eigenvalue, SpectralError};
use crate::tolerances::{TOL_DEDUP, TOL_ZERO};

/// Fold location for the constant-forcing family on the unit interval
/// (μ = 1, c⁺ ≡ 1, c⁻ ≡ 0, h ≡ 0.05) at n = 200, frozen from an
/// independent dense λ-grid probe with 50 Newton multistarts per point
/// (`tests/fold_oracle.rs`): bracket [8.85, 8.86].
const GOLDEN_LAMBDA_BAR: f64 = 8.855;

/// Slack allowed between a freshly bisected fold bracket midpoint and the
/// frozen golden location (covers the oracle's 0.01 grid resolution plus
/// probe-dependence of the empirical solvability boundary).
const GOLDEN_LAMBDA_TOL: f64 = 0.05;

/// Amplitude below which a converged iterate is indistinguishable from the
/// trivial profile when the linearization there is (nearly) singular: with
/// residual tolerance τ and weighted quadratic coefficient κ ≈ cell·λ·μ/2,
/// every profile of amplitude ≲ sqrt(τ/κ) ≈ 1e-4 satisfies the residual
/// test along the critical eigendirection.  Genuine second solutions in the
/// shipped scenarios have amplitude ≥ 0.1.
const DEGENERACY_AMPLITUDE: f64 = 1e-3;

/// Names accepted by [`verify_scenario`].
pub const SCENARIO_NAMES: [&str; 5] = [
    "example1d",
    "th2_fold",
    "th3_sign",
    "th_h0_flip",
    "coercive_iff",
];

/// One named boolean check with its numeric evidence.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub diagnostics: String,
}

impl Verdict {
    fn new(name: impl Into<String>, pass: bool, diagnostics: impl Into<String>) -> Verdict {
        Verdict {
            name: name.into(),
            pass,
            diagnostics: diagnostics.into(),
        }
    }
}

/// Fold bracket: solutions were found at `left`, none at `right`.
#[derive(Debug, Clone, Copy)]
pub struct LambdaBracket {
    pub left: f64,
    pub right: f64,
}

impl LambdaBracket {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.left + self.right)
    }
}

/// Assembled result of a sweep or a named scenario run.
#[derive(Debug, Clone)]
pub struct BranchDiagram {
    /// Identifier of the configuration that produced the diagram.
    pub scenario: String,
    /// Solution records, ordered by (λ, kind).
    pub records: Vec<SolutionRecord>,
    /// Fold bracket, when one was located.
    pub lambda_bar: Option<LambdaBracket>,
    /// Principal eigenvalue of the linearization at the reference solution,
    /// when the scenario computes it.
    pub gamma1: Option<f64>,
    /// Named boolean checks with diagnostics.
    pub verdicts: Vec<Verdict>,
}

fn kind_rank(kind: SolutionKind) -> u8 {
    match kind {
        SolutionKind::Minimal => 0,
        SolutionKind::TrivialU0 => 1,
        SolutionKind::LocalMin => 2,
        SolutionKind::MountainPass => 3,
    }
}

impl BranchDiagram {
    fn new(label: &str) -> BranchDiagram {
        BranchDiagram {
            scenario: label.to_string(),
            records: Vec::new(),
            lambda_bar: None,
            gamma1: None,
            verdicts: Vec::new(),
        }
    }

    /// True when every verdict passed.
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    fn sort_records(&mut self) {
        self.records.sort_by(|a, b| {
            a.lambda
                .total_cmp(&b.lambda)
                .then_with(|| kind_rank(a.kind).cmp(&kind_rank(b.kind)))
        });
    }

    /// JSON value with a fixed schema; key order is deterministic.
    pub fn to_json(&self) -> Value {
        let records: Vec<Value> = self
            .records
            .iter()
            .map(|r| {
                json!({
                    "lambda": r.lambda,
                    "kind": r.kind.as_str(),
                    "energy": r.energy,
                    "residual": r.residual,
                    "umin": r.u.min(),
                    "umax": r.u.max(),
                    "ordering_vs_u0": r.ordering_vs_u0.map(|o| o.as_str()),
                    "notes": r.notes,
                    "u": r.u.as_slice(),
                    "v": r.v.as_slice(),
                })
            })
            .collect();
        let verdicts: Vec<Value> = self
            .verdicts
            .iter()
            .map(|v| json!({"name": v.name, "pass": v.pass, "diagnostics": v.diagnostics}))
            .collect();
        json!({
            "scenario": self.scenario,
            "gamma1": self.gamma1,
            "lambda_bar": self
                .lambda_bar
                .map(|b| json!({"left": b.left, "right": b.right, "width": b.width()})),
            "records": records,
            "verdicts": verdicts,
            "all_pass": self.all_pass(),
        })
    }

    /// Pretty JSON string (trailing newline included).
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("finite diagram values");
        s.push('\n');
        s
    }

    /// Flat CSV: one row per record.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("scenario,lambda,kind,energy,residual,umin,umax,ordering_vs_u0\n");
        for r in &self.records {
            let ord = r.ordering_vs_u0.map(|o| o.as_str()).unwrap_or("");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.scenario,
                r.lambda,
                r.kind.as_str(),
                r.energy,
                r.residual,
                r.u.min(),
                r.u.max(),
                ord
            );
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum BranchError {
    #[error("λ grid must be strictly increasing and finite (violation at index {idx})")]
    GridNotIncreasing { idx: usize },
    #[error("fold bracketing precondition failed: {reason}")]
    Bracket { reason: String },
    #[error("unknown scenario name: {0} (expected one of example1d, th2_fold, th3_sign, th_h0_flip, coercive_iff)")]
    UnknownScenario(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Positive first-mode profile, zeroed on the support of c⁻ so that rays
/// t·dir stay admissible for the blow-down certificate.
fn admissible_direction(spec: &ProblemSpec) -> Field {
    let mesh = spec.mesh();
    let base = match mesh.dim() {
        1 => {
            let (a, b) = mesh.bounds(0);
            Field::from_fn(mesh, move |p| (PI * (p[0] - a) / (b - a)).sin())
        }
        _ => {
            let (ax, bx) = mesh.bounds(0);
            let (ay, by) = mesh.bounds(1);
            Field::from_fn(mesh, move |p| {
                (PI * (p[0] - ax) / (bx - ax)).sin() * (PI * (p[1] - ay) / (by - ay)).sin()
            })
        }
    };
    let cminus = spec.cminus();
    let vals: Vec<f64> = (0..base.len())
        .map(|i| if cminus[i] > TOL_ZERO { 0.0 } else { base[i] })
        .collect();
    Field::from_values(mesh, vals).expect("profile built on the same mesh")
}

/// Extends the certified blow-down parameter until the ray endpoint energy
/// sits strictly below `level`, anchoring a mountain-pass path end.
fn descent_endpoint(
    spec: &ProblemSpec,
    barrier: &Barrier,
    dir: &Field,
    level: f64,
) -> Result<Field, SolveError> {
    let mut t = ray_blowdown(spec, barrier, dir)?;
    for _ in 0..60 {
        let e = dir.scaled(t);
        if energy(spec, barrier, &e).value <= level - 0.5 {
            return Ok(e);
        }
        t *= 2.0;
    }
    Err(SolveError::BlowdownNotFound { t_max: t })
}

/// Continues the minimal branch to the current λ from the previous
/// solution.  When the seed is a valid upper solution the limit is taken
/// monotonically downward from it (above the validated barrier level);
/// when it is a valid lower solution, Newton supplies the upper end and a
/// monotone pass certifies the minimal limit; otherwise the Newton result
/// is kept as plain continuation.
fn continue_minimal(
    spec: &ProblemSpec,
    barrier: &Barrier,
    seed: &Field,
    opts: &SolveOptions,
) -> Result<SolutionRecord, SolveError> {
    let n = seed.len();
    if is_upper_solution(spec, barrier, seed) {
        let lower = barrier.alpha().clone();
        if (0..n).all(|i| lower[i] <= seed[i]) {
            let rec = monotone_iteration(spec, barrier, &lower, seed, Direction::FromUpper, opts)?;
            return Ok(rec
                .with_kind(SolutionKind::Minimal)
                .with_note("minimal_certified_from_upper_seed"));
        }
    }
    match newton_q(spec, barrier, seed, opts) {
        Ok(rec) => {
            let v = rec.v.clone();
            if is_lower_solution(spec, barrier, seed) && (0..n).all(|i| seed[i] <= v[i] + 1e-9) {
                let cert =
                    monotone_iteration(spec, barrier, seed, &v, Direction::FromLower, opts)?;
                return Ok(cert.with_note("minimal_certified_from_lower_seed"));
            }
            Ok(rec
                .with_kind(SolutionKind::Minimal)
                .with_note("newton_continuation"))
        }
        Err(err) => {
            // Monotone rescue: the seed may still bound the branch from below.
            if is_lower_solution(spec, barrier, seed) {
                for k in [1.0, 4.0, 16.0] {
                    let rhs = Field::from_fn(spec.mesh(), move |_| k);
                    let Ok(upper) = linear_solve(spec.ops().a(), &rhs) else {
                        continue;
                    };
                    if is_upper_solution(spec, barrier, &upper)
                        && (0..n).all(|i| seed[i] <= upper[i] + 1e-9)
                    {
                        let rec = monotone_iteration(
                            spec,
                            barrier,
                            seed,
                            &upper,
                            Direction::FromLower,
                            opts,
                        )?;
                        return Ok(rec.with_note("minimal_rescued_from_linear_upper"));
                    }
                }
            }
            Err(err)
        }
    }
}

/// Attempts the second solution at the current λ: a mountain-pass run from
/// the minimal solution toward a certified descent endpoint, with a scan of
/// negative starts (e^{-b·profile} in the physical variable, which respects
/// the transform floor) once the pass geometry is reported absent.
fn second_solution(
    spec: &ProblemSpec,
    barrier: &Barrier,
    minimal: &SolutionRecord,
    opts: &SolveOptions,
) -> Result<SolutionRecord, String> {
    let dir = admissible_direction(spec);
    let cplus = spec.cplus();
    if !(0..dir.len()).any(|i| cplus[i] * dir[i] > TOL_ZERO) {
        return Err("no admissible ray direction (the c⁺-weighted profile vanishes)".into());
    }
    match descent_endpoint(spec, barrier, &dir, minimal.energy) {
        Ok(e2) => match mountain_pass(spec, barrier, &minimal.v, &e2, opts) {
            Ok((rec, diag)) => {
                if rec.u.sup_distance(&minimal.u) > TOL_DEDUP {
                    return Ok(rec.with_note(format!("ps_bounded={}", diag.bounded)));
                }
                // The polished pass point collapsed onto the minimal record;
                // treat like degenerate geometry and scan the negative side.
            }
            Err(SolveError::GeometryAbsent { .. }) => {}
            Err(e) => return Err(format!("mountain pass failed: {e}")),
        },
        Err(e) => return Err(format!("no descent endpoint along the admissible ray: {e}")),
    }
    let mu = spec.mu();
    for b in [0.25, 0.5, 1.0, 2.0, 3.0] {
        let vals: Vec<f64> = (0..dir.len())
            .map(|i| ((-b * mu * dir[i]).exp() - 1.0) / mu)
            .collect();
        let start = Field::from_values(spec.mesh(), vals).expect("start on the same mesh");
        if let Ok(rec) = newton_q(spec, barrier, &start, opts) {
            // When the linearization at the trivial profile is (nearly)
            // singular, any point in the Newton tolerance ball — amplitude
            // ~ sqrt(tol / weighted quadratic coefficient), ~1e-4 at the
            // sweep resolutions — passes the residual test; only amplitudes
            // above that degeneracy scale count as a second solution.
            if rec.u.sup_norm() > DEGENERACY_AMPLITUDE
                && rec.u.sup_distance(&minimal.u) > TOL_DEDUP
            {
                return Ok(rec
                    .with_kind(SolutionKind::LocalMin)
                    .with_note(format!("negative_scan_start_b={b}")));
            }
        }
    }
    Err("pass geometry absent and the negative scan found no second solution".into())
}

/// Walks a strictly increasing λ grid: per point, barrier construction,
/// minimal-branch continuation seeded by the previous λ's solution, and
/// (optionally) a second-solution attempt.  Per-λ failures become failed
/// verdicts and the sweep continues; second-solution absences are logged.
pub fn sweep(
    base: &ProblemSpec,
    lambdas: &[f64],
    opts: &SolveOptions,
    label: &str,
    seek_second: bool,
) -> Result<BranchDiagram, BranchError> {
    for i in 0..lambdas.len() {
        let bad = !lambdas[i].is_finite() || (i > 0 && lambdas[i] <= lambdas[i - 1]);
        if bad {
            return Err(BranchError::GridNotIncreasing { idx: i });
        }
    }
    let mut diagram = BranchDiagram::new(label);
    if lambdas.is_empty() {
        return Ok(diagram);
    }
    // Reference solution at λ = 0: the root of the branch.
    let spec0 = base.with_lambda(0.0);
    let barrier0 = construct_barrier(&spec0, &[])?;
    let u0 = newton_q(&spec0, &barrier0, &Field::zeros(spec0.mesh()), opts)?;
    let mut log = String::new();
    let mut prev = u0.v.clone();
    let mut known_u = vec![u0.u.clone()];
    for (idx, &lam) in lambdas.iter().enumerate() {
        let spec_l = base.with_lambda(lam);
        let barrier = match construct_barrier(&spec_l, &known_u) {
            Ok(b) => b,
            Err(e) => {
                diagram.verdicts.push(Verdict::new(
                    format!("barrier_{idx}"),
                    false,
                    format!("lambda={lam}: {e}"),
                ));
                continue;
            }
        };
        match continue_minimal(&spec_l, &barrier, &prev, opts) {
            Ok(mut rec) => {
                rec.ordering_vs_u0 = Some(check_ordering(&u0.u, &rec.u));
                if rec.u.sup_distance(&u0.u) <= TOL_DEDUP {
                    rec.kind = SolutionKind::TrivialU0;
                }
                prev = rec.v.clone();
                known_u = vec![u0.u.clone(), rec.u.clone()];
                if seek_second {
                    match second_solution(&spec_l, &barrier, &rec, opts) {
                        Ok(mut s) => {
                            s.ordering_vs_u0 = Some(check_ordering(&u0.u, &s.u));
                            let sib = check_ordering(&rec.u, &s.u);
                            s.notes.push(format!("vs_minimal={}", sib.as_str()));
                            s.notes
                                .push(format!("energy_gap_over_minimal={}", s.energy - rec.energy));
                            diagram.records.push(s);
                        }
                        Err(msg) => {
                            let _ = writeln!(log, "lambda={lam}: second solution: {msg}");
                        }
                    }
                }
                diagram.records.push(rec);
            }
            Err(e) => diagram.verdicts.push(Verdict::new(
                format!("minimal_solve_{idx}"),
                false,
                format!("lambda={lam}: {e}"),
            )),
        }
    }
    diagram.sort_records();
    if !log.is_empty() {
        diagram
            .verdicts
            .push(Verdict::new("sweep_log", true, log.trim_end()));
    }
    Ok(diagram)
}

/// Empirical existence probe in the admissible class: continuation Newton
/// from each guide, then `n_starts` seeded smooth multistarts, then
/// monotone runs between the validated barrier level and linear upper
/// candidates.  Returns the first solution whose c⁺-weighted sign is
/// nonnegative (within 10⁻⁹), or None — evidence of nonexistence, not
/// proof.
pub fn admissible_solution_probe(
    base: &ProblemSpec,
    lambda: f64,
    guides: &[Field],
    seed: u64,
    n_starts: usize,
    opts: &SolveOptions,
) -> Option<SolutionRecord> {
    let spec = base.with_lambda(lambda);
    let mu = spec.mu();
    let mut cands: Vec<Field> = Vec::new();
    for g in guides {
        if let Ok(gu) = inverse_cole_hopf(g, mu) {
            cands.push(gu);
        }
    }
    let barrier = construct_barrier(&spec, &cands).ok()?;
    let admissible = |rec: &SolutionRecord| -> bool {
        let cplus = spec.cplus();
        (0..rec.u.len()).all(|i| cplus[i] * rec.u[i] >= -1e-9)
    };
    for g in guides {
        if let Ok(rec) = newton_q(&spec, &barrier, g, opts) {
            if admissible(&rec) {
                return Some(rec);
            }
        }
    }
    for k in 0..n_starts {
        let amp = [0.2, 0.5, 1.0, 2.0][k % 4];
        let s = random_smooth_field(
            spec.mesh(),
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64),
            amp,
        );
        if let Ok(rec) = newton_q(&spec, &barrier, &s, opts) {
            if admissible(&rec) {
                return Some(rec);
            }
        }
    }
    let alpha = barrier.alpha().clone();
    for k in [1.0, 4.0, 16.0] {
        let rhs = Field::from_fn(spec.mesh(), move |_| k);
        let Ok(upper) = linear_solve(spec.ops().a(), &rhs) else {
            continue;
        };
        if is_upper_solution(&spec, &barrier, &upper)
            && (0..alpha.len()).all(|i| alpha[i] <= upper[i])
        {
            if let Ok(rec) =
                monotone_iteration(&spec, &barrier, &alpha, &upper, Direction::FromLower, opts)
            {
                if admissible(&rec) {
                    return Some(rec);
                }
            }
        }
    }
    None
}

/// Brackets the fold λ̄ by bisection on empirical solvability.  Requires the
/// probe to succeed at `lambda_lo` and fail at `lambda_hi`; the returned
/// bracket has width ≤ 10⁻³ · bracket-left, and the right end is certified
/// with a 50-start probe.
pub fn find_lambda_bar(
    base: &ProblemSpec,
    lambda_lo: f64,
    lambda_hi: f64,
    seed: u64,
    opts: &SolveOptions,
) -> Result<(f64, f64), BranchError> {
    if !(lambda_lo.is_finite() && lambda_hi.is_finite() && 0.0 < lambda_lo && lambda_lo < lambda_hi)
    {
        return Err(BranchError::Bracket {
            reason: format!("invalid input bracket [{lambda_lo}, {lambda_hi}]"),
        });
    }
    let spec0 = base.with_lambda(0.0);
    let barrier0 = construct_barrier(&spec0, &[])?;
    let u0 = newton_q(&spec0, &barrier0, &Field::zeros(spec0.mesh()), opts).map_err(|e| {
        BranchError::Bracket {
            reason: format!("root solve at λ=0 failed: {e}"),
        }
    })?;
    let mut seed_rec = admissible_solution_probe(base, lambda_lo, &[u0.v.clone()], seed, 12, opts)
        .ok_or_else(|| BranchError::Bracket {
            reason: format!("no admissible solution found at λ_lo = {lambda_lo}"),
        })?;
    if admissible_solution_probe(
        base,
        lambda_hi,
        &[seed_rec.v.clone(), u0.v.clone()],
        seed.wrapping_add(1),
        50,
        opts,
    )
    .is_some()
    {
        return Err(BranchError::Bracket {
            reason: format!("solutions persist at λ_hi = {lambda_hi}; no fold inside the bracket"),
        });
    }
    let (mut lo, mut hi) = (lambda_lo, lambda_hi);
    let mut salt = 2u64;
    while hi - lo > 1e-3 * lo {
        let mid = 0.5 * (lo + hi);
        match admissible_solution_probe(
            base,
            mid,
            &[seed_rec.v.clone(), u0.v.clone()],
            seed.wrapping_add(salt),
            12,
            opts,
        ) {
            Some(rec) => {
                lo = mid;
                seed_rec = rec;
            }
            None => hi = mid,
        }
        salt += 1;
    }
    // Certify the right end with the full-strength probe.
    if admissible_solution_probe(
        base,
        hi,
        &[seed_rec.v.clone(), u0.v.clone()],
        seed.wrapping_add(salt),
        50,
        opts,
    )
    .is_some()
    {
        return Err(BranchError::Bracket {
            reason: format!(
                "bracket right end {hi} unexpectedly solvable under the 50-start certification"
            ),
        });
    }
    Ok((lo, hi))
}

/// Runs one of the shipped named configurations and evaluates its claims as
/// named boolean verdicts.  `grid` overrides the scenario's default mesh
/// resolution; all randomness derives from `seed`.
pub fn verify_scenario(
    name: &str,
    grid: Option<usize>,
    seed: u64,
    opts: &SolveOptions,
) -> Result<BranchDiagram, BranchError> {
    match name {
        "example1d" => scenario_example1d(grid.unwrap_or(800), opts),
        "th2_fold" => scenario_th2_fold(grid.unwrap_or(200), seed, opts),
        "th3_sign" => scenario_th3_sign(grid.unwrap_or(200), seed, opts),
        "th_h0_flip" => scenario_th_h0_flip(grid.unwrap_or(400), seed, opts),
        "coercive_iff" => scenario_coercive_iff(grid.unwrap_or(200), opts),
        other => Err(BranchError::UnknownScenario(other.to_string())),
    }
}

/// Unit-interval family with constant coefficients: μ = 1, c⁺ ≡ 1, c⁻ ≡ 0,
/// h ≡ `h_level`.
fn unit_const_spec(n: usize, h_level: f64) -> Result<ProblemSpec, BranchError> {
    let mesh = Mesh::line(0.0, 1.0, n)?;
    let cplus = Field::from_fn(&mesh, |_| 1.0);
    let h = Field::from_fn(&mesh, move |_| h_level);
    Ok(ProblemSpec::new(
        &mesh,
        1.0,
        cplus,
        Field::zeros(&mesh),
        h,
        0.0,
    )?)
}

/// The interval example with a closed-form reference: on (−2π, 2π) with
/// μ = 1, c⁺ = (cos x + 1)·1_{x≥0}, c⁻ ≡ 0, h = (cos x − sin²x)·1_{x<0},
/// the profile cos x − 1 on the left half glued to 0 on the right solves
/// the problem for every λ, because the c⁺-weighted profile vanishes
/// identically.
fn interval_example_spec(n: usize) -> Result<ProblemSpec, BranchError> {
    let mesh = Mesh::line(-2.0 * PI, 2.0 * PI, n)?;
    let cplus = Field::from_fn(&mesh, |p| if p[0] < 0.0 { 0.0 } else { p[0].cos() + 1.0 });
    let h = Field::from_fn(&mesh, |p| {
        if p[0] < 0.0 {
            p[0].cos() - p[0].sin().powi(2)
        } else {
            0.0
        }
    });
    Ok(ProblemSpec::new(
        &mesh,
        1.0,
        cplus,
        Field::zeros(&mesh),
        h,
        0.0,
    )?)
}

fn interval_example_reference(mesh: &Arc<Mesh>) -> Field {
    Field::from_fn(mesh, |p| if p[0] < 0.0 { p[0].cos() - 1.0 } else { 0.0 })
}

fn scenario_example1d(n: usize, opts: &SolveOptions) -> Result<BranchDiagram, BranchError> {
    let run = |nn: usize| -> Result<(BranchDiagram, f64), BranchError> {
        let base = interval_example_spec(nn)?;
        let diagram = sweep(&base, &[0.0, 1.0, 2.0], opts, "example1d", false)?;
        let reference = interval_example_reference(base.mesh());
        let err = diagram
            .records
            .iter()
            .map(|r| r.u.sup_distance(&reference))
            .fold(0.0, f64::max);
        Ok((diagram, err))
    };
    let (mut diagram, err_n) = run(n)?;
    let (_, err_half) = run(n / 2)?;
    let rate = (err_half / err_n).log2();
    let solved_all = diagram.records.len() == 3 && diagram.all_pass();
    let spread = {
        let mut worst = 0.0f64;
        for i in 0..diagram.records.len() {
            for j in (i + 1)..diagram.records.len() {
                worst = worst.max(diagram.records[i].u.sup_distance(&diagram.records[j].u));
            }
        }
        worst
    };
    let cplus_weighted = {
        let base = interval_example_spec(n)?;
        let cplus = base.cplus();
        diagram
            .records
            .iter()
            .map(|r| {
                (0..r.u.len())
                    .map(|i| (cplus[i] * r.u[i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    diagram.verdicts.push(Verdict::new(
        "reference_profile_max_error",
        solved_all && err_n <= 5e-4,
        format!("max sup error {err_n:.3e} at n={n} over λ ∈ {{0,1,2}} (tolerance 5e-4)"),
    ));
    diagram.verdicts.push(Verdict::new(
        "second_order_rate",
        (1.7..=2.3).contains(&rate),
        format!(
            "rate {rate:.3} from sup errors {err_half:.3e} (n={}) and {err_n:.3e} (n={n})",
            n / 2
        ),
    ));
    diagram.verdicts.push(Verdict::new(
        "profile_persists_for_all_lambda",
        spread <= 5e-4,
        format!("worst pairwise sup distance between λ-records: {spread:.3e} (tolerance 5e-4)"),
    ));
    diagram.verdicts.push(Verdict::new(
        "cplus_weighted_profile_vanishes",
        cplus_weighted <= 1e-3,
        format!(
            "sup |c⁺·u| = {cplus_weighted:.3e} on computed records (identically zero on the \
             closed form: c⁺ vanishes on the left half, the profile on the right)"
        ),
    ));
    Ok(diagram)
}

fn scenario_th_h0_flip(
    n: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<BranchDiagram, BranchError> {
    let base = unit_const_spec(n, 0.0)?;
    let spec0 = base.with_lambda(0.0);
    let zero = Field::zeros(spec0.mesh());
    let lin = assemble_linearized(&spec0, &zero);
    let pair = principal_eigenvalue(spec0.ops(), &lin, spec0.cplus())?;
    let g1 = pair.gamma1;
    let grid: Vec<f64> = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75]
        .iter()
        .map(|f| f * g1)
        .collect();
    let mut diagram = sweep(&base, &grid, opts, "th_h0_flip", true)?;
    diagram.gamma1 = Some(g1);
    let pi2 = PI * PI;
    diagram.verdicts.push(Verdict::new(
        "flip_eigenvalue_near_interval_value",
        ((g1 - pi2) / pi2).abs() <= 5e-3,
        format!("γ₁ = {g1:.6} vs π² = {pi2:.6} (relative tolerance 0.5%)"),
    ));
    let tol_edge = 1e-9 * g1;
    let seconds: Vec<&SolutionRecord> = diagram
        .records
        .iter()
        .filter(|r| matches!(r.kind, SolutionKind::MountainPass | SolutionKind::LocalMin))
        .collect();
    let mut pos_below = 0usize;
    let mut neg_above = 0usize;
    let mut at_flip = 0usize;
    let mut detail = String::new();
    for r in &seconds {
        let _ = write!(
            detail,
            "λ={:.4}: kind={}, umin={:.4}, umax={:.4}; ",
            r.lambda,
            r.kind.as_str(),
            r.u.min(),
            r.u.max()
        );
        if r.lambda < g1 - tol_edge {
            if r.u.min() > 0.0 {
                pos_below += 1;
            }
        } else if r.lambda > g1 + tol_edge {
            if r.u.max() < 0.0 {
                neg_above += 1;
            }
        } else {
            at_flip += 1;
        }
    }
    diagram.verdicts.push(Verdict::new(
        "second_solutions_positive_below_flip",
        pos_below == 3,
        format!("{pos_below}/3 strictly positive second solutions below γ₁ ({detail})"),
    ));
    diagram.verdicts.push(Verdict::new(
        "second_solutions_negative_above_flip",
        neg_above == 3,
        format!("{neg_above}/3 strictly negative second solutions above γ₁"),
    ));
    diagram.verdicts.push(Verdict::new(
        "no_second_solution_at_flip",
        at_flip == 0,
        format!("{at_flip} nontrivial records at λ = γ₁"),
    ));
    // Multi-start probe at the flip point.
    let spec_g = base.with_lambda(g1);
    let barrier = construct_barrier(&spec_g, &[zero.clone()])?;
    let mut starts = vec![zero.clone()];
    for k in 0..20u64 {
        let amp = [0.2, 0.5, 1.0][(k % 3) as usize];
        starts.push(random_smooth_field(spec_g.mesh(), seed.wrapping_add(k), amp));
    }
    let probe = uniqueness_probe(&spec_g, &barrier, &starts, |_| true, opts);
    let max_sup = probe
        .records
        .iter()
        .map(|r| r.u.sup_norm())
        .fold(0.0, f64::max);
    // At λ = γ₁ the linearization at the trivial profile is singular, so the
    // probe returns a cloud of converged iterates inside the Newton
    // tolerance ball; "only the trivial solution" means no record above the
    // degeneracy amplitude.
    let only_trivial = !probe.records.is_empty() && max_sup <= DEGENERACY_AMPLITUDE;
    diagram.verdicts.push(Verdict::new(
        "only_trivial_solution_at_flip",
        only_trivial,
        format!(
            "{} converged records from 20 multistarts at λ = γ₁, largest amplitude {max_sup:.3e} \
             (threshold {DEGENERACY_AMPLITUDE} covers the Newton tolerance ball at the \
             degenerate linearization; {} starts did not converge)",
            probe.records.len(),
            probe.non_converged
        ),
    ));
    let minimal_trivial = diagram
        .records
        .iter()
        .filter(|r| matches!(r.kind, SolutionKind::Minimal | SolutionKind::TrivialU0))
        .all(|r| r.u.sup_norm() <= 1e-8);
    diagram.verdicts.push(Verdict::new(
        "minimal_branch_stays_trivial",
        minimal_trivial,
        "the minimal record at every grid λ is the zero profile".to_string(),
    ));
    let mut energy_ok = true;
    for r in &seconds {
        if r.lambda < g1 - tol_edge && r.energy <= 1e-8 {
            energy_ok = false;
        }
    }
    diagram.verdicts.push(Verdict::new(
        "saddle_energy_above_minimal_below_flip",
        energy_ok,
        "each pass record below γ₁ has energy strictly above the trivial level 0".to_string(),
    ));
    Ok(diagram)
}

fn scenario_th2_fold(
    n: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<BranchDiagram, BranchError> {
    let base = unit_const_spec(n, 0.05)?;
    let (l, r) = find_lambda_bar(&base, 0.5, 15.0, seed, opts)?;
    let lams: Vec<f64> = [0.3, 0.5, 0.7, 0.85, 0.95].iter().map(|f| f * l).collect();
    let mut diagram = sweep(&base, &lams, opts, "th2_fold", true)?;
    diagram.lambda_bar = Some(LambdaBracket { left: l, right: r });
    let spec0 = base.with_lambda(0.0);
    let barrier0 = construct_barrier(&spec0, &[])?;
    let u0 = newton_q(&spec0, &barrier0, &Field::zeros(spec0.mesh()), opts)?;
    diagram.verdicts.push(Verdict::new(
        "fold_bracket_width",
        r - l <= 1e-3 * l && l < r,
        format!("bracket [{l:.6}, {r:.6}], width {:.3e} ≤ 1e-3·left", r - l),
    ));
    let mid = 0.5 * (l + r);
    diagram.verdicts.push(Verdict::new(
        "fold_matches_frozen_oracle",
        (mid - GOLDEN_LAMBDA_BAR).abs() <= GOLDEN_LAMBDA_TOL,
        format!(
            "bracket midpoint {mid:.4} vs frozen dense-grid probe value {GOLDEN_LAMBDA_BAR} \
             (tolerance {GOLDEN_LAMBDA_TOL})"
        ),
    ));
    // Pair up records per test λ.
    let minimals: Vec<&SolutionRecord> = diagram
        .records
        .iter()
        .filter(|r| r.kind == SolutionKind::Minimal)
        .collect();
    let saddles: Vec<&SolutionRecord> = diagram
        .records
        .iter()
        .filter(|r| r.kind == SolutionKind::MountainPass)
        .collect();
    diagram.verdicts.push(Verdict::new(
        "two_solutions_at_each_test_lambda",
        minimals.len() == 5 && saddles.len() == 5,
        format!(
            "{} minimal and {} pass records at the 5 test λ below bracket-left",
            minimals.len(),
            saddles.len()
        ),
    ));
    let mut chain_ok = minimals.len() == 5 && saddles.len() == 5;
    let mut chain_diag = String::new();
    for (m, s) in minimals.iter().zip(&saddles) {
        let lo = check_ordering(&u0.u, &m.u);
        let hi = check_ordering(&m.u, &s.u);
        let _ = write!(
            chain_diag,
            "λ={:.4}: u0<min {}, min<pass {}; ",
            m.lambda,
            lo.as_str(),
            hi.as_str()
        );
        if lo != OrderRelation::MuchLess || hi != OrderRelation::MuchLess {
            chain_ok = false;
        }
    }
    diagram.verdicts.push(Verdict::new(
        "ordering_chain_pass_minimal_reference",
        chain_ok,
        chain_diag.trim_end().to_string(),
    ));
    let mut mono_ok = minimals.len() == 5;
    for w in minimals.windows(2) {
        if check_ordering(&w[0].u, &w[1].u) != OrderRelation::MuchLess {
            mono_ok = false;
        }
    }
    diagram.verdicts.push(Verdict::new(
        "minimal_branch_strictly_increasing",
        mono_ok,
        "adjacent minimal records satisfy the strict ordering with boundary margin".to_string(),
    ));
    let energy_ok = minimals
        .iter()
        .zip(&saddles)
        .all(|(m, s)| s.energy > m.energy + 1e-8);
    diagram.verdicts.push(Verdict::new(
        "saddle_energy_above_minimal",
        energy_ok,
        format!(
            "energy gaps: {:?}",
            minimals
                .iter()
                .zip(&saddles)
                .map(|(m, s)| s.energy - m.energy)
                .collect::<Vec<_>>()
        ),
    ));
    // Fold merging: the two branches approach each other as λ → bracket-left.
    let merge_lams: Vec<f64> = [0.80, 0.85, 0.90, 0.95, 0.99].iter().map(|f| f * l).collect();
    let merging = (|| -> Result<Vec<f64>, String> {
        let mut dists = Vec::new();
        let mut prev_min_v = u0.v.clone();
        let mut prev_sec_v: Option<Field> = None;
        let mut known = vec![u0.u.clone()];
        for &lam in &merge_lams {
            let spec_l = base.with_lambda(lam);
            let barrier = construct_barrier(&spec_l, &known).map_err(|e| e.to_string())?;
            let m =
                continue_minimal(&spec_l, &barrier, &prev_min_v, opts).map_err(|e| e.to_string())?;
            let s = match &prev_sec_v {
                None => second_solution(&spec_l, &barrier, &m, opts)?,
                Some(v) => newton_q(&spec_l, &barrier, v, opts)
                    .map(|r| {
                        r.with_kind(SolutionKind::MountainPass)
                            .with_note("saddle_continuation")
                    })
                    .map_err(|e| e.to_string())?,
            };
            dists.push(m.u.sup_distance(&s.u));
            prev_min_v = m.v.clone();
            prev_sec_v = Some(s.v.clone());
            known = vec![u0.u.clone(), m.u.clone()];
        }
        Ok(dists)
    })();
    match merging {
        Ok(dists) => {
            let decreasing = dists.windows(2).all(|w| w[1] < w[0]);
            diagram.verdicts.push(Verdict::new(
                "fold_merging_distance_decreasing",
                decreasing,
                format!(
                    "sup distances between the two branches at λ/bracket-left ∈ \
                     {{0.80,0.85,0.90,0.95,0.99}}: {dists:?}"
                ),
            ));
        }
        Err(e) => diagram.verdicts.push(Verdict::new(
            "fold_merging_distance_decreasing",
            false,
            format!("branch continuation failed: {e}"),
        )),
    }
    // Certified emptiness past the fold.
    let last_seed = minimals.last().map(|m| m.v.clone()).unwrap_or(u0.v.clone());
    let past = admissible_solution_probe(
        &base,
        r,
        &[last_seed, u0.v.clone()],
        seed.wrapping_add(777),
        50,
        opts,
    );
    diagram.verdicts.push(Verdict::new(
        "no_admissible_solution_past_fold",
        past.is_none(),
        format!(
            "50-start probe at bracket-right λ = {r:.6}: {}",
            match &past {
                None => "no solution with nonnegative c⁺-weighted sign".to_string(),
                Some(rec) => format!("unexpected record with umin = {}", rec.u.min()),
            }
        ),
    ));
    // Grid robustness: halving the λ step must not move the minimal branch.
    let refined: Vec<f64> = {
        let mut g = Vec::new();
        for w in lams.windows(2) {
            g.push(w[0]);
            g.push(0.5 * (w[0] + w[1]));
        }
        g.push(*lams.last().expect("nonempty grid"));
        g
    };
    let fine = sweep(&base, &refined, opts, "th2_fold_refined", false)?;
    let mut robust = true;
    let mut worst = 0.0f64;
    for m in &minimals {
        match fine
            .records
            .iter()
            .find(|r| r.lambda == m.lambda && r.kind == SolutionKind::Minimal)
        {
            Some(f) => worst = worst.max(f.u.sup_distance(&m.u)),
            None => robust = false,
        }
    }
    diagram.verdicts.push(Verdict::new(
        "minimal_branch_grid_robust",
        robust && worst <= 1e-6,
        format!("worst sup change under λ-step halving: {worst:.3e} (tolerance 1e-6)"),
    ));
    Ok(diagram)
}

fn scenario_th3_sign(
    n: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<BranchDiagram, BranchError> {
    let base = unit_const_spec(n, -0.1)?;
    let mut diagram = sweep(&base, &[1.0, 5.0, 20.0], opts, "th3_sign", true)?;
    let spec0 = base.with_lambda(0.0);
    let barrier0 = construct_barrier(&spec0, &[])?;
    let u0 = newton_q(&spec0, &barrier0, &Field::zeros(spec0.mesh()), opts)?;
    let minimals: Vec<SolutionRecord> = diagram
        .records
        .iter()
        .filter(|r| r.kind == SolutionKind::Minimal)
        .cloned()
        .collect();
    let seconds: Vec<SolutionRecord> = diagram
        .records
        .iter()
        .filter(|r| matches!(r.kind, SolutionKind::MountainPass | SolutionKind::LocalMin))
        .cloned()
        .collect();
    diagram.verdicts.push(Verdict::new(
        "two_solutions_per_lambda",
        minimals.len() == 3 && seconds.len() == 3,
        format!(
            "{} minimal and {} second records over λ ∈ {{1, 5, 20}}",
            minimals.len(),
            seconds.len()
        ),
    ));
    let mut below_ok = minimals.len() == 3;
    let mut below_diag = String::new();
    for m in &minimals {
        let rel = check_ordering(&m.u, &u0.u);
        let _ = write!(below_diag, "λ={}: {} ", m.lambda, rel.as_str());
        if rel != OrderRelation::MuchLess {
            below_ok = false;
        }
    }
    diagram.verdicts.push(Verdict::new(
        "minimal_strictly_below_reference",
        below_ok,
        below_diag.trim_end().to_string(),
    ));
    let cplus_ref = base.cplus().clone();
    let mut pospart_ok = seconds.len() == 3;
    for s in &seconds {
        if !(0..s.u.len()).any(|i| cplus_ref[i] * s.u[i] > 1e-9) {
            pospart_ok = false;
        }
    }
    diagram.verdicts.push(Verdict::new(
        "second_solution_not_nonpositive",
        pospart_ok,
        "each second record has a strictly positive c⁺-weighted part somewhere".to_string(),
    ));
    let mut dec_ok = minimals.len() == 3;
    for w in minimals.windows(2) {
        if check_ordering(&w[1].u, &w[0].u) != OrderRelation::MuchLess {
            dec_ok = false;
        }
    }
    diagram.verdicts.push(Verdict::new(
        "minimal_branch_strictly_decreasing",
        dec_ok,
        "adjacent minimal records decrease strictly with λ".to_string(),
    ));
    // Filtered multistart probe: exactly one solution in the nonpositive class.
    let mut probe_ok = true;
    let mut probe_diag = String::new();
    for (j, m) in minimals.iter().enumerate() {
        let spec_l = base.with_lambda(m.lambda);
        let barrier = construct_barrier(&spec_l, &[u0.u.clone(), m.u.clone()])?;
        let mut starts = vec![m.v.clone()];
        if let Some(s) = seconds.get(j) {
            starts.push(s.v.clone());
        }
        for k in 0..20u64 {
            let amp = [0.2, 0.5, 1.0][(k % 3) as usize];
            starts.push(random_smooth_field(
                spec_l.mesh(),
                seed.wrapping_add(1000 * (j as u64 + 1) + k),
                amp,
            ));
        }
        let cplus = spec_l.cplus().clone();
        let probe = uniqueness_probe(
            &spec_l,
            &barrier,
            &starts,
            move |rec| (0..rec.u.len()).all(|i| cplus[i] * rec.u[i] <= 1e-9),
            opts,
        );
        let unique = probe.records.len() == 1
            && probe.records[0].u.sup_distance(&m.u) <= 1e-6;
        let _ = write!(
            probe_diag,
            "λ={}: {} nonpositive-class solutions ({} non-converged); ",
            m.lambda,
            probe.records.len(),
            probe.non_converged
        );
        if !unique {
            probe_ok = false;
        }
    }
    diagram.verdicts.push(Verdict::new(
        "filtered_probe_unique_nonpositive",
        probe_ok && minimals.len() == 3,
        probe_diag.trim_end().to_string(),
    ));
    let energy_ok = minimals
        .iter()
        .zip(&seconds)
        .all(|(m, s)| s.energy > m.energy + 1e-8);
    diagram.verdicts.push(Verdict::new(
        "saddle_energy_above_minimal",
        energy_ok && seconds.len() == 3,
        format!(
            "energy gaps: {:?}",
            minimals
                .iter()
                .zip(&seconds)
                .map(|(m, s)| s.energy - m.energy)
                .collect::<Vec<_>>()
        ),
    ));
    Ok(diagram)
}

fn scenario_coercive_iff(n: usize, opts: &SolveOptions) -> Result<BranchDiagram, BranchError> {
    let mesh = Mesh::line(0.0, 1.0, n)?;
    let cplus = Field::from_fn(&mesh, |_| 1.0);
    let mut diagram = BranchDiagram::new("coercive_iff");
    let pi2 = PI * PI;
    let make_spec = |s: f64| -> Result<ProblemSpec, BranchError> {
        let h = Field::from_fn(&mesh, move |_| s);
        Ok(ProblemSpec::new(
            &mesh,
            1.0,
            cplus.clone(),
            Field::zeros(&mesh),
            h,
            0.0,
        )?)
    };
    let solvable = |s: f64| -> Option<SolutionRecord> {
        let spec = make_spec(s).ok()?;
        let barrier = construct_barrier(&spec, &[]).ok()?;
        newton_q(&spec, &barrier, &Field::zeros(&mesh), opts)
            .ok()
            .map(|r| r.with_kind(SolutionKind::Minimal))
    };
    let ops_spec = make_spec(1.0)?;
    let d0 = Field::zeros(&mesh);
    let indicator = |s: f64| -> Result<f64, BranchError> {
        let h = Field::from_fn(&mesh, move |_| s);
        Ok(compute_md(ops_spec.ops(), &d0, &h, 1.0)?.value)
    };
    let svals = [2.0, 6.0, 9.0, 9.5, 10.5, 12.0];
    let mut agree = true;
    let mut line_err = 0.0f64;
    let mut table = String::new();
    for &s in &svals {
        let sol = solvable(s);
        let md = indicator(s)?;
        let line = 1.0 - s / pi2;
        line_err = line_err.max((md - line).abs());
        if (md > 0.0) != sol.is_some() {
            agree = false;
        }
        let _ = write!(
            table,
            "s={s}: indicator={md:.6}, line={line:.6}, solvable={}; ",
            sol.is_some()
        );
        if let Some(rec) = sol {
            diagram
                .records
                .push(rec.with_note(format!("forcing_level={s}")));
        }
    }
    diagram.verdicts.push(Verdict::new(
        "existence_iff_positive_indicator",
        agree,
        table.trim_end().to_string(),
    ));
    diagram.verdicts.push(Verdict::new(
        "indicator_matches_onset_line",
        line_err <= 1e-3,
        format!("max |indicator − (1 − s/π²)| = {line_err:.3e} over the s grid (tolerance 1e-3)"),
    ));
    // Bisect the solvability onset.
    let (mut lo, mut hi) = (5.0f64, 15.0f64);
    let ends_ok = solvable(lo).is_some() && solvable(hi).is_none();
    if ends_ok {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if solvable(mid).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let onset = 0.5 * (lo + hi);
    diagram.verdicts.push(Verdict::new(
        "onset_at_interval_eigenvalue",
        ends_ok && (onset - pi2).abs() <= 0.02 * pi2,
        format!("solvability onset at s = {onset:.6} vs π² = {pi2:.6} (tolerance 2%)"),
    ));
    let md_onset = indicator(onset)?;
    diagram.verdicts.push(Verdict::new(
        "indicator_vanishes_at_onset",
        md_onset.abs() <= 5e-3,
        format!("indicator at the onset: {md_onset:.3e} (tolerance 5e-3)"),
    ));
    Ok(diagram)
}

//! Nonlinear solvers for the truncated transformed problem: direct linear
//! solve, damped (semismooth) Newton, monotone lower/upper iteration with
//! an automatically sized shift, constant lower-barrier construction, the
//! Choi–McKenna mountain-pass algorithm, a ray search certifying that the
//! energy drops below any level along admissible directions, and a
//! multistart uniqueness probe.

use crate::linalg::{Banded, LinalgError};
use crate::mesh::{Field, Mesh, MeshError};
use crate::model::{
    energy, f_lambda, f_lambda_prime, inverse_cole_hopf, Barrier, BarrierSource, ModelError,
    OrderRelation, ProblemSpec,
};
use crate::tolerances::{TOL_DEDUP, TOL_LU, TOL_ZERO};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

/// Solver configuration; defaults carry the tolerances the scenario
/// verdicts are calibrated against.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Dual-norm residual target for Newton convergence.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Backtracking factor for damped steps.
    pub damping_factor: f64,
    /// Maximum number of backtracking reductions per step.
    pub max_damping_steps: usize,
    /// Number of fields along the mountain-pass path.
    pub mp_path_points: usize,
    /// Initial descent step for the path's max point.
    pub mp_descent_step: f64,
    /// Dual-norm residual at which the path max counts as a critical point.
    pub mp_tol: f64,
    pub max_mp_iters: usize,
    /// Iterate-norm cap; exceeding it flags a compactness failure.
    pub ps_guard: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            newton_tol: 1e-10,
            max_newton: 50,
            damping_factor: 0.5,
            max_damping_steps: 30,
            mp_path_points: 41,
            mp_descent_step: 0.1,
            mp_tol: 1e-6,
            max_mp_iters: 5000,
            ps_guard: 1e6,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), SolveError> {
        let positive = self.newton_tol > 0.0
            && self.max_newton > 0
            && self.damping_factor > 0.0
            && self.damping_factor < 1.0
            && self.max_damping_steps > 0
            && self.mp_descent_step > 0.0
            && self.mp_tol > 0.0
            && self.max_mp_iters > 0
            && self.ps_guard > 0.0;
        if !positive {
            return Err(SolveError::InvalidOptions(
                "all solver options must be positive (damping factor in (0,1))",
            ));
        }
        if self.mp_path_points < 3 {
            return Err(SolveError::InvalidOptions("mp_path_points must be ≥ 3"));
        }
        Ok(())
    }
}

/// What kind of critical point a record represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    Minimal,
    LocalMin,
    MountainPass,
    TrivialU0,
}

impl SolutionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolutionKind::Minimal => "minimal",
            SolutionKind::LocalMin => "local_min",
            SolutionKind::MountainPass => "mountain_pass",
            SolutionKind::TrivialU0 => "trivial_u0",
        }
    }
}

/// A converged solution of the truncated problem at one λ, in both the
/// physical variable u and the transformed variable v.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub lambda: f64,
    pub u: Field,
    pub v: Field,
    pub energy: f64,
    /// Dual-norm residual of the energy gradient at v.
    pub residual: f64,
    pub kind: SolutionKind,
    /// How u compares against the reference solution u₀ (set by the
    /// orchestration layer once a reference exists).
    pub ordering_vs_u0: Option<OrderRelation>,
    /// Free-form notes: sibling orderings, iteration counts, fallbacks.
    pub notes: Vec<String>,
}

impl SolutionRecord {
    pub fn with_kind(mut self, kind: SolutionKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Convergence trace of a mountain-pass run: the max-point energies and
/// norms per iteration, and whether every iterate stayed under the guard.
#[derive(Debug, Clone)]
pub struct PSDiagnostics {
    pub iterate_energies: Vec<f64>,
    pub iterate_norms: Vec<f64>,
    pub bounded: bool,
}

/// Which end of the order interval the monotone iteration starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    FromLower,
    FromUpper,
}

/// Outcome of a multistart probe: distinct converged solutions plus the
/// number of starts that failed to converge.
#[derive(Debug)]
pub struct UniquenessReport {
    pub records: Vec<SolutionRecord>,
    pub non_converged: usize,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(&'static str),
    #[error("linear solve residual {achieved:e} exceeds the target {required:e}")]
    ResidualTooLarge { achieved: f64, required: f64 },
    #[error("matrix is numerically singular (condition estimate {estimate:e})")]
    IllConditioned { estimate: f64 },
    #[error("Newton did not converge in {steps} steps (dual residual {residual:e})")]
    NoConvergence {
        steps: usize,
        residual: f64,
        last: Field,
    },
    #[error("converged iterate left the transform domain at node {idx} (v = {value})")]
    BarrierViolation { idx: usize, value: f64 },
    #[error("converged iterate sits on the frozen branch at node {idx} even after a restart")]
    TruncationPinned { idx: usize },
    #[error("field is not a lower solution: weighted residual {residual:e} at node {idx}")]
    NotLowerSolution { idx: usize, residual: f64 },
    #[error("field is not an upper solution: weighted residual {residual:e} at node {idx}")]
    NotUpperSolution { idx: usize, residual: f64 },
    #[error("lower exceeds upper at node {idx}")]
    OrderingViolated { idx: usize },
    #[error("monotone iteration lost monotonicity even after {doublings} shift doublings")]
    MonotonicityFailure { doublings: usize },
    #[error(
        "barrier construction failed: level {alpha} still not a valid lower bound after {attempts} margin halvings"
    )]
    BarrierConstruction { alpha: f64, attempts: usize },
    #[error(
        "mountain-pass geometry absent: path max {path_max} does not exceed endpoint max {endpoint_max}"
    )]
    GeometryAbsent { path_max: f64, endpoint_max: f64 },
    #[error("mountain-pass iterate norm {norm:e} exceeded the guard; compactness suspect")]
    UnboundedIterate { norm: f64, diagnostics: PSDiagnostics },
    #[error("energy never dropped below the target along the ray (t reached {t_max:e})")]
    BlowdownNotFound { t_max: f64 },
    #[error("invalid ray direction: {0}")]
    DirectionInvalid(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Direct banded solve with an iterative-refinement pass and a residual
/// certificate: ‖rhs − A x‖∞ must reach 10⁻¹² relative to the natural
/// problem scale max(‖rhs‖∞, ‖A‖∞·‖x‖∞).
pub fn linear_solve(a: &Banded, rhs: &Field) -> Result<Field, SolveError> {
    let lu = match a.lu() {
        Ok(lu) => lu,
        Err(LinalgError::Singular { .. }) => {
            return Err(SolveError::IllConditioned {
                estimate: f64::INFINITY,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let cond = lu.condition_estimate();
    if cond > crate::tolerances::COND_MAX {
        return Err(SolveError::IllConditioned { estimate: cond });
    }
    let b = rhs.as_slice();
    let mut x = lu.solve(b)?;
    let residual_inf = |x: &[f64]| {
        let ax = a.matvec(x);
        b.iter()
            .zip(&ax)
            .fold(0.0f64, |m, (bi, axi)| m.max((bi - axi).abs()))
    };
    let norm_b = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = |x: &[f64]| {
        let norm_x = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        norm_b.max(a.norm_inf() * norm_x)
    };
    let mut res = residual_inf(&x);
    if res > 1e-12 * scale(&x) {
        // One refinement pass recovers the backward-stable residual.
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
        let dx = lu.solve(&r)?;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        res = residual_inf(&x);
    }
    let required = 1e-12 * scale(&x);
    if res > required {
        return Err(SolveError::ResidualTooLarge {
            achieved: res,
            required,
        });
    }
    Ok(Field::from_values(rhs.mesh(), x)?)
}

/// Builds a solution record from a converged transformed iterate.
fn record_from_converged(
    spec: &ProblemSpec,
    barrier: &Barrier,
    v: Field,
    steps: usize,
) -> Result<SolutionRecord, SolveError> {
    let floor = -1.0 / spec.mu();
    for i in 0..v.len() {
        if v[i] <= floor {
            return Err(SolveError::BarrierViolation {
                idx: i,
                value: v[i],
            });
        }
    }
    let u = inverse_cole_hopf(&v, spec.mu())?;
    let rep = energy(spec, barrier, &v);
    Ok(SolutionRecord {
        lambda: spec.lambda(),
        u,
        v,
        energy: rep.value,
        residual: rep.residual_norm,
        kind: SolutionKind::LocalMin,
        ordering_vs_u0: None,
        notes: vec![format!("newton_steps={steps}")],
    })
}

/// Damped Newton on the stationarity system A v = f_{λ,α}(v).  The Jacobian
/// uses the exact one-sided derivative of the truncated right-hand side
/// (zero slope on the frozen branch); converged iterates are expected to sit
/// strictly above the barrier, and a single restart from max(v, α) is
/// attempted when they do not.
pub fn newton_q(
    spec: &ProblemSpec,
    barrier: &Barrier,
    v0: &Field,
    opts: &SolveOptions,
) -> Result<SolutionRecord, SolveError> {
    opts.validate()?;
    let mut start = v0.clone();
    for restart in 0..2 {
        let (v, steps) = newton_iterate(spec, barrier, &start, opts)?;
        let alpha = barrier.alpha();
        match (0..v.len()).find(|&i| v[i] <= alpha[i]) {
            None => return record_from_converged(spec, barrier, v, steps),
            Some(idx) => {
                if restart == 1 {
                    return Err(SolveError::TruncationPinned { idx });
                }
                // Re-truncation restart: clamp to the barrier and try once
                // more from there.
                let mut clamped = v;
                for i in 0..clamped.len() {
                    if clamped[i] < alpha[i] {
                        clamped[i] = alpha[i];
                    }
                }
                start = clamped;
            }
        }
    }
    unreachable!("restart loop returns or errors within two passes")
}

fn newton_iterate(
    spec: &ProblemSpec,
    barrier: &Barrier,
    v0: &Field,
    opts: &SolveOptions,
) -> Result<(Field, usize), SolveError> {
    let ops = spec.ops();
    let mut v = v0.clone();
    let mut rep = energy(spec, barrier, &v);
    for step in 0..opts.max_newton {
        if rep.residual_norm <= opts.newton_tol {
            return Ok((v, step));
        }
        // Unweighted residual and Jacobian: the quadrature weight is a
        // constant row scale and cancels from the Newton step.
        let f = f_lambda(spec, barrier, &v);
        let av = ops.apply_a(v.as_slice());
        let r: Vec<f64> = (0..v.len()).map(|i| av[i] - f[i]).collect();
        let fp = f_lambda_prime(spec, barrier, &v);
        let mut jac = ops.a().clone();
        let neg_fp: Vec<f64> = fp.as_slice().iter().map(|x| -x).collect();
        jac.add_diag(&neg_fp);
        let lu = match jac.lu() {
            Ok(lu) => lu,
            Err(LinalgError::Singular { .. }) => {
                return Err(SolveError::NoConvergence {
                    steps: step,
                    residual: rep.residual_norm,
                    last: v,
                });
            }
            Err(e) => return Err(e.into()),
        };
        let delta = lu.solve(&r)?;

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_damping_steps {
            let mut v_try = v.clone();
            for i in 0..v_try.len() {
                v_try[i] -= t * delta[i];
            }
            if v_try.as_slice().iter().all(|x| x.is_finite()) {
                let rep_try = energy(spec, barrier, &v_try);
                if rep_try.residual_norm < (1.0 - 1e-4 * t) * rep.residual_norm {
                    v = v_try;
                    rep = rep_try;
                    accepted = true;
                    break;
                }
            }
            t *= opts.damping_factor;
        }
        if !accepted {
            return Err(SolveError::NoConvergence {
                steps: step,
                residual: rep.residual_norm,
                last: v,
            });
        }
    }
    if rep.residual_norm <= opts.newton_tol {
        let steps = opts.max_newton;
        return Ok((v, steps));
    }
    Err(SolveError::NoConvergence {
        steps: opts.max_newton,
        residual: rep.residual_norm,
        last: v,
    })
}

/// Weighted residual q ∘ (A w − f_{λ,α}(w)) of a trial field.
fn weighted_residual(spec: &ProblemSpec, barrier: &Barrier, w: &Field) -> Vec<f64> {
    let ops = spec.ops();
    let f = f_lambda(spec, barrier, w);
    let aw = ops.apply_a(w.as_slice());
    let q = ops.q();
    (0..w.len()).map(|i| q[i] * (aw[i] - f[i])).collect()
}

/// True when `w` satisfies the lower-solution residual sign within tol_lu.
pub fn is_lower_solution(spec: &ProblemSpec, barrier: &Barrier, w: &Field) -> bool {
    check_side(spec, barrier, w, true).is_ok()
}

/// True when `w` satisfies the upper-solution residual sign within tol_lu.
pub fn is_upper_solution(spec: &ProblemSpec, barrier: &Barrier, w: &Field) -> bool {
    check_side(spec, barrier, w, false).is_ok()
}

/// Checks the one-sided residual sign that makes `w` a discrete lower
/// (sign = −1) or upper (sign = +1) solution, within tol_lu.
fn check_side(
    spec: &ProblemSpec,
    barrier: &Barrier,
    w: &Field,
    lower: bool,
) -> Result<(), SolveError> {
    let r = weighted_residual(spec, barrier, w);
    for (i, &ri) in r.iter().enumerate() {
        if lower && ri > TOL_LU {
            return Err(SolveError::NotLowerSolution {
                idx: i,
                residual: ri,
            });
        }
        if !lower && ri < -TOL_LU {
            return Err(SolveError::NotUpperSolution {
                idx: i,
                residual: ri,
            });
        }
    }
    Ok(())
}

/// Largest slope of the truncated right-hand side over the order interval,
/// evaluated at both ends (the slope is monotone in s at each node, so the
/// endpoint values bound it).
fn lipschitz_shift(spec: &ProblemSpec, barrier: &Barrier, lower: &Field, upper: &Field) -> f64 {
    let fl = f_lambda_prime(spec, barrier, lower);
    let fu = f_lambda_prime(spec, barrier, upper);
    let mut k: f64 = 0.0;
    for i in 0..lower.len() {
        k = k.max(fl[i].abs()).max(fu[i].abs());
    }
    k + 1.0
}

/// Monotone iteration core; returns the limit field, the per-step energy
/// values, and the step count.
fn monotone_core(
    spec: &ProblemSpec,
    barrier: &Barrier,
    lower: &Field,
    upper: &Field,
    direction: Direction,
    max_steps: usize,
) -> Result<(Field, Vec<f64>, usize), SolveError> {
    let ops = spec.ops();
    let k0 = lipschitz_shift(spec, barrier, lower, upper);
    'shift: for doubling in 0..=8u32 {
        let k = k0 * f64::powi(2.0, doubling as i32);
        let mut shifted = ops.a().clone();
        shifted.add_scalar_diag(k);
        let lu = shifted.lu()?;
        let mut w = match direction {
            Direction::FromLower => lower.clone(),
            Direction::FromUpper => upper.clone(),
        };
        let mut energies = vec![energy(spec, barrier, &w).value];
        for step in 1..=max_steps {
            let f = f_lambda(spec, barrier, &w);
            let rhs: Vec<f64> = (0..w.len()).map(|i| f[i] + k * w[i]).collect();
            let next = lu.solve(&rhs)?;
            let scale = 1.0 + w.sup_norm().max(upper.sup_norm()).max(lower.sup_norm());
            let slack = 1e-11 * scale;
            // Monotone from the chosen end, confined to the order interval.
            for i in 0..next.len() {
                let monotone_ok = match direction {
                    Direction::FromLower => next[i] >= w[i] - slack,
                    Direction::FromUpper => next[i] <= w[i] + slack,
                };
                let interval_ok = next[i] >= lower[i] - slack && next[i] <= upper[i] + slack;
                if !monotone_ok || !interval_ok {
                    if doubling == 8 {
                        return Err(SolveError::MonotonicityFailure { doublings: 8 });
                    }
                    continue 'shift;
                }
            }
            let change = w
                .as_slice()
                .iter()
                .zip(&next)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            w = Field::from_values(spec.mesh(), next)?;
            energies.push(energy(spec, barrier, &w).value);
            if change <= 1e-12 * scale {
                return Ok((w, energies, step));
            }
        }
        // Slow linear convergence: hand the near-limit to the Newton polish.
        return Ok((w, energies, max_steps));
    }
    unreachable!("shift loop returns or errors")
}

/// Monotone iteration between an ordered pair of lower/upper solutions;
/// converges to the extremal solution at the chosen end of the interval
/// and polishes it with Newton.  `FromLower` yields the minimal solution.
pub fn monotone_iteration(
    spec: &ProblemSpec,
    barrier: &Barrier,
    lower: &Field,
    upper: &Field,
    direction: Direction,
    opts: &SolveOptions,
) -> Result<SolutionRecord, SolveError> {
    opts.validate()?;
    if let Some(idx) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
        return Err(SolveError::OrderingViolated { idx });
    }
    check_side(spec, barrier, lower, true)?;
    check_side(spec, barrier, upper, false)?;
    let (w, _energies, steps) = monotone_core(spec, barrier, lower, upper, direction, 5000)?;
    let record = newton_q(spec, barrier, &w, opts)?;
    let kind_note = format!("monotone_steps={steps}");
    let record = match direction {
        Direction::FromLower => record.with_kind(SolutionKind::Minimal),
        Direction::FromUpper => record
            .with_kind(SolutionKind::LocalMin)
            .with_note("maximal_in_interval"),
    };
    Ok(record.with_note(kind_note))
}

/// Builds a constant truncation barrier that is a valid discrete lower
/// bound: α = (1/μ)(e^{μ(m−1)} − 1) with m the worst of the candidate
/// minima and a coercive companion estimate, then validated by the
/// lower-solution residual sign; the margin above −1/μ is halved until
/// validation passes.
pub fn construct_barrier(
    spec: &ProblemSpec,
    candidates: &[Field],
) -> Result<Barrier, SolveError> {
    let ops = spec.ops();
    let mu = spec.mu();
    let m1 = candidates
        .iter()
        .map(|c| c.min())
        .fold(0.0f64, |m, v| m.min(v));
    // Companion estimate mirroring the auxiliary coercive problem: a lower
    // bound for how deep solutions can sink given h⁻ and the reaction term.
    let lambda = spec.lambda();
    let cplus = spec.cplus();
    let h = spec.h();
    let rhs: Vec<f64> = (0..ops.n())
        .map(|i| -(-h[i]).max(0.0) - lambda * cplus[i] * m1 - 1.0)
        .collect();
    let mut companion = ops.a().clone();
    let cm: Vec<f64> = (0..ops.n()).map(|i| spec.cminus()[i]).collect();
    companion.add_diag(&cm);
    let w = companion.lu()?.solve(&rhs)?;
    let w_min = w.iter().fold(0.0f64, |m, &v| m.min(v));
    let m = m1.min(w_min);

    let floor = -1.0 / mu;
    // Representability guard: keep the level a few ulps above the floor so
    // the margin survives the addition in f64.
    let margin_floor = 1e-14 / mu;
    let mut margin = (((mu * (m - 1.0)).exp()) / mu).max(margin_floor);
    const MAX_HALVINGS: usize = 40;
    for _attempt in 0..=MAX_HALVINGS {
        let alpha = floor + margin;
        let barrier = Barrier::constant(spec.mesh(), mu, alpha, BarrierSource::Constructed)?;
        let alpha_field = Field::from_fn(spec.mesh(), |_| alpha);
        if check_side(spec, &barrier, &alpha_field, true).is_ok() {
            return Ok(barrier);
        }
        margin = (margin * 0.5).max(margin_floor);
    }
    Err(SolveError::BarrierConstruction {
        alpha: floor + margin,
        attempts: MAX_HALVINGS,
    })
}

/// Mountain-pass search between two endpoints whose energies lie below the
/// ridge separating them: a discretized path descends its maximum-energy
/// point along the Riesz gradient direction until that point is nearly
/// critical, then Newton polishes it.
pub fn mountain_pass(
    spec: &ProblemSpec,
    barrier: &Barrier,
    e1: &Field,
    e2: &Field,
    opts: &SolveOptions,
) -> Result<(SolutionRecord, PSDiagnostics), SolveError> {
    opts.validate()?;
    let ops = spec.ops();
    let cell = spec.mesh().cell_measure();
    let p = opts.mp_path_points;
    let n = e1.len();

    let mut path: Vec<Field> = (0..p)
        .map(|j| {
            let t = j as f64 / (p - 1) as f64;
            let mut z = e1.clone();
            for i in 0..n {
                z[i] = (1.0 - t) * e1[i] + t * e2[i];
            }
            z
        })
        .collect();
    let mut values: Vec<f64> = path
        .iter()
        .map(|z| energy(spec, barrier, z).value)
        .collect();

    let endpoint_max = values[0].max(values[p - 1]);
    let path_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if path_max <= endpoint_max + 1e-12 {
        return Err(SolveError::GeometryAbsent {
            path_max,
            endpoint_max,
        });
    }

    let mut diag = PSDiagnostics {
        iterate_energies: Vec::new(),
        iterate_norms: Vec::new(),
        bounded: true,
    };
    let mut candidate: Option<Field> = None;
    let mut best_residual = f64::INFINITY;
    let mut since_best = 0usize;
    for _iter in 0..opts.max_mp_iters {
        // Highest-energy point; the endpoints are fixed.
        let mut k = 1;
        for j in 1..p - 1 {
            if values[j] > values[k] {
                k = j;
            }
        }
        if values[k] <= values[0].max(values[p - 1]) + 1e-12 {
            return Err(SolveError::GeometryAbsent {
                path_max: values[k],
                endpoint_max: values[0].max(values[p - 1]),
            });
        }
        let rep = energy(spec, barrier, &path[k]);
        diag.iterate_energies.push(rep.value);
        let norm = ops.h1_norm_slice(path[k].as_slice());
        diag.iterate_norms.push(norm);
        if norm > opts.ps_guard {
            diag.bounded = false;
            return Err(SolveError::UnboundedIterate {
                norm,
                diagnostics: diag,
            });
        }
        if rep.residual_norm <= opts.mp_tol {
            candidate = Some(path[k].clone());
            break;
        }
        // The path descent converges only linearly once it has localized the
        // saddle; when the max point's residual stops improving, hand the
        // candidate to the Newton polish, which certifies criticality.
        if rep.residual_norm < 0.95 * best_residual {
            best_residual = rep.residual_norm;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 100 {
                candidate = Some(path[k].clone());
                break;
            }
        }

        // Backtracking descent along the Riesz representative of −gradient.
        let dir = ops.riesz(rep.gradient.as_slice());
        let slope = rep.residual_norm * rep.residual_norm / cell;
        let mut sigma = opts.mp_descent_step;
        let mut moved = false;
        for _ in 0..=opts.max_damping_steps {
            let mut z_try = path[k].clone();
            for i in 0..n {
                z_try[i] -= sigma * dir[i];
            }
            let val_try = energy(spec, barrier, &z_try).value;
            if val_try <= rep.value - 1e-4 * sigma * slope {
                path[k] = z_try;
                values[k] = val_try;
                moved = true;
                break;
            }
            sigma *= opts.damping_factor;
        }
        if !moved {
            // Descent stalled: the max point is numerically critical at this
            // resolution; hand it to the Newton polish.
            candidate = Some(path[k].clone());
            break;
        }
        // Local re-interpolation keeps neighboring points spread along the
        // deformed path.
        if k >= 2 {
            let mid: Vec<f64> = (0..n).map(|i| 0.5 * (path[k - 2][i] + path[k][i])).collect();
            path[k - 1] = Field::from_values(spec.mesh(), mid)?;
            values[k - 1] = energy(spec, barrier, &path[k - 1]).value;
        }
        if k + 2 < p {
            let mid: Vec<f64> = (0..n).map(|i| 0.5 * (path[k][i] + path[k + 2][i])).collect();
            path[k + 1] = Field::from_values(spec.mesh(), mid)?;
            values[k + 1] = energy(spec, barrier, &path[k + 1]).value;
        }
    }

    let candidate = match candidate {
        Some(c) => c,
        None => {
            // Iteration budget exhausted before the max point became
            // critical.
            let k = (1..p - 1).fold(1, |best, j| if values[j] > values[best] { j } else { best });
            let rep = energy(spec, barrier, &path[k]);
            return Err(SolveError::NoConvergence {
                steps: opts.max_mp_iters,
                residual: rep.residual_norm,
                last: path[k].clone(),
            });
        }
    };
    let record = newton_q(spec, barrier, &candidate, opts)?.with_kind(SolutionKind::MountainPass);
    Ok((record, diag))
}

/// Doubles t until the energy of t·v falls at least one unit below the
/// energy of 0, certifying the unbounded descent along the admissible ray;
/// the direction must have v ⪈ 0 with c₊v ⪈ 0 and c₋v ≡ 0.
pub fn ray_blowdown(spec: &ProblemSpec, barrier: &Barrier, v: &Field) -> Result<f64, SolveError> {
    let n = v.len();
    if (0..n).any(|i| v[i] < 0.0) {
        return Err(SolveError::DirectionInvalid("v must be nonnegative"));
    }
    if (0..n).all(|i| v[i] <= TOL_ZERO) {
        return Err(SolveError::DirectionInvalid("v must not vanish identically"));
    }
    let cplus = spec.cplus();
    if (0..n).all(|i| cplus[i] * v[i] <= TOL_ZERO) {
        return Err(SolveError::DirectionInvalid(
            "c₊·v must be nontrivial along the ray",
        ));
    }
    let cminus = spec.cminus();
    if (0..n).any(|i| (cminus[i] * v[i]).abs() > TOL_ZERO) {
        return Err(SolveError::DirectionInvalid("c₋·v must vanish nodewise"));
    }
    let zero = Field::zeros(spec.mesh());
    let base = energy(spec, barrier, &zero).value;
    let mut t = 1.0f64;
    let t_cap = f64::powi(2.0, 60);
    while t <= t_cap {
        let val = energy(spec, barrier, &v.scaled(t)).value;
        if val <= base - 1.0 {
            return Ok(t);
        }
        t *= 2.0;
    }
    Err(SolveError::BlowdownNotFound { t_max: t_cap })
}

/// Runs Newton from every start, deduplicates converged solutions by the
/// sup distance of u, and applies the filter; non-convergent starts are
/// dropped and counted.
pub fn uniqueness_probe(
    spec: &ProblemSpec,
    barrier: &Barrier,
    starts: &[Field],
    filter: impl Fn(&SolutionRecord) -> bool,
    opts: &SolveOptions,
) -> UniquenessReport {
    let mut records: Vec<SolutionRecord> = Vec::new();
    let mut non_converged = 0usize;
    for start in starts {
        match newton_q(spec, barrier, start, opts) {
            Ok(rec) => {
                let duplicate = records
                    .iter()
                    .any(|r| r.u.sup_distance(&rec.u) <= TOL_DEDUP);
                if !duplicate {
                    records.push(rec);
                }
            }
            Err(_) => non_converged += 1,
        }
    }
    records.retain(|r| filter(r));
    UniquenessReport {
        records,
        non_converged,
    }
}

/// Deterministic smooth random field: a low-frequency sine series with
/// seeded coefficients, vanishing on the boundary.
pub fn random_smooth_field(mesh: &Arc<Mesh>, seed: u64, amplitude: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mesh.dim() {
        1 => {
            let (a, b) = mesh.bounds(0);
            let len = b - a;
            let coeffs: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Field::from_fn(mesh, |p| {
                let xi = (p[0] - a) / len;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let kk = (k + 1) as f64;
                        amplitude * c / kk * (kk * std::f64::consts::PI * xi).sin()
                    })
                    .sum()
            })
        }
        _ => {
            let (ax, bx) = mesh.bounds(0);
            let (ay, by) = mesh.bounds(1);
            let coeffs: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Field::from_fn(mesh, |p| {
                let xi = (p[0] - ax) / (bx - ax);
                let eta = (p[1] - ay) / (by - ay);
                let mut acc = 0.0;
                for kx in 0..3 {
                    for ky in 0..3 {
                        let c = coeffs[kx * 3 + ky];
                        let fx = ((kx + 1) as f64 * std::f64::consts::PI * xi).sin();
                        let fy = ((ky + 1) as f64 * std::f64::consts::PI * eta).sin();
                        acc += amplitude * c / ((kx + ky + 1) as f64) * fx * fy;
                    }
                }
                acc
            })
        }
    }
}

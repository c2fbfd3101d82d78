//! Problem data and the formula layer: the untransformed residual, the
//! exponential substitution linking the quadratic-gradient problem to a
//! semilinear one, the nonlinearity g and its antiderivative G, the
//! truncated right-hand side, the energy functional with its exact
//! discrete gradient, and the discrete strict ordering (≪).
//!
//! The continuous problem is
//!
//! ```text
//! -Δu = (λ c₊(x) - c₋(x)) u + μ |∇u|² + h(x),   u = 0 on ∂Ω,
//! ```
//!
//! with μ > 0, c₊ ⪈ 0, c₋ ≥ 0, c₊c₋ ≡ 0.  Substituting
//! v = (e^{μu} - 1)/μ turns it into -Δv = c_λ g(v) + (1+μv) h with
//! g(s) = (1/μ)(1+μs)ln(1+μs) above s = -1/μ and 0 below.  Solvers work
//! on a truncated version: below a barrier level α the right-hand side is
//! frozen at its value at α, which keeps the functional well defined on
//! all of the discrete space while leaving solutions above α untouched.

use crate::mesh::{DiscreteOperators, Field, Mesh, MeshError, assemble_operators};
use crate::tolerances::{TOL_HOPF, TOL_ORD_REL, TOL_ZERO};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("μ must be a positive finite real, got {0}")]
    InvalidMu(f64),
    #[error("coefficient {name} must be nonnegative; node {idx} has value {value}")]
    CoefficientSign {
        name: &'static str,
        idx: usize,
        value: f64,
    },
    #[error("c₊ and c₋ overlap at node {idx}: product {product:e} exceeds the zero tolerance")]
    CoefficientOverlap { idx: usize, product: f64 },
    #[error("c₊ vanishes identically; a nontrivial nonnegative weight is required")]
    CplusVanishes,
    #[error("value {value} at node {idx} is outside the transform domain (needs 1+μv > 0)")]
    TransformDomain { idx: usize, value: f64 },
    #[error("transform produced a non-finite value at node {idx}")]
    TransformOverflow { idx: usize },
    #[error("barrier level {value} at node {idx} is not above the floor {floor}")]
    BarrierBelowFloor { idx: usize, value: f64, floor: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Validated problem data: μ, the split weights c₊ and c₋, the source h,
/// and the current parameter λ.  Holds the assembled discrete operators.
#[derive(Clone)]
pub struct ProblemSpec {
    ops: Arc<DiscreteOperators>,
    mu: f64,
    cplus: Field,
    cminus: Field,
    h: Field,
    lambda: f64,
}

impl ProblemSpec {
    /// Validates the sign and splitting assumptions: μ > 0, c₊ ≥ 0 with
    /// c₊ ≢ 0, c₋ ≥ 0, and c₊·c₋ = 0 nodewise within `TOL_ZERO`.
    pub fn new(
        mesh: &Arc<Mesh>,
        mu: f64,
        cplus: Field,
        cminus: Field,
        h: Field,
        lambda: f64,
    ) -> Result<ProblemSpec, ModelError> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(ModelError::InvalidMu(mu));
        }
        for f in [&cplus, &cminus, &h] {
            if !f.mesh().compatible(mesh) {
                return Err(MeshError::MeshMismatch.into());
            }
        }
        let mut cplus_nontrivial = false;
        for i in 0..mesh.interior_count() {
            if cplus[i] < 0.0 {
                return Err(ModelError::CoefficientSign {
                    name: "c₊",
                    idx: i,
                    value: cplus[i],
                });
            }
            if cminus[i] < 0.0 {
                return Err(ModelError::CoefficientSign {
                    name: "c₋",
                    idx: i,
                    value: cminus[i],
                });
            }
            let product = cplus[i] * cminus[i];
            if product.abs() > TOL_ZERO {
                return Err(ModelError::CoefficientOverlap { idx: i, product });
            }
            if cplus[i] > TOL_ZERO {
                cplus_nontrivial = true;
            }
        }
        if !cplus_nontrivial {
            return Err(ModelError::CplusVanishes);
        }
        Ok(ProblemSpec {
            ops: Arc::new(assemble_operators(mesh)),
            mu,
            cplus,
            cminus,
            h,
            lambda,
        })
    }

    /// Same problem at a different λ; shares the assembled operators.
    pub fn with_lambda(&self, lambda: f64) -> ProblemSpec {
        ProblemSpec {
            ops: Arc::clone(&self.ops),
            mu: self.mu,
            cplus: self.cplus.clone(),
            cminus: self.cminus.clone(),
            h: self.h.clone(),
            lambda,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.ops.mesh()
    }

    pub fn ops(&self) -> &DiscreteOperators {
        &self.ops
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cplus(&self) -> &Field {
        &self.cplus
    }

    pub fn cminus(&self) -> &Field {
        &self.cminus
    }

    pub fn h(&self) -> &Field {
        &self.h
    }

    /// The λ-dependent weight c_λ = λ c₊ − c₋ as a field.
    pub fn c_lambda(&self) -> Field {
        let lambda = self.lambda;
        let cm = &self.cminus;
        let mut out = self.cplus.clone();
        for i in 0..out.len() {
            out[i] = lambda * out[i] - cm[i];
        }
        out
    }
}

/// How a truncation barrier was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierSource {
    FromSolution,
    Constructed,
    ConstantFallback,
}

/// Truncation level α (in the transformed variable), guaranteed to stay a
/// positive margin above the transform floor −1/μ.
#[derive(Debug, Clone)]
pub struct Barrier {
    alpha: Field,
    source: BarrierSource,
    margin: f64,
}

impl Barrier {
    pub fn new(alpha: Field, mu: f64, source: BarrierSource) -> Result<Barrier, ModelError> {
        let floor = -1.0 / mu;
        let mut margin = f64::INFINITY;
        for i in 0..alpha.len() {
            let m = alpha[i] - floor;
            if m <= 0.0 {
                return Err(ModelError::BarrierBelowFloor {
                    idx: i,
                    value: alpha[i],
                    floor,
                });
            }
            margin = margin.min(m);
        }
        Ok(Barrier {
            alpha,
            source,
            margin,
        })
    }

    pub fn constant(
        mesh: &Arc<Mesh>,
        mu: f64,
        level: f64,
        source: BarrierSource,
    ) -> Result<Barrier, ModelError> {
        Barrier::new(Field::from_fn(mesh, |_| level), mu, source)
    }

    pub fn alpha(&self) -> &Field {
        &self.alpha
    }

    pub fn source(&self) -> BarrierSource {
        self.source
    }

    /// min over nodes of (α + 1/μ); positive by construction.
    pub fn margin(&self) -> f64 {
        self.margin
    }
}

/// g(s) = (1/μ)(1+μs)ln(1+μs) for s > −1/μ, extended by 0 below.
pub fn g_fun(s: f64, mu: f64) -> f64 {
    let t = 1.0 + mu * s;
    if t <= 0.0 {
        0.0
    } else {
        t * t.ln() / mu
    }
}

/// One-sided derivative of g: ln(1+μs) + 1 above the floor, 0 below.
pub fn g_prime(s: f64, mu: f64) -> f64 {
    let t = 1.0 + mu * s;
    if t <= 0.0 {
        0.0
    } else {
        t.ln() + 1.0
    }
}

/// Antiderivative G(s) = ∫₀ˢ g.  Closed form above the floor,
/// constant 1/(4μ²) below it (g vanishes there), C¹ at the junction.
pub fn big_g(s: f64, mu: f64) -> f64 {
    let t = 1.0 + mu * s;
    if t <= 0.0 {
        1.0 / (4.0 * mu * mu)
    } else {
        // ((1+μs)²(2ln(1+μs) − 1) + 1) / (4μ²); the t → 0 limit is 1/(4μ²).
        (t * t * (2.0 * t.ln() - 1.0) + 1.0) / (4.0 * mu * mu)
    }
}

/// Forward substitution u ↦ v = (e^{μu} − 1)/μ.
pub fn cole_hopf(u: &Field, mu: f64) -> Result<Field, ModelError> {
    let mut values = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let v = ((mu * u[i]).exp() - 1.0) / mu;
        if !v.is_finite() {
            return Err(ModelError::TransformOverflow { idx: i });
        }
        values.push(v);
    }
    Ok(Field::from_values(u.mesh(), values).expect("checked finite"))
}

/// Inverse substitution v ↦ u = ln(1+μv)/μ; requires 1+μv > 0 nodewise.
pub fn inverse_cole_hopf(v: &Field, mu: f64) -> Result<Field, ModelError> {
    let mut values = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let t = 1.0 + mu * v[i];
        if t <= 0.0 {
            return Err(ModelError::TransformDomain {
                idx: i,
                value: v[i],
            });
        }
        values.push(t.ln() / mu);
    }
    Ok(Field::from_values(v.mesh(), values).expect("ln of positive is finite"))
}

/// Truncated right-hand side f_{λ,α}(x, s): the semilinear nonlinearity
/// c_λ g(s) + (1+μs) h above the barrier, frozen at its α-value below.
pub fn f_lambda(spec: &ProblemSpec, barrier: &Barrier, v: &Field) -> Field {
    let clam = spec.c_lambda();
    let mu = spec.mu();
    let h = spec.h();
    let alpha = barrier.alpha();
    Field::from_values(
        spec.mesh(),
        (0..v.len())
            .map(|i| {
                let s = if v[i] >= alpha[i] { v[i] } else { alpha[i] };
                clam[i] * g_fun(s, mu) + (1.0 + mu * s) * h[i]
            })
            .collect(),
    )
    .expect("finite nonlinearity values")
}

/// Nodewise s-derivative of the truncated right-hand side: 0 on the frozen
/// branch, c_λ g′(s) + μh above the barrier.
pub fn f_lambda_prime(spec: &ProblemSpec, barrier: &Barrier, v: &Field) -> Field {
    let clam = spec.c_lambda();
    let mu = spec.mu();
    let h = spec.h();
    let alpha = barrier.alpha();
    Field::from_values(
        spec.mesh(),
        (0..v.len())
            .map(|i| {
                if v[i] >= alpha[i] {
                    clam[i] * g_prime(v[i], mu) + mu * h[i]
                } else {
                    0.0
                }
            })
            .collect(),
    )
    .expect("finite derivative values")
}

/// Antiderivative F_{λ,α}(x, s) of the truncated right-hand side:
/// c_λ G(s) + (1/2μ)(1+μs)² h above the barrier, continued affinely (in s)
/// below it with slope f_{λ,α}(x, α).
fn f_antiderivative(spec: &ProblemSpec, barrier: &Barrier, i: usize, s: f64) -> f64 {
    let mu = spec.mu();
    let clam_i = spec.lambda() * spec.cplus()[i] - spec.cminus()[i];
    let h_i = spec.h()[i];
    let alpha_i = barrier.alpha()[i];
    let upper = |s: f64| {
        let t = 1.0 + mu * s;
        clam_i * big_g(s, mu) + t * t * h_i / (2.0 * mu)
    };
    if s >= alpha_i {
        upper(s)
    } else {
        let slope = clam_i * g_fun(alpha_i, mu) + (1.0 + mu * alpha_i) * h_i;
        upper(alpha_i) + slope * (s - alpha_i)
    }
}

/// Energy value, exact discrete gradient, and its dual residual norm.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    /// I_{λ,α}(v) = ½‖v‖² − ∫ F_{λ,α}(x, v).
    pub value: f64,
    /// Quadrature-weighted weak residual q ∘ (A v − f_{λ,α}(v)); this is the
    /// exact derivative of `value` with respect to the node values.
    pub gradient: Field,
    /// sqrt(gradientᵀ A⁻¹ gradient): dual-norm surrogate for the size of
    /// the derivative, the quantity Newton drives to zero.
    pub residual_norm: f64,
}

/// Evaluates the truncated energy functional at v.
pub fn energy(spec: &ProblemSpec, barrier: &Barrier, v: &Field) -> EnergyReport {
    let ops = spec.ops();
    let half_norm2 = {
        let n = ops.h1_norm_slice(v.as_slice());
        0.5 * n * n
    };
    let big_f: Vec<f64> = (0..v.len())
        .map(|i| f_antiderivative(spec, barrier, i, v[i]))
        .collect();
    let value = half_norm2 - ops.integrate_slice(&big_f);

    let f = f_lambda(spec, barrier, v);
    let av = ops.apply_a(v.as_slice());
    let q = ops.q();
    let grad: Vec<f64> = (0..v.len()).map(|i| q[i] * (av[i] - f[i])).collect();
    let residual_norm = dual_residual_norm(ops, &grad);
    EnergyReport {
        value,
        gradient: Field::from_values(spec.mesh(), grad).expect("finite gradient"),
        residual_norm,
    }
}

/// sqrt(gᵀ A⁻¹ g) for a quadrature-weighted residual vector g: the norm in
/// which stationarity is measured throughout the solvers.
pub fn dual_residual_norm(ops: &DiscreteOperators, g: &[f64]) -> f64 {
    let ag = ops.solve_a(g);
    let s: f64 = g.iter().zip(&ag).map(|(a, b)| a * b).sum();
    s.max(0.0).sqrt()
}

/// Discrete residual of the untransformed problem:
/// q ∘ (A u − c_λ u − μ|∇u|² − h), with the centered-difference squared
/// gradient.  Zero (to discretization error) at solutions of the original
/// quadratic-gradient problem.
pub fn residual_p(spec: &ProblemSpec, u: &Field) -> Field {
    let ops = spec.ops();
    let au = ops.apply_a(u.as_slice());
    let gsq = ops.grad_squared(u.as_slice());
    let clam = spec.c_lambda();
    let h = spec.h();
    let mu = spec.mu();
    let q = ops.q();
    Field::from_values(
        spec.mesh(),
        (0..u.len())
            .map(|i| q[i] * (au[i] - clam[i] * u[i] - mu * gsq[i] - h[i]))
            .collect(),
    )
    .expect("finite residual")
}

/// Outcome of comparing u against w from below.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderRelation {
    /// u exceeds w somewhere (beyond tolerance).
    Incomparable,
    /// u ≤ w with contact (equality within tolerance somewhere).
    Leq,
    /// u < w at every interior node, but the boundary slope margin fails.
    StrictlyLess,
    /// u < w at every node and the inward difference quotient of w−u at
    /// every boundary-adjacent node is strictly positive: the discrete ≪.
    MuchLess,
}

impl OrderRelation {
    /// Stable lowercase label for reports and serialized output.
    pub fn as_str(&self) -> &'static str {
        match self {
            OrderRelation::Incomparable => "incomparable",
            OrderRelation::Leq => "leq",
            OrderRelation::StrictlyLess => "strictly_less",
            OrderRelation::MuchLess => "much_less",
        }
    }
}

/// Classifies the ordering of u against w (same mesh required).
///
/// Strictness tolerance is relative: nodes count as contact when
/// |w−u| ≤ TOL_ORD_REL·‖w−u‖∞.  The much-less verdict additionally asks
/// the one-sided normal difference quotient of (w−u) into the domain to
/// exceed TOL_HOPF at every boundary-adjacent node (both fields vanish on
/// the boundary, so the quotient is (w−u)/spacing there).
pub fn check_ordering(u: &Field, w: &Field) -> OrderRelation {
    assert!(
        u.mesh().compatible(w.mesh()),
        "ordering requires fields on the same mesh"
    );
    let n = u.len();
    let mesh = u.mesh();
    let d: Vec<f64> = (0..n).map(|i| w[i] - u[i]).collect();
    let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = TOL_ORD_REL * dmax;
    if d.iter().any(|&v| v < -tol) {
        return OrderRelation::Incomparable;
    }
    if d.iter().any(|&v| v <= tol) {
        return OrderRelation::Leq;
    }
    // All strictly positive; check the boundary slope (Hopf) margin.
    let hopf_ok = match mesh.dim() {
        1 => {
            let h = mesh.spacing(0);
            d[0] / h > TOL_HOPF && d[n - 1] / h > TOL_HOPF
        }
        _ => {
            let (nx, ny) = (mesh.count(0), mesh.count(1));
            let (hx, hy) = (mesh.spacing(0), mesh.spacing(1));
            let mut ok = true;
            for iy in 0..ny {
                for ix in 0..nx {
                    let i = iy * nx + ix;
                    if ix == 0 || ix + 1 == nx {
                        ok &= d[i] / hx > TOL_HOPF;
                    }
                    if iy == 0 || iy + 1 == ny {
                        ok &= d[i] / hy > TOL_HOPF;
                    }
                }
            }
            ok
        }
    };
    if hopf_ok {
        OrderRelation::MuchLess
    } else {
        OrderRelation::StrictlyLess
    }
}

//! Central numeric tolerances.
//!
//! Every threshold that decides between "equal", "positive" and "failed" lives
//! here so the trade-offs stay visible in one place.  The values are chosen
//! for double precision on grids up to a few thousand nodes; loosening one of
//! them without re-running the acceptance suite is a bug farm.

/// Nodewise equality threshold for coefficient fields: a node belongs to the
/// zero set of d when |d_i| falls at or below this.  Also used for the
/// splitting check c⁺·c⁻ = 0.
pub const TOL_ZERO: f64 = 1e-12;

/// Sign tolerance when validating discrete lower/upper solutions: a lower
/// solution may violate `A w - f(w) <= 0` nodewise by at most this much.
pub const TOL_LU: f64 = 1e-8;

/// Conditioning estimate above which a linear solve is reported as
/// "no solution like" instead of returning a meaningless vector.
pub const COND_MAX: f64 = 1e12;

/// Relative factor for the interior strict-ordering test: two fields are
/// strictly ordered at a node when they differ by more than
/// `TOL_ORD_REL * ||w - u||_inf` there.
pub const TOL_ORD_REL: f64 = 1e-9;

/// Threshold on the inward boundary difference quotient in the discrete
/// Hopf test that upgrades strict ordering to strong (`<<`) ordering.
pub const TOL_HOPF: f64 = 1e-9;

/// Dual-norm residual below which an eigenpair is accepted.
pub const TOL_EIG: f64 = 1e-8;

/// Allowed upward violation of concavity in the sampled μ₁(γ) curve,
/// relative to the curve's magnitude.
pub const TOL_CONCAVITY: f64 = 1e-6;

/// Sup-distance under which two converged solutions are considered the same
/// when deduplicating multistart results.
pub const TOL_DEDUP: f64 = 1e-6;

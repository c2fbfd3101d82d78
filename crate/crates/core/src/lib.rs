//! Numerical explorer for the solution landscape of elliptic boundary value
//! problems of the form
//!
//! ```text
//!     -Δu = (λ c⁺(x) - c⁻(x)) u + μ |∇u|² + h(x),   u = 0 on ∂Ω,
//! ```
//!
//! on intervals and rectangles, where the gradient term has the critical
//! quadratic growth and the zero-order weight changes sign with λ.
//!
//! The crate is organised around the exponential change of unknown
//! v = (e^{μu} - 1)/μ, which removes the gradient term and turns the equation
//! into `-Δv = c_λ g(v) + (1 + μv) h` with `g(s) = (1+μs)ln(1+μs)/μ`.  All
//! solvers operate on the transformed problem, truncated below a computed
//! lower barrier, and map solutions back.
//!
//! Modules:
//! - [`mesh`]: uniform Dirichlet grids, stiffness/difference operators, quadrature;
//! - [`expr`]: a small arithmetic expression language for coefficient fields;
//! - [`model`]: the transformed nonlinearity, energy functional, residuals and
//!   the strong ordering check;
//! - [`spectral`]: the coercivity indicator m_d and the principal eigenvalue
//!   γ₁ of the linearised operator with indefinite weight;
//! - [`solve`]: damped Newton, monotone iteration between ordered bounds,
//!   barrier construction, a mountain-pass saddle search and multistart probes;
//! - [`branch`]: λ-sweeps, fold location and the shipped verification scenarios.

pub mod branch;
pub mod expr;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod solve;
pub mod spectral;
pub mod tolerances;

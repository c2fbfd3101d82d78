//! Uniform-grid discretization of an interval or axis-aligned rectangle:
//! interior-node indexing, the second-order finite-difference negative
//! Laplacian with homogeneous Dirichlet elimination, centered first
//! differences, and lumped (rectangle-rule) quadrature.
//!
//! Conventions
//! - Interior nodes only; the zero boundary value is substituted wherever a
//!   stencil reaches outside the grid.
//! - `A` is the pointwise stencil divided by spacing² (so its smallest
//!   eigenvalue approximates the smallest Dirichlet eigenvalue of −Δ).
//! - Quadrature weight per node is the full cell measure (product of
//!   spacings); boundary half-cells are ignored, which is consistent for
//!   functions vanishing on the boundary.
//! - 2D nodes are numbered x-fastest: linear index = iy·nx + ix.

use crate::linalg::{Banded, BandedLu};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("field belongs to a different mesh")]
    MeshMismatch,
    #[error("field length {got} does not match interior node count {want}")]
    Length { got: usize, want: usize },
    #[error("non-finite value at node {idx}")]
    NonFinite { idx: usize },
}

/// Uniform tensor grid on an interval (dim 1) or rectangle (dim 2).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    bounds: Vec<(f64, f64)>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
}

impl Mesh {
    pub fn line(a: f64, b: f64, n: usize) -> Result<Arc<Mesh>, MeshError> {
        build_mesh(1, &[(a, b)], &[n])
    }

    pub fn rectangle(
        xb: (f64, f64),
        yb: (f64, f64),
        nx: usize,
        ny: usize,
    ) -> Result<Arc<Mesh>, MeshError> {
        build_mesh(2, &[xb, yb], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        self.bounds[axis]
    }

    /// Interior node count along one axis.
    pub fn count(&self, axis: usize) -> usize {
        self.counts[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn interior_count(&self) -> usize {
        self.counts.iter().product()
    }

    /// Measure of one grid cell (product of spacings).
    pub fn cell_measure(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Coordinates of an interior node; the second component is meaningful
    /// only in 2D.
    pub fn coord(&self, idx: usize) -> [f64; 2] {
        if self.dim == 1 {
            let (a, _) = self.bounds[0];
            [a + (idx as f64 + 1.0) * self.spacing[0], 0.0]
        } else {
            let nx = self.counts[0];
            let (ix, iy) = (idx % nx, idx / nx);
            let (ax, _) = self.bounds[0];
            let (ay, _) = self.bounds[1];
            [
                ax + (ix as f64 + 1.0) * self.spacing[0],
                ay + (iy as f64 + 1.0) * self.spacing[1],
            ]
        }
    }

    pub fn compatible(&self, other: &Mesh) -> bool {
        self == other
    }
}

/// Builds a mesh; `bounds` and `counts` must each have `dim` entries.
pub fn build_mesh(
    dim: usize,
    bounds: &[(f64, f64)],
    counts: &[usize],
) -> Result<Arc<Mesh>, MeshError> {
    if dim != 1 && dim != 2 {
        return Err(MeshError::Invalid(format!("dimension {dim} not supported")));
    }
    if bounds.len() != dim || counts.len() != dim {
        return Err(MeshError::Invalid(format!(
            "expected {dim} bounds/counts, got {}/{}",
            bounds.len(),
            counts.len()
        )));
    }
    let mut spacing = Vec::with_capacity(dim);
    for axis in 0..dim {
        let (a, b) = bounds[axis];
        let n = counts[axis];
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(MeshError::Invalid(format!(
                "axis {axis}: interval [{a}, {b}] is degenerate"
            )));
        }
        if n < 3 {
            return Err(MeshError::Invalid(format!(
                "axis {axis}: need at least 3 interior nodes, got {n}"
            )));
        }
        spacing.push((b - a) / (n as f64 + 1.0));
    }
    Ok(Arc::new(Mesh {
        dim,
        bounds: bounds.to_vec(),
        counts: counts.to_vec(),
        spacing,
    }))
}

/// Function values at the interior nodes of a mesh.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(mesh: &Arc<Mesh>) -> Field {
        Field {
            mesh: Arc::clone(mesh),
            values: vec![0.0; mesh.interior_count()],
        }
    }

    pub fn from_fn(mesh: &Arc<Mesh>, mut f: impl FnMut([f64; 2]) -> f64) -> Field {
        let values = (0..mesh.interior_count())
            .map(|i| f(mesh.coord(i)))
            .collect();
        Field {
            mesh: Arc::clone(mesh),
            values,
        }
    }

    pub fn from_values(mesh: &Arc<Mesh>, values: Vec<f64>) -> Result<Field, MeshError> {
        if values.len() != mesh.interior_count() {
            return Err(MeshError::Length {
                got: values.len(),
                want: mesh.interior_count(),
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(MeshError::NonFinite { idx });
        }
        Ok(Field {
            mesh: Arc::clone(mesh),
            values,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Assembled discrete operators for one mesh: stiffness matrix `A`
/// (negative Laplacian), centered first differences `D_k`, quadrature
/// weights `q`, and a cached factorization of `A`.
pub struct DiscreteOperators {
    mesh: Arc<Mesh>,
    a: Banded,
    d_ops: Vec<Banded>,
    q: Vec<f64>,
    a_lu: BandedLu,
}

/// Assembles the 3-point (1D) / 5-point (2D) stencil divided by spacing²,
/// the centered differences with zero boundary substitution, and the lumped
/// quadrature weights.
pub fn assemble_operators(mesh: &Arc<Mesh>) -> DiscreteOperators {
    let n = mesh.interior_count();
    let cell = mesh.cell_measure();
    let (a, d_ops) = match mesh.dim() {
        1 => {
            let h = mesh.spacing(0);
            let mut a = Banded::zeros(n, 1, 1);
            let mut d = Banded::zeros(n, 1, 1);
            let (w, c) = (1.0 / (h * h), 2.0 / (h * h));
            let half = 1.0 / (2.0 * h);
            for i in 0..n {
                a.set(i, i, c);
                if i + 1 < n {
                    a.set(i, i + 1, -w);
                    a.set(i + 1, i, -w);
                    d.set(i, i + 1, half);
                    d.set(i + 1, i, -half);
                }
            }
            (a, vec![d])
        }
        _ => {
            let (nx, ny) = (mesh.count(0), mesh.count(1));
            let (hx, hy) = (mesh.spacing(0), mesh.spacing(1));
            let (wx, wy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
            let c = 2.0 * wx + 2.0 * wy;
            let mut a = Banded::zeros(n, nx, nx);
            let mut dx = Banded::zeros(n, 1, 1);
            let mut dy = Banded::zeros(n, nx, nx);
            let (halfx, halfy) = (1.0 / (2.0 * hx), 1.0 / (2.0 * hy));
            for iy in 0..ny {
                for ix in 0..nx {
                    let i = iy * nx + ix;
                    a.set(i, i, c);
                    if ix + 1 < nx {
                        a.set(i, i + 1, -wx);
                        a.set(i + 1, i, -wx);
                        dx.set(i, i + 1, halfx);
                        dx.set(i + 1, i, -halfx);
                    }
                    if iy + 1 < ny {
                        a.set(i, i + nx, -wy);
                        a.set(i + nx, i, -wy);
                        dy.set(i, i + nx, halfy);
                        dy.set(i + nx, i, -halfy);
                    }
                }
            }
            (a, vec![dx, dy])
        }
    };
    let a_lu = a
        .lu()
        .expect("the Dirichlet stiffness matrix is positive definite");
    DiscreteOperators {
        mesh: Arc::clone(mesh),
        a,
        d_ops,
        q: vec![cell; n],
        a_lu,
    }
}

impl DiscreteOperators {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n(&self) -> usize {
        self.mesh.interior_count()
    }

    /// The stiffness matrix (pointwise stencil; no quadrature weighting).
    pub fn a(&self) -> &Banded {
        &self.a
    }

    /// Centered first-difference operators, one per axis.
    pub fn d_ops(&self) -> &[Banded] {
        &self.d_ops
    }

    /// Quadrature weights (cell measure per interior node).
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn apply_a(&self, u: &[f64]) -> Vec<f64> {
        self.a.matvec(u)
    }

    /// Solves A x = rhs using the cached factorization.
    pub fn solve_a(&self, rhs: &[f64]) -> Vec<f64> {
        self.a_lu.solve(rhs).expect("cached stiffness factorization")
    }

    /// Pointwise squared gradient Σ_k (D_k u)².
    pub fn grad_squared(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for d in &self.d_ops {
            let du = d.matvec(u);
            for (o, g) in out.iter_mut().zip(du) {
                *o += g * g;
            }
        }
        out
    }

    fn check(&self, u: &Field) -> Result<(), MeshError> {
        if u.mesh.compatible(&self.mesh) {
            Ok(())
        } else {
            Err(MeshError::MeshMismatch)
        }
    }

    /// Discrete H₀¹ norm: sqrt(cell · uᵀ A u).  Zero iff u ≡ 0.
    pub fn h1_norm(&self, u: &Field) -> Result<f64, MeshError> {
        self.check(u)?;
        Ok(self.h1_norm_slice(u.as_slice()))
    }

    pub fn h1_norm_slice(&self, u: &[f64]) -> f64 {
        let au = self.a.matvec(u);
        let quad: f64 = u.iter().zip(&au).map(|(a, b)| a * b).sum();
        (self.mesh.cell_measure() * quad.max(0.0)).sqrt()
    }

    /// Lumped quadrature Σ q_i f_i.
    pub fn integrate(&self, f: &Field) -> Result<f64, MeshError> {
        self.check(f)?;
        Ok(self.integrate_slice(f.as_slice()))
    }

    pub fn integrate_slice(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.q).map(|(a, b)| a * b).sum()
    }

    /// Riesz representative of the quadrature-weighted functional
    /// w ↦ gᵀw with respect to the `h1_norm` inner product: A⁻¹g / cell.
    pub fn riesz(&self, g: &[f64]) -> Vec<f64> {
        let cell = self.mesh.cell_measure();
        let mut r = self.solve_a(g);
        for v in &mut r {
            *v /= cell;
        }
        r
    }

    /// Dual norm of a quadrature-weighted functional vector g:
    /// sqrt(gᵀ A⁻¹ g / cell) = h1_norm of its Riesz representative.
    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        let ag = self.solve_a(g);
        let s: f64 = g.iter().zip(&ag).map(|(a, b)| a * b).sum();
        (s.max(0.0) / self.mesh.cell_measure()).sqrt()
    }
}

//! Banded matrices, a banded LU with partial pivoting, and a Lanczos
//! iteration for symmetric (pencil) eigenproblems.
//!
//! The discrete Laplacians produced by `mesh` are banded with bandwidth 1
//! (intervals) or the y-resolution (rectangles), so a dense factorization
//! would waste both time and memory on the grids the acceptance scenarios
//! use.  Dense linear algebra (nalgebra) only appears here to diagonalise
//! the small Lanczos tridiagonal.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular at column {col} (pivot {pivot:e})")]
    Singular { col: usize, pivot: f64 },
    #[error("dimension mismatch: matrix is {n}x{n}, vector has length {len}")]
    Dimension { n: usize, len: usize },
    #[error("iteration did not converge: residual {residual:e} after {steps} steps")]
    NotConverged { residual: f64, steps: usize },
}

/// Square banded matrix with `kl` subdiagonals and `ku` superdiagonals.
/// Entries are stored row-major, `width = kl + ku + 1` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Banded {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i64i, i64j) = (i as i64, j as i64);
        if i >= self.n || j >= self.n {
            return None;
        }
        let off = i64j - i64i + self.kl as i64;
        if off < 0 || off > (self.kl + self.ku) as i64 {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + off as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Sets entry (i, j); panics if the position lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .idx(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band"));
        self.data[k] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .idx(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band"));
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec length mismatch");
        let width = self.kl + self.ku + 1;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let jmin = i.saturating_sub(self.kl);
            let jmax = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * width..(i + 1) * width];
            let mut acc = 0.0;
            for j in jmin..=jmax {
                acc += row[j + self.kl - i] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// Adds `diag[i]` to each diagonal entry.
    pub fn add_diag(&mut self, diag: &[f64]) {
        assert_eq!(diag.len(), self.n);
        for (i, d) in diag.iter().enumerate() {
            self.add_to(i, i, *d);
        }
    }

    pub fn add_scalar_diag(&mut self, s: f64) {
        for i in 0..self.n {
            self.add_to(i, i, s);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn norm_inf(&self) -> f64 {
        let width = self.kl + self.ku + 1;
        (0..self.n)
            .map(|i| {
                self.data[i * width..(i + 1) * width]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Maximum |A(i,j) - A(j,i)|; zero for symmetric matrices.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let jmax = (i + self.ku).min(self.n - 1);
            for j in i..=jmax {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Extracts the principal submatrix on the (strictly increasing) index
    /// set `keep`.  Pruning rows can only shrink the band, so the result
    /// reuses the original bandwidths.
    pub fn restrict(&self, keep: &[usize]) -> Banded {
        let m = keep.len();
        let mut out = Banded::zeros(m, self.kl.min(m.saturating_sub(1)), self.ku.min(m.saturating_sub(1)));
        for (r, &i) in keep.iter().enumerate() {
            let cmin = r.saturating_sub(out.kl);
            let cmax = (r + out.ku).min(m.saturating_sub(1));
            for c in cmin..=cmax.max(cmin) {
                if c >= m {
                    break;
                }
                let v = self.get(i, keep[c]);
                if v != 0.0 {
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let jmin = i.saturating_sub(self.kl);
            let jmax = (i + self.ku).min(self.n - 1);
            for j in jmin..=jmax {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// LU factorization with partial pivoting (band analogue of dgbtf2).
    pub fn lu(&self) -> Result<BandedLu, LinalgError> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let kv = kl + ku;
        let lda = 2 * kl + ku + 1;
        // Column-major working array with kl spare rows for pivot fill-in:
        // A(i, j) sits at ab[j*lda + kv + i - j].
        let mut ab = vec![0.0; n * lda];
        for i in 0..n {
            let jmin = i.saturating_sub(kl);
            let jmax = (i + ku).min(n - 1);
            for j in jmin..=jmax {
                ab[j * lda + kv + i - j] = self.get(i, j);
            }
        }
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0usize;
            let mut best = ab[j * lda + kv].abs();
            for p in 1..=km {
                let v = ab[j * lda + kv + p].abs();
                if v > best {
                    best = v;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            let piv = ab[j * lda + kv + jp];
            if piv == 0.0 || !piv.is_finite() {
                return Err(LinalgError::Singular { col: j, pivot: piv });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = c * lda + kv + j - c;
                    ab.swap(a, a + jp);
                }
            }
            if km > 0 {
                let inv = 1.0 / ab[j * lda + kv];
                for p in 1..=km {
                    ab[j * lda + kv + p] *= inv;
                }
                for c in (j + 1)..=ju {
                    let f = ab[c * lda + kv + j - c];
                    if f != 0.0 {
                        let base = c * lda + kv + j - c;
                        for p in 1..=km {
                            let mult = ab[j * lda + kv + p];
                            ab[base + p] -= mult * f;
                        }
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            lda,
            ab,
            ipiv,
            norm_inf_a: self.norm_inf(),
        })
    }
}

/// Factored form produced by [`Banded::lu`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    lda: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    norm_inf_a: f64,
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::Dimension {
                n: self.n,
                len: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku, lda) = (self.n, self.kl, self.ku, self.lda);
        let kv = kl + ku;
        if n == 0 {
            return;
        }
        for j in 0..n - 1 {
            let lm = kl.min(n - 1 - j);
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                for p in 1..=lm {
                    b[j + p] -= self.ab[j * lda + kv + p] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * lda + kv];
            let bj = b[j];
            if bj != 0.0 {
                let lm = (kl + ku).min(j);
                for p in 1..=lm {
                    b[j - p] -= self.ab[j * lda + kv - p] * bj;
                }
            }
        }
    }

    /// Cheap order-of-magnitude estimate of the condition number in the
    /// infinity norm: a few normalized inverse iterations bound ||A⁻¹||
    /// from below, multiplied by the stored ||A||_inf.
    pub fn condition_estimate(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut x: Vec<f64> = (0..self.n)
            .map(|_| {
                // xorshift64*: deterministic probe vector
                state ^= state >> 12;
                state ^= state << 25;
                state ^= state >> 27;
                let r = (state.wrapping_mul(0x2545f4914f6cdd1d) >> 11) as f64
                    / (1u64 << 53) as f64;
                2.0 * r - 1.0
            })
            .collect();
        let mut inv_norm: f64 = 0.0;
        for _ in 0..3 {
            let nx = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if nx == 0.0 || !nx.is_finite() {
                return f64::INFINITY;
            }
            for v in &mut x {
                *v /= nx;
            }
            self.solve_in_place(&mut x);
            let ny = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !ny.is_finite() {
                return f64::INFINITY;
            }
            inv_norm = inv_norm.max(ny);
        }
        self.norm_inf_a * inv_norm.max(1.0 / self.norm_inf_a.max(f64::MIN_POSITIVE))
    }
}

/// Result of a Lanczos run.
#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub value: f64,
    /// Ritz vector in the original coordinates, unit norm in the supplied
    /// inner product.
    pub vector: Vec<f64>,
    /// Estimated residual |beta_k * y_k| of the returned Ritz pair.
    pub residual: f64,
    pub steps: usize,
}

/// Which end of the spectrum a Lanczos run should resolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumEnd {
    Largest,
    Smallest,
}

/// Lanczos with full reorthogonalization for an operator that is
/// self-adjoint with respect to `inner`.  Returns the extreme Ritz pair at
/// the requested end of the spectrum.
///
/// `apply` is the operator action; `inner` must be a positive definite
/// bilinear form (for pencil problems: the K- or mass-weighted product).
pub fn lanczos_extreme<F, G>(
    n: usize,
    mut apply: F,
    inner: G,
    end: SpectrumEnd,
    max_steps: usize,
    tol: f64,
) -> Result<LanczosResult, LinalgError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
    G: Fn(&[f64], &[f64]) -> f64,
{
    assert!(n > 0, "empty operator");
    let steps_cap = max_steps.min(n);
    let mut state = 0x632be59bd9b4e019u64;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            let r = (state.wrapping_mul(0x2545f4914f6cdd1d) >> 11) as f64 / (1u64 << 53) as f64;
            2.0 * r - 1.0
        })
        .collect();
    let nv = inner(&v, &v).max(0.0).sqrt();
    assert!(nv > 0.0, "degenerate inner product");
    for x in &mut v {
        *x /= nv;
    }

    let mut basis: Vec<Vec<f64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut scale: f64 = 0.0;

    let extract = |alphas: &[f64],
                   betas: &[f64],
                   basis: &[Vec<f64>],
                   end: SpectrumEnd|
     -> (f64, Vec<f64>, f64) {
        let k = alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut pick = 0usize;
        for i in 1..k {
            let better = match end {
                SpectrumEnd::Largest => eig.eigenvalues[i] > eig.eigenvalues[pick],
                SpectrumEnd::Smallest => eig.eigenvalues[i] < eig.eigenvalues[pick],
            };
            if better {
                pick = i;
            }
        }
        let theta = eig.eigenvalues[pick];
        let y = eig.eigenvectors.column(pick);
        let mut vec = vec![0.0; basis[0].len()];
        for (j, q) in basis.iter().take(k).enumerate() {
            let c = y[j];
            for (a, b) in vec.iter_mut().zip(q.iter()) {
                *a += c * b;
            }
        }
        let res = if k < basis.len() || k == 0 {
            // beta_k available only when the recurrence continued
            betas.last().map_or(0.0, |b| (b * y[k - 1]).abs())
        } else {
            betas.last().map_or(0.0, |b| (b * y[k - 1]).abs())
        };
        (theta, vec, res)
    };

    for step in 0..steps_cap {
        let vj = basis[step].clone();
        let mut w = apply(&vj);
        let alpha = inner(&w, &vj);
        alphas.push(alpha);
        scale = scale.max(alpha.abs());
        // Full reorthogonalization, two passes.
        for _ in 0..2 {
            for q in &basis {
                let c = inner(&w, q);
                for (a, b) in w.iter_mut().zip(q.iter()) {
                    *a -= c * b;
                }
            }
        }
        let beta = inner(&w, &w).max(0.0).sqrt();
        let tiny = 1e-14 * scale.max(1e-300);
        if beta <= tiny || step + 1 == steps_cap || basis.len() == n {
            let (theta, vecr, res) = extract(&alphas, &betas, &basis, end);
            let ok = beta <= tiny || res <= tol * scale.max(1.0);
            if ok {
                return Ok(LanczosResult {
                    value: theta,
                    vector: vecr,
                    residual: res,
                    steps: step + 1,
                });
            }
            if step + 1 == steps_cap || basis.len() == n {
                return Err(LinalgError::NotConverged {
                    residual: res,
                    steps: step + 1,
                });
            }
        }
        betas.push(beta);
        let mut vnext = w;
        for x in &mut vnext {
            *x /= beta;
        }
        basis.push(vnext);
        // Periodic convergence check on the target Ritz pair.
        if step >= 4 && step % 5 == 0 {
            let (theta, vecr, res) = extract(&alphas, &betas, &basis, end);
            if res <= tol * scale.max(1.0) {
                return Ok(LanczosResult {
                    value: theta,
                    vector: vecr,
                    residual: res,
                    steps: step + 1,
                });
            }
        }
    }
    unreachable!("lanczos loop exits via returns");
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> Banded {
        let mut m = Banded::zeros(n, kl, ku);
        let mut s = seed;
        let mut next = || {
            s ^= s >> 12;
            s ^= s << 25;
            s ^= s >> 27;
            (s.wrapping_mul(0x2545f4914f6cdd1d) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            let jmin = i.saturating_sub(kl);
            let jmax = (i + ku).min(n - 1);
            for j in jmin..=jmax {
                m.set(i, j, next());
            }
            m.add_to(i, i, 3.0); // keep it comfortably invertible
        }
        m
    }

    #[test]
    fn lu_matches_dense_solve() {
        for (n, kl, ku, seed) in [(7, 1, 1, 1u64), (25, 3, 2, 2), (40, 5, 5, 3), (9, 0, 2, 4)] {
            let a = random_banded(n, kl, ku, seed);
            let lu = a.lu().unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let x = lu.solve(&b).unwrap();
            let dense = a.to_dense();
            let xd = dense
                .clone()
                .lu()
                .solve(&DVector::from_column_slice(&b))
                .unwrap();
            for i in 0..n {
                assert!(
                    (x[i] - xd[i]).abs() <= 1e-10 * (1.0 + xd[i].abs()),
                    "n={n} i={i}: {} vs {}",
                    x[i],
                    xd[i]
                );
            }
            // residual check
            let ax = a.matvec(&x);
            for i in 0..n {
                assert!((ax[i] - b[i]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn lu_pivots_on_small_diagonal() {
        // Leading entry tiny: without pivoting this loses all accuracy.
        let mut a = Banded::zeros(3, 1, 1);
        a.set(0, 0, 1e-18);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(1, 2, 1.0);
        a.set(2, 1, 1.0);
        a.set(2, 2, 2.0);
        let lu = a.lu().unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let x = lu.solve(&b).unwrap();
        let ax = a.matvec(&x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12, "{:?}", ax);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = Banded::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 0.0);
        a.set(2, 2, 1.0);
        match a.lu() {
            Err(LinalgError::Singular { .. }) => {}
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn condition_estimate_flags_near_singular() {
        let mut good = Banded::zeros(10, 1, 1);
        for i in 0..10 {
            good.set(i, i, 2.0);
        }
        let cg = good.lu().unwrap().condition_estimate();
        assert!(cg < 1e3, "well conditioned diag: {cg}");

        let mut bad = random_banded(10, 1, 1, 9);
        bad.set(5, 5, bad.get(5, 4) + bad.get(5, 6) + 1e-14 - 3.0 + bad.get(5, 5));
        // Construct an almost-singular matrix by zeroing a pivot chain.
        let mut nearly = Banded::zeros(4, 1, 1);
        nearly.set(0, 0, 1.0);
        nearly.set(1, 1, 1.0);
        nearly.set(2, 2, 1e-13);
        nearly.set(3, 3, 1.0);
        let c = nearly.lu().unwrap().condition_estimate();
        assert!(c > 1e12, "near singular should score huge, got {c}");
        let _ = bad;
    }

    #[test]
    fn restrict_keeps_submatrix_entries() {
        let a = random_banded(12, 2, 2, 5);
        let keep = vec![0usize, 1, 4, 5, 6, 10];
        let r = a.restrict(&keep);
        for (ri, &i) in keep.iter().enumerate() {
            for (rj, &j) in keep.iter().enumerate() {
                let want = if ri.abs_diff(rj) <= 2 { a.get(i, j) } else { 0.0 };
                assert_eq!(r.get(ri, rj), want, "entry ({ri},{rj})");
            }
        }
    }

    #[test]
    fn lanczos_finds_extreme_eigenvalues_of_symmetric_matrix() {
        // 1D Dirichlet Laplacian, eigenvalues known in closed form.
        let n = 60;
        let mut a = Banded::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
                a.set(i + 1, i, -1.0);
            }
        }
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let small = lanczos_extreme(
            n,
            |x| a.matvec(x),
            dot,
            SpectrumEnd::Smallest,
            n,
            1e-12,
        )
        .unwrap();
        let h = 1.0 / (n as f64 + 1.0);
        let exact_min = 4.0 * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!((small.value - exact_min).abs() < 1e-10, "{}", small.value);

        let large = lanczos_extreme(
            n,
            |x| a.matvec(x),
            dot,
            SpectrumEnd::Largest,
            n,
            1e-12,
        )
        .unwrap();
        let exact_max = 4.0 * (std::f64::consts::PI * (n as f64) * h / 2.0).sin().powi(2);
        assert!((large.value - exact_max).abs() < 1e-9, "{}", large.value);
    }

    #[test]
    fn lanczos_pencil_matches_dense_generalized_eigensolve() {
        // Generalized problem M x = nu K x with K SPD: iterate K^{-1} M in the
        // K-inner product and compare against a dense transform-and-solve.
        let n = 30;
        let mut k = Banded::zeros(n, 1, 1);
        for i in 0..n {
            k.set(i, i, 2.4 + 0.01 * i as f64);
            if i + 1 < n {
                k.set(i, i + 1, -1.0);
                k.set(i + 1, i, -1.0);
            }
        }
        let m_diag: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.41).sin()).collect();
        let klu = k.lu().unwrap();
        let k_ip = |x: &[f64], y: &[f64]| {
            let kx = k.matvec(x);
            kx.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
        };
        let got = lanczos_extreme(
            n,
            |x| {
                let mx: Vec<f64> = x.iter().zip(&m_diag).map(|(v, d)| v * d).collect();
                klu.solve(&mx).unwrap()
            },
            k_ip,
            SpectrumEnd::Largest,
            n,
            1e-12,
        )
        .unwrap();

        // Dense oracle: Cholesky of K, symmetric eigensolve of L^{-1} M L^{-T}.
        let kd = k.to_dense();
        let chol = kd.cholesky().unwrap();
        let l = chol.l();
        let md = DMatrix::from_diagonal(&DVector::from_vec(m_diag.clone()));
        let li = l.clone().try_inverse().unwrap();
        let sym = &li * md * li.transpose();
        let eig = SymmetricEigen::new(sym);
        let dense_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        assert!(
            (got.value - dense_max).abs() <= 1e-9 * (1.0 + dense_max.abs()),
            "lanczos {} vs dense {}",
            got.value,
            dense_max
        );
        // K-normalization of the returned vector.
        let nrm = k_ip(&got.vector, &got.vector);
        assert!((nrm - 1.0).abs() < 1e-8);
    }
}

//! Self-contained dense symmetric linear algebra: Cholesky factorization,
//! small generalized eigenproblems for the per-element bounds, and a
//! full-spectrum generalized eigensolver (Cholesky congruence followed by
//! cyclic Jacobi) used as the verification oracle.

use crate::assembly::SparseSymMatrix;
use crate::error::{Error, Result};

/// Jacobi sweep cap; convergence is normally reached in well under ten sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 30;
/// Converged when the off-diagonal Frobenius norm drops below this fraction of
/// the Frobenius norm of the input.
pub const JACOBI_OFF_FROBENIUS_REL: f64 = 1e-12;

/// Eigenvalue planted on the deflated kernel direction. Both pencil matrices
/// are positive semidefinite, so every true eigenvalue is nonnegative and a
/// negative sentinel is cleanly separable without inflating matrix norms.
const DEFLATION_SENTINEL: f64 = -1.0;
const KERNEL_REL_TOL: f64 = 1e-8;

/// Dense symmetric matrix in row-major full storage.
///
/// Symmetry is enforced on construction; all mutators write both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds from explicit rows; the rows must be symmetric to 1e-12 relative.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut data = vec![0.0; n * n];
        let mut max_abs = 0.0f64;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Contract(format!(
                    "row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                data[i * n + j] = v;
                max_abs = max_abs.max(v.abs());
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (data[i * n + j] - data[j * n + i]).abs();
                if d > 1e-12 * max_abs.max(1.0) {
                    return Err(Error::Contract(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        data[i * n + j],
                        data[j * n + i]
                    )));
                }
                // exact symmetrization
                data[j * n + i] = data[i * n + j];
            }
        }
        Ok(Self { n, data })
    }

    /// Wraps a row-major buffer whose mirror entries are already bitwise
    /// equal (e.g. the dense image of a `SparseSymMatrix`).
    pub(crate) fn from_raw_symmetric(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets entry (i, j) and its mirror (j, i).
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        matvec_dense(&self.data, self.n, x, y);
    }
}

/// Non-decreasing eigenvalue list of a symmetric pencil.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn from_unsorted(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).expect("NaN eigenvalue"));
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        *self.0.first().expect("empty spectrum")
    }

    pub fn max(&self) -> f64 {
        *self.0.last().expect("empty spectrum")
    }
}

/// Lower-triangular Cholesky factor, stored as a full row-major matrix with a
/// zero strict upper triangle.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves L Lᵀ x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        forward_solve(&self.l, self.n, x);
        backward_solve_transposed(&self.l, self.n, x);
    }
}

/// Cholesky factorization M = L Lᵀ of a symmetric positive definite matrix.
///
/// A nonpositive pivot yields `Error::NonpositivePivot` carrying the 0-based
/// pivot row.
pub fn cholesky(m: &DenseSymMatrix) -> Result<CholeskyFactor> {
    let n = m.order();
    let l = cholesky_dense(m.as_slice(), n)?;
    Ok(CholeskyFactor { n, l })
}

fn cholesky_dense(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NonpositivePivot { pivot: i });
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

#[inline]
fn forward_solve(l: &[f64], n: usize, x: &mut [f64]) {
    for i in 0..n {
        let mut sum = x[i];
        let row = &l[i * n..i * n + i];
        for (k, lik) in row.iter().enumerate() {
            sum -= lik * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
}

#[inline]
fn backward_solve_transposed(l: &[f64], n: usize, x: &mut [f64]) {
    for i in (0..n).rev() {
        let mut sum = x[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
}

fn matvec_dense(a: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut sum = 0.0;
        for (aij, xj) in row.iter().zip(x.iter()) {
            sum += aij * xj;
        }
        y[i] = sum;
    }
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn off_diag_abs_sum(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[i * n + j].abs();
        }
    }
    s
}

fn off_diag_frobenius(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = a[i * n + j];
            s += 2.0 * v * v;
        }
    }
    s.sqrt()
}

/// Cyclic threshold Jacobi on a full symmetric matrix (row-major, modified in
/// place). Returns the unsorted diagonal; if `vectors` is given it must be an
/// n×n buffer and receives the accumulated rotations with eigenvector k stored
/// as row k (i.e. Vᵀ).
fn jacobi_eigen(a: &mut [f64], n: usize, mut vectors: Option<&mut [f64]>) -> Result<Vec<f64>> {
    if let Some(w) = vectors.as_deref_mut() {
        w.fill(0.0);
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
    }
    if n <= 1 {
        return Ok((0..n).map(|i| a[i * n + i]).collect());
    }
    let total = frobenius(a);
    if total == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let target = JACOBI_OFF_FROBENIUS_REL * total;
    for sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diag_frobenius(a, n) <= target {
            return Ok((0..n).map(|i| a[i * n + i]).collect());
        }
        // Numerical-Recipes style threshold: rotate everything late in the
        // game, only the large entries early on.
        let sm = off_diag_abs_sum(a, n);
        let tresh = if sweep < 3 {
            0.2 * sm / ((n * n) as f64)
        } else {
            0.0
        };
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let g = 100.0 * apq.abs();
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                if apq.abs() <= tresh {
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate_rows(a, n, p, q, c, s);
                a[p * n + p] = c * c * app - 2.0 * c * s * apq + s * s * aqq;
                a[q * n + q] = s * s * app + 2.0 * c * s * apq + c * c * aqq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                mirror_columns(a, n, p, q);
                if let Some(w) = vectors.as_deref_mut() {
                    rotate_rows(w, n, p, q, c, s);
                }
            }
        }
    }
    if off_diag_frobenius(a, n) <= target {
        return Ok((0..n).map(|i| a[i * n + i]).collect());
    }
    Err(Error::NoConvergence(format!(
        "Jacobi did not reach off-diagonal Frobenius {target:e} in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

/// Applies the plane rotation to rows p and q (left multiplication by Jᵀ).
#[inline]
fn rotate_rows(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (head, tail) = a.split_at_mut(q * n);
    let rp = &mut head[p * n..p * n + n];
    let rq = &mut tail[..n];
    for (vp, vq) in rp.iter_mut().zip(rq.iter_mut()) {
        let ap = *vp;
        let aq = *vq;
        *vp = c * ap - s * aq;
        *vq = s * ap + c * aq;
    }
}

/// Restores symmetry of columns p and q from the freshly rotated rows.
#[inline]
fn mirror_columns(a: &mut [f64], n: usize, p: usize, q: usize) {
    for i in 0..n {
        if i == p || i == q {
            continue;
        }
        a[i * n + p] = a[p * n + i];
        a[i * n + q] = a[q * n + i];
    }
}

/// Eigenvalues of the pencil A v = λ B v for small orders (≤ 6).
///
/// B must be symmetric positive definite. Order 1 and 2 use closed forms; the
/// rest goes through Cholesky congruence and Jacobi.
pub fn gen_eig_small(a: &DenseSymMatrix, b: &DenseSymMatrix) -> Result<Spectrum> {
    let n = a.order();
    if b.order() != n {
        return Err(Error::Contract(format!(
            "pencil order mismatch: {n} vs {}",
            b.order()
        )));
    }
    if n == 0 || n > 6 {
        return Err(Error::Contract(format!(
            "gen_eig_small handles orders 1..=6, got {n}"
        )));
    }
    match n {
        1 => {
            let b00 = b.get(0, 0);
            if b00 <= 0.0 {
                return Err(Error::NonpositivePivot { pivot: 0 });
            }
            Ok(Spectrum::from_unsorted(vec![a.get(0, 0) / b00]))
        }
        2 => gen_eig_2x2(a, b),
        _ => {
            let lb = cholesky(b)?;
            let mut c = congruence_dense(&lb.l, a.as_slice(), n);
            symmetrize(&mut c, n);
            let vals = jacobi_eigen(&mut c, n, None)?;
            Ok(Spectrum::from_unsorted(vals))
        }
    }
}

/// Closed-form 2×2 pencil: roots of det(A − λB) = 0.
fn gen_eig_2x2(a: &DenseSymMatrix, b: &DenseSymMatrix) -> Result<Spectrum> {
    let (a11, a12, a22) = (a.get(0, 0), a.get(0, 1), a.get(1, 1));
    let (b11, b12, b22) = (b.get(0, 0), b.get(0, 1), b.get(1, 1));
    let det_b = b11 * b22 - b12 * b12;
    if b11 <= 0.0 {
        return Err(Error::NonpositivePivot { pivot: 0 });
    }
    if det_b <= 0.0 {
        return Err(Error::NonpositivePivot { pivot: 1 });
    }
    // det(A - λB) = det_b λ² - (a11 b22 + a22 b11 - 2 a12 b12) λ + det_a
    let det_a = a11 * a22 - a12 * a12;
    let beta = a11 * b22 + a22 * b11 - 2.0 * a12 * b12;
    let disc = (beta * beta - 4.0 * det_b * det_a).max(0.0);
    let sq = disc.sqrt();
    // stable quadratic roots; qq = 0 only when A itself vanishes
    let (l1, l2) = if beta >= 0.0 {
        let qq = 0.5 * (beta + sq);
        if qq == 0.0 {
            (0.0, 0.0)
        } else {
            (det_a / qq, qq / det_b)
        }
    } else {
        let qq = 0.5 * (beta - sq);
        (qq / det_b, det_a / qq)
    };
    Ok(Spectrum::from_unsorted(vec![l1, l2]))
}

/// Smallest and largest eigenvalue of a small pencil.
pub fn gen_eig_extremes(a: &DenseSymMatrix, b: &DenseSymMatrix) -> Result<(f64, f64)> {
    let s = gen_eig_small(a, b)?;
    Ok((s.min(), s.max()))
}

/// Computes L⁻¹ A L⁻ᵀ for a full symmetric A and lower-triangular L.
fn congruence_dense(l: &[f64], a: &[f64], n: usize) -> Vec<f64> {
    // W = L⁻¹ A, column by column; A is symmetric so its columns are its rows.
    let mut w = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = a[j * n + i];
        }
        forward_solve(l, n, &mut col);
        for i in 0..n {
            w[i * n + j] = col[i];
        }
    }
    // C = W L⁻ᵀ = (L⁻¹ Wᵀ)ᵀ; rows of W are the columns of Wᵀ.
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        col.copy_from_slice(&w[i * n..(i + 1) * n]);
        forward_solve(l, n, &mut col);
        for j in 0..n {
            c[i * n + j] = col[j];
        }
    }
    c
}

fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
}

/// Full generalized eigendecomposition of a symmetric sparse pencil.
#[derive(Debug, Clone)]
pub struct GenEigDense {
    pub spectrum: Spectrum,
    /// vectors[k] is the eigenvector paired with spectrum.values()[k].
    pub vectors: Vec<Vec<f64>>,
    pub deflated: bool,
    /// max over k of ‖A v − λ B v‖₂ / ((‖A‖_F + |λ|‖B‖_F)·‖v‖₂), measured
    /// against the pencil actually solved (the projected one when deflated).
    pub max_rel_residual: f64,
}

/// Dense verification oracle: all generalized eigenvalues of (A, B), sorted
/// ascending, with eigenvectors.
///
/// With `deflate_kernel` the pencil is assumed singular with the shared
/// one-dimensional kernel span{1}; the kernel is projected out (via an explicit
/// rank-one sentinel shift, keeping the dimension) and n−1 values are
/// returned.
pub fn gen_eig_dense(
    a: &SparseSymMatrix,
    b: &SparseSymMatrix,
    deflate_kernel: bool,
) -> Result<GenEigDense> {
    let n = a.order();
    if b.order() != n {
        return Err(Error::Contract(format!(
            "pencil order mismatch: {n} vs {}",
            b.order()
        )));
    }
    if n == 0 {
        return Err(Error::Contract("empty pencil".into()));
    }
    let mut ad = a.to_dense_raw();
    let mut bd = b.to_dense_raw();
    if deflate_kernel {
        check_ones_kernel(&ad, n, "A")?;
        check_ones_kernel(&bd, n, "B")?;
        let tau_b: f64 = (0..n).map(|i| bd[i * n + i]).sum::<f64>() / n as f64;
        if tau_b <= 0.0 {
            return Err(Error::NotPositiveDefinite(
                "preconditioner trace is nonpositive".into(),
            ));
        }
        project_out_ones(&mut ad, n, DEFLATION_SENTINEL * tau_b);
        project_out_ones(&mut bd, n, tau_b);
        // the kernel direction now carries pencil eigenvalue −1
    }
    let lb = match cholesky_dense(&bd, n) {
        Ok(l) => l,
        Err(Error::NonpositivePivot { pivot }) => {
            return Err(Error::NotPositiveDefinite(format!(
                "B is not positive definite (pivot {pivot}); pass deflate_kernel for the \
                 singular periodic/Neumann case"
            )))
        }
        Err(e) => return Err(e),
    };
    let mut c = congruence_dense(&lb, &ad, n);
    symmetrize(&mut c, n);
    let mut w = vec![0.0; n * n];
    let diag = jacobi_eigen(&mut c, n, Some(&mut w))?;

    // back-transform eigenvectors: x = L⁻ᵀ w, one per row of w
    for i in 0..n {
        backward_solve_transposed(&lb, n, &mut w[i * n..(i + 1) * n]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("NaN eigenvalue"));

    let fro_a = frobenius(&ad);
    let fro_b = frobenius(&bd);
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    let mut max_rel_residual = 0.0f64;
    let mut dropped = 0usize;
    let mut av = vec![0.0; n];
    let mut bv = vec![0.0; n];
    for &idx in &order {
        let lambda = diag[idx];
        if deflate_kernel && lambda < 0.5 * DEFLATION_SENTINEL {
            dropped += 1;
            continue;
        }
        let mut v = w[idx * n..(idx + 1) * n].to_vec();
        let norm = frobenius(&v);
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        matvec_dense(&ad, n, &v, &mut av);
        matvec_dense(&bd, n, &v, &mut bv);
        let mut res = 0.0;
        for i in 0..n {
            let r = av[i] - lambda * bv[i];
            res += r * r;
        }
        let scale = fro_a + lambda.abs() * fro_b;
        if scale > 0.0 {
            max_rel_residual = max_rel_residual.max(res.sqrt() / scale);
        }
        values.push(lambda);
        vectors.push(v);
    }
    if deflate_kernel && dropped != 1 {
        return Err(Error::KernelMismatch(format!(
            "expected exactly one sentinel eigenvalue, found {dropped}"
        )));
    }
    Ok(GenEigDense {
        spectrum: Spectrum(values),
        vectors,
        deflated: deflate_kernel,
        max_rel_residual,
    })
}

fn check_ones_kernel(m: &[f64], n: usize, name: &str) -> Result<()> {
    let max_abs = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..n {
        let s: f64 = m[i * n..(i + 1) * n].iter().sum();
        worst = worst.max(s.abs());
    }
    if worst > KERNEL_REL_TOL * max_abs.max(1e-300) {
        return Err(Error::KernelMismatch(format!(
            "{name}·1 has max residual {worst:e} (limit {:e})",
            KERNEL_REL_TOL * max_abs
        )));
    }
    Ok(())
}

/// Replaces M by P M P + τ kkᵀ with P = I − kkᵀ and k the normalized constants
/// vector, forcing a clean split between span{1} and its complement.
fn project_out_ones(m: &mut [f64], n: usize, tau: f64) {
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    // v = M k
    let mut v = vec![0.0; n];
    for i in 0..n {
        v[i] = m[i * n..(i + 1) * n].iter().sum::<f64>() * inv_sqrt_n;
    }
    let alpha: f64 = v.iter().sum::<f64>() * inv_sqrt_n;
    let shift = (alpha + tau) / n as f64;
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] += shift - (v[i] + v[j]) * inv_sqrt_n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn sym2(a11: f64, a12: f64, a22: f64) -> DenseSymMatrix {
        DenseSymMatrix::from_rows(&[&[a11, a12], &[a12, a22]]).unwrap()
    }

    fn identity(n: usize) -> DenseSymMatrix {
        let mut m = DenseSymMatrix::zeros(n);
        for i in 0..n {
            m.set_sym(i, i, 1.0);
        }
        m
    }

    fn random_spd(n: usize, rng: &mut StdRng) -> DenseSymMatrix {
        // G Gᵀ + shift·I is SPD
        let g: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut m = DenseSymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..n {
                    s += g[i * n + k] * g[j * n + k];
                }
                if i == j {
                    s += 0.5;
                }
                m.set_sym(i, j, s);
            }
        }
        m
    }

    #[test]
    fn cholesky_identity_is_identity() {
        let f = cholesky(&identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(f.get(i, j), want);
            }
        }
    }

    #[test]
    fn cholesky_hand_example() {
        let m = sym2(4.0, 2.0, 5.0);
        let f = cholesky(&m).unwrap();
        assert_eq!(f.get(0, 0), 2.0);
        assert_eq!(f.get(1, 0), 1.0);
        assert_eq!(f.get(1, 1), 2.0);
        assert_eq!(f.get(0, 1), 0.0);
    }

    #[test]
    fn cholesky_indefinite_reports_pivot() {
        let m = sym2(1.0, 2.0, 1.0);
        match cholesky(&m) {
            Err(Error::NonpositivePivot { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected nonpositive pivot, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_reconstructs_input() {
        let mut rng = StdRng::seed_from_u64(11);
        for n in [1usize, 2, 5, 12, 40] {
            let m = random_spd(n, &mut rng);
            let f = cholesky(&m).unwrap();
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..=i.min(j) {
                        s += f.get(i, k) * f.get(j, k);
                    }
                    worst = worst.max((s - m.get(i, j)).abs());
                }
            }
            assert!(
                worst <= 1e-12 * n as f64 * m.max_abs(),
                "LLᵀ residual {worst:e} too large for n={n}"
            );
        }
    }

    #[test]
    fn cholesky_solve_roundtrip() {
        let mut rng = StdRng::seed_from_u64(3);
        let m = random_spd(9, &mut rng);
        let x_true: Vec<f64> = (0..9).map(|i| (i as f64) - 4.0).collect();
        let mut b = vec![0.0; 9];
        m.matvec(&x_true, &mut b);
        let x = cholesky(&m).unwrap().solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-10);
        }
    }

    #[test]
    fn gen_eig_small_diagonal() {
        let a = sym2(2.0, 0.0, 1.0);
        let s = gen_eig_small(&a, &identity(2)).unwrap();
        assert!((s.values()[0] - 1.0).abs() < 1e-14);
        assert!((s.values()[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gen_eig_small_shared_eigenvectors() {
        // A and B of the form pI + qJ share eigenvectors (1, ±1); the pencil
        // eigenvalues are (a±b)/(1±0.3).
        let a = sym2(1.3, 0.4, 1.3);
        let b = sym2(1.0, 0.3, 1.0);
        let s = gen_eig_small(&a, &b).unwrap();
        assert!((s.values()[0] - 0.9 / 0.7).abs() < 1e-13, "{:?}", s);
        assert!((s.values()[1] - 1.7 / 1.3).abs() < 1e-13, "{:?}", s);
    }

    #[test]
    fn gen_eig_small_multiple_of_b() {
        let mut rng = StdRng::seed_from_u64(21);
        for n in 1..=6usize {
            let b = random_spd(n, &mut rng);
            let a = b.scaled(3.25);
            let s = gen_eig_small(&a, &b).unwrap();
            for v in s.values() {
                assert!((v - 3.25).abs() < 1e-11, "n={n}: {v}");
            }
        }
    }

    #[test]
    fn gen_eig_small_rejects_large_orders() {
        let m = identity(7);
        assert!(matches!(
            gen_eig_small(&m, &m),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn gen_eig_small_rejects_indefinite_b() {
        let a = identity(2);
        let b = sym2(1.0, 2.0, 1.0);
        assert!(matches!(
            gen_eig_small(&a, &b),
            Err(Error::NonpositivePivot { pivot: 1 })
        ));
    }

    #[test]
    fn jacobi_known_3x3() {
        // eigenvalues of [[2,0,0],[0,3,4],[0,4,9]] are {1, 2, 11}
        let mut a = vec![2.0, 0.0, 0.0, 0.0, 3.0, 4.0, 0.0, 4.0, 9.0];
        let vals = jacobi_eigen(&mut a, 3, None).unwrap();
        let mut sorted = vals;
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in sorted.iter().zip([1.0, 2.0, 11.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    fn to_sparse(m: &DenseSymMatrix) -> SparseSymMatrix {
        SparseSymMatrix::from_dense(m).unwrap()
    }

    #[test]
    fn gen_eig_dense_b_equals_a() {
        let mut rng = StdRng::seed_from_u64(5);
        let m = random_spd(30, &mut rng);
        let sp = to_sparse(&m);
        let res = gen_eig_dense(&sp, &sp, false).unwrap();
        for v in res.spectrum.values() {
            assert!((v - 1.0).abs() < 1e-10, "{v}");
        }
        assert!(res.max_rel_residual < 1e-10);
    }

    #[test]
    fn gen_eig_dense_diagonal_2x2() {
        let a = sym2(2.0, 0.0, 1.0);
        let res = gen_eig_dense(&to_sparse(&a), &to_sparse(&identity(2)), false).unwrap();
        assert!((res.spectrum.values()[0] - 1.0).abs() < 1e-14);
        assert!((res.spectrum.values()[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gen_eig_dense_agrees_with_small() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let a = random_spd(n, &mut rng);
            let b = random_spd(n, &mut rng);
            let s_small = gen_eig_small(&a, &b).unwrap();
            let s_dense = gen_eig_dense(&to_sparse(&a), &to_sparse(&b), false).unwrap();
            for (x, y) in s_small.values().iter().zip(s_dense.spectrum.values()) {
                assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn gen_eig_dense_scaling_is_linear() {
        let mut rng = StdRng::seed_from_u64(9);
        let a = random_spd(12, &mut rng);
        let b = random_spd(12, &mut rng);
        let base = gen_eig_dense(&to_sparse(&a), &to_sparse(&b), false).unwrap();
        let scaled = gen_eig_dense(&to_sparse(&a.scaled(1.3)), &to_sparse(&b), false).unwrap();
        for (x, y) in base.spectrum.values().iter().zip(scaled.spectrum.values()) {
            assert!((1.3 * x - y).abs() <= 1e-12 * (1.3 * x).abs().max(1.0));
        }
    }

    /// Weighted ring Laplacian: kernel is exactly span{1}.
    fn ring_laplacian(weights: &[f64]) -> DenseSymMatrix {
        let n = weights.len();
        let mut m = DenseSymMatrix::zeros(n);
        for (i, &w) in weights.iter().enumerate() {
            let j = (i + 1) % n;
            m.add_sym(i, i, w);
            m.add_sym(j, j, w);
            m.add_sym(i, j, -w);
        }
        m
    }

    #[test]
    fn gen_eig_dense_deflation_matches_explicit_restriction() {
        let a = ring_laplacian(&[1.0, 2.0, 0.5, 1.5, 3.0]);
        let b = ring_laplacian(&[1.0, 1.0, 1.0, 1.0, 1.0]);
        let res = gen_eig_dense(&to_sparse(&a), &to_sparse(&b), true).unwrap();
        assert_eq!(res.spectrum.len(), 4);

        // independent restriction onto an orthonormal basis of span{1}ᵀ
        let n = 5;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for k in 1..n {
            // (1,...,1,-k,0,...)/norm with k ones
            let mut v = vec![0.0; n];
            for x in v.iter_mut().take(k) {
                *x = 1.0;
            }
            v[k] = -(k as f64);
            let norm = frobenius(&v);
            for x in &mut v {
                *x /= norm;
            }
            basis.push(v);
        }
        let restrict = |m: &DenseSymMatrix| {
            let mut r = DenseSymMatrix::zeros(n - 1);
            let mut tmp = vec![0.0; n];
            for (i, bi) in basis.iter().enumerate() {
                m.matvec(bi, &mut tmp);
                for (j, bj) in basis.iter().enumerate().take(i + 1) {
                    let dot: f64 = tmp.iter().zip(bj).map(|(x, y)| x * y).sum();
                    r.set_sym(i, j, dot);
                }
            }
            r
        };
        let want = gen_eig_small(&restrict(&a), &restrict(&b)).unwrap();
        for (x, y) in res.spectrum.values().iter().zip(want.values()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn gen_eig_dense_rejects_kernel_mismatch() {
        let mut rng = StdRng::seed_from_u64(13);
        let a = random_spd(5, &mut rng); // no kernel at all
        let b = ring_laplacian(&[1.0; 5]);
        assert!(matches!(
            gen_eig_dense(&to_sparse(&a), &to_sparse(&b), true),
            Err(Error::KernelMismatch(_))
        ));
    }

    #[test]
    fn gen_eig_dense_residuals_small() {
        let mut rng = StdRng::seed_from_u64(17);
        let a = random_spd(60, &mut rng);
        let b = random_spd(60, &mut rng);
        let res = gen_eig_dense(&to_sparse(&a), &to_sparse(&b), false).unwrap();
        assert!(res.max_rel_residual <= 1e-8, "{}", res.max_rel_residual);
        // spectrum is sorted
        for w in res.spectrum.values().windows(2) {
            assert!(w[0] <= w[1]);
        }
    }
}

//! Global stiffness assembly: diffusion with optional Robin boundary mass,
//! 2-D elasticity in Voigt notation, and load vectors. Element contributions
//! are accumulated in a fixed element order, so assembling the same inputs
//! twice is bit-identical.
//!
//! Quadrature: 2×2 Gauss per quad, 3-point per triangle, 2-point Gauss per
//! Robin edge. Elements where a coefficient field has an intra-element sign
//! discontinuity are split into sub-cells (4×4 for quads, 16 congruent
//! sub-triangles) before applying the base rule. The bound guarantees do not
//! rest on quadrature accuracy as long as the original and preconditioner
//! matrices use the same rule, which `QuadraturePlan` enforces.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::material::{RobinField, TensorField};
use crate::mesh::{BoundaryTag, Element, Mesh};
use crate::smalleig::DenseSymMatrix;

/// Sub-cells per axis on elements with discontinuous coefficients.
pub const SUBCELL_LEVEL: u32 = 4;

pub type LoadVector = Vec<f64>;

/// Symmetric sparse matrix in CSR form with the full (mirrored) pattern.
/// Numerically symmetric by construction: only the lower triangle is
/// accumulated and the upper triangle is its mirror image.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.cols[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut sum = 0.0;
            for k in lo..hi {
                sum += self.vals[k] * x[self.cols[k]];
            }
            y[i] = sum;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// ‖M·1‖_∞ — zero (up to rounding) for pure periodic/Neumann operators.
    pub fn ones_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let s: f64 = self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum();
            worst = worst.max(s.abs());
        }
        worst
    }

    pub fn to_dense_raw(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i * self.n + self.cols[k]] = self.vals[k];
            }
        }
        d
    }

    pub fn to_dense(&self) -> DenseSymMatrix {
        DenseSymMatrix::from_raw_symmetric(self.n, self.to_dense_raw())
    }

    pub fn from_dense(m: &DenseSymMatrix) -> Result<Self> {
        let n = m.order();
        let mut b = SparseSymBuilder::new(n);
        for i in 0..n {
            for j in 0..=i {
                let v = m.get(i, j);
                if v != 0.0 {
                    b.add(i, j, v);
                }
            }
        }
        Ok(b.finish())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(|v| c * v).collect(),
        }
    }

    /// Matrix Market coordinate export (symmetric, lower triangle, 17
    /// significant digits).
    pub fn write_matrix_market(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        let nnz_lower = (0..self.n)
            .flat_map(|i| {
                let lo = self.row_ptr[i];
                let hi = self.row_ptr[i + 1];
                self.cols[lo..hi].iter().filter(move |&&j| j <= i)
            })
            .count();
        writeln!(w, "{} {} {}", self.n, self.n, nnz_lower)?;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                if j <= i {
                    writeln!(w, "{} {} {:.16e}", i + 1, j + 1, self.vals[k])?;
                }
            }
        }
        Ok(())
    }
}

/// Accumulates the lower triangle; `finish` mirrors it into a full CSR.
pub struct SparseSymBuilder {
    n: usize,
    lower: Vec<BTreeMap<usize, f64>>,
}

impl SparseSymBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            lower: vec![BTreeMap::new(); n],
        }
    }

    /// Adds `v` at (i, j) of the lower triangle; requires j <= i.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i);
        *self.lower[i].entry(j).or_insert(0.0) += v;
    }

    /// Routes an entry of a symmetric local matrix: strictly-upper entries are
    /// skipped (their mirrored twin carries the identical value), diagonal
    /// hits accumulate always (two local DOFs may alias one global DOF under
    /// periodic identification).
    pub fn add_symmetric_pair(&mut self, i: usize, j: usize, v: f64) {
        if i > j {
            self.add(i, j, v);
        } else if i == j {
            self.add(i, i, v);
        }
    }

    pub fn finish(self) -> SparseSymMatrix {
        let n = self.n;
        let mut counts = vec![0usize; n];
        for (i, row) in self.lower.iter().enumerate() {
            for &j in row.keys() {
                counts[i] += 1;
                if j != i {
                    counts[j] += 1;
                }
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[n];
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        let mut next = row_ptr.clone();
        // fill strict upper first (mirrors of the lower triangle, which come
        // in increasing column order per source row), then the lower rows,
        // keeping every CSR row sorted by column
        for i in 0..n {
            for (&j, &v) in &self.lower[i] {
                if j != i {
                    cols[next[j]] = i;
                    vals[next[j]] = v;
                    next[j] += 1;
                }
            }
            for (&j, &v) in &self.lower[i] {
                cols[next[i]] = j;
                vals[next[i]] = v;
                next[i] += 1;
            }
        }
        SparseSymMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Per-element quadrature subdivision levels, shared between the original and
/// preconditioner assemblies of one case.
#[derive(Debug, Clone)]
pub struct QuadraturePlan {
    levels: Vec<u32>,
}

impl QuadraturePlan {
    pub fn uniform(mesh: &Mesh) -> Self {
        Self {
            levels: vec![1; mesh.num_elements()],
        }
    }

    /// Subdivides exactly the elements where any of the given fields is
    /// discontinuous.
    pub fn for_fields(mesh: &Mesh, fields: &[&TensorField]) -> Self {
        let levels = (0..mesh.num_elements())
            .map(|e| {
                let coords = mesh.element_coords(e);
                if fields.iter().any(|f| f.needs_subcells(&coords)) {
                    SUBCELL_LEVEL
                } else {
                    1
                }
            })
            .collect();
        Self { levels }
    }

    pub fn level(&self, element: usize) -> u32 {
        self.levels[element]
    }
}

/// Reference quadrature point: coordinates and weight.
type RefRule = Vec<([f64; 2], f64)>;

const GAUSS_2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// 2×2 Gauss per sub-cell of an s×s split of [-1,1]².
fn quad_rule(level: u32) -> RefRule {
    let s = level as usize;
    let w = 1.0 / (s * s) as f64;
    let mut rule = Vec::with_capacity(4 * s * s);
    for a in 0..s {
        for b in 0..s {
            for &gx in &GAUSS_2 {
                for &gy in &GAUSS_2 {
                    let xi = -1.0 + (2.0 * a as f64 + 1.0 + gx) / s as f64;
                    let eta = -1.0 + (2.0 * b as f64 + 1.0 + gy) / s as f64;
                    rule.push(([xi, eta], w));
                }
            }
        }
    }
    rule
}

/// Edge-midpoint rule on each of the s² congruent sub-triangles of the
/// reference triangle.
fn tri_rule(level: u32) -> RefRule {
    let s = level as usize;
    let h = 1.0 / s as f64;
    let w = 1.0 / (6.0 * (s * s) as f64);
    let mut rule = Vec::new();
    let mut push_tri = |v0: [f64; 2], v1: [f64; 2], v2: [f64; 2]| {
        for (a, b) in [(v0, v1), (v1, v2), (v2, v0)] {
            rule.push(([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0], w));
        }
    };
    for j in 0..s {
        for i in 0..(s - j) {
            let x = i as f64 * h;
            let y = j as f64 * h;
            push_tri([x, y], [x + h, y], [x, y + h]);
            if i + j < s - 1 {
                push_tri([x + h, y], [x + h, y + h], [x, y + h]);
            }
        }
    }
    rule
}

fn rule_for(elem: &Element, level: u32) -> RefRule {
    match elem {
        Element::Quad(_) => quad_rule(level),
        Element::Tri(_) => tri_rule(level),
    }
}

/// Values and physical gradients of the nodal basis at one quadrature point,
/// with the Jacobian weight folded in.
struct ShapeEval {
    phi: [f64; 4],
    grad: [[f64; 2]; 4],
    point: [f64; 2],
    /// reference weight × |det J|
    weight: f64,
}

fn eval_shapes(elem: &Element, coords: &[[f64; 2]], rp: [f64; 2], rw: f64) -> Result<ShapeEval> {
    match elem {
        Element::Quad(_) => {
            let (xi, eta) = (rp[0], rp[1]);
            let phi = [
                0.25 * (1.0 - xi) * (1.0 - eta),
                0.25 * (1.0 + xi) * (1.0 - eta),
                0.25 * (1.0 + xi) * (1.0 + eta),
                0.25 * (1.0 - xi) * (1.0 + eta),
            ];
            let dref = [
                [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
                [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
                [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
                [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
            ];
            let mut jac = [[0.0; 2]; 2];
            let mut point = [0.0; 2];
            for a in 0..4 {
                for r in 0..2 {
                    point[r] += phi[a] * coords[a][r];
                    for c in 0..2 {
                        jac[r][c] += coords[a][r] * dref[a][c];
                    }
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "nonpositive Jacobian {det} at quadrature point"
                )));
            }
            let inv = [
                [jac[1][1] / det, -jac[0][1] / det],
                [-jac[1][0] / det, jac[0][0] / det],
            ];
            let mut grad = [[0.0; 2]; 4];
            for a in 0..4 {
                // grad_x = J⁻ᵀ grad_ref
                grad[a][0] = inv[0][0] * dref[a][0] + inv[1][0] * dref[a][1];
                grad[a][1] = inv[0][1] * dref[a][0] + inv[1][1] * dref[a][1];
            }
            Ok(ShapeEval {
                phi,
                grad,
                point,
                weight: rw * det,
            })
        }
        Element::Tri(_) => {
            let (xi, eta) = (rp[0], rp[1]);
            let phi = [1.0 - xi - eta, xi, eta, 0.0];
            let dref = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            let jac = [
                [coords[1][0] - coords[0][0], coords[2][0] - coords[0][0]],
                [coords[1][1] - coords[0][1], coords[2][1] - coords[0][1]],
            ];
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "nonpositive Jacobian {det} at quadrature point"
                )));
            }
            let inv = [
                [jac[1][1] / det, -jac[0][1] / det],
                [-jac[1][0] / det, jac[0][0] / det],
            ];
            let mut grad = [[0.0; 2]; 4];
            for a in 0..3 {
                grad[a][0] = inv[0][0] * dref[a][0] + inv[1][0] * dref[a][1];
                grad[a][1] = inv[0][1] * dref[a][0] + inv[1][1] * dref[a][1];
            }
            let point = [
                phi[0] * coords[0][0] + phi[1] * coords[1][0] + phi[2] * coords[2][0],
                phi[0] * coords[0][1] + phi[1] * coords[1][1] + phi[2] * coords[2][1],
            ];
            Ok(ShapeEval {
                phi,
                grad,
                point,
                weight: rw * det,
            })
        }
    }
}

/// 𝖠_kl = ∫ ∇φ_l · A ∇φ_k dx + ∫_{∂Ω2} g3 φ_l φ_k dS over the free DOFs.
pub fn assemble_diffusion(
    mesh: &Mesh,
    field: &TensorField,
    g3: &RobinField,
    plan: &QuadraturePlan,
) -> Result<SparseSymMatrix> {
    if field.dim() != 2 {
        return Err(Error::Contract(format!(
            "diffusion assembly needs a 2×2 field, got {}×{}",
            field.dim(),
            field.dim()
        )));
    }
    let n = mesh.num_dofs();
    let mut builder = SparseSymBuilder::new(n);
    let mut local = [[0.0f64; 4]; 4];

    for e in 0..mesh.num_elements() {
        let elem = mesh.element(e);
        let coords = mesh.element_coords(e);
        let nv = elem.vertices().len();
        for row in local.iter_mut() {
            row.fill(0.0);
        }
        for &(rp, rw) in rule_for(elem, plan.level(e)).iter() {
            let sh = eval_shapes(elem, &coords, rp, rw)?;
            let a_mat = field.eval(e, sh.point);
            for b in 0..nv {
                // A ∇φ_b
                let gx = a_mat.get(0, 0) * sh.grad[b][0] + a_mat.get(0, 1) * sh.grad[b][1];
                let gy = a_mat.get(1, 0) * sh.grad[b][0] + a_mat.get(1, 1) * sh.grad[b][1];
                for a in b..nv {
                    let v = sh.weight * (sh.grad[a][0] * gx + sh.grad[a][1] * gy);
                    local[a][b] += v;
                    if a != b {
                        local[b][a] += v;
                    }
                }
            }
        }
        scatter_scalar(&mut builder, mesh, e, &local, nv);
    }

    if !g3.is_zero() {
        assemble_robin_mass(&mut builder, mesh, g3)?;
    }
    Ok(builder.finish())
}

fn scatter_scalar(
    builder: &mut SparseSymBuilder,
    mesh: &Mesh,
    e: usize,
    local: &[[f64; 4]; 4],
    nv: usize,
) {
    let verts = mesh.element(e).vertices();
    for a in 0..nv {
        let Some(i) = mesh.dof_of_vertex(verts[a]) else {
            continue;
        };
        for b in 0..nv {
            let Some(j) = mesh.dof_of_vertex(verts[b]) else {
                continue;
            };
            builder.add_symmetric_pair(i, j, local[a][b]);
        }
    }
}

/// Adds ∫ g3 φ_l φ_k dS over ROBIN-tagged edges (2-point Gauss per edge).
fn assemble_robin_mass(
    builder: &mut SparseSymBuilder,
    mesh: &Mesh,
    g3: &RobinField,
) -> Result<()> {
    for be in mesh.boundary_edges() {
        if be.tag != BoundaryTag::Robin {
            continue;
        }
        let (va, vb) = mesh.element(be.element).edge(be.local_edge);
        let (pa, pb) = mesh.edge_endpoints(be.element, be.local_edge);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let mut m = [[0.0f64; 2]; 2];
        for &g in &GAUSS_2 {
            let t = 0.5 * (1.0 + g);
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let w = 0.5 * len * g3.eval(x);
            let phi = [1.0 - t, t];
            for a in 0..2 {
                for b in 0..2 {
                    m[a][b] += w * phi[a] * phi[b];
                }
            }
        }
        let dofs = [mesh.dof_of_vertex(va), mesh.dof_of_vertex(vb)];
        for a in 0..2 {
            let Some(i) = dofs[a] else { continue };
            for b in 0..2 {
                let Some(j) = dofs[b] else { continue };
                builder.add_symmetric_pair(i, j, m[a][b]);
            }
        }
    }
    Ok(())
}

/// 𝖢 over the free DOFs of a homogeneous-Dirichlet mesh, order 2N with
/// component-major blocks (all u1-DOFs, then all u2-DOFs).
pub fn assemble_elasticity_2d(
    mesh: &Mesh,
    field: &TensorField,
    plan: &QuadraturePlan,
) -> Result<SparseSymMatrix> {
    if field.dim() != 3 {
        return Err(Error::Contract(format!(
            "2-D elasticity needs an m=3 Voigt field, got m={}",
            field.dim()
        )));
    }
    if mesh.boundary_edges().is_empty()
        || mesh
            .boundary_edges()
            .iter()
            .any(|b| b.tag != BoundaryTag::Dirichlet)
    {
        return Err(Error::UnsupportedBoundary(
            "elasticity assembly supports homogeneous Dirichlet boundaries only".into(),
        ));
    }
    let n = mesh.num_dofs();
    let mut builder = SparseSymBuilder::new(2 * n);
    let mut local = [[0.0f64; 8]; 8];

    for e in 0..mesh.num_elements() {
        let elem = mesh.element(e);
        let coords = mesh.element_coords(e);
        let nv = elem.vertices().len();
        let nl = 2 * nv;
        for row in local.iter_mut() {
            row.fill(0.0);
        }
        for &(rp, rw) in rule_for(elem, plan.level(e)).iter() {
            let sh = eval_shapes(elem, &coords, rp, rw)?;
            let c_mat = field.eval(e, sh.point);
            // Voigt strain columns: local DOF c·nv + a
            // u1 DOF a: (gx, 0, gy); u2 DOF a: (0, gy, gx)
            let mut bcols = [[0.0f64; 3]; 8];
            for a in 0..nv {
                bcols[a] = [sh.grad[a][0], 0.0, sh.grad[a][1]];
                bcols[nv + a] = [0.0, sh.grad[a][1], sh.grad[a][0]];
            }
            for bq in 0..nl {
                let mut cb = [0.0f64; 3];
                for r in 0..3 {
                    cb[r] = c_mat.get(r, 0) * bcols[bq][0]
                        + c_mat.get(r, 1) * bcols[bq][1]
                        + c_mat.get(r, 2) * bcols[bq][2];
                }
                for aq in bq..nl {
                    let v = sh.weight
                        * (bcols[aq][0] * cb[0] + bcols[aq][1] * cb[1] + bcols[aq][2] * cb[2]);
                    local[aq][bq] += v;
                    if aq != bq {
                        local[bq][aq] += v;
                    }
                }
            }
        }
        let verts = elem.vertices();
        let dof = |lq: usize| -> Option<usize> {
            let (comp, a) = (lq / nv, lq % nv);
            mesh.dof_of_vertex(verts[a]).map(|k| comp * n + k)
        };
        for aq in 0..nl {
            let Some(i) = dof(aq) else { continue };
            for bq in 0..nl {
                let Some(j) = dof(bq) else { continue };
                builder.add_symmetric_pair(i, j, local[aq][bq]);
            }
        }
    }
    Ok(builder.finish())
}

/// Load vector entries ∫ f φ_k dx for a scalar right-hand side.
pub fn assemble_load_scalar(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Result<LoadVector> {
    let mut load = vec![0.0; mesh.num_dofs()];
    for e in 0..mesh.num_elements() {
        let elem = mesh.element(e);
        let coords = mesh.element_coords(e);
        let nv = elem.vertices().len();
        for &(rp, rw) in rule_for(elem, 1).iter() {
            let sh = eval_shapes(elem, &coords, rp, rw)?;
            let fv = f(sh.point);
            if fv == 0.0 {
                continue;
            }
            for a in 0..nv {
                if let Some(k) = mesh.dof_of_vertex(elem.vertices()[a]) {
                    load[k] += sh.weight * fv * sh.phi[a];
                }
            }
        }
    }
    Ok(load)
}

/// Load vector for a vector-valued right-hand side, component-major layout
/// matching `assemble_elasticity_2d`.
pub fn assemble_load_vector2(
    mesh: &Mesh,
    f: impl Fn([f64; 2]) -> [f64; 2],
) -> Result<LoadVector> {
    let n = mesh.num_dofs();
    let mut load = vec![0.0; 2 * n];
    for e in 0..mesh.num_elements() {
        let elem = mesh.element(e);
        let coords = mesh.element_coords(e);
        let nv = elem.vertices().len();
        for &(rp, rw) in rule_for(elem, 1).iter() {
            let sh = eval_shapes(elem, &coords, rp, rw)?;
            let fv = f(sh.point);
            for a in 0..nv {
                if let Some(k) = mesh.dof_of_vertex(elem.vertices()[a]) {
                    load[k] += sh.weight * fv[0] * sh.phi[a];
                    load[n + k] += sh.weight * fv[1] * sh.phi[a];
                }
            }
        }
    }
    Ok(load)
}

//! Guaranteed two-sided bounds on the eigenvalues of preconditioned diffusion
//! and elasticity pencils.
//!
//! Per element, the essential extremes of the pointwise pencil eigenvalues
//! λ(Ã⁻¹(x)A(x)) are computed (merged with Robin coefficient ratio extremes on
//! attached boundary edges). Patch minima/maxima give one lower and one upper
//! bound per DOF; sorting both series non-decreasingly brackets the k-th
//! eigenvalue between the k-th entries. In the singular periodic/Neumann case
//! the pairing shifts by one on the lower side.

use std::io::Write;

use crate::error::{Error, Result};
use crate::material::{robin_ratio_extremes, RobinField, TensorField};
use crate::mesh::{BoundaryTag, Element, Mesh};
use crate::smalleig::{gen_eig_extremes, DenseSymMatrix, Spectrum};

/// Eigenvalue extremes of the pencil data over one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementAlpha {
    pub element: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// extremes are exact (constant data, or a closed-form range evaluator);
    /// sampled fallbacks clear this
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsMode {
    Regular,
    /// Pure periodic/Neumann pencil with shared kernel span{1}: eigenvalue
    /// λ_k is bracketed by lowerSorted[k−1] and upperSorted[k].
    SingularShift,
}

#[derive(Debug, Clone)]
pub struct BoundsResult {
    /// Raw per-DOF lower bounds (elasticity: the patch value replicated per
    /// displacement component, matching the component-major DOF layout).
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Sorting bijection r: sorted position -> raw index, stable with ties
    /// broken by DOF index.
    pub perm_lower: Vec<usize>,
    pub perm_upper: Vec<usize>,
    pub lower_sorted: Vec<f64>,
    pub upper_sorted: Vec<f64>,
    pub mode: BoundsMode,
    /// 1 for diffusion, d for elasticity.
    pub replication: usize,
    pub certified: bool,
}

impl BoundsResult {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

/// Reference sample points for the non-certified fallback: a 5×5 lattice
/// (quads) or a barycentric lattice (triangles), corners included.
fn sample_points(elem: &Element, coords: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = Vec::new();
    match elem {
        Element::Quad(_) => {
            for i in 0..5 {
                for j in 0..5 {
                    let xi = -1.0 + 0.5 * i as f64;
                    let eta = -1.0 + 0.5 * j as f64;
                    let phi = [
                        0.25 * (1.0 - xi) * (1.0 - eta),
                        0.25 * (1.0 + xi) * (1.0 - eta),
                        0.25 * (1.0 + xi) * (1.0 + eta),
                        0.25 * (1.0 - xi) * (1.0 + eta),
                    ];
                    let mut p = [0.0; 2];
                    for a in 0..4 {
                        p[0] += phi[a] * coords[a][0];
                        p[1] += phi[a] * coords[a][1];
                    }
                    pts.push(p);
                }
            }
        }
        Element::Tri(_) => {
            for i in 0..=4 {
                for j in 0..=(4 - i) {
                    let (l1, l2) = (i as f64 / 4.0, j as f64 / 4.0);
                    let l0 = 1.0 - l1 - l2;
                    pts.push([
                        l0 * coords[0][0] + l1 * coords[1][0] + l2 * coords[2][0],
                        l0 * coords[0][1] + l1 * coords[1][1] + l2 * coords[2][1],
                    ]);
                }
            }
        }
    }
    pts
}

fn pencil_extremes_at(
    a: &DenseSymMatrix,
    b: &DenseSymMatrix,
    element: usize,
) -> Result<(f64, f64)> {
    gen_eig_extremes(a, b).map_err(|e| match e {
        Error::NonpositivePivot { pivot } => Error::NotPositiveDefinite(format!(
            "preconditioner data on element {element} has nonpositive pivot {pivot}"
        )),
        other => other,
    })
}

/// Essential extremes of λ(Ã⁻¹(x)A(x)) over element `e`, merged with the
/// Robin coefficient ratio extremes on attached ROBIN edges where g3 ≠ 0.
pub fn element_alpha(
    mesh: &Mesh,
    e: usize,
    a_field: &TensorField,
    at_field: &TensorField,
    g3: &RobinField,
    g3t: &RobinField,
) -> Result<ElementAlpha> {
    if e >= mesh.num_elements() {
        return Err(Error::IndexOutOfRange(format!(
            "element {e} of {}",
            mesh.num_elements()
        )));
    }
    if a_field.dim() != at_field.dim() {
        return Err(Error::Contract(format!(
            "pencil field dimensions differ: {} vs {}",
            a_field.dim(),
            at_field.dim()
        )));
    }
    let coords = mesh.element_coords(e);
    let elem = mesh.element(e);

    let (mut lo, mut hi, mut certified) = if a_field.same_field(at_field) {
        (1.0, 1.0, true)
    } else if let (Some(corners), Some(at_const)) = (
        a_field.range_corners(e, &coords),
        at_field.constant_on_element(e, &coords),
    ) {
        // λ extremes over the element are attained on the corner set: the
        // pointwise min/max eigenvalue of the pencil is concave/convex in the
        // A-data, so extremes over each parameter segment sit at its ends.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &corners {
            let (l, h) = pencil_extremes_at(c, &at_const, e)?;
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi, true)
    } else if let (Some(a_const), Some(at_corners)) = (
        a_field.constant_on_element(e, &coords),
        at_field.range_corners(e, &coords),
    ) {
        // swap the pencil: λ(Ã⁻¹A) = 1/λ(A⁻¹Ã) pointwise, so extremes invert
        let mut swapped_lo = f64::INFINITY;
        let mut swapped_hi = f64::NEG_INFINITY;
        for c in &at_corners {
            let (l, h) = pencil_extremes_at(c, &a_const, e)?;
            swapped_lo = swapped_lo.min(l);
            swapped_hi = swapped_hi.max(h);
        }
        if swapped_lo <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "preconditioner data on element {e} is not positive definite"
            )));
        }
        (1.0 / swapped_hi, 1.0 / swapped_lo, true)
    } else {
        // sampling fallback, not certified
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in sample_points(elem, &coords) {
            let (l, h) = pencil_extremes_at(&a_field.eval(e, p), &at_field.eval(e, p), e)?;
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi, false)
    };

    if lo < 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "data on element {e} yields negative pencil eigenvalue {lo}"
        )));
    }

    for be in mesh.boundary_edges() {
        if be.element != e || be.tag != BoundaryTag::Robin {
            continue;
        }
        let edge = mesh.edge_endpoints(be.element, be.local_edge);
        if let Some(r) = robin_ratio_extremes(g3, g3t, edge)? {
            lo = lo.min(r.lo);
            hi = hi.max(r.hi);
            certified = certified && r.certified;
        }
    }

    Ok(ElementAlpha {
        element: e,
        alpha_min: lo,
        alpha_max: hi,
        certified,
    })
}

/// Stable argsort; ties keep the smaller index first.
fn argsort_stable(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("NaN bound"));
    idx
}

fn sorted_by(values: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&i| values[i]).collect()
}

/// Per-DOF patch bounds for the diffusion pencil (Ã⁻¹A), sorted into the
/// bracketing sequences.
pub fn diffusion_bounds(
    mesh: &Mesh,
    a_field: &TensorField,
    at_field: &TensorField,
    g3: &RobinField,
    g3t: &RobinField,
    singular: bool,
) -> Result<BoundsResult> {
    if singular {
        if mesh.has_dirichlet() {
            return Err(Error::Contract(
                "singular mode requires a pure periodic/Neumann mesh, found Dirichlet edges".into(),
            ));
        }
        let robin_active = mesh
            .boundary_edges()
            .iter()
            .any(|b| b.tag == BoundaryTag::Robin)
            && (!g3.is_zero() || !g3t.is_zero());
        if robin_active {
            return Err(Error::Contract(
                "singular mode is incompatible with nonzero Robin coefficients".into(),
            ));
        }
    }
    let alphas: Vec<ElementAlpha> = (0..mesh.num_elements())
        .map(|e| element_alpha(mesh, e, a_field, at_field, g3, g3t))
        .collect::<Result<_>>()?;

    let n = mesh.num_dofs();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut certified = true;
    for k in 0..n {
        let patch = mesh.patch_elements(k)?;
        if patch.is_empty() {
            return Err(Error::Topology(format!("DOF {k} has an empty patch")));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &e in patch {
            lo = lo.min(alphas[e].alpha_min);
            hi = hi.max(alphas[e].alpha_max);
            certified = certified && alphas[e].certified;
        }
        lower[k] = lo;
        upper[k] = hi;
    }

    let perm_lower = argsort_stable(&lower);
    let perm_upper = argsort_stable(&upper);
    let lower_sorted = sorted_by(&lower, &perm_lower);
    let upper_sorted = sorted_by(&upper, &perm_upper);
    Ok(BoundsResult {
        lower,
        upper,
        perm_lower,
        perm_upper,
        lower_sorted,
        upper_sorted,
        mode: if singular {
            BoundsMode::SingularShift
        } else {
            BoundsMode::Regular
        },
        replication: 1,
        certified,
    })
}

/// Patch bounds for the elasticity pencil (C̃⁻¹C): one value pair per scalar
/// basis function, replicated d times and sorted.
pub fn elasticity_bounds(
    mesh: &Mesh,
    c_field: &TensorField,
    ct_field: &TensorField,
    d: usize,
) -> Result<BoundsResult> {
    if d != 2 {
        return Err(Error::Contract(format!(
            "elasticity bounds are assembled for d=2 only, got d={d}"
        )));
    }
    let alphas: Vec<ElementAlpha> = (0..mesh.num_elements())
        .map(|e| {
            element_alpha(
                mesh,
                e,
                c_field,
                ct_field,
                &RobinField::Zero,
                &RobinField::Zero,
            )
        })
        .collect::<Result<_>>()?;

    let n = mesh.num_dofs();
    let mut hat_lower = vec![0.0; n];
    let mut hat_upper = vec![0.0; n];
    let mut certified = true;
    for k in 0..n {
        let patch = mesh.patch_elements(k)?;
        if patch.is_empty() {
            return Err(Error::Topology(format!("DOF {k} has an empty patch")));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &e in patch {
            lo = lo.min(alphas[e].alpha_min);
            hi = hi.max(alphas[e].alpha_max);
            certified = certified && alphas[e].certified;
        }
        hat_lower[k] = lo;
        hat_upper[k] = hi;
    }

    // replicate d-fold, consistent with the component-major DOF layout
    let mut lower = Vec::with_capacity(d * n);
    let mut upper = Vec::with_capacity(d * n);
    for _ in 0..d {
        lower.extend_from_slice(&hat_lower);
        upper.extend_from_slice(&hat_upper);
    }
    let perm_lower = argsort_stable(&lower);
    let perm_upper = argsort_stable(&upper);
    let lower_sorted = sorted_by(&lower, &perm_lower);
    let upper_sorted = sorted_by(&upper, &perm_upper);
    Ok(BoundsResult {
        lower,
        upper,
        perm_lower,
        perm_upper,
        lower_sorted,
        upper_sorted,
        mode: BoundsMode::Regular,
        replication: d,
        certified,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketViolation {
    /// 1-based eigenvalue index, ascending.
    pub index: usize,
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub pass: bool,
    pub checks: usize,
    pub violations: Vec<BracketViolation>,
    /// min over k of λ_k − lowerSorted (negative means violation before slack)
    pub min_lower_margin: f64,
    pub min_upper_margin: f64,
    pub certified: bool,
}

/// Checks the bracketing theorem against an oracle spectrum with slack
/// ε = 1e-9·max(1, |λ_k|) per index.
pub fn verify_bracketing(bounds: &BoundsResult, spectrum: &Spectrum) -> Result<SpectrumReport> {
    let n = bounds.len();
    let expected = match bounds.mode {
        BoundsMode::Regular => n,
        BoundsMode::SingularShift => n - 1,
    };
    if spectrum.len() != expected {
        return Err(Error::Contract(format!(
            "spectrum has {} values, bounds expect {expected}",
            spectrum.len()
        )));
    }
    let mut violations = Vec::new();
    let mut min_lower_margin = f64::INFINITY;
    let mut min_upper_margin = f64::INFINITY;
    let mut push_check = |index: usize, lambda: f64, lower: f64, upper: f64| {
        let eps = 1e-9 * lambda.abs().max(1.0);
        min_lower_margin = min_lower_margin.min(lambda - lower);
        min_upper_margin = min_upper_margin.min(upper - lambda);
        if lambda < lower - eps || lambda > upper + eps {
            violations.push(BracketViolation {
                index,
                lambda,
                lower,
                upper,
            });
        }
    };
    match bounds.mode {
        BoundsMode::Regular => {
            for (k, &lambda) in spectrum.values().iter().enumerate() {
                push_check(k + 1, lambda, bounds.lower_sorted[k], bounds.upper_sorted[k]);
            }
        }
        BoundsMode::SingularShift => {
            // deflated spectrum entry j is λ_{j+2}: λ_k ∈ [L_{k-1}, U_k]
            for (j, &lambda) in spectrum.values().iter().enumerate() {
                push_check(
                    j + 2,
                    lambda,
                    bounds.lower_sorted[j],
                    bounds.upper_sorted[j + 1],
                );
            }
        }
    }
    Ok(SpectrumReport {
        pass: violations.is_empty(),
        checks: expected,
        violations,
        min_lower_margin,
        min_upper_margin,
        certified: bounds.certified,
    })
}

/// Verifies the exact-eigenvalue lemma preconditions (Ã⁻¹A = c·I on every
/// element of the given patches, no attached Robin edge with a nonzero
/// coefficient) and counts oracle eigenvalues within 1e-8 of c. The lemma
/// guarantees the count is at least the number of patches (times d for
/// vector-valued problems).
#[allow(clippy::too_many_arguments)]
pub fn exact_eigenvalue_check(
    mesh: &Mesh,
    a_field: &TensorField,
    at_field: &TensorField,
    g3: &RobinField,
    g3t: &RobinField,
    c: f64,
    patch_dofs: &[usize],
    spectrum: &Spectrum,
) -> Result<usize> {
    let tol = 1e-12 * c.abs().max(1.0);
    for &k in patch_dofs {
        let patch = mesh.patch_elements(k)?;
        for &e in patch {
            let alpha = element_alpha(mesh, e, a_field, at_field, g3, g3t)?;
            if !alpha.certified {
                return Err(Error::Contract(format!(
                    "patch of DOF {k}: element {e} has no certified range"
                )));
            }
            if (alpha.alpha_min - c).abs() > tol || (alpha.alpha_max - c).abs() > tol {
                return Err(Error::Contract(format!(
                    "patch of DOF {k}: element {e} has pencil range [{}, {}], not c={c}",
                    alpha.alpha_min, alpha.alpha_max
                )));
            }
            let robin_here = mesh
                .boundary_edges()
                .iter()
                .any(|b| b.element == e && b.tag == BoundaryTag::Robin);
            if robin_here && (!g3.is_zero() || !g3t.is_zero()) {
                return Err(Error::Contract(format!(
                    "patch of DOF {k}: element {e} attaches to a Robin edge with nonzero \
                     coefficient"
                )));
            }
        }
    }
    Ok(spectrum
        .values()
        .iter()
        .filter(|&&l| (l - c).abs() <= 1e-8)
        .count())
}

/// Bounds CSV: `k,lambda_L,lambda_U[,lambda]`, one row per sorted index, 17
/// significant digits. In singular-shift mode the first eigenvalue column
/// entry is the known zero kernel eigenvalue.
pub fn write_bounds_csv(
    bounds: &BoundsResult,
    spectrum: Option<&Spectrum>,
    w: &mut impl Write,
) -> std::io::Result<()> {
    let with_lambda = spectrum.is_some();
    if with_lambda {
        writeln!(w, "k,lambda_L,lambda_U,lambda")?;
    } else {
        writeln!(w, "k,lambda_L,lambda_U")?;
    }
    for k in 0..bounds.len() {
        let lo = bounds.lower_sorted[k];
        let hi = bounds.upper_sorted[k];
        match (spectrum, bounds.mode) {
            (Some(s), BoundsMode::Regular) => {
                writeln!(w, "{},{:.16e},{:.16e},{:.16e}", k + 1, lo, hi, s.values()[k])?;
            }
            (Some(s), BoundsMode::SingularShift) => {
                let lambda = if k == 0 { 0.0 } else { s.values()[k - 1] };
                writeln!(w, "{},{:.16e},{:.16e},{:.16e}", k + 1, lo, hi, lambda)?;
            }
            (None, _) => writeln!(w, "{},{:.16e},{:.16e}", k + 1, lo, hi)?,
        }
    }
    Ok(())
}

/// Oracle spectrum CSV: `k,lambda`.
pub fn write_spectrum_csv(spectrum: &Spectrum, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "k,lambda")?;
    for (k, v) in spectrum.values().iter().enumerate() {
        writeln!(w, "{},{:.16e}", k + 1, v)?;
    }
    Ok(())
}

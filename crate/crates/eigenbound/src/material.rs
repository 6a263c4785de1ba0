//! Coefficient fields for the diffusion and elasticity operators: point
//! evaluation, certified per-element range data for the bounds, Robin
//! boundary coefficients, and the bundled example fields.

use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::smalleig::{cholesky, DenseSymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Constant,
    ElementConstant,
    ClosedForm,
}

type EvalFn = dyn Fn([f64; 2]) -> DenseSymMatrix + Send + Sync;
/// Maps element vertex coordinates to the finite set of extremal field values
/// attained (in the essential sense) on that element. Pencil eigenvalue
/// extremes over the element are then exact min/max over this set, for any
/// constant comparison field.
type RangeFn = dyn Fn(&[[f64; 2]]) -> Vec<DenseSymMatrix> + Send + Sync;
type SubcellFn = dyn Fn(&[[f64; 2]]) -> bool + Send + Sync;

struct ClosedForm {
    eval: Box<EvalFn>,
    range: Option<Box<RangeFn>>,
    needs_subcells: Box<SubcellFn>,
}

enum FieldImpl {
    Constant(DenseSymMatrix),
    ElementConstant(Arc<Vec<DenseSymMatrix>>),
    ClosedForm(Arc<ClosedForm>),
}

/// Symmetric positive definite d×d (diffusion) or m×m (Voigt elasticity)
/// coefficient field A(x), Ã(x), C(x) or C̃(x).
pub struct TensorField {
    dim: usize,
    inner: FieldImpl,
}

impl TensorField {
    pub fn constant(m: DenseSymMatrix) -> Result<Self> {
        validate_spd(&m, "constant field")?;
        Ok(Self {
            dim: m.order(),
            inner: FieldImpl::Constant(m),
        })
    }

    pub fn element_constant(dim: usize, values: Vec<DenseSymMatrix>) -> Result<Self> {
        for (e, m) in values.iter().enumerate() {
            if m.order() != dim {
                return Err(Error::Contract(format!(
                    "element {e}: matrix order {} does not match field dimension {dim}",
                    m.order()
                )));
            }
            validate_spd(m, &format!("element {e}"))?;
        }
        Ok(Self {
            dim,
            inner: FieldImpl::ElementConstant(Arc::new(values)),
        })
    }

    pub fn closed_form(
        dim: usize,
        eval: impl Fn([f64; 2]) -> DenseSymMatrix + Send + Sync + 'static,
        range: Option<Box<RangeFn>>,
        needs_subcells: impl Fn(&[[f64; 2]]) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            inner: FieldImpl::ClosedForm(Arc::new(ClosedForm {
                eval: Box::new(eval),
                range,
                needs_subcells: Box::new(needs_subcells),
            })),
        }
    }

    /// Matrix size: d for diffusion data, m for Voigt elasticity data.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> FieldKind {
        match &self.inner {
            FieldImpl::Constant(_) => FieldKind::Constant,
            FieldImpl::ElementConstant(_) => FieldKind::ElementConstant,
            FieldImpl::ClosedForm(_) => FieldKind::ClosedForm,
        }
    }

    pub fn eval(&self, element: usize, point: [f64; 2]) -> DenseSymMatrix {
        match &self.inner {
            FieldImpl::Constant(m) => m.clone(),
            FieldImpl::ElementConstant(v) => v[element].clone(),
            FieldImpl::ClosedForm(cf) => (cf.eval)(point),
        }
    }

    /// Certified extremal value set on an element, if available.
    ///
    /// For constant and element-constant data this is the single attained
    /// matrix. For closed-form data it is the field's exact range evaluator;
    /// `None` means only the non-certified sampling fallback applies.
    pub fn range_corners(
        &self,
        element: usize,
        coords: &[[f64; 2]],
    ) -> Option<Vec<DenseSymMatrix>> {
        match &self.inner {
            FieldImpl::Constant(m) => Some(vec![m.clone()]),
            FieldImpl::ElementConstant(v) => Some(vec![v[element].clone()]),
            FieldImpl::ClosedForm(cf) => cf.range.as_ref().map(|r| r(coords)),
        }
    }

    /// True when the field value is constant over the given element, so a
    /// single evaluation represents it exactly.
    pub fn constant_on_element(&self, element: usize, coords: &[[f64; 2]]) -> Option<DenseSymMatrix> {
        match &self.inner {
            FieldImpl::Constant(m) => Some(m.clone()),
            FieldImpl::ElementConstant(v) => Some(v[element].clone()),
            FieldImpl::ClosedForm(cf) => match &cf.range {
                Some(r) => {
                    let corners = r(coords);
                    if corners.len() == 1 {
                        Some(corners.into_iter().next().unwrap())
                    } else {
                        None
                    }
                }
                None => None,
            },
        }
    }

    /// Whether quadrature on this element should subdivide (the field has an
    /// intra-element discontinuity there).
    pub fn needs_subcells(&self, coords: &[[f64; 2]]) -> bool {
        match &self.inner {
            FieldImpl::Constant(_) | FieldImpl::ElementConstant(_) => false,
            FieldImpl::ClosedForm(cf) => (cf.needs_subcells)(coords),
        }
    }

    /// Identity of the underlying data (shared storage), used to shortcut the
    /// pencil of a field against itself.
    pub fn same_field(&self, other: &TensorField) -> bool {
        match (&self.inner, &other.inner) {
            (FieldImpl::Constant(a), FieldImpl::Constant(b)) => a == b,
            (FieldImpl::ElementConstant(a), FieldImpl::ElementConstant(b)) => Arc::ptr_eq(a, b),
            (FieldImpl::ClosedForm(a), FieldImpl::ClosedForm(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Clone for TensorField {
    fn clone(&self) -> Self {
        let inner = match &self.inner {
            FieldImpl::Constant(m) => FieldImpl::Constant(m.clone()),
            FieldImpl::ElementConstant(v) => FieldImpl::ElementConstant(Arc::clone(v)),
            FieldImpl::ClosedForm(cf) => FieldImpl::ClosedForm(Arc::clone(cf)),
        };
        Self {
            dim: self.dim,
            inner,
        }
    }
}

fn validate_spd(m: &DenseSymMatrix, what: &str) -> Result<()> {
    cholesky(m).map_err(|e| match e {
        Error::NonpositivePivot { pivot } => Error::NotPositiveDefinite(format!(
            "{what}: nonpositive pivot at row {pivot}"
        )),
        other => other,
    })?;
    Ok(())
}

/// sign with sign(0) := +1, so evaluation at a discontinuity still yields a
/// positive definite matrix; essential inf/sup ignore the measure-zero set.
#[inline]
pub fn sign_pos(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Exact range of cos over [lo, hi].
pub fn cos_range(lo: f64, hi: f64) -> (f64, f64) {
    debug_assert!(lo <= hi);
    let mut min = f64::min(lo.cos(), hi.cos());
    let mut max = f64::max(lo.cos(), hi.cos());
    // interior critical points k·π
    let k0 = (lo / std::f64::consts::PI).ceil() as i64;
    let k1 = (hi / std::f64::consts::PI).floor() as i64;
    for k in k0..=k1 {
        if k.rem_euclid(2) == 0 {
            max = 1.0;
        } else {
            min = -1.0;
        }
    }
    (min, max)
}

/// Exact range of sin over [lo, hi].
pub fn sin_range(lo: f64, hi: f64) -> (f64, f64) {
    debug_assert!(lo <= hi);
    let mut min = f64::min(lo.sin(), hi.sin());
    let mut max = f64::max(lo.sin(), hi.sin());
    // interior critical points π/2 + k·π
    use std::f64::consts::{FRAC_PI_2, PI};
    let k0 = ((lo - FRAC_PI_2) / PI).ceil() as i64;
    let k1 = ((hi - FRAC_PI_2) / PI).floor() as i64;
    for k in k0..=k1 {
        if k.rem_euclid(2) == 0 {
            max = 1.0;
        } else {
            min = -1.0;
        }
    }
    (min, max)
}

/// Isotropic elasticity matrix in Voigt notation: 3×3 plane strain for d=2,
/// 6×6 for d=3.
pub fn voigt_isotropic(e: f64, nu: f64, d: usize) -> Result<DenseSymMatrix> {
    let e_ok = e > 0.0;
    if !e_ok {
        return Err(Error::InvalidParameter(format!(
            "Young modulus must be positive, got {e}"
        )));
    }
    let nu_ok = nu > -1.0 && nu < 0.5;
    if !nu_ok {
        return Err(Error::InvalidParameter(format!(
            "Poisson ratio must lie in (-1, 1/2), got {nu}"
        )));
    }
    match d {
        2 => {
            let f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
            let mut m = DenseSymMatrix::zeros(3);
            m.set_sym(0, 0, f * (1.0 - nu));
            m.set_sym(1, 1, f * (1.0 - nu));
            m.set_sym(0, 1, f * nu);
            m.set_sym(2, 2, f * 0.5 * (1.0 - 2.0 * nu));
            Ok(m)
        }
        3 => {
            let c11 = e * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu));
            let c12 = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
            let c44 = e / (2.0 * (1.0 + nu));
            let mut m = DenseSymMatrix::zeros(6);
            for i in 0..3 {
                m.set_sym(i, i, c11);
                m.set_sym(i + 3, i + 3, c44);
                for j in 0..i {
                    m.set_sym(i, j, c12);
                }
            }
            Ok(m)
        }
        other => Err(Error::InvalidParameter(format!(
            "dimension must be 2 or 3, got {other}"
        ))),
    }
}

fn bbox(coords: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for c in coords {
        for a in 0..2 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    (lo, hi)
}

/// Signs taken by a coordinate over [lo, hi] on a set of positive measure.
fn interval_signs(lo: f64, hi: f64) -> (bool, bool) {
    (hi > 0.0, lo < 0.0) // (positive attained, negative attained)
}

fn mat2(a11: f64, a12: f64, a22: f64) -> DenseSymMatrix {
    let mut m = DenseSymMatrix::zeros(2);
    m.set_sym(0, 0, a11);
    m.set_sym(1, 1, a22);
    m.set_sym(0, 1, a12);
    m
}

fn ex41_matrix(a: f64, b: f64) -> DenseSymMatrix {
    mat2(a, b, a)
}

fn ex41_a_field() -> TensorField {
    TensorField::closed_form(
        2,
        |p| {
            let a = 1.0 + 0.3 * sign_pos(p[1].sin());
            let b = 0.3 + 0.1 * p[0].cos();
            ex41_matrix(a, b)
        },
        Some(Box::new(|coords: &[[f64; 2]]| {
            let (lo, hi) = bbox(coords);
            // sign(sin(y)) on (-pi, pi) is the sign of y
            let (pos, neg) = interval_signs(lo[1], hi[1]);
            let mut a_vals = Vec::new();
            if neg {
                a_vals.push(0.7);
            }
            if pos {
                a_vals.push(1.3);
            }
            let (cmin, cmax) = cos_range(lo[0], hi[0]);
            let b_lo = 0.3 + 0.1 * cmin;
            let b_hi = 0.3 + 0.1 * cmax;
            let mut out = Vec::with_capacity(a_vals.len() * 2);
            for &a in &a_vals {
                out.push(ex41_matrix(a, b_lo));
                if b_hi != b_lo {
                    out.push(ex41_matrix(a, b_hi));
                }
            }
            out
        })),
        |coords| {
            let (lo, hi) = bbox(coords);
            lo[1] < 0.0 && hi[1] > 0.0
        },
    )
}

fn ex45_c_field() -> TensorField {
    let base = voigt_isotropic(1.0, 0.2, 2).expect("valid isotropic parameters");
    let base_range = base.clone();
    TensorField::closed_form(
        3,
        move |p| {
            let e = 1.0 + 0.3 * sign_pos(p[0] * p[1]);
            base.scaled(e)
        },
        Some(Box::new(move |coords: &[[f64; 2]]| {
            let (lo, hi) = bbox(coords);
            let (xp, xn) = interval_signs(lo[0], hi[0]);
            let (yp, yn) = interval_signs(lo[1], hi[1]);
            let prod_pos = (xp && yp) || (xn && yn);
            let prod_neg = (xp && yn) || (xn && yp);
            let mut out = Vec::new();
            if prod_neg {
                out.push(base_range.scaled(0.7));
            }
            if prod_pos {
                out.push(base_range.scaled(1.3));
            }
            out
        })),
        |coords| {
            let (lo, hi) = bbox(coords);
            let (xp, xn) = interval_signs(lo[0], hi[0]);
            let (yp, yn) = interval_signs(lo[1], hi[1]);
            let prod_pos = (xp && yp) || (xn && yn);
            let prod_neg = (xp && yn) || (xn && yp);
            prod_pos && prod_neg
        },
    )
}

fn ex46_a_field() -> TensorField {
    TensorField::closed_form(
        2,
        |p| {
            let s = (p[0] + p[1]).sin();
            mat2(s, 0.0, s)
        },
        Some(Box::new(|coords: &[[f64; 2]]| {
            // x1 + x2 is linear, so its range over the element is spanned by
            // the vertex values
            let mut tmin = f64::INFINITY;
            let mut tmax = f64::NEG_INFINITY;
            for c in coords {
                let t = c[0] + c[1];
                tmin = tmin.min(t);
                tmax = tmax.max(t);
            }
            let (smin, smax) = sin_range(tmin, tmax);
            if smin == smax {
                vec![mat2(smin, 0.0, smin)]
            } else {
                vec![mat2(smin, 0.0, smin), mat2(smax, 0.0, smax)]
            }
        })),
        |_| false,
    )
}

/// Bundled example fields by case id.
pub fn example_field(name: &str) -> Result<TensorField> {
    match name {
        "ex41-A" => Ok(ex41_a_field()),
        "ex41-Atilde1" => TensorField::constant(mat2(1.0, 0.0, 1.0)),
        "ex41-Atilde2" => TensorField::constant(mat2(1.0, 0.3, 1.0)),
        "ex45-C" => Ok(ex45_c_field()),
        "ex45-Ctilde1" => TensorField::constant(voigt_isotropic(1.0, 0.0, 2)?),
        "ex45-Ctilde2" => TensorField::constant(voigt_isotropic(1.0, 0.2, 2)?),
        "ex46-A" => Ok(ex46_a_field()),
        "ex46-I" => TensorField::constant(mat2(1.0, 0.0, 1.0)),
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

type ScalarFn = dyn Fn([f64; 2]) -> f64 + Send + Sync;

/// Nonnegative Robin coefficient g3 (or g̃3) on ∂Ω2.
#[derive(Clone)]
pub enum RobinField {
    /// Neumann: g3 ≡ 0.
    Zero,
    Constant(f64),
    ClosedForm {
        profile: Arc<ScalarFn>,
        scale: f64,
        /// profile > 0 everywhere on the Robin boundary (enables certified
        /// ratio extremes for shared-profile pairs)
        strictly_positive: bool,
    },
}

impl RobinField {
    pub fn constant(c: f64) -> Result<Self> {
        if c < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Robin coefficient must be nonnegative, got {c}"
            )));
        }
        if c == 0.0 {
            Ok(Self::Zero)
        } else {
            Ok(Self::Constant(c))
        }
    }

    /// The ex41(c) coefficient g3(x) = 1 + x2².
    pub fn one_plus_x2_squared() -> Self {
        Self::ClosedForm {
            profile: Arc::new(|p: [f64; 2]| 1.0 + p[1] * p[1]),
            scale: 1.0,
            strictly_positive: true,
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if factor < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scale must be nonnegative, got {factor}"
            )));
        }
        Ok(match self {
            Self::Zero => Self::Zero,
            Self::Constant(c) => Self::Constant(c * factor),
            Self::ClosedForm {
                profile,
                scale,
                strictly_positive,
            } => {
                if factor == 0.0 {
                    Self::Zero
                } else {
                    Self::ClosedForm {
                        profile: Arc::clone(profile),
                        scale: scale * factor,
                        strictly_positive: *strictly_positive,
                    }
                }
            }
        })
    }

    pub fn eval(&self, point: [f64; 2]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::ClosedForm { profile, scale, .. } => scale * profile(point),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero) || matches!(self, Self::Constant(c) if *c == 0.0)
    }
}

/// Essential extremes of g3/g̃3 over an edge, restricted to where g3 ≠ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioExtremes {
    pub lo: f64,
    pub hi: f64,
    pub certified: bool,
}

/// Ratio extremes of a Robin coefficient pair along an edge. `None` means
/// g3 ≡ 0 there (Neumann special case: the branch contributes nothing).
pub fn robin_ratio_extremes(
    g3: &RobinField,
    g3t: &RobinField,
    edge: ([f64; 2], [f64; 2]),
) -> Result<Option<RatioExtremes>> {
    use RobinField as R;
    match (g3, g3t) {
        (g, _) if g.is_zero() => Ok(None),
        (_, t) if t.is_zero() => Err(Error::IllPosedRatio(
            "g3 is nonzero where g̃3 vanishes".into(),
        )),
        (R::Constant(a), R::Constant(b)) => Ok(Some(RatioExtremes {
            lo: a / b,
            hi: a / b,
            certified: true,
        })),
        (
            R::ClosedForm {
                profile: pa,
                scale: sa,
                strictly_positive: pos,
            },
            R::ClosedForm {
                profile: pb,
                scale: sb,
                ..
            },
        ) if Arc::ptr_eq(pa, pb) && *pos => {
            let r = sa / sb;
            Ok(Some(RatioExtremes {
                lo: r,
                hi: r,
                certified: true,
            }))
        }
        _ => sampled_ratio_extremes(g3, g3t, edge),
    }
}

/// Sampling fallback for mismatched coefficient kinds; not certified.
fn sampled_ratio_extremes(
    g3: &RobinField,
    g3t: &RobinField,
    edge: ([f64; 2], [f64; 2]),
) -> Result<Option<RatioExtremes>> {
    const SAMPLES: usize = 33;
    let (p, q) = edge;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for i in 0..SAMPLES {
        let t = i as f64 / (SAMPLES - 1) as f64;
        let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
        let a = g3.eval(x);
        if a == 0.0 {
            continue;
        }
        let b = g3t.eval(x);
        if b == 0.0 {
            return Err(Error::IllPosedRatio(format!(
                "g3({x:?}) = {a} but g̃3 vanishes there"
            )));
        }
        let r = a / b;
        lo = lo.min(r);
        hi = hi.max(r);
        any = true;
    }
    if !any {
        return Ok(None);
    }
    Ok(Some(RatioExtremes {
        lo,
        hi,
        certified: false,
    }))
}

#[derive(Deserialize)]
struct FieldJson {
    kind: String,
    d: usize,
    values: serde_json::Value,
}

/// Loads a constant or element-constant field from JSON:
/// `{"kind":"constant","d":2,"values":[[1,0],[0,1]]}` or
/// `{"kind":"element_constant","d":2,"values":[[[...]], ...]}`.
pub fn field_from_json(text: &str) -> Result<TensorField> {
    let parsed: FieldJson =
        serde_json::from_str(text).map_err(|e| Error::FieldJson(e.to_string()))?;
    let matrix_from = |v: &serde_json::Value| -> Result<DenseSymMatrix> {
        let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone())
            .map_err(|e| Error::FieldJson(format!("bad matrix: {e}")))?;
        if rows.len() != parsed.d {
            return Err(Error::FieldJson(format!(
                "matrix order {} does not match d={}",
                rows.len(),
                parsed.d
            )));
        }
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        DenseSymMatrix::from_rows(&refs)
            .map_err(|e| Error::FieldJson(format!("matrix check failed: {e}")))
    };
    match parsed.kind.as_str() {
        "constant" => TensorField::constant(matrix_from(&parsed.values)?),
        "element_constant" => {
            let list = parsed
                .values
                .as_array()
                .ok_or_else(|| Error::FieldJson("values must be an array of matrices".into()))?;
            let mats: Vec<DenseSymMatrix> =
                list.iter().map(matrix_from).collect::<Result<_>>()?;
            TensorField::element_constant(parsed.d, mats)
        }
        other => Err(Error::FieldJson(format!("unknown field kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smalleig::gen_eig_extremes;
    use std::f64::consts::PI;

    #[test]
    fn voigt_isotropic_plane_strain_nu0() {
        let m = voigt_isotropic(1.0, 0.0, 2).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(2, 2), 0.5);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn voigt_isotropic_plane_strain_nu02() {
        let m = voigt_isotropic(1.0, 0.2, 2).unwrap();
        assert!((m.get(0, 0) - 0.8 / 0.72).abs() < 1e-15);
        assert!((m.get(0, 1) - 0.2 / 0.72).abs() < 1e-15);
        assert!((m.get(2, 2) - 0.3 / 0.72).abs() < 1e-15);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn voigt_isotropic_3d() {
        let m = voigt_isotropic(1.0, 0.2, 3).unwrap();
        assert!((m.get(0, 0) - 0.8 / 0.72).abs() < 1e-15);
        assert!((m.get(0, 1) - 0.2 / 0.72).abs() < 1e-15);
        assert!((m.get(3, 3) - 1.0 / 2.4).abs() < 1e-15);
        assert_eq!(m.get(0, 3), 0.0);
        assert_eq!(m.get(1, 2), m.get(0, 1));
    }

    #[test]
    fn voigt_isotropic_rejects_bad_nu() {
        assert!(voigt_isotropic(1.0, 0.5, 2).is_err());
        assert!(voigt_isotropic(1.0, -1.0, 2).is_err());
        assert!(voigt_isotropic(0.0, 0.2, 2).is_err());
    }

    #[test]
    fn voigt_isotropic_pd_over_nu_grid() {
        for i in 0..48 {
            let nu = -0.99 + 1.48 * (i as f64) / 47.0;
            for d in [2usize, 3] {
                let m = voigt_isotropic(2.0, nu, d).unwrap();
                // constant() runs the Cholesky PD check
                TensorField::constant(m).unwrap();
            }
        }
    }

    #[test]
    fn example_field_values() {
        let at2 = example_field("ex41-Atilde2").unwrap();
        let m = at2.eval(0, [0.4, -2.0]);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.3);

        let a = example_field("ex41-A").unwrap();
        let m = a.eval(0, [0.0, 1.0]); // sin(1) > 0, cos(0) = 1
        assert_eq!(m.get(0, 0), 1.3);
        assert_eq!(m.get(0, 1), 0.4);
        assert_eq!(m.get(1, 0), 0.4);
        assert_eq!(m.get(1, 1), 1.3);

        let g = example_field("ex46-A").unwrap();
        let m = g.eval(0, [0.5, 0.5]);
        assert!((m.get(0, 0) - 1.0f64.sin()).abs() < 1e-15);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 1), m.get(0, 0));
    }

    #[test]
    fn example_field_unknown_name() {
        assert!(matches!(
            example_field("ex99-A"),
            Err(Error::UnknownCase(_))
        ));
    }

    #[test]
    fn ex41_range_honors_sign_and_cos() {
        let a = example_field("ex41-A").unwrap();
        // element strictly in sin(x2) > 0 with cos(x1) range hitting 1
        let coords = [[-0.1, 0.5], [0.1, 0.5], [0.1, 0.7], [-0.1, 0.7]];
        let corners = a.range_corners(0, &coords).unwrap();
        // single sign, two b values
        assert_eq!(corners.len(), 2);
        for c in &corners {
            assert_eq!(c.get(0, 0), 1.3);
        }
        let bs: Vec<f64> = corners.iter().map(|c| c.get(0, 1)).collect();
        assert!(bs.contains(&0.4)); // cos max = 1 inside the x-range
        // element straddling x2 = 0 yields both signs
        let coords = [[1.0, -0.2], [1.5, -0.2], [1.5, 0.2], [1.0, 0.2]];
        let corners = a.range_corners(0, &coords).unwrap();
        let avals: Vec<f64> = corners.iter().map(|c| c.get(0, 0)).collect();
        assert!(avals.contains(&0.7) && avals.contains(&1.3));
        assert!(a.needs_subcells(&coords));
    }

    #[test]
    fn ex46_range_reaches_one_on_diagonal_crossing() {
        let g = example_field("ex46-A").unwrap();
        // element crossed by x1 + x2 = pi/2
        let c = PI / 4.0;
        let h = 0.1;
        let coords = [[c - h, c - h], [c + h, c - h], [c + h, c + h], [c - h, c + h]];
        let corners = g.range_corners(0, &coords).unwrap();
        let max = corners
            .iter()
            .map(|m| m.get(0, 0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn evaluator_matrices_symmetric_and_pd() {
        for name in ["ex41-A", "ex45-C", "ex46-A"] {
            let f = example_field(name).unwrap();
            for &p in &[[0.3, 0.4], [-1.0, 2.0], [0.9, -0.7], [0.2, 0.1]] {
                let m = f.eval(0, p);
                for i in 0..m.order() {
                    for j in 0..m.order() {
                        assert_eq!(m.get(i, j), m.get(j, i));
                    }
                }
                let id = {
                    let mut id = DenseSymMatrix::zeros(m.order());
                    for i in 0..m.order() {
                        id.set_sym(i, i, 1.0);
                    }
                    id
                };
                let (lo, _) = gen_eig_extremes(&m, &id).unwrap();
                assert!(lo > 0.0, "{name} at {p:?} has eigenvalue {lo}");
            }
        }
    }

    #[test]
    fn robin_ratio_identical_fields() {
        let g = RobinField::one_plus_x2_squared();
        let edge = ([PI, -1.0], [PI, 1.0]);
        let r = robin_ratio_extremes(&g, &g.clone(), edge).unwrap().unwrap();
        assert_eq!((r.lo, r.hi), (1.0, 1.0));
        assert!(r.certified);
    }

    #[test]
    fn robin_ratio_scaled() {
        let g3t = RobinField::one_plus_x2_squared();
        let g3 = g3t.scaled(2.0).unwrap();
        let r = robin_ratio_extremes(&g3, &g3t, ([0.0, 0.0], [0.0, 1.0]))
            .unwrap()
            .unwrap();
        assert_eq!((r.lo, r.hi), (2.0, 2.0));
        assert!(r.certified);
    }

    #[test]
    fn robin_ratio_neumann_is_none() {
        let g3 = RobinField::constant(0.0).unwrap();
        let g3t = RobinField::constant(1.0).unwrap();
        assert!(robin_ratio_extremes(&g3, &g3t, ([0.0, 0.0], [1.0, 0.0]))
            .unwrap()
            .is_none());
    }

    #[test]
    fn robin_ratio_ill_posed() {
        let g3 = RobinField::constant(1.0).unwrap();
        let g3t = RobinField::Zero;
        assert!(matches!(
            robin_ratio_extremes(&g3, &g3t, ([0.0, 0.0], [1.0, 0.0])),
            Err(Error::IllPosedRatio(_))
        ));
    }

    #[test]
    fn robin_ratio_sampled_fallback() {
        let g3 = RobinField::constant(2.0).unwrap();
        let g3t = RobinField::one_plus_x2_squared();
        // along y=0 the profile is exactly 1, so the ratio is 2 everywhere
        let r = robin_ratio_extremes(&g3, &g3t, ([0.0, 0.0], [1.0, 0.0]))
            .unwrap()
            .unwrap();
        assert!((r.lo - 2.0).abs() < 1e-15 && (r.hi - 2.0).abs() < 1e-15);
        assert!(!r.certified);
    }

    #[test]
    fn field_json_roundtrip() {
        let f = field_from_json(r#"{"kind":"constant","d":2,"values":[[2,0.5],[0.5,1]]}"#).unwrap();
        assert_eq!(f.kind(), FieldKind::Constant);
        assert_eq!(f.eval(0, [0.0, 0.0]).get(0, 1), 0.5);

        let f = field_from_json(
            r#"{"kind":"element_constant","d":2,"values":[[[1,0],[0,1]],[[2,0],[0,2]]]}"#,
        )
        .unwrap();
        assert_eq!(f.kind(), FieldKind::ElementConstant);
        assert_eq!(f.eval(1, [0.0, 0.0]).get(0, 0), 2.0);

        assert!(field_from_json(r#"{"kind":"constant","d":2,"values":[[1,2],[2,1]]}"#).is_err());
        assert!(field_from_json(r#"{"kind":"weird","d":2,"values":[]}"#).is_err());
    }

    #[test]
    fn trig_ranges() {
        assert_eq!(cos_range(-0.5, 0.5), ((0.5f64).cos(), 1.0));
        let (lo, hi) = cos_range(1.0, 2.0);
        assert_eq!(lo, (2.0f64).cos());
        assert_eq!(hi, (1.0f64).cos());
        assert_eq!(cos_range(2.0, 4.0).0, -1.0);
        assert_eq!(sin_range(0.0, 2.0), ((0.0f64).sin().min((2.0f64).sin()), 1.0));
        assert_eq!(sin_range(0.1, 1.0), ((0.1f64).sin(), (1.0f64).sin()));
    }
}

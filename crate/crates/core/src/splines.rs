//! Quadratic B-spline / NURBS evaluation in 1D and tensor-product 2D.

use crate::error::{Error, Result};

/// Highest polynomial degree handled by the fixed-size evaluation buffers.
pub const MAX_DEGREE: usize = 2;
const NB: usize = MAX_DEGREE + 1;

/// Values and derivatives of the `degree + 1` basis functions active at a point.
///
/// `ders[k][i]` is the k-th derivative of basis `first + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisEval {
    pub span: usize,
    pub first: usize,
    pub ders: [[f64; NB]; NB],
}

/// Open (clamped) knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
    // knot-span indices of the nonempty spans, in order
    spans: Vec<usize>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        if knots.len() < 2 * degree + 2 {
            return Err(Error::InvalidKnots(format!(
                "need at least {} knots for degree {degree}, got {}",
                2 * degree + 2,
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidKnots("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be non-decreasing".into()));
        }
        let n = knots.len();
        let open = (0..=degree).all(|i| knots[i] == knots[0])
            && (0..=degree).all(|i| knots[n - 1 - i] == knots[n - 1]);
        if !open {
            return Err(Error::InvalidKnots(
                "first and last degree+1 knots must coincide".into(),
            ));
        }
        let spans: Vec<usize> = (degree..n - degree - 1)
            .filter(|&i| knots[i + 1] > knots[i])
            .collect();
        if spans.is_empty() {
            return Err(Error::InvalidKnots("no nonempty interior span".into()));
        }
        Ok(Self {
            degree,
            knots,
            spans,
        })
    }

    /// Open knot vector on `[a, b]` with `n_elements` uniform spans.
    pub fn open_uniform(a: f64, b: f64, n_elements: usize, degree: usize) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidKnots("n_elements must be positive".into()));
        }
        if !(a < b) {
            return Err(Error::InvalidKnots(format!("need a < b, got [{a}, {b}]")));
        }
        let h = (b - a) / n_elements as f64;
        let mut knots = vec![a; degree + 1];
        knots.extend((1..n_elements).map(|i| a + h * i as f64));
        knots.extend(std::iter::repeat_n(b, degree + 1));
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions m.
    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Number of nonempty spans (elements).
    pub fn n_elements(&self) -> usize {
        self.spans.len()
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Knot-span index of element `e`.
    pub fn element_span(&self, e: usize) -> usize {
        self.spans[e]
    }

    /// Parameter interval of element `e`.
    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        let k = self.spans[e];
        (self.knots[k], self.knots[k + 1])
    }

    /// Element containing `s`; right endpoint belongs to the last element.
    pub fn find_element(&self, s: f64) -> Result<usize> {
        self.check_domain(s)?;
        let e = self
            .spans
            .partition_point(|&k| self.knots[k + 1] <= s)
            .min(self.spans.len() - 1);
        Ok(e)
    }

    /// Knot span index μ with s_μ ≤ s < s_{μ+1} (closed on the last span).
    pub fn find_span(&self, s: f64) -> Result<usize> {
        Ok(self.spans[self.find_element(s)?])
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        if !(s >= self.lower() && s <= self.upper()) {
            return Err(Error::OutOfDomain {
                value: s,
                lower: self.lower(),
                upper: self.upper(),
            });
        }
        Ok(())
    }

    /// Active basis values and up to `max_deriv` derivatives at `s`.
    pub fn eval_basis_derivs(&self, s: f64, max_deriv: usize) -> Result<BasisEval> {
        let span = self.find_span(s)?;
        Ok(self.eval_in_span(span, s, max_deriv))
    }

    /// Same as [`eval_basis_derivs`](Self::eval_basis_derivs) but with the span
    /// fixed by the caller (useful on element boundaries). No domain check.
    pub fn eval_in_span(&self, span: usize, s: f64, max_deriv: usize) -> BasisEval {
        let p = self.degree;
        let u = &self.knots;
        let nd = max_deriv.min(p);
        // ndu[j][r]: basis values (lower triangle incl. diagonal) and knot differences (upper)
        let mut ndu = [[0.0; NB]; NB];
        let mut left = [0.0; NB];
        let mut right = [0.0; NB];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = s - u[span + 1 - j];
            right[j] = u[span + j] - s;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = [[0.0; NB]; NB];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = [[0.0; NB]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize {
                    k - 1
                } else {
                    p - r
                };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for k in 1..=nd {
            for j in 0..=p {
                ders[k][j] *= fac;
            }
            fac *= (p - k) as f64;
        }
        BasisEval {
            span,
            first: span - p,
            ders,
        }
    }

    /// Value of basis `j` (and derivatives) at `s`; zero outside its support.
    pub fn eval_single(&self, j: usize, s: f64, max_deriv: usize) -> Result<[f64; NB]> {
        if j >= self.n_basis() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.n_basis(),
            });
        }
        let be = self.eval_basis_derivs(s, max_deriv)?;
        let mut out = [0.0; NB];
        if j >= be.first && j <= be.first + self.degree {
            for k in 0..NB {
                out[k] = be.ders[k][j - be.first];
            }
        }
        Ok(out)
    }

    /// Sample points τ_j^k = (s_{j+k} + s_{j+k+1}) / 2, k = 0..=2.
    pub fn tau_points(&self, j: usize) -> Result<[f64; 3]> {
        if j >= self.n_basis() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.n_basis(),
            });
        }
        if self.degree != 2 {
            return Err(Error::UnsupportedDegree(self.degree));
        }
        let u = &self.knots;
        Ok([
            0.5 * (u[j] + u[j + 1]),
            0.5 * (u[j + 1] + u[j + 2]),
            0.5 * (u[j + 2] + u[j + 3]),
        ])
    }

    /// Elements (nonempty spans) inside the support of basis `j`.
    pub fn support_elements(&self, j: usize) -> std::ops::Range<usize> {
        let lo = self.spans.partition_point(|&k| k < j);
        let hi = self.spans.partition_point(|&k| k <= j + self.degree);
        lo..hi
    }

    /// Element that owns basis `j`: the middle span of its support when
    /// nonempty, otherwise the nearest nonempty support span toward the interior.
    pub fn anchor_element(&self, j: usize) -> usize {
        let sup = self.support_elements(j);
        let mid = j + self.degree / 2;
        if let Some(e) = sup.clone().find(|&e| self.spans[e] == mid) {
            return e;
        }
        // pick the support element whose span index is closest to the middle,
        // ties toward the domain center
        let centre = self.spans.len() as f64 / 2.0;
        sup.min_by(|&a, &b| {
            let da = (self.spans[a] as isize - mid as isize).abs();
            let db = (self.spans[b] as isize - mid as isize).abs();
            da.cmp(&db).then_with(|| {
                let ca = (a as f64 + 0.5 - centre).abs();
                let cb = (b as f64 + 0.5 - centre).abs();
                ca.total_cmp(&cb)
            })
        })
        .expect("every basis function has a nonempty span in its support")
    }
}

/// Tensor-product quadratic spline space on a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace2D {
    pub ks: KnotVector,
    pub kt: KnotVector,
}

/// 2D active-basis evaluation on one element: 9 functions with value and gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis2D {
    pub index: [usize; 9],
    pub value: [f64; 9],
    pub ds: [f64; 9],
    pub dt: [f64; 9],
}

impl SplineSpace2D {
    pub fn new(ks: KnotVector, kt: KnotVector) -> Result<Self> {
        if ks.degree() != 2 {
            return Err(Error::UnsupportedDegree(ks.degree()));
        }
        if kt.degree() != 2 {
            return Err(Error::UnsupportedDegree(kt.degree()));
        }
        Ok(Self { ks, kt })
    }

    /// Uniform N×N space on `[a, b] × [c, d]`.
    pub fn uniform(a: f64, b: f64, c: f64, d: f64, n: usize) -> Result<Self> {
        Self::new(
            KnotVector::open_uniform(a, b, n, 2)?,
            KnotVector::open_uniform(c, d, n, 2)?,
        )
    }

    pub fn n_basis_s(&self) -> usize {
        self.ks.n_basis()
    }
    pub fn n_basis_t(&self) -> usize {
        self.kt.n_basis()
    }
    pub fn n_basis(&self) -> usize {
        self.ks.n_basis() * self.kt.n_basis()
    }
    pub fn n_elem_s(&self) -> usize {
        self.ks.n_elements()
    }
    pub fn n_elem_t(&self) -> usize {
        self.kt.n_elements()
    }
    pub fn n_elements(&self) -> usize {
        self.ks.n_elements() * self.kt.n_elements()
    }

    pub fn basis_index(&self, i: usize, j: usize) -> usize {
        i + self.n_basis_s() * j
    }
    pub fn basis_ij(&self, b: usize) -> (usize, usize) {
        (b % self.n_basis_s(), b / self.n_basis_s())
    }
    pub fn element_index(&self, ei: usize, ej: usize) -> usize {
        ei + self.n_elem_s() * ej
    }
    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.n_elem_s(), e / self.n_elem_s())
    }

    /// `[s0, s1, t0, t1]` of element `e`.
    pub fn element_box(&self, e: usize) -> [f64; 4] {
        let (ei, ej) = self.element_ij(e);
        let (s0, s1) = self.ks.element_bounds(ei);
        let (t0, t1) = self.kt.element_bounds(ej);
        [s0, s1, t0, t1]
    }

    /// Parameter-domain rectangle `[s0, s1, t0, t1]`.
    pub fn domain(&self) -> [f64; 4] {
        [self.ks.lower(), self.ks.upper(), self.kt.lower(), self.kt.upper()]
    }

    pub fn anchor_element(&self, b: usize) -> usize {
        let (i, j) = self.basis_ij(b);
        self.element_index(self.ks.anchor_element(i), self.kt.anchor_element(j))
    }

    /// Elements in the support of basis `b`.
    pub fn support_elements(&self, b: usize) -> Vec<usize> {
        let (i, j) = self.basis_ij(b);
        let rs = self.ks.support_elements(i);
        let rt = self.kt.support_elements(j);
        let mut out = Vec::with_capacity(9);
        for ej in rt {
            for ei in rs.clone() {
                out.push(self.element_index(ei, ej));
            }
        }
        out
    }

    /// The 9 basis functions active on element `e`.
    pub fn element_basis(&self, e: usize) -> [usize; 9] {
        let (ei, ej) = self.element_ij(e);
        let fi = self.ks.element_span(ei) - 2;
        let fj = self.kt.element_span(ej) - 2;
        let mut idx = [0; 9];
        for b in 0..3 {
            for a in 0..3 {
                idx[a + 3 * b] = self.basis_index(fi + a, fj + b);
            }
        }
        idx
    }

    /// Evaluate the 9 active basis functions of element `e` at `(s, t)`.
    pub fn eval_on_element(&self, e: usize, s: f64, t: f64) -> Basis2D {
        let (ei, ej) = self.element_ij(e);
        let bs = self.ks.eval_in_span(self.ks.element_span(ei), s, 1);
        let bt = self.kt.eval_in_span(self.kt.element_span(ej), t, 1);
        let mut out = Basis2D {
            index: self.element_basis(e),
            value: [0.0; 9],
            ds: [0.0; 9],
            dt: [0.0; 9],
        };
        for b in 0..3 {
            for a in 0..3 {
                let k = a + 3 * b;
                out.value[k] = bs.ders[0][a] * bt.ders[0][b];
                out.ds[k] = bs.ders[1][a] * bt.ders[0][b];
                out.dt[k] = bs.ders[0][a] * bt.ders[1][b];
            }
        }
        out
    }

    /// Element containing `(s, t)`.
    pub fn find_element(&self, s: f64, t: f64) -> Result<usize> {
        Ok(self.element_index(self.ks.find_element(s)?, self.kt.find_element(t)?))
    }

    /// Evaluate Σ c_b N_b and its gradient at `(s, t)`.
    pub fn eval_field(&self, coeffs: &[f64], s: f64, t: f64) -> Result<(f64, [f64; 2])> {
        if coeffs.len() != self.n_basis() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for {} basis functions",
                coeffs.len(),
                self.n_basis()
            )));
        }
        let e = self.find_element(s, t)?;
        Ok(self.eval_field_on_element(coeffs, e, s, t))
    }

    pub fn eval_field_on_element(&self, coeffs: &[f64], e: usize, s: f64, t: f64) -> (f64, [f64; 2]) {
        let b = self.eval_on_element(e, s, t);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for k in 0..9 {
            let c = coeffs[b.index[k]];
            v += c * b.value[k];
            g[0] += c * b.ds[k];
            g[1] += c * b.dt[k];
        }
        (v, g)
    }
}

/// Map from the parameter domain to the physical domain.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryMap {
    Identity,
    /// Exact polar map x = s cos t, y = s sin t.
    Polar,
    /// Rational tensor-product surface.
    Nurbs {
        space: SplineSpace2D,
        control: Vec<[f64; 2]>,
        weights: Vec<f64>,
    },
}

/// Physical point, Jacobian `jac[r][c] = ∂x_r/∂(s,t)_c`, and its determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryEval {
    pub point: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

impl GeometryEval {
    /// Physical gradient from a parametric gradient: J^{-T} g.
    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        let inv = 1.0 / self.det;
        [
            inv * (j[1][1] * g[0] - j[1][0] * g[1]),
            inv * (-j[0][1] * g[0] + j[0][0] * g[1]),
        ]
    }
}

/// Jacobian determinants below this magnitude are reported as degenerate.
pub const DEGENERATE_DET: f64 = 1e-14;

impl GeometryMap {
    pub fn nurbs(space: SplineSpace2D, control: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        let n = space.n_basis();
        if control.len() != n || weights.len() != n {
            return Err(Error::GridMismatch(format!(
                "expected {n} control points and weights, got {} and {}",
                control.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("NURBS weights must be nonnegative".into()));
        }
        Ok(GeometryMap::Nurbs {
            space,
            control,
            weights,
        })
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, GeometryMap::Identity)
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<GeometryEval> {
        let out = match self {
            GeometryMap::Identity => GeometryEval {
                point: [s, t],
                jac: [[1.0, 0.0], [0.0, 1.0]],
                det: 1.0,
            },
            GeometryMap::Polar => {
                let (sn, cs) = t.sin_cos();
                let jac = [[cs, -s * sn], [sn, s * cs]];
                GeometryEval {
                    point: [s * cs, s * sn],
                    jac,
                    det: s,
                }
            }
            GeometryMap::Nurbs {
                space,
                control,
                weights,
            } => {
                let e = space.find_element(s, t)?;
                let b = space.eval_on_element(e, s, t);
                let (mut w, mut ws, mut wt) = (0.0, 0.0, 0.0);
                let mut p = [0.0; 2];
                let mut ps = [0.0; 2];
                let mut pt = [0.0; 2];
                for k in 0..9 {
                    let wi = weights[b.index[k]];
                    let c = control[b.index[k]];
                    w += wi * b.value[k];
                    ws += wi * b.ds[k];
                    wt += wi * b.dt[k];
                    for r in 0..2 {
                        p[r] += wi * c[r] * b.value[k];
                        ps[r] += wi * c[r] * b.ds[k];
                        pt[r] += wi * c[r] * b.dt[k];
                    }
                }
                if w <= 0.0 {
                    return Err(Error::Geometry {
                        s,
                        t,
                        reason: "all active weights vanish".into(),
                    });
                }
                let x = [p[0] / w, p[1] / w];
                let mut jac = [[0.0; 2]; 2];
                for r in 0..2 {
                    jac[r][0] = (ps[r] - x[r] * ws) / w;
                    jac[r][1] = (pt[r] - x[r] * wt) / w;
                }
                GeometryEval {
                    point: x,
                    jac,
                    det: jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0],
                }
            }
        };
        if !out.det.is_finite() || out.det.abs() < DEGENERATE_DET {
            return Err(Error::Geometry {
                s,
                t,
                reason: format!("degenerate Jacobian (det = {:e})", out.det),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv3() -> KnotVector {
        KnotVector::new(2, vec![0., 0., 0., 1., 2., 3., 3., 3.]).unwrap()
    }

    #[test]
    fn open_uniform_shapes() {
        let k = KnotVector::open_uniform(0.0, 1.0, 1, 2).unwrap();
        assert_eq!(k.knots(), &[0., 0., 0., 1., 1., 1.]);
        let k = KnotVector::open_uniform(0.0, 1.0, 5, 2).unwrap();
        assert_eq!(k.n_basis(), 7);
        for e in 0..5 {
            let (a, b) = k.element_bounds(e);
            assert!((b - a - 0.2).abs() < 1e-15);
        }
        let k = KnotVector::open_uniform(1.0, 2.0, 20, 2).unwrap();
        assert_eq!(&k.knots()[..3], &[1.0; 3]);
        assert_eq!(&k.knots()[k.knots().len() - 3..], &[2.0; 3]);
        assert!(KnotVector::open_uniform(0.0, 1.0, 0, 2).is_err());
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(KnotVector::new(2, vec![0., 0., 1., 1., 1., 1.]).is_err());
        assert!(KnotVector::new(2, vec![0., 0., 0., 2., 1., 3., 3., 3.]).is_err());
        assert!(KnotVector::new(3, vec![0.; 8]).is_err());
        assert!(KnotVector::new(2, vec![0.; 6]).is_err());
    }

    #[test]
    fn endpoint_and_midpoint_values() {
        let k = kv3();
        let b = k.eval_basis_derivs(0.0, 0).unwrap();
        assert_eq!(b.first, 0);
        assert_eq!(&b.ders[0], &[1.0, 0.0, 0.0]);
        let b = k.eval_basis_derivs(1.5, 0).unwrap();
        for (v, e) in b.ders[0].iter().zip([0.125, 0.75, 0.125]) {
            assert!((v - e).abs() < 1e-15);
        }
        let b = k.eval_basis_derivs(3.0, 1).unwrap();
        assert_eq!(b.first, 2);
        assert!((b.ders[0][2] - 1.0).abs() < 1e-15);
        assert!(k.eval_basis_derivs(3.0 + 1e-9, 0).is_err());
        assert!(k.eval_basis_derivs(-1e-9, 0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = KnotVector::new(2, vec![0., 0., 0., 0.3, 0.45, 1.1, 2., 2., 2.]).unwrap();
        for &s in &[0.1, 0.37, 0.7, 1.5, 1.9] {
            let b = k.eval_basis_derivs(s, 2).unwrap();
            let mut prev_err = f64::INFINITY;
            for step in [1e-3, 5e-4] {
                let bp = k.eval_in_span(b.span, s + step, 0);
                let bm = k.eval_in_span(b.span, s - step, 0);
                let mut err: f64 = 0.0;
                for i in 0..3 {
                    let fd = (bp.ders[0][i] - bm.ders[0][i]) / (2.0 * step);
                    err = err.max((fd - b.ders[1][i]).abs());
                    let fd2 = (bp.ders[0][i] - 2.0 * b.ders[0][i] + bm.ders[0][i]) / (step * step);
                    assert!((fd2 - b.ders[2][i]).abs() < 1e-5);
                }
                assert!(err <= prev_err.max(1e-12));
                prev_err = err;
            }
            assert!(prev_err < 1e-9);
        }
    }

    #[test]
    fn tau_points_examples() {
        let k = kv3();
        assert_eq!(k.tau_points(0).unwrap(), [0.0, 0.0, 0.5]);
        assert_eq!(k.tau_points(2).unwrap(), [0.5, 1.5, 2.5]);
        let k = KnotVector::open_uniform(0.0, 1.0, 10, 2).unwrap();
        let tp = k.tau_points(5).unwrap();
        for (a, b) in tp.iter().zip([0.35, 0.45, 0.55]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(k.tau_points(12).is_err());
    }

    #[test]
    fn local_support_is_exact() {
        let k = KnotVector::open_uniform(0.0, 1.0, 7, 2).unwrap();
        for j in 0..k.n_basis() {
            let lo = k.knots()[j];
            let hi = k.knots()[j + 3];
            for i in 0..=200 {
                let s = i as f64 / 200.0;
                let v = k.eval_single(j, s, 0).unwrap()[0];
                if s < lo || s > hi {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn anchors_follow_middle_span() {
        let k = KnotVector::open_uniform(0.0, 1.0, 7, 2).unwrap();
        let anchors: Vec<_> = (0..9).map(|j| k.anchor_element(j)).collect();
        assert_eq!(anchors, vec![0, 0, 1, 2, 3, 4, 5, 6, 6]);
        assert_eq!(k.support_elements(0), 0..1);
        assert_eq!(k.support_elements(4), 2..5);
        assert_eq!(k.support_elements(8), 6..7);
    }

    #[test]
    fn tensor_space_indexing() {
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 4).unwrap();
        assert_eq!(sp.n_basis(), 36);
        assert_eq!(sp.n_elements(), 16);
        let e = sp.element_index(1, 2);
        let idx = sp.element_basis(e);
        assert_eq!(idx[0], sp.basis_index(1, 2));
        assert_eq!(idx[8], sp.basis_index(3, 4));
        for &b in &idx {
            assert!(sp.support_elements(b).contains(&e));
        }
        let b = sp.eval_on_element(e, 0.3, 0.6);
        let sum: f64 = b.value.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
        assert!(b.ds.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn identity_and_polar_maps() {
        let g = GeometryMap::Identity.eval(0.3, 0.7).unwrap();
        assert_eq!(g.point, [0.3, 0.7]);
        assert_eq!(g.det, 1.0);
        let g = GeometryMap::Polar.eval(1.5, 0.0).unwrap();
        assert!((g.point[0] - 1.5).abs() < 1e-15 && g.point[1].abs() < 1e-15);
        assert!((g.det - 1.5).abs() < 1e-15);
        assert!(GeometryMap::Polar.eval(0.0, 0.3).is_err());
    }

    #[test]
    fn polar_area_by_quadrature() {
        // ∫∫ det J over [1,2]×[0,2π] = π(2² − 1²)
        let gl = crate::quadrature::gauss_legendre(4);
        let n = 16;
        let mut area = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (s0, s1) = (1.0 + i as f64 / n as f64, 1.0 + (i + 1) as f64 / n as f64);
                let tw = 2.0 * std::f64::consts::PI / n as f64;
                let (t0, t1) = (j as f64 * tw, (j + 1) as f64 * tw);
                for (xa, wa) in gl.iter() {
                    for (xb, wb) in gl.iter() {
                        let s = s0 + (s1 - s0) * xa;
                        let t = t0 + (t1 - t0) * xb;
                        let g = GeometryMap::Polar.eval(s, t).unwrap();
                        area += wa * wb * (s1 - s0) * (t1 - t0) * g.det;
                    }
                }
            }
        }
        assert!((area - 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn nurbs_quarter_annulus_is_exact() {
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 1).unwrap();
        let w = std::f64::consts::FRAC_1_SQRT_2;
        let radii = [1.0, 1.5, 2.0];
        let mut control = vec![[0.0; 2]; 9];
        let mut weights = vec![0.0; 9];
        for (a, &r) in radii.iter().enumerate() {
            let pts = [[r, 0.0], [r, r], [0.0, r]];
            let ws = [1.0, w, 1.0];
            for b in 0..3 {
                control[sp.basis_index(a, b)] = pts[b];
                weights[sp.basis_index(a, b)] = ws[b];
            }
        }
        let map = GeometryMap::nurbs(sp, control, weights).unwrap();
        for &(s, t) in &[(0.0, 0.0), (0.3, 0.4), (1.0, 1.0), (0.7, 0.9)] {
            let g = map.eval(s, t).unwrap();
            let r = (g.point[0].powi(2) + g.point[1].powi(2)).sqrt();
            assert!((r - (1.0 + s)).abs() < 1e-14);
            // finite-difference Jacobian
            let h = 1e-6;
            let sp_ = (s + h).min(1.0);
            let sm = (s - h).max(0.0);
            let gp = map.eval(sp_, t).unwrap();
            let gm = map.eval(sm, t).unwrap();
            for r in 0..2 {
                let fd = (gp.point[r] - gm.point[r]) / (sp_ - sm);
                assert!((fd - g.jac[r][0]).abs() < 1e-6);
            }
            assert!(g.det > 0.0);
        }
    }

    #[test]
    fn physical_gradient_inverts_jacobian() {
        let g = GeometryMap::Polar.eval(1.3, 0.8).unwrap();
        let phys = [0.4, -1.1];
        // parametric gradient = J^T phys
        let par = [
            g.jac[0][0] * phys[0] + g.jac[1][0] * phys[1],
            g.jac[0][1] * phys[0] + g.jac[1][1] * phys[1],
        ];
        let back = g.physical_gradient(par);
        assert!((back[0] - phys[0]).abs() < 1e-14 && (back[1] - phys[1]).abs() < 1e-14);
    }
}

//! Implicit interfaces, element classification and cut-cell quadrature.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, tensor_rule};
use crate::splines::SplineSpace2D;

/// Tolerance for "on the interface" decisions.
pub const ON_INTERFACE_TOL: f64 = 1e-10;
/// Absolute tolerance for root finding.
pub const ROOT_TOL: f64 = 1e-12;

/// A user-supplied level set with gradient.
pub trait LevelSet: Send + Sync {
    fn phi(&self, p: [f64; 2]) -> f64;
    fn grad(&self, p: [f64; 2]) -> [f64; 2];

    /// Hessian of φ; defaults to central differences of the gradient.
    fn hessian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let gxp = self.grad([p[0] + h, p[1]]);
        let gxm = self.grad([p[0] - h, p[1]]);
        let gyp = self.grad([p[0], p[1] + h]);
        let gym = self.grad([p[0], p[1] - h]);
        let hxy = 0.25 * ((gxp[1] - gxm[1]) + (gyp[0] - gym[0])) / h;
        [
            [(gxp[0] - gxm[0]) / (2.0 * h), hxy],
            [hxy, (gyp[1] - gym[1]) / (2.0 * h)],
        ]
    }
}

/// Interface Γ = {φ = 0}; φ > 0 marks the enriched (plus) side.
#[derive(Clone)]
pub enum ImplicitInterface {
    /// φ = n·(x − p) with unit normal n.
    Line { point: [f64; 2], normal: [f64; 2] },
    /// φ = ±(r − |x − c|); `inside_positive` picks the sign.
    Circle {
        center: [f64; 2],
        radius: f64,
        inside_positive: bool,
    },
    Custom(Arc<dyn LevelSet>),
}

impl fmt::Debug for ImplicitInterface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Line { point, normal } => f
                .debug_struct("Line")
                .field("point", point)
                .field("normal", normal)
                .finish(),
            Self::Circle {
                center,
                radius,
                inside_positive,
            } => f
                .debug_struct("Circle")
                .field("center", center)
                .field("radius", radius)
                .field("inside_positive", inside_positive)
                .finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// Maximum iterations of the closest-point projection.
pub const PROJECTION_MAX_ITER: usize = 50;

impl ImplicitInterface {
    /// Straight line through `point`; the plus side lies along `normal`.
    pub fn line(point: [f64; 2], normal: [f64; 2]) -> Self {
        let n = norm(normal);
        assert!(n > 0.0, "line normal must be nonzero");
        Self::Line {
            point,
            normal: [normal[0] / n, normal[1] / n],
        }
    }

    pub fn circle(center: [f64; 2], radius: f64, inside_positive: bool) -> Self {
        assert!(radius > 0.0, "circle radius must be positive");
        Self::Circle {
            center,
            radius,
            inside_positive,
        }
    }

    pub fn custom(ls: impl LevelSet + 'static) -> Self {
        Self::Custom(Arc::new(ls))
    }

    pub fn phi(&self, p: [f64; 2]) -> f64 {
        match self {
            Self::Line { point, normal } => dot(*normal, sub(p, *point)),
            Self::Circle {
                center,
                radius,
                inside_positive,
            } => {
                let d = radius - norm(sub(p, *center));
                if *inside_positive {
                    d
                } else {
                    -d
                }
            }
            Self::Custom(ls) => ls.phi(p),
        }
    }

    pub fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        match self {
            Self::Line { normal, .. } => *normal,
            Self::Circle {
                center,
                inside_positive,
                ..
            } => {
                let d = sub(p, *center);
                let r = norm(d);
                let sgn = if *inside_positive { -1.0 } else { 1.0 };
                if r == 0.0 {
                    [0.0, 0.0]
                } else {
                    [sgn * d[0] / r, sgn * d[1] / r]
                }
            }
            Self::Custom(ls) => ls.grad(p),
        }
    }

    /// Signed distance (positive on the plus side) and its gradient.
    pub fn signed_distance_grad(&self, p: [f64; 2]) -> Result<(f64, [f64; 2])> {
        match self {
            Self::Line { .. } | Self::Circle { .. } => Ok((self.phi(p), self.grad(p))),
            Self::Custom(_) => {
                let q = self.closest_point(p)?;
                let d = sub(p, q);
                let dist = norm(d);
                let sgn = if self.phi(p) >= 0.0 { 1.0 } else { -1.0 };
                if dist < ROOT_TOL {
                    let g = self.grad(p);
                    let gn = norm(g);
                    return Ok((sgn * dist, [g[0] / gn, g[1] / gn]));
                }
                Ok((sgn * dist, [sgn * d[0] / dist, sgn * d[1] / dist]))
            }
        }
    }

    pub fn signed_distance(&self, p: [f64; 2]) -> Result<f64> {
        Ok(self.signed_distance_grad(p)?.0)
    }

    /// Unsigned distance d_Γ.
    pub fn distance(&self, p: [f64; 2]) -> Result<f64> {
        Ok(self.signed_distance(p)?.abs())
    }

    /// One-sided distance: d_Γ on the plus side, zero elsewhere.
    pub fn one_sided_distance(&self, p: [f64; 2]) -> Result<f64> {
        Ok(self.signed_distance(p)?.max(0.0))
    }

    /// Closest point on Γ (Newton projection plus tangential correction).
    pub fn closest_point(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        match self {
            Self::Line { normal, .. } => {
                let d = self.phi(p);
                return Ok([p[0] - d * normal[0], p[1] - d * normal[1]]);
            }
            Self::Circle { center, radius, .. } => {
                let d = sub(p, *center);
                let r = norm(d);
                if r == 0.0 {
                    return Ok([center[0] + radius, center[1]]);
                }
                return Ok([center[0] + radius * d[0] / r, center[1] + radius * d[1] / r]);
            }
            Self::Custom(_) => {}
        }
        let Self::Custom(ls) = self else {
            unreachable!()
        };
        // start from the foot of a few gradient steps, then Newton on the
        // optimality system y − p + λ∇φ(y) = 0, φ(y) = 0
        let mut y = p;
        for _ in 0..10 {
            let g = ls.grad(y);
            let g2 = dot(g, g);
            if g2 == 0.0 {
                break;
            }
            let f = ls.phi(y);
            y = [y[0] - f * g[0] / g2, y[1] - f * g[1] / g2];
            if f.abs() < ROOT_TOL {
                break;
            }
        }
        let g = ls.grad(y);
        let mut lam = dot(sub(p, y), g) / dot(g, g).max(f64::MIN_POSITIVE);
        let mut residual = f64::INFINITY;
        for _ in 0..PROJECTION_MAX_ITER {
            let g = ls.grad(y);
            let h = ls.hessian(y);
            let f = ls.phi(y);
            let r = [y[0] - p[0] + lam * g[0], y[1] - p[1] + lam * g[1], f];
            residual = r[0].abs().max(r[1].abs()).max(f.abs());
            let scale = 1.0 + norm(sub(p, y));
            if f.abs() < ROOT_TOL && r[0].abs().max(r[1].abs()) < ROOT_TOL * scale {
                return Ok(y);
            }
            let jac = nalgebra::Matrix3::new(
                1.0 + lam * h[0][0],
                lam * h[0][1],
                g[0],
                lam * h[1][0],
                1.0 + lam * h[1][1],
                g[1],
                g[0],
                g[1],
                0.0,
            );
            let Some(step) = jac.lu().solve(&nalgebra::Vector3::new(-r[0], -r[1], -r[2])) else {
                break;
            };
            y = [y[0] + step[0], y[1] + step[1]];
            lam += step[2];
        }
        Err(Error::ProjectionFailed {
            x: p[0],
            y: p[1],
            iterations: PROJECTION_MAX_ITER,
            residual,
        })
    }

    /// Lower/upper bounds of φ over the closed box `[s0, s1, t0, t1]`.
    ///
    /// Exact for lines and circles; sampled on a 9×9 grid for custom level sets.
    pub fn phi_bounds(&self, bx: [f64; 4]) -> (f64, f64) {
        match self {
            Self::Line { .. } => {
                let v = corners(bx).map(|c| self.phi(c));
                (
                    v.iter().copied().fold(f64::INFINITY, f64::min),
                    v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            }
            Self::Circle {
                center,
                radius,
                inside_positive,
            } => {
                let cx = center[0].clamp(bx[0], bx[1]);
                let cy = center[1].clamp(bx[2], bx[3]);
                let dmin = norm(sub([cx, cy], *center));
                let dmax = corners(bx)
                    .iter()
                    .map(|&c| norm(sub(c, *center)))
                    .fold(0.0, f64::max);
                if *inside_positive {
                    (radius - dmax, radius - dmin)
                } else {
                    (dmin - radius, dmax - radius)
                }
            }
            Self::Custom(_) => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for j in 0..=8 {
                    for i in 0..=8 {
                        let p = [
                            bx[0] + (bx[1] - bx[0]) * i as f64 / 8.0,
                            bx[2] + (bx[3] - bx[2]) * j as f64 / 8.0,
                        ];
                        let v = self.phi(p);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Roots λ ∈ (0, 1) of φ(a + λ(b − a)), sorted.
    pub fn segment_roots(&self, a: [f64; 2], b: [f64; 2]) -> Vec<f64> {
        let d = sub(b, a);
        let eps = 1e-14;
        let mut roots = Vec::new();
        match self {
            Self::Line { .. } => {
                let (fa, fb) = (self.phi(a), self.phi(b));
                if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
                    roots.push(fa / (fa - fb));
                }
            }
            Self::Circle { center, radius, .. } => {
                // |a − c + λ d|² = r²
                let w = sub(a, *center);
                let qa = dot(d, d);
                let qb = 2.0 * dot(w, d);
                let qc = dot(w, w) - radius * radius;
                let disc = qb * qb - 4.0 * qa * qc;
                if qa > 0.0 && disc >= 0.0 {
                    let sq = disc.sqrt();
                    // numerically stable pair
                    let q = -0.5 * (qb + qb.signum() * sq);
                    let mut cand = if q != 0.0 {
                        vec![q / qa, qc / q]
                    } else {
                        vec![-qb / (2.0 * qa)]
                    };
                    cand.sort_by(f64::total_cmp);
                    cand.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
                    roots.extend(cand);
                }
            }
            Self::Custom(_) => {
                let n = 64;
                let mut prev = self.phi(a);
                for i in 1..=n {
                    let l1 = i as f64 / n as f64;
                    let l0 = (i - 1) as f64 / n as f64;
                    let cur = self.phi([a[0] + l1 * d[0], a[1] + l1 * d[1]]);
                    if (prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0) {
                        roots.push(self.bisect(a, d, l0, l1, prev));
                    }
                    prev = cur;
                }
            }
        }
        roots.retain(|&l| l > eps && l < 1.0 - eps);
        roots
    }

    fn bisect(&self, a: [f64; 2], d: [f64; 2], mut l0: f64, mut l1: f64, f0: f64) -> f64 {
        let len = norm(d);
        let mut s0 = f0.signum();
        while (l1 - l0) * len > ROOT_TOL {
            let m = 0.5 * (l0 + l1);
            if m <= l0 || m >= l1 {
                break;
            }
            let fm = self.phi([a[0] + m * d[0], a[1] + m * d[1]]);
            if fm == 0.0 {
                return m;
            }
            if fm.signum() == s0 {
                l0 = m;
                s0 = fm.signum();
            } else {
                l1 = m;
            }
        }
        0.5 * (l0 + l1)
    }

    /// Sign of ∂φ/∂x_axis over the box when it is provably fixed.
    fn monotone_sign(&self, bx: [f64; 4], axis: usize) -> Option<f64> {
        match self {
            Self::Line { normal, .. } => {
                (normal[axis].abs() > 1e-12).then(|| normal[axis].signum())
            }
            Self::Circle {
                center,
                inside_positive,
                ..
            } => {
                let (lo, hi) = if axis == 0 { (bx[0], bx[1]) } else { (bx[2], bx[3]) };
                let sgn = if *inside_positive { -1.0 } else { 1.0 };
                if lo >= center[axis] {
                    Some(sgn)
                } else if hi <= center[axis] {
                    Some(-sgn)
                } else {
                    None
                }
            }
            Self::Custom(_) => {
                let mut sign = 0.0;
                for j in 0..=4 {
                    for i in 0..=4 {
                        let p = [
                            bx[0] + (bx[1] - bx[0]) * i as f64 / 4.0,
                            bx[2] + (bx[3] - bx[2]) * j as f64 / 4.0,
                        ];
                        let g = self.grad(p);
                        let gn = norm(g);
                        if gn == 0.0 || g[axis].abs() < 0.05 * gn {
                            return None;
                        }
                        if sign == 0.0 {
                            sign = g[axis].signum();
                        } else if g[axis].signum() != sign {
                            return None;
                        }
                    }
                }
                Some(sign)
            }
        }
    }
}

fn corners(bx: [f64; 4]) -> [[f64; 2]; 4] {
    [
        [bx[0], bx[2]],
        [bx[1], bx[2]],
        [bx[1], bx[3]],
        [bx[0], bx[3]],
    ]
}

/// Element label relative to Γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementLabel {
    /// Entirely in the plus side (φ > 0).
    Plus,
    /// Entirely in the minus side (φ < 0).
    Minus,
    Cut,
}

/// Side of Γ carried by a quadrature point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Element labels and the dilated index sets around Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshClassification {
    pub n_s: usize,
    pub n_t: usize,
    pub labels: Vec<ElementLabel>,
    /// Elements labeled cut only because Γ grazes them within tolerance.
    pub flagged: Vec<usize>,
    /// `jf[k][e]`: element e ∈ J^f_k.
    pub jf: Vec<Vec<bool>>,
}

impl MeshClassification {
    pub fn max_k(&self) -> usize {
        self.jf.len() - 1
    }

    pub fn touches_plus(&self, e: usize) -> bool {
        self.labels[e] != ElementLabel::Minus
    }

    pub fn touches_minus(&self, e: usize) -> bool {
        self.labels[e] != ElementLabel::Plus
    }

    pub fn in_jf(&self, k: usize, e: usize) -> bool {
        self.jf[k][e]
    }

    pub fn in_jf_plus(&self, k: usize, e: usize) -> bool {
        self.jf[k][e] && self.touches_plus(e)
    }

    pub fn in_jf_minus(&self, k: usize, e: usize) -> bool {
        self.jf[k][e] && self.touches_minus(e)
    }

    pub fn in_j1_plus(&self, e: usize) -> bool {
        self.in_jf_plus(1, e)
    }

    pub fn cut_elements(&self) -> Vec<usize> {
        self.jf_list(0)
    }

    pub fn jf_list(&self, k: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&e| self.jf[k][e]).collect()
    }

    pub fn jf_plus_list(&self, k: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&e| self.in_jf_plus(k, e)).collect()
    }

    pub fn jf_minus_list(&self, k: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&e| self.in_jf_minus(k, e)).collect()
    }

    /// Vertex set J^v_k (vertex index `i + (n_s + 1) j`).
    pub fn jv_list(&self, k: usize) -> Vec<usize> {
        let nv = self.n_s + 1;
        let mut mark = vec![false; nv * (self.n_t + 1)];
        for e in self.jf_list(k) {
            let (ei, ej) = (e % self.n_s, e / self.n_s);
            for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                mark[ei + a + nv * (ej + b)] = true;
            }
        }
        (0..mark.len()).filter(|&v| mark[v]).collect()
    }

    /// One vertex-adjacency dilation of an element mask.
    pub fn dilate(&self, mask: &[bool]) -> Vec<bool> {
        dilate(mask, self.n_s, self.n_t)
    }
}

fn dilate(mask: &[bool], n_s: usize, n_t: usize) -> Vec<bool> {
    let mut out = mask.to_vec();
    for ej in 0..n_t {
        for ei in 0..n_s {
            if !mask[ei + n_s * ej] {
                continue;
            }
            for nj in ej.saturating_sub(1)..=(ej + 1).min(n_t - 1) {
                for ni in ei.saturating_sub(1)..=(ei + 1).min(n_s - 1) {
                    out[ni + n_s * nj] = true;
                }
            }
        }
    }
    out
}

fn label_from_bounds(lo: f64, hi: f64) -> (ElementLabel, bool) {
    if lo > ON_INTERFACE_TOL {
        (ElementLabel::Plus, false)
    } else if hi < -ON_INTERFACE_TOL {
        (ElementLabel::Minus, false)
    } else {
        // φ reaches the tolerance band; flag grazing contacts
        let grazing = lo >= -ON_INTERFACE_TOL || hi <= ON_INTERFACE_TOL;
        (ElementLabel::Cut, grazing)
    }
}

/// Label every element and build J^f_k for k = 0..=max_k.
pub fn classify_elements(
    space: &SplineSpace2D,
    iface: &ImplicitInterface,
    max_k: usize,
) -> Result<MeshClassification> {
    let n = space.n_elements();
    let mut labels = Vec::with_capacity(n);
    let mut flagged = Vec::new();
    for e in 0..n {
        let (lo, hi) = iface.phi_bounds(space.element_box(e));
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "level set not finite on element {e}"
            )));
        }
        let (label, grazing) = label_from_bounds(lo, hi);
        if grazing {
            log::warn!("element {e}: interface grazes the element within tolerance; treated as cut");
            flagged.push(e);
        }
        labels.push(label);
    }
    let (n_s, n_t) = (space.n_elem_s(), space.n_elem_t());
    let mut jf = vec![labels.iter().map(|l| *l == ElementLabel::Cut).collect::<Vec<_>>()];
    for _ in 0..max_k {
        let next = dilate(jf.last().unwrap(), n_s, n_t);
        jf.push(next);
    }
    if !jf[0].iter().any(|&c| c) {
        log::warn!("interface does not cut any element");
    }
    Ok(MeshClassification {
        n_s,
        n_t,
        labels,
        flagged,
        jf,
    })
}

/// A volume quadrature point with its side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub s: f64,
    pub t: f64,
    pub w: f64,
    pub side: Side,
}

/// A quadrature point on Γ: parameter-space arc-length weight and unit normal
/// ∇φ/|∇φ| pointing into the plus side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePoint {
    pub s: f64,
    pub t: f64,
    pub w: f64,
    pub normal: [f64; 2],
}

/// Leaf of the quadtree over a cut element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCell {
    pub bx: [f64; 4],
    pub depth: usize,
    /// Side for one-signed leaves; `None` for leaves still crossed by Γ.
    pub side: Option<Side>,
}

/// Quadrature for one cut element.
#[derive(Debug, Clone, PartialEq)]
pub struct CutCellPartition {
    pub element: usize,
    pub cells: Vec<QuadCell>,
    pub volume: Vec<QuadPoint>,
    pub interface: Vec<InterfacePoint>,
    /// Leaves where no monotone direction was found and center-sign labeling was used.
    pub fallback_leaves: usize,
}

impl CutCellPartition {
    pub fn side_area(&self, side: Side) -> f64 {
        self.volume.iter().filter(|q| q.side == side).map(|q| q.w).sum()
    }

    pub fn interface_length(&self) -> f64 {
        self.interface.iter().map(|q| q.w).sum()
    }
}

/// Quadrature for cut element `e`.
///
/// The element is split by a quadtree up to `depth`; one-signed leaves get a
/// tensor Gauss rule, leaves still crossed by Γ use a height-function rule
/// that follows the exact interface (Gauss in the direction along Γ, root
/// solve across it, Gauss on each side). The interface rule comes from the
/// same construction.
pub fn cut_cell_partition(
    space: &SplineSpace2D,
    e: usize,
    iface: &ImplicitInterface,
    depth: usize,
    gauss_order: usize,
) -> Result<CutCellPartition> {
    let bx = space.element_box(e);
    let (lo, hi) = iface.phi_bounds(bx);
    if label_from_bounds(lo, hi).0 != ElementLabel::Cut {
        return Err(Error::NotCut { element: e });
    }
    for (edge, (a, b)) in [
        ([bx[0], bx[2]], [bx[1], bx[2]]),
        ([bx[1], bx[2]], [bx[1], bx[3]]),
        ([bx[0], bx[3]], [bx[1], bx[3]]),
        ([bx[0], bx[2]], [bx[0], bx[3]]),
    ]
    .into_iter()
    .enumerate()
    {
        let roots = iface.segment_roots(a, b).len();
        if roots > 2 {
            return Err(Error::UnresolvedInterface {
                element: e,
                edge,
                roots,
            });
        }
    }
    let rule = gauss_legendre(gauss_order.max(1));
    let outer = gauss_legendre(gauss_order.max(1) + 1);
    let mut out = CutCellPartition {
        element: e,
        cells: Vec::new(),
        volume: Vec::new(),
        interface: Vec::new(),
        fallback_leaves: 0,
    };
    subdivide(iface, bx, 0, depth, &rule, &outer, &mut out)?;
    Ok(out)
}

fn subdivide(
    iface: &ImplicitInterface,
    bx: [f64; 4],
    level: usize,
    depth: usize,
    rule: &[(f64, f64)],
    outer: &[(f64, f64)],
    out: &mut CutCellPartition,
) -> Result<()> {
    let (lo, hi) = iface.phi_bounds(bx);
    let one_side = if lo >= 0.0 {
        Some(Side::Plus)
    } else if hi <= 0.0 {
        Some(Side::Minus)
    } else {
        None
    };
    if let Some(side) = one_side {
        out.cells.push(QuadCell {
            bx,
            depth: level,
            side: Some(side),
        });
        out.volume
            .extend(tensor_rule(bx, rule).map(|(s, t, w)| QuadPoint { s, t, w, side }));
        return Ok(());
    }
    if level >= depth {
        out.cells.push(QuadCell {
            bx,
            depth: level,
            side: None,
        });
        return height_function_leaf(iface, bx, rule, outer, out);
    }
    let sm = 0.5 * (bx[0] + bx[1]);
    let tm = 0.5 * (bx[2] + bx[3]);
    for child in [
        [bx[0], sm, bx[2], tm],
        [sm, bx[1], bx[2], tm],
        [bx[0], sm, tm, bx[3]],
        [sm, bx[1], tm, bx[3]],
    ] {
        subdivide(iface, child, level + 1, depth, rule, outer, out)?;
    }
    Ok(())
}

fn side_of(v: f64) -> Side {
    if v >= 0.0 {
        Side::Plus
    } else {
        Side::Minus
    }
}

fn height_function_leaf(
    iface: &ImplicitInterface,
    bx: [f64; 4],
    rule: &[(f64, f64)],
    outer: &[(f64, f64)],
    out: &mut CutCellPartition,
) -> Result<()> {
    // inner axis: the one along which φ is monotone, preferring the steeper one
    let c = [0.5 * (bx[0] + bx[1]), 0.5 * (bx[2] + bx[3])];
    let g = iface.grad(c);
    let mut axes = [0usize, 1];
    if g[0].abs() < g[1].abs() {
        axes = [1, 0];
    }
    let Some(inner) = axes
        .into_iter()
        .find(|&a| iface.monotone_sign(bx, a).is_some())
    else {
        // no monotone direction: label the whole leaf by its center sign
        out.fallback_leaves += 1;
        let side = side_of(iface.phi(c));
        out.volume
            .extend(tensor_rule(bx, rule).map(|(s, t, w)| QuadPoint { s, t, w, side }));
        return Ok(());
    };
    let outer_axis = 1 - inner;
    let range = |axis: usize| if axis == 0 { (bx[0], bx[1]) } else { (bx[2], bx[3]) };
    let (a0, a1) = range(inner);
    let (b0, b1) = range(outer_axis);
    let pt = |b: f64, a: f64| -> [f64; 2] {
        if inner == 0 {
            [a, b]
        } else {
            [b, a]
        }
    };
    // breakpoints of the outer interval: where Γ leaves through the inner-axis faces
    let mut cuts = vec![b0, b1];
    for a in [a0, a1] {
        for l in iface.segment_roots(pt(b0, a), pt(b1, a)) {
            cuts.push(b0 + l * (b1 - b0));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (b1 - b0));
    for win in cuts.windows(2) {
        let (c0, c1) = (win[0], win[1]);
        let lb = c1 - c0;
        if lb <= 0.0 {
            continue;
        }
        for &(xo, wo) in outer {
            let b = c0 + lb * xo;
            let wb = wo * lb;
            let roots = iface.segment_roots(pt(b, a0), pt(b, a1));
            let mut pieces = Vec::with_capacity(2);
            match roots.first() {
                Some(&l) => {
                    let ar = a0 + l * (a1 - a0);
                    pieces.push((a0, ar));
                    pieces.push((ar, a1));
                    let p = pt(b, ar);
                    let gr = iface.grad(p);
                    let gn = norm(gr);
                    if gn > 0.0 && gr[inner].abs() > 0.0 {
                        out.interface.push(InterfacePoint {
                            s: p[0],
                            t: p[1],
                            w: wb * gn / gr[inner].abs(),
                            normal: [gr[0] / gn, gr[1] / gn],
                        });
                    }
                }
                None => pieces.push((a0, a1)),
            }
            for (p0, p1) in pieces {
                let la = p1 - p0;
                if la <= 0.0 {
                    continue;
                }
                let side = side_of(iface.phi(pt(b, 0.5 * (p0 + p1))));
                for &(xi, wi) in rule {
                    let p = pt(b, p0 + la * xi);
                    out.volume.push(QuadPoint {
                        s: p[0],
                        t: p[1],
                        w: wb * wi * la,
                        side,
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn paper_circle(inside_positive: bool) -> ImplicitInterface {
        ImplicitInterface::circle(
            [1.0 / 5f64.sqrt(), 1.0 / 3f64.sqrt()],
            1.0 / 10f64.sqrt(),
            inside_positive,
        )
    }

    struct Ellipse;
    impl LevelSet for Ellipse {
        fn phi(&self, p: [f64; 2]) -> f64 {
            1.0 - ((p[0] - 0.5) / 0.3).powi(2) - ((p[1] - 0.5) / 0.2).powi(2)
        }
        fn grad(&self, p: [f64; 2]) -> [f64; 2] {
            [
                -2.0 * (p[0] - 0.5) / 0.09,
                -2.0 * (p[1] - 0.5) / 0.04,
            ]
        }
    }

    struct CustomCircle;
    impl LevelSet for CustomCircle {
        fn phi(&self, p: [f64; 2]) -> f64 {
            0.09 - (p[0] - 0.5).powi(2) - (p[1] - 0.4).powi(2)
        }
        fn grad(&self, p: [f64; 2]) -> [f64; 2] {
            [-2.0 * (p[0] - 0.5), -2.0 * (p[1] - 0.4)]
        }
    }

    #[test]
    fn distances() {
        let l = ImplicitInterface::line([0.0, 0.0], [0.0, 1.0]);
        assert_eq!(l.distance([0.3, 1.0]).unwrap(), 1.0);
        assert_eq!(l.one_sided_distance([0.3, -1.0]).unwrap(), 0.0);
        let c = paper_circle(true);
        let centre = [1.0 / 5f64.sqrt(), 1.0 / 3f64.sqrt()];
        assert!((c.distance(centre).unwrap() - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        let on = [centre[0] + 1.0 / 10f64.sqrt(), centre[1]];
        assert!(c.distance(on).unwrap() < 1e-15);
        assert!(c.one_sided_distance(on).unwrap() < 1e-15);
    }

    #[test]
    fn custom_projection_matches_exact_circle() {
        let cu = ImplicitInterface::custom(CustomCircle);
        let ex = ImplicitInterface::circle([0.5, 0.4], 0.3, true);
        for &p in &[[0.1, 0.1], [0.5, 0.45], [0.9, 0.95], [0.75, 0.4]] {
            let (d1, g1) = cu.signed_distance_grad(p).unwrap();
            let (d2, g2) = ex.signed_distance_grad(p).unwrap();
            assert!((d1 - d2).abs() < 1e-10, "{p:?}: {d1} vs {d2}");
            assert!((g1[0] - g2[0]).abs() < 1e-8 && (g1[1] - g2[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn custom_projection_on_ellipse_is_orthogonal() {
        let el = ImplicitInterface::custom(Ellipse);
        let p = [0.95, 0.8];
        let q = el.closest_point(p).unwrap();
        assert!(el.phi(q).abs() < 1e-12);
        let g = el.grad(q);
        let d = sub(p, q);
        let cross = d[0] * g[1] - d[1] * g[0];
        assert!(cross.abs() < 1e-10 * norm(g));
    }

    fn brute_force_cut(sp: &SplineSpace2D, iface: &ImplicitInterface, e: usize) -> bool {
        let bx = sp.element_box(e);
        let n = 256;
        let (mut pos, mut neg) = (false, false);
        for j in 0..=n {
            for i in 0..=n {
                let v = iface.phi([
                    bx[0] + (bx[1] - bx[0]) * i as f64 / n as f64,
                    bx[2] + (bx[3] - bx[2]) * j as f64 / n as f64,
                ]);
                pos |= v > 0.0;
                neg |= v < 0.0;
            }
        }
        pos && neg
    }

    #[test]
    fn circle_cut_count_matches_sampling_oracle() {
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 5).unwrap();
        let iface = paper_circle(true);
        let class = classify_elements(&sp, &iface, 3).unwrap();
        let oracle = (0..sp.n_elements())
            .filter(|&e| brute_force_cut(&sp, &iface, e))
            .count();
        assert_eq!(class.cut_elements().len(), oracle);
        assert_eq!(oracle, 12);
    }

    #[test]
    fn horizontal_line_cuts_bottom_row() {
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 20).unwrap();
        let delta = 0.05 * 2f64.powi(-7);
        let iface = ImplicitInterface::line([0.0, delta], [0.0, -1.0]);
        let class = classify_elements(&sp, &iface, 2).unwrap();
        assert_eq!(class.cut_elements(), (0..20).collect::<Vec<_>>());
        assert!(class.flagged.is_empty());
        assert_eq!(class.jf_list(1).len(), 40);
        assert_eq!(class.jf_plus_list(1), (0..20).collect::<Vec<_>>());
        assert_eq!(class.jf_minus_list(1).len(), 40);
    }

    #[test]
    fn index_set_algebra() {
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 12).unwrap();
        let class = classify_elements(&sp, &paper_circle(false), 3).unwrap();
        for k in 0..3 {
            // J^f_{k+1} = J^f_k plus vertex neighbours
            let (ni, nj) = (12usize, 12usize);
            for e in 0..sp.n_elements() {
                let (ei, ej) = (e % ni, e / ni);
                let expect = (0..sp.n_elements()).any(|f| {
                    let (fi, fj) = (f % ni, f / nj);
                    class.in_jf(k, f) && fi.abs_diff(ei) <= 1 && fj.abs_diff(ej) <= 1
                });
                assert_eq!(class.in_jf(k + 1, e), expect);
                if class.in_jf(k, e) {
                    assert!(class.in_jf(k + 1, e));
                }
            }
            for e in 0..sp.n_elements() {
                assert_eq!(
                    class.in_jf(k, e),
                    class.in_jf_plus(k, e) || class.in_jf_minus(k, e)
                );
                if class.in_jf(0, e) {
                    assert!(class.in_jf_plus(k, e) && class.in_jf_minus(k, e));
                }
            }
        }
        let mut mask = class.jf[3].clone();
        for _ in 0..12 {
            mask = class.dilate(&mask);
        }
        assert!(mask.iter().all(|&m| m));
        assert!(class.jv_list(1).len() > class.jv_list(0).len());
    }

    #[test]
    fn circle_dof_relevant_counts() {
        // plus side = circle exterior
        let expect = [(5, 22), (20, 108), (40, 208)];
        for (n, count) in expect {
            let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, n).unwrap();
            let class = classify_elements(&sp, &paper_circle(false), 1).unwrap();
            assert_eq!(class.jf_plus_list(1).len(), count, "N = {n}");
        }
    }

    #[test]
    fn diagonal_line_halves_element() {
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 1).unwrap();
        let iface = ImplicitInterface::line([0.5, 0.5], [1.0, -1.0]);
        let part = cut_cell_partition(&sp, 0, &iface, 3, 3).unwrap();
        assert!((part.side_area(Side::Plus) - 0.5).abs() < 1e-10);
        assert!((part.side_area(Side::Minus) - 0.5).abs() < 1e-10);
        assert!((part.interface_length() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn circle_arc_partition() {
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 5).unwrap();
        let iface = paper_circle(true);
        let class = classify_elements(&sp, &iface, 1).unwrap();
        let mut total_len = 0.0;
        for e in class.cut_elements() {
            let part = cut_cell_partition(&sp, e, &iface, 2, 3).unwrap();
            let bx = sp.element_box(e);
            let area = (bx[1] - bx[0]) * (bx[3] - bx[2]);
            let sum = part.side_area(Side::Plus) + part.side_area(Side::Minus);
            assert!((sum - area).abs() < 1e-12 * area);
            for q in &part.interface {
                assert!(iface.phi([q.s, q.t]).abs() < 1e-12);
                let c = [1.0 / 5f64.sqrt(), 1.0 / 3f64.sqrt()];
                let d = sub(c, [q.s, q.t]);
                let exact = [d[0] / norm(d), d[1] / norm(d)];
                assert!(dot(exact, q.normal) >= 1.0 - 1e-8);
            }
            for c in &part.cells {
                if let Some(side) = c.side {
                    let m = [0.5 * (c.bx[0] + c.bx[1]), 0.5 * (c.bx[2] + c.bx[3])];
                    assert_eq!(side_of(iface.phi(m)), side);
                }
            }
            total_len += part.interface_length();
        }
        let exact = 2.0 * PI / 10f64.sqrt();
        assert!((total_len - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn plus_measure_matches_disk_area() {
        let n = 40;
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, n).unwrap();
        let iface = paper_circle(true);
        let class = classify_elements(&sp, &iface, 0).unwrap();
        let mut area = 0.0;
        for e in 0..sp.n_elements() {
            match class.labels[e] {
                ElementLabel::Plus => area += 1.0 / (n * n) as f64,
                ElementLabel::Minus => {}
                ElementLabel::Cut => {
                    area += cut_cell_partition(&sp, e, &iface, 1, 3)
                        .unwrap()
                        .side_area(Side::Plus)
                }
            }
        }
        assert!((area - PI / 10.0).abs() < 1e-6 * PI / 10.0, "{area}");
    }

    #[test]
    fn uncut_element_is_rejected() {
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 5).unwrap();
        let err = cut_cell_partition(&sp, 0, &paper_circle(true), 3, 3).unwrap_err();
        assert_eq!(err, Error::NotCut { element: 0 });
    }

    #[test]
    fn wiggly_interface_is_refused() {
        struct Wiggle;
        impl LevelSet for Wiggle {
            fn phi(&self, p: [f64; 2]) -> f64 {
                p[1] - 0.5 - 0.1 * (40.0 * p[0]).sin()
            }
            fn grad(&self, p: [f64; 2]) -> [f64; 2] {
                [-4.0 * (40.0 * p[0]).cos(), 1.0]
            }
        }
        let iface = ImplicitInterface::custom(Wiggle);
        // thin element whose bottom and top edges are crossed many times
        let sp2 = SplineSpace2D::uniform(0.0, 1.0, 0.45, 0.55, 1).unwrap();
        let err = cut_cell_partition(&sp2, 0, &iface, 2, 3).unwrap_err();
        assert!(matches!(err, Error::UnresolvedInterface { .. }));
    }

    #[test]
    fn custom_level_set_partition() {
        let sp = SplineSpace2D::uniform(0.0, 1.0, 0.0, 1.0, 8).unwrap();
        let iface = ImplicitInterface::custom(Ellipse);
        let class = classify_elements(&sp, &iface, 0).unwrap();
        let mut area = 0.0;
        for e in 0..sp.n_elements() {
            match class.labels[e] {
                ElementLabel::Plus => area += 1.0 / 64.0,
                ElementLabel::Minus => {}
                ElementLabel::Cut => {
                    area += cut_cell_partition(&sp, e, &iface, 2, 4)
                        .unwrap()
                        .side_area(Side::Plus)
                }
            }
        }
        assert!((area - PI * 0.3 * 0.2).abs() < 1e-8, "{area}");
    }
}

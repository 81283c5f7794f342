//! Enrichment spaces for the unfitted method variants.
//!
//! Every enrichment function has the form ψ = W · (g − I g): a window W (one
//! B-spline, or a partition-of-unity function θ_j), a generator g built from a
//! distance to Γ times a monomial, and an optional spline I g subtracted from
//! it (plain or modified quasi-interpolant). The stabilized variants further
//! transform the span algebraically: ψ* = ψ − Σ_i T_il N_i (local L²
//! projection) and ψ** = L⁻¹ψ* (energy orthogonalization).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::interface_geometry::{ImplicitInterface, MeshClassification, Side};
use crate::linalg::{backward_unit_t, forward_unit, ldlt, ldlt_drop};
use crate::quadrature::MeshQuadrature;
use crate::quasi_interp::{qi_2d, qi_modified_2d, ExtensionPair};
use crate::splines::{Basis2D, GeometryMap, SplineSpace2D};

/// The method variants that can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Iga,
    Giga,
    Sgiga,
    CorrectedGiga,
    SgigaMulti,
    GigaStar,
    Sgiga2,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Iga,
        Method::Giga,
        Method::Sgiga,
        Method::CorrectedGiga,
        Method::SgigaMulti,
        Method::GigaStar,
        Method::Sgiga2,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Iga => "iga",
            Method::Giga => "giga",
            Method::Sgiga => "sgiga",
            Method::CorrectedGiga => "cor-giga",
            Method::SgigaMulti => "sgiga-multi",
            Method::GigaStar => "giga-star",
            Method::Sgiga2 => "sgiga2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// A method together with its stabilization switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodVariant {
    pub method: Method,
    pub projection_t: bool,
    pub orthogonalize: bool,
}

impl MethodVariant {
    /// Default switches: the θ_j/I_b* spaces (GIGA*, SGIGA2) are stabilized.
    ///
    /// Unstabilized GIGA* has nearly dependent enrichments where
    /// d̃_Γ − I_b* d̃_Γ is small, and its conditioning then depends erratically
    /// on the cut geometry; the transforms do not change its span.
    pub fn new(method: Method) -> Self {
        let stab = matches!(method, Method::Sgiga2 | Method::GigaStar);
        Self {
            method,
            projection_t: stab,
            orthogonalize: stab,
        }
    }

    pub fn with_stabilization(mut self, projection_t: bool, orthogonalize: bool) -> Self {
        self.projection_t = projection_t;
        self.orthogonalize = orthogonalize;
        self
    }
}

impl From<Method> for MethodVariant {
    fn from(m: Method) -> Self {
        Self::new(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// d_Γ.
    Unsigned,
    /// d̃_Γ: d_Γ on the plus side, zero on the minus side.
    OneSided,
    /// d_Γ times the ramp r = Σ of the enriched B-splines.
    Ramped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monomial {
    One,
    S,
    T,
}

impl Monomial {
    fn eval(self, s: f64, t: f64) -> (f64, [f64; 2]) {
        match self {
            Monomial::One => (1.0, [0.0, 0.0]),
            Monomial::S => (s, [1.0, 0.0]),
            Monomial::T => (t, [0.0, 1.0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subtraction {
    None,
    /// Plain quasi-interpolant I_b.
    Plain,
    /// Modified quasi-interpolant I_b*.
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Generator {
    pub distance: DistanceKind,
    pub monomial: Monomial,
    pub subtraction: Subtraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// A single B-spline N_b.
    Basis(usize),
    /// θ_j for enriched element j.
    Theta(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnrichmentFn {
    pub window: Window,
    pub generator: usize,
}

/// ψ* = ψ − Σ_{i ∈ subspace} T_il N_i.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub subspace: Vec<usize>,
    /// |subspace| × n_functions.
    pub t: DMatrix<f64>,
}

/// ψ** = L⁻¹ ψ*[kept] with K_EE* = L D Lᵀ on the kept functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Orthogonalization {
    pub kept: Vec<usize>,
    pub l: DMatrix<f64>,
    pub d: DVector<f64>,
}

/// Relative pivot threshold below which an enrichment function is dropped
/// during orthogonalization.
pub const ORTHO_DROP_TOL: f64 = 1e-12;

/// Evaluable enrichment basis for one method variant.
#[derive(Debug, Clone)]
pub struct EnrichedSpace {
    pub variant: MethodVariant,
    pub functions: Vec<EnrichmentFn>,
    pub generators: Vec<Generator>,
    /// μ_b per B-spline.
    pub mu: Vec<usize>,
    /// Elements where the enrichment is anchored (J^f_0 for basis windows,
    /// J^f_{1,+} for θ windows).
    pub enriched_elements: Vec<usize>,
    subtract: Vec<Option<Vec<f64>>>,
    ramp: Option<Vec<f64>>,
    // per element: (function, window coefficients on the element's 9 bases)
    element_fns: Vec<Vec<(usize, [f64; 9])>>,
    iface: ImplicitInterface,
    pub projection: Option<Projection>,
    pub orthogonalization: Option<Orthogonalization>,
}

/// μ_b = number of J^f_{1,+} elements inside the support of N_b.
pub fn mu_counts(class: &MeshClassification, space: &SplineSpace2D) -> Vec<usize> {
    let mask: Vec<bool> = (0..space.n_elements()).map(|e| class.in_j1_plus(e)).collect();
    mu_counts_for(space, &mask)
}

/// μ counts for an arbitrary enriched-element mask.
pub fn mu_counts_for(space: &SplineSpace2D, enriched: &[bool]) -> Vec<usize> {
    (0..space.n_basis())
        .map(|b| {
            space
                .support_elements(b)
                .into_iter()
                .filter(|&e| enriched[e])
                .count()
        })
        .collect()
}

/// B-spline coefficients (b, 1/μ_b) of θ_j.
pub fn theta_coefficients(
    space: &SplineSpace2D,
    mu: &[usize],
    j: usize,
) -> Result<Vec<(usize, f64)>> {
    space
        .element_basis(j)
        .into_iter()
        .map(|b| {
            if mu[b] == 0 {
                Err(Error::InvalidArgument(format!(
                    "element {j} is not enriched (basis {b} has μ = 0)"
                )))
            } else {
                Ok((b, 1.0 / mu[b] as f64))
            }
        })
        .collect()
}

/// Evaluate θ_j (given by its coefficients) at a point.
pub fn eval_theta(space: &SplineSpace2D, coeffs: &[(usize, f64)], s: f64, t: f64) -> Result<f64> {
    let e = space.find_element(s, t)?;
    let b = space.eval_on_element(e, s, t);
    Ok(coeffs
        .iter()
        .map(|&(bi, c)| {
            b.index
                .iter()
                .position(|&x| x == bi)
                .map_or(0.0, |k| c * b.value[k])
        })
        .sum())
}

fn signed_distance_fn(iface: &ImplicitInterface) -> impl Fn(f64, f64) -> f64 + Sync + '_ {
    move |s, t| iface.signed_distance([s, t]).unwrap_or(f64::NAN)
}

/// Build the enrichment for `variant`.
///
/// The classification must carry at least three dilation levels.
pub fn build_enrichment(
    variant: MethodVariant,
    space: &SplineSpace2D,
    iface: &ImplicitInterface,
    class: &MeshClassification,
) -> Result<EnrichedSpace> {
    if class.max_k() < 3 {
        return Err(Error::InvalidArgument(format!(
            "classification has {} dilation levels, need at least 3",
            class.max_k()
        )));
    }
    if class.labels.len() != space.n_elements() {
        return Err(Error::GridMismatch(
            "classification and space differ in element count".into(),
        ));
    }
    let mu = mu_counts(class, space);
    let mut out = EnrichedSpace {
        variant,
        functions: Vec::new(),
        generators: Vec::new(),
        mu,
        enriched_elements: Vec::new(),
        subtract: Vec::new(),
        ramp: None,
        element_fns: vec![Vec::new(); space.n_elements()],
        iface: iface.clone(),
        projection: None,
        orthogonalization: None,
    };
    let cut = class.cut_elements();
    if variant.method == Method::Iga {
        return Ok(out);
    }
    if cut.is_empty() {
        log::warn!("interface cuts no element; enrichment is empty");
        return Ok(out);
    }
    let monomials: &[Monomial] = match variant.method {
        Method::SgigaMulti | Method::Sgiga2 => &[Monomial::One, Monomial::S, Monomial::T],
        _ => &[Monomial::One],
    };
    let (distance, subtraction) = match variant.method {
        Method::Giga => (DistanceKind::Unsigned, Subtraction::None),
        Method::CorrectedGiga => (DistanceKind::Ramped, Subtraction::None),
        Method::Sgiga | Method::SgigaMulti => (DistanceKind::Unsigned, Subtraction::Plain),
        Method::GigaStar | Method::Sgiga2 => (DistanceKind::OneSided, Subtraction::Modified),
        Method::Iga => unreachable!(),
    };
    for &m in monomials {
        out.generators.push(Generator {
            distance,
            monomial: m,
            subtraction,
        });
    }
    let sd = signed_distance_fn(iface);
    for g in &out.generators {
        let coeffs = match g.subtraction {
            Subtraction::None => None,
            Subtraction::Plain => {
                let m = g.monomial;
                let f = |s: f64, t: f64| sd(s, t).abs() * m.eval(s, t).0;
                Some(qi_2d(&f, space)?.coeffs)
            }
            Subtraction::Modified => {
                let m = g.monomial;
                let f0 = |s: f64, t: f64| sd(s, t) * m.eval(s, t).0;
                let f1 = |_: f64, _: f64| 0.0;
                let ext = ExtensionPair { f0: &f0, f1: &f1 };
                Some(qi_modified_2d(&ext, class, space)?.coeffs)
            }
        };
        out.subtract.push(coeffs);
    }
    // windows
    let mut windows: Vec<(Window, Vec<(usize, f64)>)> = Vec::new();
    match variant.method {
        Method::GigaStar | Method::Sgiga2 => {
            out.enriched_elements = class.jf_plus_list(1);
            for &j in &out.enriched_elements {
                windows.push((Window::Theta(j), theta_coefficients(space, &out.mu, j)?));
            }
        }
        _ => {
            out.enriched_elements = cut.clone();
            let is_cut = &class.jf[0];
            let bases: Vec<usize> = (0..space.n_basis())
                .filter(|&b| space.support_elements(b).iter().any(|&e| is_cut[e]))
                .collect();
            if variant.method == Method::CorrectedGiga {
                let mut r = vec![0.0; space.n_basis()];
                for &b in &bases {
                    r[b] = 1.0;
                }
                out.ramp = Some(r);
            }
            for b in bases {
                windows.push((Window::Basis(b), vec![(b, 1.0)]));
            }
        }
    }
    for (window, coeffs) in windows {
        let mut elems: Vec<usize> = coeffs
            .iter()
            .flat_map(|&(b, _)| space.support_elements(b))
            .collect();
        elems.sort_unstable();
        elems.dedup();
        let first = out.functions.len();
        for g in 0..out.generators.len() {
            out.functions.push(EnrichmentFn { window, generator: g });
        }
        for e in elems {
            let idx = space.element_basis(e);
            let mut wc = [0.0; 9];
            for &(b, c) in &coeffs {
                if let Some(k) = idx.iter().position(|&x| x == b) {
                    wc[k] = c;
                }
            }
            for g in 0..out.generators.len() {
                out.element_fns[e].push((first + g, wc));
            }
        }
    }
    Ok(out)
}

/// One enrichment function evaluated at a point: (index, value, parametric gradient).
pub type EnrichmentValue = (usize, f64, [f64; 2]);

impl EnrichedSpace {
    /// Number of raw enrichment functions.
    pub fn n_raw(&self) -> usize {
        self.functions.len()
    }

    /// Number of functions after orthogonalization (pivot drops removed).
    pub fn n_final(&self) -> usize {
        match &self.orthogonalization {
            Some(o) => o.kept.len(),
            None => self.functions.len(),
        }
    }

    pub fn interface(&self) -> &ImplicitInterface {
        &self.iface
    }

    /// Raw functions with support on element `e`.
    pub fn element_functions(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.element_fns[e].iter().map(|x| x.0)
    }

    pub fn has_functions_on(&self, e: usize) -> bool {
        !self.element_fns[e].is_empty()
    }

    /// Evaluate all raw functions supported on `e` at `(s, t)`.
    ///
    /// `side` selects the branch of the distance function; points on Γ may
    /// pass either side.
    pub fn eval_raw(
        &self,
        e: usize,
        s: f64,
        t: f64,
        side: Side,
        basis: &Basis2D,
        out: &mut Vec<EnrichmentValue>,
    ) -> Result<()> {
        out.clear();
        let fns = &self.element_fns[e];
        if fns.is_empty() {
            return Ok(());
        }
        let (sd, gsd) = self.iface.signed_distance_grad([s, t])?;
        let mut gen_vals = Vec::with_capacity(self.generators.len());
        for (gi, g) in self.generators.iter().enumerate() {
            let (mut v, mut gr) = match (g.distance, side) {
                (DistanceKind::OneSided, Side::Minus) => (0.0, [0.0, 0.0]),
                (DistanceKind::OneSided, Side::Plus) => (sd, gsd),
                (_, side) => {
                    let sg = if side == Side::Plus { 1.0 } else { -1.0 };
                    (sg * sd, [sg * gsd[0], sg * gsd[1]])
                }
            };
            if g.distance == DistanceKind::Ramped {
                let r = self.ramp.as_ref().expect("ramped generator has a ramp");
                let (mut rv, mut rg) = (0.0, [0.0; 2]);
                for k in 0..9 {
                    let c = r[basis.index[k]];
                    rv += c * basis.value[k];
                    rg[0] += c * basis.ds[k];
                    rg[1] += c * basis.dt[k];
                }
                gr = [gr[0] * rv + v * rg[0], gr[1] * rv + v * rg[1]];
                v *= rv;
            }
            let (m, mg) = g.monomial.eval(s, t);
            gr = [gr[0] * m + v * mg[0], gr[1] * m + v * mg[1]];
            v *= m;
            if let Some(c) = &self.subtract[gi] {
                for k in 0..9 {
                    let ck = c[basis.index[k]];
                    v -= ck * basis.value[k];
                    gr[0] -= ck * basis.ds[k];
                    gr[1] -= ck * basis.dt[k];
                }
            }
            gen_vals.push((v, gr));
        }
        for &(l, ref wc) in fns {
            let (mut w, mut wg) = (0.0, [0.0; 2]);
            for k in 0..9 {
                w += wc[k] * basis.value[k];
                wg[0] += wc[k] * basis.ds[k];
                wg[1] += wc[k] * basis.dt[k];
            }
            let (gv, gg) = gen_vals[self.functions[l].generator];
            out.push((
                l,
                w * gv,
                [wg[0] * gv + w * gg[0], wg[1] * gv + w * gg[1]],
            ));
        }
        Ok(())
    }

    /// Values of the final (transformed) functions at a point, as a dense vector.
    pub fn eval_final_values(
        &self,
        space: &SplineSpace2D,
        e: usize,
        s: f64,
        t: f64,
        side: Side,
    ) -> Result<Vec<f64>> {
        let basis = space.eval_on_element(e, s, t);
        let mut raw = Vec::new();
        self.eval_raw(e, s, t, side, &basis, &mut raw)?;
        let mut psi = vec![0.0; self.n_raw()];
        for (l, v, _) in raw {
            psi[l] = v;
        }
        if let Some(p) = &self.projection {
            for (pos, &b) in p.subspace.iter().enumerate() {
                if let Some(k) = basis.index.iter().position(|&x| x == b) {
                    let nb = basis.value[k];
                    for l in 0..psi.len() {
                        psi[l] -= p.t[(pos, l)] * nb;
                    }
                }
            }
        }
        if let Some(o) = &self.orthogonalization {
            let mut y: Vec<f64> = o.kept.iter().map(|&l| psi[l]).collect();
            forward_unit(&o.l, &mut y);
            return Ok(y);
        }
        Ok(psi)
    }

    /// Map final coefficients (c, e) back to B-spline and raw-enrichment
    /// coefficients so that u_h = Σ c'_i N_i + Σ e'_l ψ_l.
    pub fn to_raw_coefficients(&self, c: &[f64], e: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut er = vec![0.0; self.n_raw()];
        match &self.orthogonalization {
            Some(o) => {
                let mut y = e.to_vec();
                backward_unit_t(&o.l, &mut y);
                for (pos, &l) in o.kept.iter().enumerate() {
                    er[l] = y[pos];
                }
            }
            None => er.copy_from_slice(e),
        }
        let mut cr = c.to_vec();
        if let Some(p) = &self.projection {
            let te = &p.t * DVector::from_column_slice(&er);
            for (pos, &b) in p.subspace.iter().enumerate() {
                cr[b] -= te[pos];
            }
        }
        (cr, er)
    }
}

/// Compute the local L² projection T = M⁻¹G onto the B-splines whose support
/// meets J^f_{1,+} (those with μ > 0) and attach it to `enr`.
pub fn apply_projection_t(
    enr: &mut EnrichedSpace,
    space: &SplineSpace2D,
    geo: &GeometryMap,
    quad: &MeshQuadrature,
) -> Result<()> {
    let ne = enr.n_raw();
    let subspace: Vec<usize> = (0..space.n_basis()).filter(|&b| enr.mu[b] > 0).collect();
    if ne == 0 || subspace.is_empty() {
        enr.projection = None;
        return Ok(());
    }
    let mut pos = vec![usize::MAX; space.n_basis()];
    for (p, &b) in subspace.iter().enumerate() {
        pos[b] = p;
    }
    let mut elems: Vec<usize> = subspace
        .iter()
        .flat_map(|&b| space.support_elements(b))
        .collect();
    elems.sort_unstable();
    elems.dedup();
    let nv = subspace.len();
    let mut m = DMatrix::<f64>::zeros(nv, nv);
    let mut g = DMatrix::<f64>::zeros(nv, ne);
    let mut vals = Vec::new();
    for e in elems {
        for q in quad.volume(space, e) {
            let basis = space.eval_on_element(e, q.s, q.t);
            let w = q.w * geo.eval(q.s, q.t)?.det.abs();
            enr.eval_raw(e, q.s, q.t, q.side, &basis, &mut vals)?;
            for a in 0..9 {
                let pa = pos[basis.index[a]];
                if pa == usize::MAX {
                    continue;
                }
                let na = basis.value[a] * w;
                for b in 0..9 {
                    let pb = pos[basis.index[b]];
                    if pb != usize::MAX {
                        m[(pa, pb)] += na * basis.value[b];
                    }
                }
                for &(l, v, _) in &vals {
                    g[(pa, l)] += na * v;
                }
            }
        }
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Singular("projection mass matrix is not positive definite".into()))?;
    let t = chol.solve(&g);
    enr.projection = Some(Projection { subspace, t });
    Ok(())
}

/// Factor the enrichment stiffness block and attach the orthogonalizing
/// transform. With `drop_tol = None` a non-positive pivot is an error;
/// otherwise dependent functions are removed.
pub fn orthogonalize_ldl(
    enr: &mut EnrichedSpace,
    k_ee: &DMatrix<f64>,
    drop_tol: Option<f64>,
) -> Result<()> {
    let n = k_ee.nrows();
    if n != enr.n_raw() {
        return Err(Error::GridMismatch(format!(
            "K_EE is {n}×{n} but there are {} enrichment functions",
            enr.n_raw()
        )));
    }
    let o = match drop_tol {
        Some(tol) => {
            let (kept, l, d) = ldlt_drop(k_ee, tol);
            let dropped = n - kept.len();
            if dropped > 0 {
                log::info!("orthogonalization dropped {dropped} dependent enrichment functions");
            }
            Orthogonalization { kept, l, d }
        }
        None => {
            let (l, d) = ldlt(k_ee)?;
            Orthogonalization {
                kept: (0..n).collect(),
                l,
                d,
            }
        }
    };
    enr.orthogonalization = Some(o);
    Ok(())
}

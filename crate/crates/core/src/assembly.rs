//! Galerkin assembly of the interface problem −∇·(a∇u) = f with Neumann data,
//! algebraic stabilization of the enrichment block, scaling, solve and error
//! norms.
//!
//! Unknowns are ordered as [spline coefficients | enrichment coefficients].
//! Data closures are evaluated at parameter points `(s, t)`; gradients and
//! normals they receive or return are physical.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::enrichment::EnrichedSpace;
use crate::error::{Error, Result};
use crate::interface_geometry::Side;
use crate::linalg::{solve_constrained, SymMatrix};
use crate::quadrature::{gauss_legendre, MeshQuadrature};
use crate::splines::{GeometryEval, GeometryMap, SplineSpace2D};

/// Source term f(s, t, side).
pub type SourceFn = Arc<dyn Fn(f64, f64, Side) -> f64 + Send + Sync>;
/// Boundary flux g(s, t, outward unit normal, side).
pub type BoundaryFluxFn = Arc<dyn Fn(f64, f64, [f64; 2], Side) -> f64 + Send + Sync>;
/// Interface flux jump q(s, t, unit normal pointing into the plus side).
pub type InterfaceFluxFn = Arc<dyn Fn(f64, f64, [f64; 2]) -> f64 + Send + Sync>;
/// Exact solution: value and physical gradient.
pub type ExactFn = Arc<dyn Fn(f64, f64, Side) -> (f64, [f64; 2]) + Send + Sync>;

/// Coefficients, data and geometry of one interface problem.
///
/// The interface load is ∫_Γ q v with q = a₊∇u₊·n₊ + a₋∇u₋·n₋ (outward
/// normals of each side).
#[derive(Clone)]
pub struct ProblemData {
    pub a_plus: f64,
    pub a_minus: f64,
    pub source: SourceFn,
    pub boundary_flux: BoundaryFluxFn,
    pub interface_flux: InterfaceFluxFn,
    pub exact: Option<ExactFn>,
    pub geometry: GeometryMap,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("a_plus", &self.a_plus)
            .field("a_minus", &self.a_minus)
            .field("has_exact", &self.exact.is_some())
            .field("geometry", &self.geometry)
            .finish()
    }
}

impl ProblemData {
    pub fn new(
        a_plus: f64,
        a_minus: f64,
        source: SourceFn,
        boundary_flux: BoundaryFluxFn,
        interface_flux: InterfaceFluxFn,
        geometry: GeometryMap,
    ) -> Result<Self> {
        if !(a_plus > 0.0 && a_minus > 0.0) || !a_plus.is_finite() || !a_minus.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "coefficients must be positive, got {a_plus} and {a_minus}"
            )));
        }
        Ok(Self {
            a_plus,
            a_minus,
            source,
            boundary_flux,
            interface_flux,
            exact: None,
            geometry,
        })
    }

    /// Data derived from an exact solution: g and q come from its gradient.
    pub fn from_exact(
        a_plus: f64,
        a_minus: f64,
        source: SourceFn,
        exact: ExactFn,
        geometry: GeometryMap,
    ) -> Result<Self> {
        let ex = exact.clone();
        let boundary: BoundaryFluxFn = Arc::new(move |s, t, n, side| {
            let a = if side == Side::Plus { a_plus } else { a_minus };
            let g = ex(s, t, side).1;
            a * (g[0] * n[0] + g[1] * n[1])
        });
        let ex = exact.clone();
        let interface: InterfaceFluxFn = Arc::new(move |s, t, n| {
            let gp = ex(s, t, Side::Plus).1;
            let gm = ex(s, t, Side::Minus).1;
            -a_plus * (gp[0] * n[0] + gp[1] * n[1]) + a_minus * (gm[0] * n[0] + gm[1] * n[1])
        });
        let mut d = Self::new(a_plus, a_minus, source, boundary, interface, geometry)?;
        d.exact = Some(exact);
        Ok(d)
    }

    pub fn coefficient(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.a_plus,
            Side::Minus => self.a_minus,
        }
    }
}

/// Assembled linear system in some enrichment basis.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    /// Full symmetric matrix, `band_split` = number of spline coefficients.
    pub k: SymMatrix,
    pub f: Vec<f64>,
    pub n_original: usize,
}

impl BlockSystem {
    pub fn n_enrichment(&self) -> usize {
        self.k.dim() - self.n_original
    }
}

/// Final system after stabilization and zero-row cleanup.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub k: SymMatrix,
    pub f: Vec<f64>,
    pub n_original: usize,
    /// Enrichment functions of the transformed basis before cleanup.
    pub n_enrichment: usize,
    /// Rows of the transformed system retained in `k` (indices into
    /// `0..n_original + n_enrichment`).
    pub active: Vec<usize>,
    /// ∫N_i over the physical domain, for the mean-value constraint.
    pub basis_integrals: Vec<f64>,
    /// |∫f + ∫g + ∫q| relative to the sum of magnitudes.
    pub compatibility: f64,
}

impl AssembledSystem {
    pub fn dofs(&self) -> usize {
        self.active.len()
    }

    pub fn dropped(&self) -> usize {
        self.n_original + self.n_enrichment - self.active.len()
    }
}

/// Relative threshold for discarding enrichment rows with vanishing energy.
pub const ZERO_ROW_TOL: f64 = 1e-14;

struct PointData {
    geo: GeometryEval,
    w: f64,
}

fn point_geometry(geo: &GeometryMap, s: f64, t: f64, w: f64) -> Result<PointData> {
    let g = geo.eval(s, t)?;
    Ok(PointData {
        w: w * g.det.abs(),
        geo: g,
    })
}

fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

/// Physical unit normal and length factor for a parameter-space unit normal.
fn physical_normal(g: &GeometryEval, n_param: [f64; 2]) -> ([f64; 2], f64) {
    let np = normalize(g.physical_gradient(n_param));
    let tau = [-n_param[1], n_param[0]];
    let jt = [
        g.jac[0][0] * tau[0] + g.jac[0][1] * tau[1],
        g.jac[1][0] * tau[0] + g.jac[1][1] * tau[1],
    ];
    (np, (jt[0] * jt[0] + jt[1] * jt[1]).sqrt())
}

struct LocalOut {
    trip: Vec<(usize, usize, f64)>,
    load: Vec<(usize, f64)>,
    basis_int: [f64; 9],
    mag: f64,
}

fn side_of(enr: &EnrichedSpace, s: f64, t: f64) -> Side {
    if enr.interface().phi([s, t]) >= 0.0 {
        Side::Plus
    } else {
        Side::Minus
    }
}

fn assemble_element(
    space: &SplineSpace2D,
    enr: &EnrichedSpace,
    quad: &MeshQuadrature,
    data: &ProblemData,
    e: usize,
    edge_rule: &[(f64, f64)],
) -> Result<LocalOut> {
    let n_o = space.n_basis();
    let idx = space.element_basis(e);
    let fns: Vec<usize> = enr.element_functions(e).collect();
    let nl = 9 + fns.len();
    let mut dofs: Vec<usize> = idx.to_vec();
    dofs.extend(fns.iter().map(|&l| n_o + l));
    let mut pos = std::collections::HashMap::with_capacity(fns.len());
    for (k, &l) in fns.iter().enumerate() {
        pos.insert(l, 9 + k);
    }
    let mut ke = vec![0.0; nl * nl];
    let mut fe = vec![0.0; nl];
    let mut basis_int = [0.0; 9];
    let mut mag = 0.0;
    let mut vals = vec![0.0; nl];
    let mut grads = vec![[0.0; 2]; nl];
    let mut raw = Vec::new();
    let mut fill = |s: f64, t: f64, side: Side, vals: &mut [f64], grads: &mut [[f64; 2]], geo: Option<&GeometryEval>| -> Result<()> {
        let b = space.eval_on_element(e, s, t);
        for k in 0..9 {
            vals[k] = b.value[k];
            grads[k] = [b.ds[k], b.dt[k]];
        }
        for k in 9..nl {
            vals[k] = 0.0;
            grads[k] = [0.0; 2];
        }
        enr.eval_raw(e, s, t, side, &b, &mut raw)?;
        for &(l, v, g) in &raw {
            let k = pos[&l];
            vals[k] = v;
            grads[k] = g;
        }
        if let Some(g) = geo {
            for gr in grads.iter_mut() {
                *gr = g.physical_gradient(*gr);
            }
        }
        Ok(())
    };
    for q in quad.volume(space, e) {
        let p = point_geometry(&data.geometry, q.s, q.t, q.w)?;
        fill(q.s, q.t, q.side, &mut vals, &mut grads, Some(&p.geo))?;
        let a = data.coefficient(q.side) * p.w;
        for i in 0..nl {
            let gi = grads[i];
            if gi == [0.0, 0.0] {
                continue;
            }
            for j in 0..nl {
                ke[i * nl + j] += a * (gi[0] * grads[j][0] + gi[1] * grads[j][1]);
            }
        }
        let fv = (data.source)(q.s, q.t, q.side) * p.w;
        mag += fv.abs();
        for i in 0..nl {
            fe[i] += fv * vals[i];
        }
        for k in 0..9 {
            basis_int[k] += p.w * vals[k];
        }
    }
    // interface load
    for ip in quad.interface(e) {
        let g = data.geometry.eval(ip.s, ip.t)?;
        let (n, ds) = physical_normal(&g, ip.normal);
        let qv = (data.interface_flux)(ip.s, ip.t, n) * ip.w * ds;
        mag += qv.abs();
        fill(ip.s, ip.t, Side::Plus, &mut vals, &mut grads, None)?;
        for i in 0..nl {
            fe[i] += qv * vals[i];
        }
    }
    // boundary load
    let (ei, ej) = space.element_ij(e);
    let bx = space.element_box(e);
    let mut edges: Vec<([f64; 2], [f64; 2], [f64; 2])> = Vec::new();
    if ei == 0 {
        edges.push(([bx[0], bx[2]], [bx[0], bx[3]], [-1.0, 0.0]));
    }
    if ei + 1 == space.n_elem_s() {
        edges.push(([bx[1], bx[2]], [bx[1], bx[3]], [1.0, 0.0]));
    }
    if ej == 0 {
        edges.push(([bx[0], bx[2]], [bx[1], bx[2]], [0.0, -1.0]));
    }
    if ej + 1 == space.n_elem_t() {
        edges.push(([bx[0], bx[3]], [bx[1], bx[3]], [0.0, 1.0]));
    }
    for (p0, p1, np) in edges {
        let mut cuts = vec![0.0];
        if quad.is_cut(e) {
            cuts.extend(enr.interface().segment_roots(p0, p1));
        }
        cuts.push(1.0);
        let len = ((p1[0] - p0[0]).powi(2) + (p1[1] - p0[1]).powi(2)).sqrt();
        for w in cuts.windows(2) {
            let (l0, l1) = (w[0], w[1]);
            if l1 - l0 <= 0.0 {
                continue;
            }
            let lm = 0.5 * (l0 + l1);
            let side = side_of(enr, p0[0] + lm * (p1[0] - p0[0]), p0[1] + lm * (p1[1] - p0[1]));
            for &(x, wx) in edge_rule {
                let lam = l0 + (l1 - l0) * x;
                let s = p0[0] + lam * (p1[0] - p0[0]);
                let t = p0[1] + lam * (p1[1] - p0[1]);
                let g = data.geometry.eval(s, t)?;
                let (n, ds) = physical_normal(&g, np);
                let gv = (data.boundary_flux)(s, t, n, side) * wx * (l1 - l0) * len * ds;
                mag += gv.abs();
                fill(s, t, side, &mut vals, &mut grads, None)?;
                for i in 0..nl {
                    fe[i] += gv * vals[i];
                }
            }
        }
    }
    let mut trip = Vec::with_capacity(nl * nl);
    for i in 0..nl {
        for j in 0..nl {
            let v = ke[i * nl + j];
            if v != 0.0 {
                trip.push((dofs[i], dofs[j], v));
            }
        }
    }
    let load = dofs.iter().copied().zip(fe).collect();
    Ok(LocalOut {
        trip,
        load,
        basis_int,
        mag,
    })
}

/// Assemble the system in the raw enrichment basis ψ (no stabilization).
///
/// Also returns ∫N_i and the compatibility ratio.
pub fn assemble_raw(
    space: &SplineSpace2D,
    enr: &EnrichedSpace,
    quad: &MeshQuadrature,
    data: &ProblemData,
) -> Result<(BlockSystem, Vec<f64>, f64)> {
    if quad.n_elements() != space.n_elements() {
        return Err(Error::GridMismatch(
            "quadrature and space differ in element count".into(),
        ));
    }
    let n_o = space.n_basis();
    let n = n_o + enr.n_raw();
    let edge_rule = gauss_legendre(quad.settings.gauss.max(3) + 1);
    let locals = (0..space.n_elements())
        .into_par_iter()
        .map(|e| assemble_element(space, enr, quad, data, e, &edge_rule))
        .collect::<Result<Vec<_>>>()?;
    let mut trip = Vec::with_capacity(locals.iter().map(|l| l.trip.len()).sum());
    let mut f = vec![0.0; n];
    let mut ints = vec![0.0; n_o];
    let mut mag = 0.0;
    for (e, l) in locals.into_iter().enumerate() {
        trip.extend(l.trip);
        for (i, v) in l.load {
            f[i] += v;
        }
        for (k, &b) in space.element_basis(e).iter().enumerate() {
            ints[b] += l.basis_int[k];
        }
        mag += l.mag;
    }
    let k = SymMatrix::from_triplets(n, trip)?.with_band_split(n_o);
    let total: f64 = f[..n_o].iter().sum();
    let compat = if mag > 0.0 { total.abs() / mag } else { 0.0 };
    Ok((
        BlockSystem {
            k,
            f,
            n_original: n_o,
        },
        ints,
        compat,
    ))
}

fn dense_block(k: &SymMatrix, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    let mut cpos = std::collections::HashMap::with_capacity(cols.len());
    for (p, &c) in cols.iter().enumerate() {
        cpos.insert(c, p);
    }
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (r, &i) in rows.iter().enumerate() {
        for (j, v) in k.row(i) {
            if let Some(&c) = cpos.get(&j) {
                m[(r, c)] = v;
            }
        }
    }
    m
}

/// Enrichment block after the projection only: K_EE* = PᵀKP restricted to E.
pub fn projected_enrichment_block(raw: &BlockSystem, enr: &EnrichedSpace) -> DMatrix<f64> {
    let n_o = raw.n_original;
    let e_idx: Vec<usize> = (n_o..raw.k.dim()).collect();
    let kee = dense_block(&raw.k, &e_idx, &e_idx);
    match &enr.projection {
        None => kee,
        Some(p) => {
            let kve = dense_block(&raw.k, &p.subspace, &e_idx);
            let kvv = dense_block(&raw.k, &p.subspace, &p.subspace);
            let t = &p.t;
            let cross = t.transpose() * &kve;
            let mut out = kee - &cross - cross.transpose() + t.transpose() * (&kvv * t);
            symmetrize(&mut out);
            out
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Express a raw system in the transformed basis carried by `enr`
/// (projection T and/or orthogonalization L).
pub fn transform_system(raw: &BlockSystem, enr: &EnrichedSpace) -> Result<BlockSystem> {
    let n_o = raw.n_original;
    let n_e = raw.n_enrichment();
    if n_e != enr.n_raw() {
        return Err(Error::GridMismatch(format!(
            "system has {n_e} enrichment unknowns, space has {}",
            enr.n_raw()
        )));
    }
    if n_e == 0 || (enr.projection.is_none() && enr.orthogonalization.is_none()) {
        return Ok(raw.clone());
    }
    let e_idx: Vec<usize> = (n_o..n_o + n_e).collect();
    // spline rows coupled to the enrichment, directly or through the projection
    let mut coupled = vec![false; n_o];
    for &i in &e_idx {
        for (j, _) in raw.k.row(i) {
            if j < n_o {
                coupled[j] = true;
            }
        }
    }
    if let Some(p) = &enr.projection {
        for &v in &p.subspace {
            for (j, _) in raw.k.row(v) {
                if j < n_o {
                    coupled[j] = true;
                }
            }
        }
    }
    let rows: Vec<usize> = (0..n_o).filter(|&i| coupled[i]).collect();
    let mut kre = dense_block(&raw.k, &rows, &e_idx);
    let mut fe = DVector::from_column_slice(&raw.f[n_o..]);
    if let Some(p) = &enr.projection {
        let krv = dense_block(&raw.k, &rows, &p.subspace);
        kre -= &krv * &p.t;
        let fv = DVector::from_iterator(p.subspace.len(), p.subspace.iter().map(|&b| raw.f[b]));
        fe -= p.t.transpose() * fv;
    }
    let kee_star = projected_enrichment_block(raw, enr);
    let (kee_new, kre_new, fe_new) = match &enr.orthogonalization {
        None => (kee_star, kre, fe),
        Some(o) => {
            let q = o.kept.len();
            // K_RE X with X = L^{-T}: (L⁻¹ (K_RE)ᵀ)ᵀ
            let mut bt = DMatrix::zeros(q, rows.len());
            for (pk, &l) in o.kept.iter().enumerate() {
                for r in 0..rows.len() {
                    bt[(pk, r)] = kre[(r, l)];
                }
            }
            o.l.solve_lower_triangular_with_diag_mut(&mut bt, 1.0);
            let mut fk = DVector::from_iterator(q, o.kept.iter().map(|&l| fe[l]));
            o.l.solve_lower_triangular_with_diag_mut(&mut fk, 1.0);
            (DMatrix::from_diagonal(&o.d), bt.transpose(), fk)
        }
    };
    let ne2 = kee_new.nrows();
    let mut trip = Vec::new();
    for i in 0..n_o {
        for (j, v) in raw.k.row(i) {
            if j < n_o {
                trip.push((i, j, v));
            }
        }
    }
    for (r, &i) in rows.iter().enumerate() {
        for l in 0..ne2 {
            let v = kre_new[(r, l)];
            if v != 0.0 {
                trip.push((i, n_o + l, v));
                trip.push((n_o + l, i, v));
            }
        }
    }
    for a in 0..ne2 {
        for b in 0..ne2 {
            let v = kee_new[(a, b)];
            if v != 0.0 {
                trip.push((n_o + a, n_o + b, v));
            }
        }
    }
    let mut f = raw.f[..n_o].to_vec();
    f.extend(fe_new.iter());
    Ok(BlockSystem {
        k: SymMatrix::from_triplets(n_o + ne2, trip)?.with_band_split(n_o),
        f,
        n_original: n_o,
    })
}

/// Assemble, apply the stabilization requested by the variant, and remove
/// enrichment rows with vanishing energy.
pub fn assemble(
    space: &SplineSpace2D,
    enr: &mut EnrichedSpace,
    quad: &MeshQuadrature,
    data: &ProblemData,
) -> Result<AssembledSystem> {
    let (raw, ints, compat) = assemble_raw(space, enr, quad, data)?;
    if compat > 1e-8 {
        log::warn!("data compatibility residual {compat:e}");
    }
    if enr.variant.projection_t {
        crate::enrichment::apply_projection_t(enr, space, &data.geometry, quad)?;
    }
    if enr.variant.orthogonalize && enr.n_raw() > 0 {
        let mut kee = projected_enrichment_block(&raw, enr);
        // energy cleanup happens before the transform: afterwards the
        // diagonal holds LDLᵀ pivots, which measure dependence, not energy
        let n_o = raw.n_original;
        let spline_diag: f64 = raw.k.diag()[..n_o].iter().map(|d| d.abs()).sum();
        let mean = (spline_diag + kee.diagonal().iter().map(|d| d.abs()).sum::<f64>())
            / (n_o + kee.nrows()) as f64;
        let mut zeroed = 0;
        for i in 0..kee.nrows() {
            if kee[(i, i)] <= ZERO_ROW_TOL * mean {
                kee.row_mut(i).fill(0.0);
                kee.column_mut(i).fill(0.0);
                zeroed += 1;
            }
        }
        if zeroed > 0 {
            log::info!("dropped {zeroed} enrichment functions with vanishing energy");
        }
        crate::enrichment::orthogonalize_ldl(
            enr,
            &kee,
            Some(crate::enrichment::ORTHO_DROP_TOL),
        )?;
        let sys = transform_system(&raw, enr)?;
        return finalize(sys, ints, compat, 0.0);
    }
    let sys = transform_system(&raw, enr)?;
    finalize(sys, ints, compat, ZERO_ROW_TOL)
}

/// Drop enrichment rows whose diagonal is at most `row_tol` × mean diagonal
/// (non-positive rows are always dropped).
pub fn finalize(
    sys: BlockSystem,
    basis_integrals: Vec<f64>,
    compatibility: f64,
    row_tol: f64,
) -> Result<AssembledSystem> {
    let n = sys.k.dim();
    let n_o = sys.n_original;
    let diag = sys.k.diag();
    let mean = diag.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    let mut active: Vec<usize> = (0..n_o).collect();
    for i in n_o..n {
        if diag[i] > row_tol * mean && diag[i] > 0.0 {
            active.push(i);
        }
    }
    let dropped = n - active.len();
    let (k, f) = if dropped > 0 {
        log::info!("dropped {dropped} enrichment functions with vanishing energy");
        (
            sys.k.submatrix(&active),
            active.iter().map(|&i| sys.f[i]).collect(),
        )
    } else {
        (sys.k, sys.f)
    };
    Ok(AssembledSystem {
        k,
        f,
        n_original: n_o,
        n_enrichment: n - n_o,
        active,
        basis_integrals,
        compatibility,
    })
}

/// Diagonally scaled system K̂ = DKD, F̂ = DF with D_ii = K_ii^{-1/2}.
#[derive(Debug, Clone)]
pub struct ScaledSystem {
    pub k: SymMatrix,
    pub f: Vec<f64>,
    pub d: Vec<f64>,
}

pub fn scale_matrix(k: &SymMatrix) -> Result<(SymMatrix, Vec<f64>)> {
    let diag = k.diag();
    let mut d = Vec::with_capacity(diag.len());
    for (i, &v) in diag.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveDiagonal { dof: i, value: v });
        }
        d.push(1.0 / v.sqrt());
    }
    Ok((k.scaled(&d), d))
}

pub fn scale_system(sys: &AssembledSystem) -> Result<ScaledSystem> {
    let (k, d) = scale_matrix(&sys.k)?;
    let f = sys.f.iter().zip(&d).map(|(a, b)| a * b).collect();
    Ok(ScaledSystem { k, f, d })
}

/// Solution of the final system.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Spline coefficients in the final basis.
    pub c: Vec<f64>,
    /// Coefficients of the transformed enrichment functions (zero where dropped).
    pub e: Vec<f64>,
    pub residual: f64,
    pub lambda: f64,
}

/// Solve the scaled system with the mean-value constraint Σ (∫N_i) c_i = target.
pub fn solve(sys: &AssembledSystem, scaled: &ScaledSystem, target: f64) -> Result<Solution> {
    let n_o = sys.n_original;
    let constraint: Vec<f64> = (0..scaled.d.len())
        .map(|i| if i < n_o { scaled.d[i] * sys.basis_integrals[i] } else { 0.0 })
        .collect();
    let sol = solve_constrained(&scaled.k, &scaled.f, &constraint, target)?;
    let u: Vec<f64> = sol.x.iter().zip(&scaled.d).map(|(a, b)| a * b).collect();
    let mut e = vec![0.0; sys.n_enrichment];
    for (p, &i) in sys.active.iter().enumerate().skip(n_o) {
        e[i - n_o] = u[p];
    }
    Ok(Solution {
        c: u[..n_o].to_vec(),
        e,
        residual: sol.residual,
        lambda: sol.lambda,
    })
}

/// Discrete field u_h = Σ c_i N_i + Σ e_l ψ_l (raw basis).
#[derive(Debug, Clone)]
pub struct DiscreteField<'a> {
    pub space: &'a SplineSpace2D,
    pub enr: &'a EnrichedSpace,
    pub c: Vec<f64>,
    pub e: Vec<f64>,
}

impl<'a> DiscreteField<'a> {
    /// Field from final-basis coefficients.
    pub fn from_solution(space: &'a SplineSpace2D, enr: &'a EnrichedSpace, sol: &Solution) -> Self {
        let (c, e) = enr.to_raw_coefficients(&sol.c, &sol.e);
        Self { space, enr, c, e }
    }

    /// Value and parametric gradient on element `e`.
    pub fn eval(&self, el: usize, s: f64, t: f64, side: Side) -> Result<(f64, [f64; 2])> {
        let b = self.space.eval_on_element(el, s, t);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for k in 0..9 {
            let c = self.c[b.index[k]];
            v += c * b.value[k];
            g[0] += c * b.ds[k];
            g[1] += c * b.dt[k];
        }
        let mut raw = Vec::new();
        self.enr.eval_raw(el, s, t, side, &b, &mut raw)?;
        for (l, pv, pg) in raw {
            v += self.e[l] * pv;
            g[0] += self.e[l] * pg[0];
            g[1] += self.e[l] * pg[1];
        }
        Ok((v, g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// L² error after matching means.
    pub l2: f64,
    /// H¹ seminorm error.
    pub h1: f64,
    /// Mean of u_h − u that was removed.
    pub mean_shift: f64,
}

/// L² (mean-matched) and H¹-seminorm errors over the physical domain.
pub fn error_norms(field: &DiscreteField<'_>, quad: &MeshQuadrature, data: &ProblemData) -> Result<ErrorNorms> {
    let exact = data.exact.as_ref().ok_or(Error::MissingExactSolution)?;
    let space = field.space;
    let per = (0..space.n_elements())
        .into_par_iter()
        .map(|e| -> Result<(Vec<(f64, f64)>, f64)> {
            let mut diffs = Vec::new();
            let mut h1 = 0.0;
            for q in quad.volume(space, e) {
                let p = point_geometry(&data.geometry, q.s, q.t, q.w)?;
                let (uh, gh) = field.eval(e, q.s, q.t, q.side)?;
                let gh = p.geo.physical_gradient(gh);
                let (u, gu) = exact(q.s, q.t, q.side);
                h1 += p.w * ((gh[0] - gu[0]).powi(2) + (gh[1] - gu[1]).powi(2));
                diffs.push((uh - u, p.w));
            }
            Ok((diffs, h1))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut area, mut mean, mut h1) = (0.0, 0.0, 0.0);
    for (d, h) in &per {
        h1 += h;
        for &(v, w) in d {
            area += w;
            mean += v * w;
        }
    }
    let mean = mean / area;
    let l2: f64 = per
        .iter()
        .flat_map(|(d, _)| d.iter())
        .map(|&(v, w)| w * (v - mean).powi(2))
        .sum();
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1: h1.sqrt(),
        mean_shift: mean,
    })
}

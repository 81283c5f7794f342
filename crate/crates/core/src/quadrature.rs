//! Gauss–Legendre rules and per-element quadrature for classified meshes.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::Result;
use crate::interface_geometry::{
    cut_cell_partition, CutCellPartition, ElementLabel, ImplicitInterface, InterfacePoint,
    MeshClassification, QuadPoint, Side,
};
use crate::splines::SplineSpace2D;

/// `n`-point Gauss–Legendre rule mapped to `[0, 1]` as `(point, weight)` pairs.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n starting from the Chebyshev-like guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (0.5 * (1.0 - x), 0.5 * w);
        out[n - 1 - i] = (0.5 * (1.0 + x), 0.5 * w);
    }
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor rule on a box `[s0, s1, t0, t1]`: `(s, t, weight)`.
pub fn tensor_rule(bx: [f64; 4], rule: &[(f64, f64)]) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
    let (ls, lt) = (bx[1] - bx[0], bx[3] - bx[2]);
    rule.iter().flat_map(move |&(xb, wb)| {
        rule.iter()
            .map(move |&(xa, wa)| (bx[0] + ls * xa, bx[2] + lt * xb, wa * wb * ls * lt))
    })
}

/// Quadrature settings for cut elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadSettings {
    /// Maximum quadtree depth inside cut elements.
    pub depth: usize,
    /// Gauss points per direction.
    pub gauss: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { depth: 5, gauss: 3 }
    }
}

/// Volume and interface quadrature for every element of a classified mesh.
#[derive(Debug, Clone)]
pub struct MeshQuadrature {
    pub settings: QuadSettings,
    rule: Vec<(f64, f64)>,
    labels: Vec<ElementLabel>,
    cut: Vec<Option<CutCellPartition>>,
}

impl MeshQuadrature {
    pub fn new(
        space: &SplineSpace2D,
        iface: &ImplicitInterface,
        class: &MeshClassification,
        settings: QuadSettings,
    ) -> Result<Self> {
        let cut_ids = class.cut_elements();
        let parts = cut_ids
            .par_iter()
            .map(|&e| cut_cell_partition(space, e, iface, settings.depth, settings.gauss))
            .collect::<Result<Vec<_>>>()?;
        let mut cut = vec![None; space.n_elements()];
        for (e, p) in cut_ids.into_iter().zip(parts) {
            if p.fallback_leaves > 0 {
                log::warn!(
                    "element {e}: {} quadrature leaves labeled by center sign",
                    p.fallback_leaves
                );
            }
            cut[e] = Some(p);
        }
        Ok(Self {
            settings,
            rule: gauss_legendre(settings.gauss),
            labels: class.labels.clone(),
            cut,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.labels.len()
    }

    pub fn is_cut(&self, e: usize) -> bool {
        self.cut[e].is_some()
    }

    pub fn partition(&self, e: usize) -> Option<&CutCellPartition> {
        self.cut[e].as_ref()
    }

    /// Volume points of element `e` (parameter coordinates, parameter weights).
    pub fn volume(&self, space: &SplineSpace2D, e: usize) -> Vec<QuadPoint> {
        match &self.cut[e] {
            Some(p) => p.volume.clone(),
            None => {
                let side = match self.labels[e] {
                    ElementLabel::Minus => Side::Minus,
                    _ => Side::Plus,
                };
                tensor_rule(space.element_box(e), &self.rule)
                    .map(|(s, t, w)| QuadPoint { s, t, w, side })
                    .collect()
            }
        }
    }

    /// Interface points of element `e` (empty for uncut elements).
    pub fn interface(&self, e: usize) -> &[InterfacePoint] {
        match &self.cut[e] {
            Some(p) => &p.interface,
            None => &[],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..=8 {
            let r = gauss_legendre(n);
            let wsum: f64 = r.iter().map(|p| p.1).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for deg in 0..2 * n {
                let q: f64 = r.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn three_point_nodes() {
        let r = gauss_legendre(3);
        let a = 0.5 * (1.0 - (0.6f64).sqrt());
        assert!((r[0].0 - a).abs() < 1e-15);
        assert!((r[1].0 - 0.5).abs() < 1e-15);
        assert!((r[1].1 - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn tensor_rule_area() {
        let r = gauss_legendre(2);
        let a: f64 = tensor_rule([1.0, 3.0, -1.0, 0.5], &r).map(|p| p.2).sum();
        assert!((a - 3.0).abs() < 1e-14);
    }
}

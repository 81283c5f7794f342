//! Quadratic B-spline quasi-interpolation `I_b` and its interface-aware variant `I_b*`.

use crate::error::{Error, Result};
use crate::interface_geometry::{ElementLabel, MeshClassification};
use crate::splines::{KnotVector, SplineSpace2D};

/// How the sample weights of one coefficient were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightRule {
    /// Three-point rule from the local exactness system.
    ThreePoint,
    /// Collapsed sample points (double knot inside the support): the
    /// coefficient interpolates f at that knot.
    OnePoint,
}

/// Which extension produced a coefficient of a modified quasi-interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Single,
    F0,
    F1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QiProvenance {
    pub rule_s: WeightRule,
    pub rule_t: WeightRule,
    pub branch: Branch,
}

/// Sample points and weights of one 1D coefficient functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRule {
    pub points: [f64; 3],
    pub weights: [f64; 3],
    pub len: usize,
    pub rule: WeightRule,
}

impl SampleRule {
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len).map(move |k| (self.points[k], self.weights[k]))
    }
}

/// Spline coefficients produced by a quasi-interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct QiCoefficients {
    pub coeffs: Vec<f64>,
    pub provenance: Vec<QiProvenance>,
}

/// Smooth extensions (f̄_0, f̄_1) of the two branches of a piecewise function.
pub struct ExtensionPair<'a> {
    pub f0: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub f1: &'a (dyn Fn(f64, f64) -> f64 + Sync),
}

/// Weights (α_{j,0}, α_{j,1}, α_{j,2}) for basis `j`.
///
/// They solve the 3×3 system that makes the rule reproduce the blossom
/// (de Boor) coefficients of 1, s, s², i.e. `1`, `(s_{j+1}+s_{j+2})/2`, `s_{j+1}s_{j+2}`.
pub fn alpha_weights(kv: &KnotVector, j: usize) -> Result<SampleRule> {
    let tau = kv.tau_points(j)?;
    let u = kv.knots();
    let (a, b) = (u[j + 1], u[j + 2]);
    if a == b {
        return Ok(SampleRule {
            points: [a, 0.0, 0.0],
            weights: [1.0, 0.0, 0.0],
            len: 1,
            rule: WeightRule::OnePoint,
        });
    }
    // Lagrange form of the Vandermonde solve: α_k = blossom of the k-th
    // Lagrange polynomial, i.e. ℓ_k(a, b) with ℓ_k(x) = Π (x − τ_m)/(τ_k − τ_m)
    // and blossom(x_1, x_2) of (x − p)(x − q) = (a − p)(b − q)/2 + (a − q)(b − p)/2.
    let mut w = [0.0; 3];
    for k in 0..3 {
        let (p, q) = match k {
            0 => (tau[1], tau[2]),
            1 => (tau[0], tau[2]),
            _ => (tau[0], tau[1]),
        };
        let denom = (tau[k] - p) * (tau[k] - q);
        let blossom = 0.5 * ((a - p) * (b - q) + (a - q) * (b - p));
        w[k] = blossom / denom;
    }
    Ok(SampleRule {
        points: tau,
        weights: w,
        len: 3,
        rule: WeightRule::ThreePoint,
    })
}

fn sample(f: &dyn Fn(f64, f64) -> f64, s: f64, t: f64) -> Result<f64> {
    let v = f(s, t);
    if !v.is_finite() {
        return Err(Error::NonFiniteSample { s, t, value: v });
    }
    Ok(v)
}

/// 1D quasi-interpolant μ_j = Σ_k α_{j,k} f(τ_j^k).
pub fn qi_1d(f: &dyn Fn(f64) -> f64, kv: &KnotVector) -> Result<QiCoefficients> {
    let m = kv.n_basis();
    let mut coeffs = Vec::with_capacity(m);
    let mut provenance = Vec::with_capacity(m);
    for j in 0..m {
        let r = alpha_weights(kv, j)?;
        let mut mu = 0.0;
        for (x, w) in r.iter() {
            mu += w * sample(&|s, _| f(s), x, 0.0)?;
        }
        coeffs.push(mu);
        provenance.push(QiProvenance {
            rule_s: r.rule,
            rule_t: WeightRule::ThreePoint,
            branch: Branch::Single,
        });
    }
    Ok(QiCoefficients { coeffs, provenance })
}

fn tensor_coefficient(
    f: &dyn Fn(f64, f64) -> f64,
    rs: &SampleRule,
    rt: &SampleRule,
) -> Result<f64> {
    let mut mu = 0.0;
    for (t, wt) in rt.iter() {
        for (s, ws) in rs.iter() {
            mu += ws * wt * sample(f, s, t)?;
        }
    }
    Ok(mu)
}

fn rules(space: &SplineSpace2D) -> Result<(Vec<SampleRule>, Vec<SampleRule>)> {
    let rs = (0..space.n_basis_s())
        .map(|i| alpha_weights(&space.ks, i))
        .collect::<Result<Vec<_>>>()?;
    let rt = (0..space.n_basis_t())
        .map(|j| alpha_weights(&space.kt, j))
        .collect::<Result<Vec<_>>>()?;
    Ok((rs, rt))
}

/// Tensor-product quasi-interpolant.
pub fn qi_2d(f: &dyn Fn(f64, f64) -> f64, space: &SplineSpace2D) -> Result<QiCoefficients> {
    let (rs, rt) = rules(space)?;
    let n = space.n_basis();
    let mut coeffs = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for j in 0..space.n_basis_t() {
        for i in 0..space.n_basis_s() {
            coeffs.push(tensor_coefficient(f, &rs[i], &rt[j])?);
            provenance.push(QiProvenance {
                rule_s: rs[i].rule,
                rule_t: rt[j].rule,
                branch: Branch::Single,
            });
        }
    }
    Ok(QiCoefficients { coeffs, provenance })
}

/// Whether basis `b`'s coefficient in `I_b*` is sampled from f̄_0.
///
/// A basis belongs to f̄_0 when its support touches an Ω_0 element outside
/// J^f_{1,+}. Such a basis can never also touch an Ω_1 element (a cut element
/// would have to separate them, putting the Ω_0 element in J^f_{1,+}), so every
/// element outside J^f_{1,+} sees a single branch and is reproduced exactly.
/// Anchoring ownership at the middle span instead leaves the ring next to
/// J^f_{1,+} mixed, which costs one order in the enriched spaces.
pub fn uses_f0(space: &SplineSpace2D, class: &MeshClassification, b: usize) -> bool {
    space
        .support_elements(b)
        .into_iter()
        .any(|e| class.labels[e] == ElementLabel::Plus && !class.in_j1_plus(e))
}

/// Modified quasi-interpolant `I_b*` driven by element ownership.
pub fn qi_modified_2d(
    ext: &ExtensionPair,
    class: &MeshClassification,
    space: &SplineSpace2D,
) -> Result<QiCoefficients> {
    if class.labels.len() != space.n_elements() {
        return Err(Error::GridMismatch(format!(
            "classification has {} elements, space has {}",
            class.labels.len(),
            space.n_elements()
        )));
    }
    let (rs, rt) = rules(space)?;
    let n = space.n_basis();
    let mut coeffs = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for j in 0..space.n_basis_t() {
        for i in 0..space.n_basis_s() {
            let b = space.basis_index(i, j);
            let (f, branch) = if uses_f0(space, class, b) {
                (ext.f0, Branch::F0)
            } else {
                (ext.f1, Branch::F1)
            };
            coeffs.push(tensor_coefficient(f, &rs[i], &rt[j])?);
            provenance.push(QiProvenance {
                rule_s: rs[i].rule,
                rule_t: rt[j].rule,
                branch,
            });
        }
    }
    Ok(QiCoefficients { coeffs, provenance })
}

/// Evaluate a 1D spline Σ c_j N_j at `s`.
pub fn eval_1d(kv: &KnotVector, coeffs: &[f64], s: f64) -> Result<f64> {
    let be = kv.eval_basis_derivs(s, 0)?;
    Ok((0..=kv.degree())
        .map(|i| coeffs[be.first + i] * be.ders[0][i])
        .sum())
}

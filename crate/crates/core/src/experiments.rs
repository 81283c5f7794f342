//! Manufactured-solution experiments, convergence and robustness sweeps,
//! slope fits and CSV/SVG output.

use std::f64::consts::{FRAC_PI_6, FRAC_PI_8, PI};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::SVector;
use num_dual::{hessian, Dual2SVec64, DualNum};
use rayon::prelude::*;

use crate::assembly::{
    assemble, error_norms, scale_system, solve, DiscreteField, ErrorNorms, ExactFn, ProblemData,
    SourceFn,
};
use crate::enrichment::{build_enrichment, Method, MethodVariant};
use crate::error::{Error, Result};
use crate::interface_geometry::{classify_elements, ImplicitInterface, Side};
use crate::linalg::{scn, EigenMethod};
use crate::quadrature::{MeshQuadrature, QuadSettings};
use crate::splines::{GeometryMap, SplineSpace2D};

/// Dilation levels computed for every classification.
pub const CLASSIFY_LEVELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Line,
    Circle,
    Arc,
    Robustness,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::Line => "line",
            ExperimentKind::Circle => "circle",
            ExperimentKind::Arc => "arc",
            ExperimentKind::Robustness => "robustness",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "line" => Ok(Self::Line),
            "circle" => Ok(Self::Circle),
            "arc" => Ok(Self::Arc),
            "robustness" => Ok(Self::Robustness),
            other => Err(Error::InvalidArgument(format!("unknown experiment '{other}'"))),
        }
    }
}

/// Slope of the straight line interface (through the polar centre).
const LINE_SLOPE: f64 = 0.577_350_269_189_625_8; // tan(π/6)
const CIRCLE_R0_SQ: f64 = 0.1;

fn line_centre() -> [f64; 2] {
    [1.0 + 1.0 / PI, 1.0]
}

fn circle_centre() -> [f64; 2] {
    [1.0 / 5f64.sqrt(), 1.0 / 3f64.sqrt()]
}

fn arc_slope() -> f64 {
    2.0 * PI * FRAC_PI_8.tan()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Manufactured {
    Line { ratio: f64 },
    Circle { a0: f64, a1: f64 },
    Arc { ratio: f64 },
    Robustness { a0: f64, a1: f64, delta: f64 },
}

impl Manufactured {
    /// Exact solution on Ω_0 (`omega0`) or Ω_1 in the data coordinates.
    fn u<D: DualNum<Primitive = f64>>(&self, x: D, y: D, omega0: bool) -> D {
        match *self {
            Manufactured::Line { ratio } => {
                let c = line_centre();
                let px = x.clone() - c[0];
                let py = y.clone() - c[1];
                // angle measured from the interface ray (pointing into the square)
                let (dx, dy) = (-FRAC_PI_6.cos(), -FRAC_PI_6.sin());
                let dot = px.clone() * dx + py.clone() * dy;
                let cross = py.clone() * dx - px.clone() * dy;
                let ang = cross.atan2(dot) * (4.0 / 3.0);
                let r43 = (px.clone() * px + py.clone() * py).powf(2.0 / 3.0);
                let k = if omega0 { ratio } else { 1.0 };
                let (sn, cs) = ang.sin_cos();
                r43 * (cs + sn * k) + (x * y).sin()
            }
            Manufactured::Circle { a0, a1 } => {
                let c = circle_centre();
                let dx = x - c[0];
                let dy = y - c[1];
                let q = dx.clone() * dx.clone() - dy.clone() * dy.clone();
                let r4 = (CIRCLE_R0_SQ * CIRCLE_R0_SQ) * (a1 - a0);
                if omega0 {
                    q * (2.0 * a1 / r4)
                } else {
                    let rr = dx.clone() * dx + dy.clone() * dy;
                    q.clone() * ((a1 + a0) / r4) + q / (rr.clone() * rr)
                }
            }
            Manufactured::Arc { ratio } => {
                let th0 = arc_slope().atan();
                let (sn, cs) = th0.sin_cos();
                let xi = x.clone() * cs + y.clone() * sn;
                let eta = y.clone() * cs - x.clone() * sn;
                let k = if omega0 { ratio } else { 1.0 };
                (x.clone() - 2.0) * (x - 1.0) * y.clone() * (y - 2.0 * PI) * (xi + eta * k)
            }
            Manufactured::Robustness { a0, a1, delta } => {
                let a = if omega0 { a0 } else { a1 };
                (y - delta) * (x.clone() * PI).cos() / a + x.clone() * x
            }
        }
    }

    /// Value, gradient and Hessian in the data coordinates.
    fn hessian(&self, x: f64, y: f64, omega0: bool) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let m = *self;
        let (v, g, h) = hessian(
            |p: SVector<Dual2SVec64<2>, 2>| m.u(p[0], p[1], omega0),
            &SVector::from([x, y]),
        );
        (v, [g[0], g[1]], [[h[(0, 0)], h[(0, 1)]], [h[(1, 0)], h[(1, 1)]]])
    }
}

/// Exact solution value, physical gradient and physical Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSample {
    pub value: f64,
    pub gradient: [f64; 2],
    pub laplacian: f64,
}

/// One manufactured-solution problem.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub kind: ExperimentKind,
    pub a0: f64,
    pub a1: f64,
    /// Interface offset for the robustness family.
    pub delta: Option<f64>,
    /// Level set in parameter coordinates; its plus side is the enrichment side.
    pub interface: ImplicitInterface,
    /// Whether the plus side of `interface` is Ω_0.
    pub plus_is_omega0: bool,
    pub domain: [f64; 4],
    pub geometry: GeometryMap,
    solution: Manufactured,
}

/// Standard experiment with coefficients a_0 on Ω_0 and a_1 on Ω_1.
///
/// Sides: line — Ω_0 above the line; circle — Ω_0 inside; arc — Ω_0 where
/// t > k s. The enrichment (plus) side is Ω_0 for the line and the arc and
/// the exterior Ω_1 for the circle.
pub fn define_experiment(kind: ExperimentKind, a0: f64, a1: f64) -> Result<Experiment> {
    if !(a0 > 0.0 && a1 > 0.0 && a0.is_finite() && a1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "coefficients must be positive, got a0 = {a0}, a1 = {a1}"
        )));
    }
    let unit = [0.0, 1.0, 0.0, 1.0];
    let exp = match kind {
        ExperimentKind::Line => {
            let c = line_centre();
            Experiment {
                kind,
                a0,
                a1,
                delta: None,
                interface: ImplicitInterface::line(c, [-LINE_SLOPE, 1.0]),
                plus_is_omega0: true,
                domain: unit,
                geometry: GeometryMap::Identity,
                solution: Manufactured::Line { ratio: a0 / a1 },
            }
        }
        ExperimentKind::Circle => {
            if a0 == a1 {
                return Err(Error::InvalidArgument(
                    "the circle solution needs a0 ≠ a1".into(),
                ));
            }
            Experiment {
                kind,
                a0,
                a1,
                delta: None,
                interface: ImplicitInterface::circle(circle_centre(), CIRCLE_R0_SQ.sqrt(), false),
                plus_is_omega0: false,
                domain: unit,
                geometry: GeometryMap::Identity,
                solution: Manufactured::Circle { a0, a1 },
            }
        }
        ExperimentKind::Arc => Experiment {
            kind,
            a0,
            a1,
            delta: None,
            interface: ImplicitInterface::line([0.0, 0.0], [-arc_slope(), 1.0]),
            plus_is_omega0: true,
            domain: [1.0, 2.0, 0.0, 2.0 * PI],
            geometry: GeometryMap::Polar,
            solution: Manufactured::Arc { ratio: a0 / a1 },
        },
        ExperimentKind::Robustness => {
            return Err(Error::InvalidArgument(
                "robustness experiments need δ; use define_robustness".into(),
            ))
        }
    };
    Ok(exp)
}

/// Interface y = δ; Ω_0 (coefficient a_0, the enrichment side) is the strip y < δ.
pub fn define_robustness(a0: f64, a1: f64, delta: f64) -> Result<Experiment> {
    if !(a0 > 0.0 && a1 > 0.0) {
        return Err(Error::InvalidArgument("coefficients must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("δ must lie in (0, 1), got {delta}")));
    }
    Ok(Experiment {
        kind: ExperimentKind::Robustness,
        a0,
        a1,
        delta: Some(delta),
        interface: ImplicitInterface::line([0.0, delta], [0.0, -1.0]),
        plus_is_omega0: true,
        domain: [0.0, 1.0, 0.0, 1.0],
        geometry: GeometryMap::Identity,
        solution: Manufactured::Robustness { a0, a1, delta },
    })
}

/// δ = 0.05 · 2^{-j}, j = 1..=20.
pub fn default_deltas() -> Vec<f64> {
    (1..=20).map(|j| 0.05 * 0.5f64.powi(j)).collect()
}

impl Experiment {
    fn omega0(&self, side: Side) -> bool {
        (side == Side::Plus) == self.plus_is_omega0
    }

    pub fn coefficient(&self, side: Side) -> f64 {
        if self.omega0(side) {
            self.a0
        } else {
            self.a1
        }
    }

    /// Exact solution at parameter point `(s, t)` on `side`.
    pub fn exact(&self, s: f64, t: f64, side: Side) -> Result<ExactSample> {
        let (v, g, h) = self.solution.hessian(s, t, self.omega0(side));
        match &self.geometry {
            GeometryMap::Identity => Ok(ExactSample {
                value: v,
                gradient: g,
                laplacian: h[0][0] + h[1][1],
            }),
            GeometryMap::Polar => {
                let geo = self.geometry.eval(s, t)?;
                Ok(ExactSample {
                    value: v,
                    gradient: geo.physical_gradient(g),
                    laplacian: h[0][0] + g[0] / s + h[1][1] / (s * s),
                })
            }
            GeometryMap::Nurbs { .. } => Err(Error::InvalidArgument(
                "manufactured solutions are defined for identity and polar maps".into(),
            )),
        }
    }

    /// Uniform N × N mesh of the parameter domain.
    pub fn space(&self, n: usize) -> Result<SplineSpace2D> {
        let d = self.domain;
        SplineSpace2D::uniform(d[0], d[1], d[2], d[3], n)
    }

    pub fn problem_data(&self) -> Result<ProblemData> {
        let me = Arc::new(self.clone());
        let m = me.clone();
        let exact: ExactFn = Arc::new(move |s, t, side| {
            let e = m.exact(s, t, side).expect("experiment geometry is valid");
            (e.value, e.gradient)
        });
        let m = me.clone();
        let source: SourceFn = Arc::new(move |s, t, side| {
            let e = m.exact(s, t, side).expect("experiment geometry is valid");
            -m.coefficient(side) * e.laplacian
        });
        let (ap, am) = (self.coefficient(Side::Plus), self.coefficient(Side::Minus));
        ProblemData::from_exact(ap, am, source, exact, self.geometry.clone())
    }

    pub fn label(&self) -> String {
        match self.delta {
            Some(d) => format!("{}(a0={}, a1={}, delta={d:e})", self.kind, self.a0, self.a1),
            None => format!("{}(a0={}, a1={})", self.kind, self.a0, self.a1),
        }
    }
}

/// Settings shared by every cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub quad: QuadSettings,
    /// Write zero wall times so output is byte-reproducible.
    pub deterministic: bool,
    pub compute_scn: bool,
    pub compute_errors: bool,
}

impl RunSettings {
    /// Quadrature for error norms: squared errors of quadratic splines are
    /// beyond what the assembly rule integrates exactly, so three extra Gauss
    /// points per direction keep the measurement from polluting the rates.
    pub fn error_quad(&self) -> QuadSettings {
        QuadSettings {
            depth: self.quad.depth,
            gauss: self.quad.gauss + 3,
        }
    }
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            quad: QuadSettings::default(),
            deterministic: false,
            compute_scn: true,
            compute_errors: true,
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub method: Method,
    pub n: usize,
    pub h: f64,
    pub dofs: usize,
    pub l2_error: f64,
    pub h1_error: f64,
    pub scn: f64,
    pub wall_ms: u128,
    pub delta: Option<f64>,
    pub notes: String,
    pub failure: Option<String>,
}

impl ConvergenceRecord {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Number of unknowns before any dependent-function removal:
/// (N+2)² spline coefficients plus the raw enrichment functions.
pub fn dof_count(exp: &Experiment, method: Method, n: usize) -> Result<usize> {
    let space = exp.space(n)?;
    let class = classify_elements(&space, &exp.interface, CLASSIFY_LEVELS)?;
    let enr = build_enrichment(method.into(), &space, &exp.interface, &class)?;
    Ok(space.n_basis() + enr.n_raw())
}

/// Full outcome of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub dofs: usize,
    pub dropped: usize,
    pub errors: Option<ErrorNorms>,
    pub scn: Option<f64>,
    pub eigen_method: Option<EigenMethod>,
    pub residual: f64,
    pub compatibility: f64,
}

/// Classify, build, assemble, stabilize, scale, solve, measure.
pub fn run_cell(
    exp: &Experiment,
    variant: MethodVariant,
    n: usize,
    settings: &RunSettings,
) -> Result<CellOutcome> {
    let space = exp.space(n)?;
    let class = classify_elements(&space, &exp.interface, CLASSIFY_LEVELS)?;
    let quad = MeshQuadrature::new(&space, &exp.interface, &class, settings.quad)?;
    let mut enr = build_enrichment(variant, &space, &exp.interface, &class)?;
    let data = exp.problem_data()?;
    let sys = assemble(&space, &mut enr, &quad, &data)?;
    let scaled = scale_system(&sys)?;
    let sol = solve(&sys, &scaled, 0.0)?;
    if !(sol.residual <= 1e-8) {
        return Err(Error::NoConvergence {
            iterations: 1,
            residual: sol.residual,
        });
    }
    let errors = if settings.compute_errors {
        let field = DiscreteField::from_solution(&space, &enr, &sol);
        let fine = MeshQuadrature::new(&space, &exp.interface, &class, settings.error_quad())?;
        Some(error_norms(&field, &fine, &data)?)
    } else {
        None
    };
    let (scn_value, method) = if settings.compute_scn {
        let s = scn(&scaled.k, 1)?;
        (Some(s.scn()), Some(s.method))
    } else {
        (None, None)
    };
    Ok(CellOutcome {
        dofs: sys.dofs(),
        dropped: sys.dropped(),
        errors,
        scn: scn_value,
        eigen_method: method,
        residual: sol.residual,
        compatibility: sys.compatibility,
    })
}

fn record_from(
    method: Method,
    n: usize,
    h: f64,
    delta: Option<f64>,
    outcome: Result<CellOutcome>,
    wall_ms: u128,
) -> ConvergenceRecord {
    match outcome {
        Ok(o) => {
            let mut notes = vec!["scn excludes the constant mode".to_string()];
            if let Some(m) = o.eigen_method {
                notes.push(format!(
                    "eigen={}",
                    if m == EigenMethod::Dense { "dense" } else { "lanczos" }
                ));
            }
            if o.dropped > 0 {
                notes.push(format!("dropped={}", o.dropped));
            }
            if let Some(d) = delta {
                notes.push(format!("delta={d:e}"));
            }
            let e = o.errors.unwrap_or(ErrorNorms {
                l2: f64::NAN,
                h1: f64::NAN,
                mean_shift: f64::NAN,
            });
            ConvergenceRecord {
                method,
                n,
                h,
                dofs: o.dofs,
                l2_error: e.l2,
                h1_error: e.h1,
                scn: o.scn.unwrap_or(f64::NAN),
                wall_ms,
                delta,
                notes: notes.join("; "),
                failure: None,
            }
        }
        Err(err) => {
            log::error!("{method} N={n}: {err}");
            let mut notes = format!("failed: {err}");
            if let Some(d) = delta {
                notes.push_str(&format!("; delta={d:e}"));
            }
            ConvergenceRecord {
                method,
                n,
                h,
                dofs: 0,
                l2_error: f64::NAN,
                h1_error: f64::NAN,
                scn: f64::NAN,
                wall_ms,
                delta,
                notes,
                failure: Some(err.to_string()),
            }
        }
    }
}

fn timed<T>(deterministic: bool, f: impl FnOnce() -> T) -> (T, u128) {
    let t0 = Instant::now();
    let out = f();
    let ms = if deterministic { 0 } else { t0.elapsed().as_millis() };
    (out, ms)
}

/// Sweep `methods × ns` on one experiment. Records are ordered by method
/// (as given) and then N, whatever order the cells finish in.
pub fn run_convergence(
    exp: &Experiment,
    methods: &[MethodVariant],
    ns: &[usize],
    settings: &RunSettings,
) -> Result<Vec<ConvergenceRecord>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("mesh sizes must be strictly ascending".into()));
    }
    if ns.contains(&0) {
        return Err(Error::InvalidArgument("mesh sizes must be positive".into()));
    }
    let cells: Vec<(MethodVariant, usize)> = methods
        .iter()
        .flat_map(|&m| ns.iter().map(move |&n| (m, n)))
        .collect();
    let h_of = |n: usize| (exp.domain[1] - exp.domain[0]) / n as f64;
    Ok(cells
        .par_iter()
        .map(|&(m, n)| {
            let (out, ms) = timed(settings.deterministic, || run_cell(exp, m, n, settings));
            let rec = record_from(m.method, n, h_of(n), None, out, ms);
            log::info!("{} {} N={n}: {}", exp.kind, m.method, rec.notes);
            rec
        })
        .collect())
}

/// Mesh size of the robustness sweep.
pub const ROBUSTNESS_N: usize = 20;

/// SCN (and errors) per (method, δ) at h = 1/20.
pub fn run_robustness(
    a0: f64,
    a1: f64,
    methods: &[MethodVariant],
    deltas: &[f64],
    settings: &RunSettings,
) -> Result<Vec<ConvergenceRecord>> {
    let exps = deltas
        .iter()
        .map(|&d| define_robustness(a0, a1, d))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(MethodVariant, usize)> = methods
        .iter()
        .flat_map(|&m| (0..exps.len()).map(move |i| (m, i)))
        .collect();
    let n = ROBUSTNESS_N;
    Ok(cells
        .par_iter()
        .map(|&(m, i)| {
            let (out, ms) = timed(settings.deterministic, || run_cell(&exps[i], m, n, settings));
            record_from(m.method, n, 1.0 / n as f64, exps[i].delta, out, ms)
        })
        .collect())
}

/// Least-squares fit of ln q = slope · ln h + intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_slope(h: &[f64], q: &[f64]) -> Result<SlopeFit> {
    if h.len() != q.len() {
        return Err(Error::InvalidArgument("h and q differ in length".into()));
    }
    if h.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 points for a slope, got {}",
            h.len()
        )));
    }
    if let Some(v) = h.iter().chain(q).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs positive finite values, got {v}"
        )));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = q.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    L2,
    H1,
    Scn,
}

impl Quantity {
    pub fn of(self, r: &ConvergenceRecord) -> f64 {
        match self {
            Quantity::L2 => r.l2_error,
            Quantity::H1 => r.h1_error,
            Quantity::Scn => r.scn,
        }
    }
}

/// Slope of `quantity` against h for one method; the coarsest mesh can be
/// excluded.
pub fn fit_records(
    records: &[ConvergenceRecord],
    method: Method,
    quantity: Quantity,
    include_coarsest: bool,
) -> Result<SlopeFit> {
    let mut rows: Vec<&ConvergenceRecord> = records
        .iter()
        .filter(|r| r.method == method && r.ok())
        .collect();
    rows.sort_by_key(|r| r.n);
    if !include_coarsest && !rows.is_empty() {
        rows.remove(0);
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let q: Vec<f64> = rows.iter().map(|r| quantity.of(r)).collect();
    fit_slope(&h, &q)
}

pub const CSV_HEADER: [&str; 9] = [
    "method", "N", "h", "dofs", "l2_error", "h1_error", "scn", "wall_ms", "notes",
];

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else {
        "nan".into()
    }
}

/// Write records as CSV with the fixed column set.
pub fn write_csv<W: Write>(out: W, records: &[ConvergenceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.method.tag().to_string(),
            r.n.to_string(),
            fmt_float(r.h),
            r.dofs.to_string(),
            fmt_float(r.l2_error),
            fmt_float(r.h1_error),
            fmt_float(r.scn),
            r.wall_ms.to_string(),
            r.notes.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];

/// Log-log plot of `quantity` against `x` for each method, as an SVG document.
pub fn svg_plot(
    title: &str,
    x_label: &str,
    records: &[ConvergenceRecord],
    x_of: impl Fn(&ConvergenceRecord) -> f64,
    quantity: Quantity,
) -> String {
    let (w, h) = (640.0, 440.0);
    let (ml, mr, mt, mb) = (80.0, 150.0, 40.0, 60.0);
    let pts: Vec<(Method, f64, f64)> = records
        .iter()
        .filter(|r| r.ok())
        .map(|r| (r.method, x_of(r), quantity.of(r)))
        .filter(|&(_, x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        (w - mr + ml) / 2.0,
        escape(title)
    );
    if pts.is_empty() {
        svg.push_str("<text x=\"50%\" y=\"50%\" text-anchor=\"middle\">no data</text>\n</svg>\n");
        return svg;
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.2.log10()).collect();
    let (x0, x1) = (
        lx.iter().cloned().fold(f64::INFINITY, f64::min).floor(),
        lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil(),
    );
    let (y0, y1) = (
        ly.iter().cloned().fold(f64::INFINITY, f64::min).floor(),
        ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil(),
    );
    let (x1, y1) = (x1.max(x0 + 1.0), y1.max(y0 + 1.0));
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let px = |v: f64| ml + (v - x0) / (x1 - x0) * pw;
    let py = |v: f64| mt + (1.0 - (v - y0) / (y1 - y0)) * ph;
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    for d in x0 as i32..=x1 as i32 {
        let x = px(d as f64);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{mt}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"#ddd\"/>\n\
             <text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\">1e{d}</text>\n",
            mt + ph,
            mt + ph + 18.0
        ));
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(d as f64);
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">1e{d}</text>\n",
            ml + pw,
            ml - 6.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        ml + pw / 2.0,
        h - 16.0,
        escape(x_label)
    ));
    let mut methods: Vec<Method> = pts.iter().map(|p| p.0).collect();
    methods.sort();
    methods.dedup();
    for (i, m) in methods.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut series: Vec<(f64, f64)> = pts
            .iter()
            .filter(|p| p.0 == *m)
            .map(|p| (p.1.log10(), p.2.log10()))
            .collect();
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = series
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in &series {
            svg.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                px(x),
                py(y)
            ));
        }
        let ly = mt + 10.0 + 20.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            w - mr + 12.0,
            w - mr + 36.0,
            w - mr + 42.0,
            ly + 4.0,
            m.tag()
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write the standard plots for a sweep into `dir`.
pub fn write_svgs(dir: &Path, name: &str, records: &[ConvergenceRecord], robustness: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if robustness {
        let svg = svg_plot(
            &format!("{name}: SCN"),
            "delta",
            records,
            |r| r.delta.unwrap_or(f64::NAN),
            Quantity::Scn,
        );
        std::fs::write(dir.join(format!("{name}_scn.svg")), svg)?;
        return Ok(());
    }
    for (q, tag) in [(Quantity::L2, "l2"), (Quantity::H1, "h1"), (Quantity::Scn, "scn")] {
        let svg = svg_plot(&format!("{name}: {tag}"), "h", records, |r| r.h, q);
        std::fs::write(dir.join(format!("{name}_{tag}.svg")), svg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_laplacian(exp: &Experiment, s: f64, t: f64, side: Side) -> f64 {
        // Richardson-extrapolated central differences in data coordinates
        let u = |a: f64, b: f64| exp.solution.hessian(a, b, exp.omega0(side)).0;
        let lap = |h: f64| {
            let c = u(s, t);
            let uss = (u(s + h, t) - 2.0 * c + u(s - h, t)) / (h * h);
            let utt = (u(s, t + h) - 2.0 * c + u(s, t - h)) / (h * h);
            let us = (u(s + h, t) - u(s - h, t)) / (2.0 * h);
            match exp.geometry {
                GeometryMap::Polar => uss + us / s + utt / (s * s),
                _ => uss + utt,
            }
        };
        let h = 1e-3;
        (4.0 * lap(h / 2.0) - lap(h)) / 3.0
    }

    fn sample_points(exp: &Experiment, k: usize) -> Vec<(f64, f64)> {
        let d = exp.domain;
        (0..k)
            .map(|i| {
                let a = ((i * 7919) % 1000) as f64 / 1000.0 * 0.9 + 0.05;
                let b = ((i * 104729) % 997) as f64 / 997.0 * 0.9 + 0.05;
                (d[0] + a * (d[1] - d[0]), d[2] + b * (d[3] - d[2]))
            })
            .collect()
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let exps = [
            define_experiment(ExperimentKind::Line, 20.0, 1.0).unwrap(),
            define_experiment(ExperimentKind::Circle, 10.0, 1.0).unwrap(),
            define_experiment(ExperimentKind::Arc, 20.0, 1.0).unwrap(),
            define_robustness(10.0, 1.0, 0.01).unwrap(),
        ];
        for exp in &exps {
            for (s, t) in sample_points(exp, 200) {
                let side = if exp.interface.phi([s, t]) >= 0.0 { Side::Plus } else { Side::Minus };
                let ad = exp.exact(s, t, side).unwrap().laplacian;
                let fd = fd_laplacian(exp, s, t, side);
                assert!((ad - fd).abs() <= 1e-6 * (1.0 + ad.abs()), "{}: {ad} vs {fd}", exp.kind);
            }
        }
    }

    #[test]
    fn solutions_are_continuous_across_interface() {
        let line = define_experiment(ExperimentKind::Line, 20.0, 1.0).unwrap();
        let circle = define_experiment(ExperimentKind::Circle, 10.0, 1.0).unwrap();
        let arc = define_experiment(ExperimentKind::Arc, 20.0, 1.0).unwrap();
        let c = circle_centre();
        for i in 0..200 {
            let th = 2.0 * PI * i as f64 / 200.0;
            let r0 = CIRCLE_R0_SQ.sqrt();
            let (x, y) = (c[0] + r0 * th.cos(), c[1] + r0 * th.sin());
            let up = circle.exact(x, y, Side::Plus).unwrap().value;
            let um = circle.exact(x, y, Side::Minus).unwrap().value;
            assert!((up - um).abs() <= 1e-10 * (1.0 + up.abs()));
            let x = i as f64 / 199.0;
            let y = LINE_SLOPE * (x - line_centre()[0]) + 1.0;
            let up = line.exact(x, y, Side::Plus).unwrap().value;
            let um = line.exact(x, y, Side::Minus).unwrap().value;
            assert!((up - um).abs() <= 1e-10);
            let s = 1.0 + i as f64 / 199.0;
            let t = arc_slope() * s;
            let up = arc.exact(s, t, Side::Plus).unwrap().value;
            let um = arc.exact(s, t, Side::Minus).unwrap().value;
            assert!((up - um).abs() <= 1e-10 * (1.0 + up.abs()));
        }
    }

    #[test]
    fn circle_rejects_equal_coefficients() {
        assert!(define_experiment(ExperimentKind::Circle, 1.0, 1.0).is_err());
        assert!(define_experiment(ExperimentKind::Line, -1.0, 1.0).is_err());
        assert!(define_robustness(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn arc_vanishes_on_the_boundary() {
        let arc = define_experiment(ExperimentKind::Arc, 20.0, 1.0).unwrap();
        for i in 0..=20 {
            let a = i as f64 / 20.0;
            for side in [Side::Plus, Side::Minus] {
                for (s, t) in [(1.0, a * 2.0 * PI), (2.0, a * 2.0 * PI), (1.0 + a, 0.0), (1.0 + a, 2.0 * PI)] {
                    assert!(arc.exact(s, t, side).unwrap().value.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn data_is_compatible() {
        for exp in [
            define_experiment(ExperimentKind::Line, 20.0, 1.0).unwrap(),
            define_experiment(ExperimentKind::Circle, 10.0, 1.0).unwrap(),
            define_experiment(ExperimentKind::Arc, 20.0, 1.0).unwrap(),
        ] {
            let settings = RunSettings {
                compute_scn: false,
                ..RunSettings::default()
            };
            let out = run_cell(&exp, Method::Iga.into(), 10, &settings).unwrap();
            assert!(out.compatibility < 1e-8, "{}: {:e}", exp.kind, out.compatibility);
        }
    }

    #[test]
    fn slope_fit_examples() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let q: Vec<f64> = h.iter().map(|v| v * v).collect();
        let f = fit_slope(&h, &q).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        let q: Vec<f64> = h.iter().map(|v| 7.0 * v * v * v).collect();
        let f = fit_slope(&h, &q).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(fit_slope(&h[..2], &q[..2]).is_err());
        assert!(fit_slope(&h, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn table_dof_counts_small_meshes() {
        let exp = define_experiment(ExperimentKind::Circle, 10.0, 1.0).unwrap();
        assert_eq!(dof_count(&exp, Method::Iga, 5).unwrap(), 49);
        assert_eq!(dof_count(&exp, Method::GigaStar, 5).unwrap(), 71);
        assert_eq!(dof_count(&exp, Method::Sgiga2, 5).unwrap(), 115);
        assert_eq!(dof_count(&exp, Method::Sgiga2, 10).unwrap(), 312);
    }

    #[test]
    fn csv_is_deterministic_and_well_formed() {
        let exp = define_experiment(ExperimentKind::Circle, 10.0, 1.0).unwrap();
        let settings = RunSettings {
            deterministic: true,
            ..RunSettings::default()
        };
        let methods = [MethodVariant::new(Method::Iga), MethodVariant::new(Method::Sgiga2)];
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&mut a, &run_convergence(&exp, &methods, &[4, 6], &settings).unwrap()).unwrap();
        write_csv(&mut b, &run_convergence(&exp, &methods, &[4, 6], &settings).unwrap()).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "method,N,h,dofs,l2_error,h1_error,scn,wall_ms,notes");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].starts_with("iga,4,"));
        assert!(rows[3].starts_with("sgiga2,6,"));
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let exp = define_experiment(ExperimentKind::Circle, 10.0, 1.0).unwrap();
        let rec = record_from(
            Method::Giga,
            5,
            0.2,
            None,
            Err(Error::Singular("test".into())),
            0,
        );
        assert!(!rec.ok());
        assert!(rec.notes.starts_with("failed"));
        assert!(run_convergence(&exp, &[Method::Iga.into()], &[10, 5], &RunSettings::default()).is_err());
    }

    #[test]
    fn svg_has_one_series_per_method() {
        let recs: Vec<ConvergenceRecord> = [Method::Iga, Method::Sgiga2]
            .iter()
            .flat_map(|&m| {
                [5usize, 10, 20].map(|n| ConvergenceRecord {
                    method: m,
                    n,
                    h: 1.0 / n as f64,
                    dofs: 1,
                    l2_error: 1.0 / (n * n) as f64,
                    h1_error: 1.0 / n as f64,
                    scn: (n * n) as f64,
                    wall_ms: 0,
                    delta: None,
                    notes: String::new(),
                    failure: None,
                })
            })
            .collect();
        let svg = svg_plot("t", "h", &recs, |r| r.h, Quantity::H1);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg"));
    }
}

//! Symmetric matrix services: LDLᵀ, constrained solve, extreme eigenvalues.
//!
//! Stiffness matrices here have an "arrow" shape: a banded block for the
//! spline coefficients followed by a comparatively small, dense-ish block for
//! the enrichment coefficients. [`ArrowFactor`] exploits that by a band LDLᵀ of
//! the leading block and a dense LDLᵀ of the Schur complement.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Matrices up to this dimension get a dense symmetric eigensolve.
pub const DENSE_EIGEN_MAX: usize = 1500;

/// Symmetric matrix in compressed-row storage (both triangles stored).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    /// Leading rows that form a banded block (the rest is treated as dense).
    band_split: usize,
}

impl SymMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        if let Some(&(i, j, _)) = trip.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                len: n,
            });
        }
        trip.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col = Vec::with_capacity(trip.len());
        let mut val: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col,
            val,
            band_split: n,
        })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 || i == j {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(n, trip)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect()).expect("n > 0")
    }

    /// Mark the first `k` rows as the banded block.
    pub fn with_band_split(mut self, k: usize) -> Self {
        self.band_split = k.min(self.n);
        self
    }

    pub fn band_split(&self) -> usize {
        self.band_split
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col[p], self.val[p]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(p) => self.val[self.row_ptr[i] + p],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[p] * x[self.col[p]];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.val.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |a_ij − a_ji| / max |a_ij|.
    pub fn symmetry_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                err = err.max((v - self.get(j, i)).abs());
            }
        }
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            err / m
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// D A D for a diagonal D given as a vector.
    pub fn scaled(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.val[p] *= d[i] * d[self.col[p]];
            }
        }
        out
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut trip = Vec::new();
        for (new_i, &old_i) in keep.iter().enumerate() {
            for (j, v) in self.row(old_i) {
                if map[j] != usize::MAX {
                    trip.push((new_i, map[j], v));
                }
            }
        }
        let split = keep.iter().filter(|&&k| k < self.band_split).count();
        Self::from_triplets(keep.len().max(1), trip)
            .expect("indices are in range")
            .with_band_split(split)
    }

    /// Half-bandwidth of the leading `k × k` block.
    pub fn bandwidth(&self, k: usize) -> usize {
        let mut b = 0;
        for i in 0..k {
            for (j, _) in self.row(i) {
                if j < k {
                    b = b.max(i.abs_diff(j));
                }
            }
        }
        b
    }
}

/// Dense LDLᵀ without pivoting: returns unit-lower L and the diagonal of D.
pub fn ldlt(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidArgument("ldlt needs a square matrix".into()));
    }
    let mut l = m.clone();
    let mut d = DVector::zeros(n);
    ldlt_in_place(&mut l, &mut d, 0)?;
    Ok((l, d))
}

/// Factor in place (lower triangle of `a` becomes L, unit diagonal written).
/// `offset` only shifts the pivot index reported in errors.
fn ldlt_in_place(a: &mut DMatrix<f64>, d: &mut DVector<f64>, offset: usize) -> Result<()> {
    let n = a.nrows();
    let mut work = vec![0.0; n];
    for j in 0..n {
        // work_k = L_jk d_k
        let mut dj = a[(j, j)];
        for k in 0..j {
            let ljk = a[(j, k)];
            work[k] = ljk * d[k];
            dj -= ljk * work[k];
        }
        let scale = a[(j, j)].abs().max(f64::MIN_POSITIVE);
        if !(dj > 1e-15 * scale) {
            return Err(Error::NonPositivePivot {
                index: j + offset,
                value: dj,
            });
        }
        d[j] = dj;
        // column update, contiguous in column-major storage
        for k in 0..j {
            let wk = work[k];
            if wk == 0.0 {
                continue;
            }
            let (src, mut dst) = a.columns_range_pair_mut(k, j);
            let src = &src.as_slice()[j + 1..];
            let dst = &mut dst.as_mut_slice()[j + 1..];
            for (x, y) in dst.iter_mut().zip(src) {
                *x -= y * wk;
            }
        }
        let inv = 1.0 / dj;
        for i in j + 1..n {
            a[(i, j)] *= inv;
        }
        a[(j, j)] = 1.0;
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Ok(())
}

/// LDLᵀ that drops numerically dependent rows instead of failing.
///
/// A pivot `d_j ≤ rel_tol · m_jj` removes index j (its row/column are skipped
/// for the remaining elimination). Returns the kept indices with L, D of the
/// kept principal submatrix.
pub fn ldlt_drop(m: &DMatrix<f64>, rel_tol: f64) -> (Vec<usize>, DMatrix<f64>, DVector<f64>) {
    let n = m.nrows();
    let mut kept: Vec<usize> = Vec::with_capacity(n);
    // rows of L (strictly lower part) stored contiguously
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut d: Vec<f64> = Vec::with_capacity(n);
    for j in 0..n {
        let q = kept.len();
        let mut row = vec![0.0; q];
        // rd_k = l_jk d_k
        let mut rd = vec![0.0; q];
        for (pk, &k) in kept.iter().enumerate() {
            let lk = &rows[pk];
            let s = m[(j, k)] - lk.iter().zip(&rd[..pk]).map(|(a, b)| a * b).sum::<f64>();
            rd[pk] = s;
            row[pk] = s / d[pk];
        }
        let dj = m[(j, j)] - row.iter().zip(&rd).map(|(a, b)| a * b).sum::<f64>();
        if dj > rel_tol * m[(j, j)].abs() && dj > 0.0 {
            rows.push(row);
            d.push(dj);
            kept.push(j);
        } else {
            log::info!("dropping dependent function {j} (pivot {dj:e})");
        }
    }
    let q = kept.len();
    let mut l = DMatrix::<f64>::identity(q, q);
    for (i, r) in rows.iter().enumerate() {
        for (k, &v) in r.iter().enumerate() {
            l[(i, k)] = v;
        }
    }
    (kept, l, DVector::from_vec(d))
}

/// Solve L y = b (unit lower).
pub fn forward_unit(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s;
    }
}

/// Solve Lᵀ x = y (unit lower L).
pub fn backward_unit_t(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s;
    }
}

/// Band LDLᵀ of a symmetric banded matrix.
#[derive(Debug, Clone)]
struct BandLdlt {
    n: usize,
    b: usize,
    // row i stores L_{i,k} for k = i−b .. i−1 at positions k − i + b
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandLdlt {
    fn factor(a: &SymMatrix, n: usize, shift: f64, extra: &[(usize, f64)]) -> Result<Self> {
        let b = a.bandwidth(n).max(1);
        let mut l = vec![0.0; n * b];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j < i && i - j <= b {
                    l[i * b + (j + b - i)] = v;
                } else if j == i {
                    diag[i] = v + shift;
                }
            }
        }
        for &(k, v) in extra {
            if k < n {
                diag[k] += v;
            }
        }
        let mut d = vec![0.0; n];
        let mut u = vec![0.0; b];
        for j in 0..n {
            let k0 = j.saturating_sub(b);
            let row_j = &l[j * b..(j + 1) * b];
            // u_k = L_jk d_k
            let mut dj = diag[j];
            for k in k0..j {
                let ljk = row_j[k + b - j];
                u[k + b - j] = ljk * d[k];
                dj -= ljk * ljk * d[k];
            }
            let scale = diag[j].abs().max(f64::MIN_POSITIVE);
            if !(dj > 1e-15 * scale) {
                return Err(Error::NonPositivePivot { index: j, value: dj });
            }
            d[j] = dj;
            for i in j + 1..(j + b + 1).min(n) {
                // L_ij = (a_ij − Σ_{k ∈ [i−b, j)} L_ik u_k) / d_j
                let kstart = i.saturating_sub(b).max(k0);
                let mut s = l[i * b + (j + b - i)];
                for k in kstart..j {
                    s -= l[i * b + (k + b - i)] * u[k + b - j];
                }
                l[i * b + (j + b - i)] = s / dj;
            }
        }
        Ok(Self { n, b, l, d })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= self.l[i * b + (k + b - i)] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            for k in i.saturating_sub(b)..i {
                x[k] -= self.l[i * b + (k + b - i)] * xi;
            }
        }
    }

    fn min_pivot(&self) -> f64 {
        self.d.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Factorization of `A + shift·I + Σ extra_k e_k e_kᵀ` exploiting arrow structure.
#[derive(Debug, Clone)]
pub struct ArrowFactor {
    n: usize,
    split: usize,
    band: Option<BandLdlt>,
    // A_oe and W = A_oo⁻¹ A_oe
    coupling: DMatrix<f64>,
    w: DMatrix<f64>,
    schur_l: DMatrix<f64>,
    schur_d: DVector<f64>,
}

impl ArrowFactor {
    pub fn new(a: &SymMatrix, shift: f64, extra: &[(usize, f64)]) -> Result<Self> {
        let n = a.dim();
        let split = a.band_split();
        let ne = n - split;
        let band = if split > 0 {
            Some(BandLdlt::factor(a, split, shift, extra)?)
        } else {
            None
        };
        let mut coupling = DMatrix::zeros(split, ne);
        let mut tail = DMatrix::zeros(ne, ne);
        for i in 0..n {
            for (j, v) in a.row(i) {
                if i < split && j >= split {
                    coupling[(i, j - split)] = v;
                } else if i >= split && j >= split {
                    tail[(i - split, j - split)] = v;
                }
            }
        }
        for k in 0..ne {
            tail[(k, k)] += shift;
        }
        for &(k, v) in extra {
            if k >= split {
                tail[(k - split, k - split)] += v;
            }
        }
        let mut w = coupling.clone();
        if let Some(band) = &band {
            for c in 0..ne {
                band.solve_in_place(w.column_mut(c).as_mut_slice());
            }
            // S = C − Bᵀ W
            tail -= coupling.transpose() * &w;
        }
        let mut schur_d = DVector::zeros(ne);
        ldlt_in_place(&mut tail, &mut schur_d, split)?;
        Ok(Self {
            n,
            split,
            band,
            coupling,
            w,
            schur_l: tail,
            schur_d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot of the factorization.
    pub fn min_pivot(&self) -> f64 {
        let b = self.band.as_ref().map_or(f64::INFINITY, |b| b.min_pivot());
        self.schur_d.iter().copied().fold(b, f64::min)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let split = self.split;
        let (xo, xe) = x.split_at_mut(split);
        if let Some(band) = &self.band {
            band.solve_in_place(xo);
        }
        if xe.is_empty() {
            return;
        }
        // z = S⁻¹ (r_e − Bᵀ y_o)
        let yo = DVector::from_column_slice(xo);
        let mut z: Vec<f64> = if split > 0 {
            let bty = self.coupling.tr_mul(&yo);
            xe.iter().zip(bty.iter()).map(|(r, b)| r - b).collect()
        } else {
            xe.to_vec()
        };
        forward_unit(&self.schur_l, &mut z);
        for (zi, di) in z.iter_mut().zip(self.schur_d.iter()) {
            *zi /= di;
        }
        backward_unit_t(&self.schur_l, &mut z);
        if split > 0 {
            let wz = &self.w * DVector::from_column_slice(&z);
            for (o, c) in xo.iter_mut().zip(wz.iter()) {
                *o -= c;
            }
        }
        xe.copy_from_slice(&z);
    }
}

/// Result of a bordered (constrained) solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSolution {
    pub x: Vec<f64>,
    /// Lagrange multiplier of the constraint (zero for compatible data).
    pub lambda: f64,
    /// ‖K x + λ c − f‖ / ‖f‖.
    pub residual: f64,
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dotv(a, a).sqrt()
}

/// Solve the bordered system [K c; cᵀ 0][x; λ] = [f; target].
///
/// K may be singular with a kernel not orthogonal to `c`. One diagonal entry
/// is pinned (K + ρ e_k e_kᵀ is factored) and the pin is undone exactly with
/// a 2×2 correction.
pub fn solve_constrained(
    k: &SymMatrix,
    f: &[f64],
    constraint: &[f64],
    target: f64,
) -> Result<ConstrainedSolution> {
    let n = k.dim();
    if f.len() != n || constraint.len() != n {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: matrix {n}, rhs {}, constraint {}",
            f.len(),
            constraint.len()
        )));
    }
    let (pin, cmax) = constraint
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    if cmax == 0.0 {
        return Err(Error::Singular("zero constraint vector".into()));
    }
    let rho = k.get(pin, pin).abs().max(1.0);
    let fac = ArrowFactor::new(k, 0.0, &[(pin, rho)])?;
    let yf = fac.solve(f);
    let mut ek = vec![0.0; n];
    ek[pin] = 1.0;
    let ye = fac.solve(&ek);
    let yc = fac.solve(constraint);
    let a11 = 1.0 - rho * ye[pin];
    let a12 = yc[pin];
    let a21 = -rho * dotv(constraint, &ye);
    let a22 = dotv(constraint, &yc);
    let b1 = yf[pin];
    let b2 = dotv(constraint, &yf) - target;
    let det = a11 * a22 - a12 * a21;
    let scale = (a11.abs() + a12.abs()) * (a21.abs() + a22.abs());
    if !(det.abs() > 1e-14 * scale) || !det.is_finite() {
        return Err(Error::Singular(format!(
            "bordered system is singular (det = {det:e})"
        )));
    }
    let xk = (b1 * a22 - a12 * b2) / det;
    let lambda = (a11 * b2 - a21 * b1) / det;
    let x: Vec<f64> = (0..n)
        .map(|i| yf[i] + rho * xk * ye[i] - lambda * yc[i])
        .collect();
    let kx = k.mul(&x);
    let r: Vec<f64> = (0..n).map(|i| kx[i] + lambda * constraint[i] - f[i]).collect();
    let fnorm = norm2(f);
    let residual = if fnorm > 0.0 { norm2(&r) / fnorm } else { norm2(&r) };
    if residual > 1e-10 {
        log::warn!("constrained solve residual {residual:e} exceeds 1e-10");
    }
    Ok(ConstrainedSolution {
        x,
        lambda,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Dense,
    Iterative,
}

/// Extreme eigenvalues of a scaled stiffness matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Smallest eigenvalue after discarding the dropped ones.
    pub lambda_min_prime: f64,
    pub method: EigenMethod,
    /// Largest relative Ritz residual (zero for the dense path).
    pub residual: f64,
}

impl SpectrumSummary {
    pub fn scn(&self) -> f64 {
        if self.lambda_min_prime > 0.0 {
            self.lambda_max / self.lambda_min_prime
        } else {
            f64::INFINITY
        }
    }
}

/// Scaled condition number λ_max / λ_(drop_smallest) of `k`.
pub fn scn(k: &SymMatrix, drop_smallest: usize) -> Result<SpectrumSummary> {
    let method = if k.dim() <= DENSE_EIGEN_MAX {
        EigenMethod::Dense
    } else {
        EigenMethod::Iterative
    };
    scn_with(k, drop_smallest, method)
}

pub fn scn_with(k: &SymMatrix, drop_smallest: usize, method: EigenMethod) -> Result<SpectrumSummary> {
    let n = k.dim();
    if drop_smallest >= n {
        return Err(Error::InvalidArgument(format!(
            "cannot drop {drop_smallest} of {n} eigenvalues"
        )));
    }
    match method {
        EigenMethod::Dense => {
            let mut ev: Vec<f64> = k.to_dense().symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            Ok(SpectrumSummary {
                lambda_max: ev[n - 1],
                lambda_min: ev[0],
                lambda_min_prime: ev[drop_smallest],
                method,
                residual: 0.0,
            })
        }
        EigenMethod::Iterative => {
            let tol = 1e-8;
            let top = lanczos(n, 1, tol, LANCZOS_MAX_ITER, |x, y| k.matvec(x, y))?;
            // shift-invert for the low end
            let sigma = SHIFT_INVERT_SIGMA;
            let fac = ArrowFactor::new(k, sigma, &[])?;
            let low = lanczos(n, drop_smallest + 1, tol, LANCZOS_MAX_ITER, |x, y| {
                y.copy_from_slice(x);
                fac.solve_in_place(y);
            })?;
            let mut lam: Vec<f64> = low.values.iter().map(|&t| 1.0 / t - sigma).collect();
            lam.sort_by(f64::total_cmp);
            Ok(SpectrumSummary {
                lambda_max: top.values[0],
                lambda_min: lam[0],
                lambda_min_prime: lam[drop_smallest],
                method,
                residual: top.residual.max(low.residual),
            })
        }
    }
}

/// Shift used by the shift-invert Lanczos iteration.
pub const SHIFT_INVERT_SIGMA: f64 = 1e-10;
pub const LANCZOS_MAX_ITER: usize = 800;

/// Largest Ritz values of a symmetric operator.
#[derive(Debug, Clone, PartialEq)]
pub struct RitzValues {
    /// Descending.
    pub values: Vec<f64>,
    /// Largest relative residual among the returned values.
    pub residual: f64,
    pub iterations: usize,
}

/// Lanczos with full reorthogonalization for the `want` largest eigenvalues.
pub fn lanczos(
    n: usize,
    want: usize,
    tol: f64,
    max_iter: usize,
    mut op: impl FnMut(&[f64], &mut [f64]),
) -> Result<RitzValues> {
    let m_max = max_iter.min(n);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75 + 0.3).sin())
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last = RitzValues {
        values: Vec::new(),
        residual: f64::INFINITY,
        iterations: 0,
    };
    for j in 0..m_max {
        op(&v, &mut w);
        let a = dotv(&w, &v);
        alpha.push(a);
        q.push(v.clone());
        // full reorthogonalization (two passes)
        for _ in 0..2 {
            for qi in &q {
                let c = dotv(&w, qi);
                w.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm2(&w);
        let m = j + 1;
        let check = m == m_max || b < 1e-14 * a.abs().max(1e-300) || m % 10 == 0 || m > want && m < 10;
        if check && m >= want {
            let mut t = DMatrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = t.symmetric_eigen();
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
            let mut vals = Vec::with_capacity(want);
            let mut res: f64 = 0.0;
            for &i in idx.iter().take(want) {
                let th = eig.eigenvalues[i];
                let r = (b * eig.eigenvectors[(m - 1, i)]).abs() / th.abs().max(1e-300);
                vals.push(th);
                res = res.max(r);
            }
            last = RitzValues {
                values: vals,
                residual: res,
                iterations: m,
            };
            if res <= tol || b < 1e-14 * a.abs().max(1e-300) || m == n {
                return Ok(last);
            }
        }
        if b == 0.0 {
            break;
        }
        beta.push(b);
        v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / b);
    }
    if last.values.len() == want && last.residual <= tol.sqrt() {
        // eigenvalue error is bounded by residual² / gap; accept with a note
        log::warn!(
            "Lanczos stopped at {} iterations with residual {:e}",
            last.iterations,
            last.residual
        );
        return Ok(last);
    }
    Err(Error::NoConvergence {
        iterations: last.iterations,
        residual: last.residual,
    })
}

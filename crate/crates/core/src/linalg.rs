//! Dense complex linear algebra: LU with partial pivoting, log-determinant,
//! inversion, triangular factorizations without pivoting, complex Schur form,
//! and the matrix logarithm / exponential built on it.

use crate::quadrature::gauss_legendre;
use crate::{Error, Real, Result, C};
use num_traits::{One, Zero};
use serde::Serialize;
use std::ops::{Index, IndexMut};

/// Origin of a dense matrix, kept for exports and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    StarToeplitz,
    HankelProduct,
    Block,
    Section,
    General,
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseComplexMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
    pub kind: MatrixKind,
}

impl<T: Real> Index<(usize, usize)> for DenseComplexMatrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for DenseComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> DenseComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C::zero(); rows * cols], kind: MatrixKind::General }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn with_kind(mut self, kind: MatrixKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Dimension of a square matrix.
    pub fn n(&self) -> usize {
        debug_assert_eq!(self.rows, self.cols);
        self.rows
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Entries in column-major order.
    pub fn column_major(&self) -> Vec<C<T>> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)]).with_kind(self.kind)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C<T>, C<T>) -> C<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self { rows: self.rows, cols: self.cols, data, kind: self.kind }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        let data = self.data.iter().map(|&a| a * s).collect();
        Self { rows: self.rows, cols: self.cols, data, kind: self.kind }
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).fold(C::zero(), |a, b| a + b)
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)]).with_kind(self.kind)
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Lu<T> {
        lu_partial(self)
    }

    /// Log-determinant via partially pivoted LU.
    pub fn logdet(&self) -> LogDet<T> {
        self.lu().logdet()
    }

    /// Inverse with reciprocal 1-norm condition number.
    pub fn inverse(&self) -> Result<(Self, T)> {
        let n = self.n();
        let lu = self.lu();
        if lu.singular {
            return Err(Error::Singular("exactly singular matrix".into()));
        }
        let inv = lu.solve_matrix(&Self::identity(n));
        if !inv.is_finite() {
            return Err(Error::Singular("non-finite inverse".into()));
        }
        let denom = self.norm1() * inv.norm1();
        let rcond = if denom > T::zero() { T::one() / denom } else { T::zero() };
        Ok((inv.with_kind(self.kind), rcond))
    }
}

/// `ln|det|`, principal `arg det` and the smallest pivot modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogDet<T: Real> {
    pub log_abs: T,
    pub phase: T,
    pub pivot_min: T,
}

impl<T: Real> LogDet<T> {
    /// `det` as a complex number (may overflow for large matrices).
    pub fn value(&self) -> C<T> {
        C::from_polar(self.log_abs.exp(), self.phase)
    }

    /// `log det` on the principal branch.
    pub fn log(&self) -> C<T> {
        C::new(self.log_abs, self.phase)
    }

    pub fn is_zero(&self) -> bool {
        self.log_abs == T::neg_infinity()
    }
}

/// Packed LU factors `PA = LU` with unit-lower `L`.
#[derive(Debug, Clone)]
pub struct Lu<T: Real> {
    pub factors: DenseComplexMatrix<T>,
    pub perm: Vec<usize>,
    pub swaps: usize,
    pub pivot_min: T,
    pub singular: bool,
}

fn lu_partial<T: Real>(a: &DenseComplexMatrix<T>) -> Lu<T> {
    let n = a.n();
    let mut m = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    let mut pivot_min = T::infinity();
    let mut singular = false;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, m[(i, k)].norm()))
            .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        pivot_min = pivot_min.min(pmax);
        if pmax == T::zero() {
            singular = true;
            continue;
        }
        if p != k {
            for j in 0..n {
                m.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            swaps += 1;
        }
        let pivot_inv = C::<T>::one() / m[(k, k)];
        let (head, tail) = m.data.split_at_mut((k + 1) * n);
        let krow = &head[k * n + k + 1..k * n + n];
        for i in 0..n - k - 1 {
            let row = &mut tail[i * n..(i + 1) * n];
            let l = row[k] * pivot_inv;
            row[k] = l;
            if l.is_zero() {
                continue;
            }
            for (x, &u) in row[k + 1..].iter_mut().zip(krow) {
                *x = *x - l * u;
            }
        }
    }
    if n == 0 {
        pivot_min = T::one();
    }
    Lu { factors: m, perm, swaps, pivot_min, singular }
}

impl<T: Real> Lu<T> {
    pub fn logdet(&self) -> LogDet<T> {
        let n = self.factors.n();
        if self.singular {
            return LogDet { log_abs: T::neg_infinity(), phase: T::zero(), pivot_min: T::zero() };
        }
        let mut log_abs = T::zero();
        // Phase accumulated as a unit complex number to stay reduced mod 2pi.
        let mut unit = if self.swaps.is_multiple_of(2) { C::one() } else { -C::<T>::one() };
        for i in 0..n {
            let u = self.factors[(i, i)];
            let r = u.norm();
            log_abs = log_abs + r.ln();
            unit = unit * (u / r);
            unit = unit / unit.norm();
        }
        let mut phase = unit.arg();
        if phase <= -T::PI() {
            phase = T::PI();
        }
        LogDet { log_abs, phase, pivot_min: self.pivot_min }
    }

    /// Solves `A X = B`.
    pub fn solve_matrix(&self, b: &DenseComplexMatrix<T>) -> DenseComplexMatrix<T> {
        let n = self.factors.n();
        let mut x = DenseComplexMatrix::zeros(n, b.cols);
        for j in 0..b.cols {
            let col: Vec<C<T>> = (0..n).map(|i| b[(self.perm[i], j)]).collect();
            let sol = self.solve_permuted(col);
            for i in 0..n {
                x[(i, j)] = sol[i];
            }
        }
        x
    }

    fn solve_permuted(&self, mut y: Vec<C<T>>) -> Vec<C<T>> {
        let n = y.len();
        let f = &self.factors;
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - f[(i, k)] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - f[(i, k)] * y[k];
            }
            y[i] = s / f[(i, i)];
        }
        y
    }
}

/// Triangular factors from elimination without pivoting.
#[derive(Debug, Clone)]
pub struct TriangularPair<T: Real> {
    pub lower: DenseComplexMatrix<T>,
    pub upper: DenseComplexMatrix<T>,
    /// Smallest pivot modulus relative to the largest entry of the input.
    pub pivot_min_rel: T,
}

/// `A = L U` without pivoting. With `unit_upper` the unit diagonal sits on
/// `U` (Crout), otherwise on `L` (Doolittle). Fails when a pivot drops
/// below `rel_tol * max|A|`.
pub fn lu_no_pivot<T: Real>(
    a: &DenseComplexMatrix<T>,
    unit_upper: bool,
    rel_tol: T,
) -> Result<TriangularPair<T>> {
    let n = a.n();
    let scale = a.max_abs();
    let mut m = a.clone();
    let mut pivot_min = T::infinity();
    for k in 0..n {
        let piv = m[(k, k)];
        let mag = piv.norm();
        pivot_min = pivot_min.min(mag);
        if !(mag > rel_tol * scale) {
            return Err(Error::Winding(format!(
                "pivot {k} has modulus {mag:e} against scale {scale:e}"
            )));
        }
        let pinv = C::<T>::one() / piv;
        for i in k + 1..n {
            let l = m[(i, k)] * pinv;
            m[(i, k)] = l;
            if l.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let u = m[(k, j)];
                m[(i, j)] = m[(i, j)] - l * u;
            }
        }
    }
    let mut lower = DenseComplexMatrix::zeros(n, n);
    let mut upper = DenseComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i > j {
                lower[(i, j)] = m[(i, j)];
            } else {
                upper[(i, j)] = m[(i, j)];
            }
        }
        lower[(i, i)] = C::one();
    }
    if unit_upper {
        // L U = (L D)(D^{-1} U) with D = diag(U).
        for j in 0..n {
            let d = upper[(j, j)];
            for i in j..n {
                lower[(i, j)] = lower[(i, j)] * d;
            }
            let dinv = C::<T>::one() / d;
            for k in j..n {
                upper[(j, k)] = upper[(j, k)] * dinv;
            }
        }
    }
    let pivot_min_rel = if scale > T::zero() { pivot_min / scale } else { T::one() };
    Ok(TriangularPair { lower, upper, pivot_min_rel })
}

/// `A = U L` with unit-upper `U` and general lower `L`, obtained from the
/// Doolittle factorization of the index-reversed matrix.
pub fn ul_no_pivot<T: Real>(a: &DenseComplexMatrix<T>, rel_tol: T) -> Result<TriangularPair<T>> {
    let n = a.n();
    let rev = DenseComplexMatrix::from_fn(n, n, |i, j| a[(n - 1 - i, n - 1 - j)]);
    let f = lu_no_pivot(&rev, false, rel_tol)?;
    let flip = |m: &DenseComplexMatrix<T>| {
        DenseComplexMatrix::from_fn(n, n, |i, j| m[(n - 1 - i, n - 1 - j)])
    };
    // J A J = L' U'  =>  A = (J L' J)(J U' J), an upper-unit times lower.
    Ok(TriangularPair { lower: flip(&f.upper), upper: flip(&f.lower), pivot_min_rel: f.pivot_min_rel })
}

fn givens<T: Real>(a: C<T>, b: C<T>) -> (T, C<T>) {
    let na = a.norm();
    let nb = b.norm();
    if nb == T::zero() {
        return (T::one(), C::zero());
    }
    if na == T::zero() {
        return (T::zero(), C::one());
    }
    let norm = na.hypot(nb);
    let c = na / norm;
    let s = (a / na) * b.conj() / norm;
    (c, s)
}

/// Complex Schur form `A = Q T Q^H`.
#[derive(Debug, Clone)]
pub struct Schur<T: Real> {
    pub q: DenseComplexMatrix<T>,
    pub t: DenseComplexMatrix<T>,
}

/// Hessenberg reduction followed by shifted complex QR.
pub fn schur<T: Real>(a: &DenseComplexMatrix<T>) -> Result<Schur<T>> {
    let n = a.n();
    let mut h = a.clone();
    let mut q = DenseComplexMatrix::identity(n);
    // Householder reduction to upper Hessenberg form.
    for k in 0..n.saturating_sub(2) {
        let xnorm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<T>().sqrt();
        if xnorm == T::zero() {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() > T::zero() { x0 / x0.norm() } else { C::one() };
        let alpha = -phase * xnorm;
        let mut v: Vec<C<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] = v[0] - alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if vnorm == T::zero() {
            continue;
        }
        for z in v.iter_mut() {
            *z = *z / vnorm;
        }
        let two = T::lit(2.0);
        for j in 0..n {
            let s = (0..v.len()).fold(C::zero(), |s, i| s + v[i].conj() * h[(k + 1 + i, j)]);
            for i in 0..v.len() {
                h[(k + 1 + i, j)] = h[(k + 1 + i, j)] - v[i] * s * two;
            }
        }
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let s = (0..v.len()).fold(C::<T>::zero(), |s, j| s + m[(i, k + 1 + j)] * v[j]);
                for j in 0..v.len() {
                    m[(i, k + 1 + j)] = m[(i, k + 1 + j)] - s * v[j].conj() * two;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C::zero();
        }
    }

    let eps = T::epsilon();
    let mut ihi = n.saturating_sub(1);
    let mut iter = 0usize;
    let max_iter = 60 * n.max(1);
    let mut total = 0usize;
    while ihi > 0 {
        let mut l = ihi;
        while l > 0 {
            let s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            let s = if s == T::zero() { T::one() } else { s };
            if h[(l, l - 1)].norm() <= eps * s {
                h[(l, l - 1)] = C::zero();
                break;
            }
            l -= 1;
        }
        if l == ihi {
            ihi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_iter {
            return Err(Error::Singular("QR iteration did not converge".into()));
        }
        let mu = if iter.is_multiple_of(10) {
            // Exceptional shift.
            h[(ihi, ihi)] + C::new(h[(ihi, ihi - 1)].norm() * T::lit(0.75), T::zero())
        } else {
            let a = h[(ihi - 1, ihi - 1)];
            let b = h[(ihi - 1, ihi)];
            let c = h[(ihi, ihi - 1)];
            let d = h[(ihi, ihi)];
            let half = T::lit(0.5);
            let tr = (a + d) * half;
            let disc = ((a - d) * (a - d) * T::lit(0.25) + b * c).sqrt();
            let l1 = tr + disc;
            let l2 = tr - disc;
            if (l1 - d).norm() < (l2 - d).norm() {
                l1
            } else {
                l2
            }
        };
        for k in l..ihi {
            let (x, y) = if k == l {
                (h[(l, l)] - mu, h[(l + 1, l)])
            } else {
                (h[(k, k - 1)], h[(k + 1, k - 1)])
            };
            let (c, s) = givens(x, y);
            let cc = C::new(c, T::zero());
            let col0 = if k == l { l } else { k - 1 };
            for j in col0..n {
                let u = h[(k, j)];
                let v = h[(k + 1, j)];
                h[(k, j)] = cc * u + s * v;
                h[(k + 1, j)] = cc * v - s.conj() * u;
            }
            if k > l {
                h[(k + 1, k - 1)] = C::zero();
            }
            let rmax = (k + 2).min(ihi);
            for i in 0..=rmax {
                let u = h[(i, k)];
                let v = h[(i, k + 1)];
                h[(i, k)] = cc * u + s.conj() * v;
                h[(i, k + 1)] = cc * v - s * u;
            }
            for i in 0..n {
                let u = q[(i, k)];
                let v = q[(i, k + 1)];
                q[(i, k)] = cc * u + s.conj() * v;
                q[(i, k + 1)] = cc * v - s * u;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = C::zero();
        }
    }
    Ok(Schur { q, t: h })
}

/// Principal square root of an upper triangular matrix.
pub fn sqrt_upper<T: Real>(t: &DenseComplexMatrix<T>) -> DenseComplexMatrix<T> {
    let n = t.n();
    let mut r = DenseComplexMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = t[(i, i)].sqrt();
    }
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s = s - r[(i, k)] * r[(k, j)];
            }
            r[(i, j)] = s / (r[(i, i)] + r[(j, j)]);
        }
    }
    r
}

/// Solves `U X = B` for upper triangular `U`.
fn solve_upper<T: Real>(u: &DenseComplexMatrix<T>, b: &DenseComplexMatrix<T>) -> DenseComplexMatrix<T> {
    let n = u.n();
    let mut x = b.clone();
    for j in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..n {
                s = s - u[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / u[(i, i)];
        }
    }
    x
}

/// Complex eigenvalues from the Schur diagonal.
pub fn eigenvalues<T: Real>(a: &DenseComplexMatrix<T>) -> Result<Vec<C<T>>> {
    let s = schur(a)?;
    Ok((0..a.n()).map(|i| s.t[(i, i)]).collect())
}

/// Principal logarithm of an upper triangular matrix by inverse scaling
/// and squaring with a Gauss-Legendre Pade evaluation.
pub fn log_upper<T: Real>(t: &DenseComplexMatrix<T>) -> DenseComplexMatrix<T> {
    let n = t.n();
    let id = DenseComplexMatrix::identity(n);
    let mut r = t.clone();
    let mut squarings = 0u32;
    while r.sub(&id).norm1() > T::lit(0.25) && squarings < 64 {
        r = sqrt_upper(&r);
        squarings += 1;
    }
    let x = r.sub(&id);
    let (nodes, weights) = gauss_legendre::<T>(10);
    let mut acc = DenseComplexMatrix::zeros(n, n);
    let half = T::lit(0.5);
    for (&node, &w) in nodes.iter().zip(&weights) {
        // Map [-1, 1] to [0, 1].
        let s = (node + T::one()) * half;
        let ws = w * half;
        let lhs = id.add(&x.scale(C::new(s, T::zero())));
        let y = solve_upper(&lhs, &x);
        acc = acc.add(&y.scale(C::new(ws, T::zero())));
    }
    acc.scale(C::new(T::lit(2f64.powi(squarings as i32)), T::zero()))
}

/// Principal matrix logarithm. Fails if an eigenvalue lies within
/// `branch_tol` of the closed negative real axis.
pub fn logm<T: Real>(a: &DenseComplexMatrix<T>, branch_tol: T) -> Result<DenseComplexMatrix<T>> {
    let n = a.n();
    let s = schur(a)?;
    for i in 0..n {
        let l = s.t[(i, i)];
        let dist = if l.re > T::zero() { l.norm() } else { l.im.abs() };
        if dist <= branch_tol {
            return Err(Error::Branch(format!(
                "eigenvalue {:e}{:+e}i is within {:e} of the branch cut",
                l.re, l.im, branch_tol
            )));
        }
    }
    let lt = log_upper(&s.t);
    Ok(back_transform(&s.q, &lt).with_kind(a.kind))
}

fn back_transform<T: Real>(q: &DenseComplexMatrix<T>, t: &DenseComplexMatrix<T>) -> DenseComplexMatrix<T> {
    let qh = DenseComplexMatrix::from_fn(q.cols(), q.rows(), |i, j| q[(j, i)].conj());
    q.matmul(t).matmul(&qh)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm<T: Real>(a: &DenseComplexMatrix<T>) -> Result<DenseComplexMatrix<T>> {
    let n = a.n();
    let norm = a.norm1();
    if !norm.is_finite() {
        return Err(Error::Overflow("non-finite input".into()));
    }
    let mut squarings = 0i32;
    let mut scale = T::one();
    while norm * scale > T::lit(0.5) {
        scale = scale * T::lit(0.5);
        squarings += 1;
        if squarings > 1100 {
            return Err(Error::Overflow("norm beyond exponent range".into()));
        }
    }
    let x = a.scale(C::new(scale, T::zero()));
    let mut term = DenseComplexMatrix::identity(n);
    let mut sum = DenseComplexMatrix::identity(n);
    for k in 1..40 {
        term = term.matmul(&x).scale(C::new(T::one() / T::int(k), T::zero()));
        sum = sum.add(&term);
        if term.max_abs() <= T::epsilon() * sum.max_abs() * T::lit(1e-3) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    if !sum.is_finite() {
        return Err(Error::Overflow("matrix exponential overflowed".into()));
    }
    Ok(sum.with_kind(a.kind))
}

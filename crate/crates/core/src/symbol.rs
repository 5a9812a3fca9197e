//! Symbols on half-integer grids and their elementary transforms.
//!
//! A [`SymbolGrid`] stores the Fourier coefficients `(a_x)_k` for every
//! `x` in `{x_min, x_min + 1/2, ..., x_max}` and `|k| <= K`. Only entries
//! with `2x = k (mod 2)` reach an integer-indexed matrix; the others are
//! kept so that products and functions of symbols stay defined on both
//! sublattices.

use crate::{fourier, Error, Real, Result, C};
use num_traits::{One, Zero};
use serde::Serialize;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::{Arc, Mutex};

/// Half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct HalfInt(pub i64);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);

    pub fn int(v: i64) -> Self {
        HalfInt(2 * v)
    }

    /// From twice the value.
    pub fn twice(t: i64) -> Self {
        HalfInt(t)
    }

    pub fn doubled(self) -> i64 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn value<T: Real>(self) -> T {
        T::int(self.0) / T::lit(2.0)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Parses `"3"`, `"-2.5"`, `"7/2"`; fails unless the value is in `Z/2`.
    pub fn from_f64(v: f64) -> Result<Self> {
        let t = 2.0 * v;
        if (t - t.round()).abs() > 1e-9 || !t.is_finite() {
            return Err(Error::Input(format!("{v} is not a half-integer")));
        }
        Ok(HalfInt(t.round() as i64))
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 - o.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Fourier projections of a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProjectionKind {
    /// Keeps `k >= 0`.
    Plus,
    /// Keeps `k <= -1`.
    Minus,
    /// `Plus - Minus`.
    Tilde,
}

/// Banded Fourier coefficients of a symbol on a half-integer grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid<T: Real> {
    x_min: HalfInt,
    x_max: HalfInt,
    band: usize,
    coeffs: Vec<C<T>>,
    /// Fitted bound `|(a_x)_k| <~ M rho^|k|`.
    pub decay_rho: T,
    pub warnings: Vec<String>,
}

impl<T: Real> SymbolGrid<T> {
    /// All-zero symbol.
    pub fn zeros(x_min: HalfInt, x_max: HalfInt, band: usize) -> Self {
        assert!(x_min <= x_max, "empty grid");
        let len = (x_max.0 - x_min.0 + 1) as usize;
        Self {
            x_min,
            x_max,
            band,
            coeffs: vec![C::zero(); len * (2 * band + 1)],
            decay_rho: T::epsilon(),
            warnings: Vec::new(),
        }
    }

    /// Builds from a coefficient function and fits `decay_rho`.
    pub fn from_fn(
        x_min: HalfInt,
        x_max: HalfInt,
        band: usize,
        mut f: impl FnMut(HalfInt, i64) -> C<T>,
    ) -> Self {
        let mut s = Self::zeros(x_min, x_max, band);
        for t in x_min.0..=x_max.0 {
            for k in -(band as i64)..=band as i64 {
                let v = f(HalfInt(t), k);
                s.set(HalfInt(t), k, v);
            }
        }
        s.refit_decay();
        s
    }

    /// The unit symbol `[1]`.
    pub fn identity(x_min: HalfInt, x_max: HalfInt) -> Self {
        Self::from_fn(x_min, x_max, 0, |_, _| C::one())
    }

    /// x-independent symbol from coefficients ordered `k = -K..=K`.
    pub fn toeplitz(x_min: HalfInt, x_max: HalfInt, coeffs: &[C<T>]) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficient list must have odd length");
        let band = (coeffs.len() - 1) / 2;
        Self::from_fn(x_min, x_max, band, |_, k| coeffs[(k + band as i64) as usize])
    }

    pub fn x_min(&self) -> HalfInt {
        self.x_min
    }

    pub fn x_max(&self) -> HalfInt {
        self.x_max
    }

    pub fn band(&self) -> usize {
        self.band
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        (self.x_max.0 - self.x_min.0 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: HalfInt) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Grid points in increasing order.
    pub fn xs(&self) -> impl Iterator<Item = HalfInt> {
        (self.x_min.0..=self.x_max.0).map(HalfInt)
    }

    #[inline]
    fn slot(&self, x: HalfInt, k: i64) -> usize {
        (x.0 - self.x_min.0) as usize * (2 * self.band + 1) + (k + self.band as i64) as usize
    }

    /// `(a_x)_k`; zero outside the band. Panics outside the grid.
    #[inline]
    pub fn coeff(&self, x: HalfInt, k: i64) -> C<T> {
        assert!(self.contains(x), "x = {x} outside grid [{}, {}]", self.x_min, self.x_max);
        if k.unsigned_abs() as usize > self.band {
            return C::zero();
        }
        self.coeffs[self.slot(x, k)]
    }

    /// `(a_x)_k` with a range error outside the grid.
    pub fn try_coeff(&self, x: HalfInt, k: i64) -> Result<C<T>> {
        if !self.contains(x) {
            return Err(Error::Range(format!(
                "x = {x} outside grid [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        Ok(self.coeff(x, k))
    }

    pub fn set(&mut self, x: HalfInt, k: i64, v: C<T>) {
        assert!(k.unsigned_abs() as usize <= self.band, "k = {k} outside band {}", self.band);
        let s = self.slot(x, k);
        self.coeffs[s] = v;
    }

    /// Coefficients of `a_x` ordered `k = -K..=K`.
    pub fn row(&self, x: HalfInt) -> &[C<T>] {
        let s = self.slot(x, -(self.band as i64));
        &self.coeffs[s..s + 2 * self.band + 1]
    }

    pub fn max_abs(&self) -> T {
        self.coeffs.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `max_x |(a_x)_{+-K}| / max |(a_x)_k|`.
    pub fn tail_ratio(&self) -> T {
        let m = self.max_abs();
        if m == T::zero() {
            return T::zero();
        }
        let k = self.band as i64;
        let tail = self
            .xs()
            .map(|x| self.coeff(x, k).norm().max(self.coeff(x, -k).norm()))
            .fold(T::zero(), T::max);
        tail / m
    }

    /// Evaluates `a_x(e^{ip})`.
    pub fn eval(&self, x: HalfInt, p: T) -> C<T> {
        let k0 = -(self.band as i64);
        self.row(x)
            .iter()
            .enumerate()
            .fold(C::zero(), |s, (i, &c)| s + c * C::from_polar(T::one(), T::int(k0 + i as i64) * p))
    }

    /// Restriction to a sub-range.
    pub fn restrict(&self, x_min: HalfInt, x_max: HalfInt) -> Result<Self> {
        if !self.contains(x_min) || !self.contains(x_max) || x_min > x_max {
            return Err(Error::Range(format!(
                "[{x_min}, {x_max}] not inside [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let mut out = Self::zeros(x_min, x_max, self.band);
        for x in out.xs().collect::<Vec<_>>() {
            let src = self.slot(x, -(self.band as i64));
            let dst = out.slot(x, -(self.band as i64));
            let w = 2 * self.band + 1;
            out.coeffs[dst..dst + w].copy_from_slice(&self.coeffs[src..src + w]);
        }
        out.decay_rho = self.decay_rho;
        out.warnings = self.warnings.clone();
        Ok(out)
    }

    /// Same symbol with band changed to `band` (truncating or zero-padding).
    pub fn with_band(&self, band: usize) -> Self {
        let mut out = Self::zeros(self.x_min, self.x_max, band);
        let kmax = band.min(self.band) as i64;
        for x in self.xs() {
            for k in -kmax..=kmax {
                out.set(x, k, self.coeff(x, k));
            }
        }
        out.decay_rho = self.decay_rho;
        out.warnings = self.warnings.clone();
        out
    }

    /// Drops outer bands whose coefficients are all below `tol * max|a|`,
    /// never going below `min_band`.
    pub fn trimmed(&self, tol: T, min_band: usize) -> Self {
        let floor = tol * self.max_abs();
        let mut band = self.band;
        while band > min_band {
            let k = band as i64;
            let tail = self
                .xs()
                .map(|x| self.coeff(x, k).norm().max(self.coeff(x, -k).norm()))
                .fold(T::zero(), T::max);
            if tail > floor {
                break;
            }
            band -= 1;
        }
        self.with_band(band)
    }

    /// Entrywise combination over the common grid; band is the larger one.
    pub fn zip_with(&self, other: &Self, f: impl Fn(C<T>, C<T>) -> C<T>) -> Result<Self> {
        let lo = self.x_min.max(other.x_min);
        let hi = self.x_max.min(other.x_max);
        if lo > hi {
            return Err(Error::Range("grids do not overlap".into()));
        }
        let band = self.band.max(other.band);
        let mut out = Self::from_fn(lo, hi, band, |x, k| f(self.coeff(x, k), other.coeff(x, k)));
        out.refit_decay();
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: C<T>) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|z| *z = *z * s);
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(HalfInt, i64, C<T>) -> C<T>) -> Self {
        let mut out = Self::from_fn(self.x_min, self.x_max, self.band, |x, k| f(x, k, self.coeff(x, k)));
        out.warnings = self.warnings.clone();
        out
    }

    /// Largest `|a - b|` over the common grid, restricted to `[lo, hi]`.
    pub fn max_diff_on(&self, other: &Self, lo: HalfInt, hi: HalfInt) -> T {
        let lo = lo.max(self.x_min).max(other.x_min);
        let hi = hi.min(self.x_max).min(other.x_max);
        let band = self.band.max(other.band) as i64;
        let mut m = T::zero();
        for t in lo.0..=hi.0 {
            let x = HalfInt(t);
            for k in -band..=band {
                m = m.max((self.coeff(x, k) - other.coeff(x, k)).norm());
            }
        }
        m
    }

    /// Largest `|a - b|` over the common grid.
    pub fn max_diff(&self, other: &Self) -> T {
        self.max_diff_on(other, self.x_min.min(other.x_min), self.x_max.max(other.x_max))
    }

    /// True if every `a_x` equals `a_{x_min}` within `tol`.
    pub fn is_toeplitz(&self, tol: T) -> bool {
        let first = self.row(self.x_min).to_vec();
        self.xs().all(|x| self.row(x).iter().zip(&first).all(|(a, b)| (*a - *b).norm() <= tol))
    }

    /// Refits `decay_rho` from the coefficient envelope.
    pub fn refit_decay(&mut self) {
        self.decay_rho = fit_decay(self);
        self.warnings.retain(|w| !w.starts_with("symbol not exponentially banded"));
        if self.decay_rho >= T::one() {
            self.warnings.push(format!(
                "symbol not exponentially banded: fitted decay {:e}",
                self.decay_rho
            ));
        }
    }
}

/// Least-squares slope of `log max_x |(a_x)_{+-k}|` against `k` for
/// `K/2 <= k <= K`, ignoring entries at round-off level.
fn fit_decay<T: Real>(a: &SymbolGrid<T>) -> T {
    let band = a.band as i64;
    let peak = a.max_abs();
    if band == 0 || peak == T::zero() {
        return T::epsilon();
    }
    let floor = peak * T::epsilon() * T::lit(16.0);
    let mut pts = Vec::new();
    for k in (band / 2).max(0)..=band {
        let m = a
            .xs()
            .map(|x| a.coeff(x, k).norm().max(a.coeff(x, -k).norm()))
            .fold(T::zero(), T::max);
        if m > floor {
            pts.push((T::int(k), m.ln()));
        }
    }
    if pts.len() < 2 {
        // Band 1 or a clean cutoff: fall back to the envelope between k = 0 and
        // the largest significant k.
        let m0 = a.xs().map(|x| a.coeff(x, 0).norm()).fold(T::zero(), T::max);
        let kmax = (1..=band).rev().find(|&k| {
            a.xs().any(|x| a.coeff(x, k).norm().max(a.coeff(x, -k).norm()) > floor)
        });
        return match kmax {
            None => T::epsilon(),
            Some(k) => {
                let mk = a
                    .xs()
                    .map(|x| a.coeff(x, k).norm().max(a.coeff(x, -k).norm()))
                    .fold(T::zero(), T::max);
                if m0 > T::zero() {
                    (mk / m0).powf(T::one() / T::int(k))
                } else {
                    T::one()
                }
            }
        };
    }
    let nf = T::int(pts.len() as i64);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<T>() / nf;
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxy / sxx).exp()
}

/// Samples `f(x, p)` on the grid and takes its discrete Fourier
/// coefficients with `n_p` trapezoid points.
pub fn sample_symbol<T: Real>(
    f: impl Fn(T, T) -> C<T>,
    x_min: HalfInt,
    x_max: HalfInt,
    band: usize,
    n_p: usize,
) -> Result<SymbolGrid<T>> {
    if n_p < 4 * band + 4 {
        return Err(Error::Input(format!("N_p = {n_p} below 4K + 4 = {}", 4 * band + 4)));
    }
    if x_min > x_max {
        return Err(Error::Input(format!("x_min = {x_min} exceeds x_max = {x_max}")));
    }
    let mut out = SymbolGrid::zeros(x_min, x_max, band);
    let step = T::TAU() / T::int(n_p as i64);
    let mut samples = vec![C::zero(); n_p];
    for t in x_min.0..=x_max.0 {
        let x = HalfInt(t);
        let xv: T = x.value();
        for (m, s) in samples.iter_mut().enumerate() {
            let v = f(xv, step * T::int(m as i64));
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Input(format!("non-finite symbol value at x = {x}")));
            }
            *s = v;
        }
        for (i, c) in fourier::coefficients(&samples, band).into_iter().enumerate() {
            out.set(x, i as i64 - band as i64, c);
        }
    }
    out.refit_decay();
    Ok(out)
}

/// Fourier projection.
pub fn project<T: Real>(a: &SymbolGrid<T>, kind: ProjectionKind) -> SymbolGrid<T> {
    let mut out = a.map_coeffs(|_, k, c| match kind {
        ProjectionKind::Plus if k < 0 => C::zero(),
        ProjectionKind::Minus if k >= 0 => C::zero(),
        ProjectionKind::Tilde if k < 0 => -c,
        _ => c,
    });
    out.decay_rho = a.decay_rho;
    out
}

/// Reflected symbol: `(out_x)_k = (a_{n+1-x})_{-k}` on the mirrored grid.
pub fn reflect<T: Real>(a: &SymbolGrid<T>, n: i64) -> SymbolGrid<T> {
    let c = HalfInt::int(n + 1);
    let mut out = SymbolGrid::zeros(c - a.x_max, c - a.x_min, a.band);
    for x in out.xs().collect::<Vec<_>>() {
        for k in -(a.band as i64)..=a.band as i64 {
            out.set(x, k, a.coeff(c - x, -k));
        }
    }
    out.decay_rho = a.decay_rho;
    out.warnings = a.warnings.clone();
    out
}

/// Reflection restricted to `[lo, hi]`; fails if the mirrored grid does not
/// cover it.
pub fn reflect_within<T: Real>(a: &SymbolGrid<T>, n: i64, lo: HalfInt, hi: HalfInt) -> Result<SymbolGrid<T>> {
    reflect(a, n).restrict(lo, hi)
}

/// Shifted symbol `(out)_x = a_{x+t}` on the translated grid.
pub fn shift<T: Real>(a: &SymbolGrid<T>, t: HalfInt) -> SymbolGrid<T> {
    let mut out = SymbolGrid::zeros(a.x_min - t, a.x_max - t, a.band);
    out.coeffs.clone_from(&a.coeffs);
    out.decay_rho = a.decay_rho;
    out.warnings = a.warnings.clone();
    out
}

/// Shift restricted to `[lo, hi]`.
pub fn shift_within<T: Real>(a: &SymbolGrid<T>, t: HalfInt, lo: HalfInt, hi: HalfInt) -> Result<SymbolGrid<T>> {
    shift(a, t).restrict(lo, hi)
}

/// Evaluator `(m1, m2, y, p) -> d_y^m1 d_p^m2 g(y, p)`.
pub type DerivFn<T> = Arc<dyn Fn(usize, usize, T, T) -> C<T> + Send + Sync>;

/// How a [`SmoothSymbol`] evaluator relates to the symbol it represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolForm {
    /// The symbol is `exp(g(x nu, p))`.
    Exp,
    /// The symbol is `g(x nu, p)` itself.
    Plain,
}

/// Analytic symbol with scale `nu`: `a = [exp(g(x nu, p))]` (or `[g]` in
/// plain form). Derivatives of order up to `analytic_order` come from the
/// evaluator; higher ones fall back to central differences.
#[derive(Clone)]
pub struct SmoothSymbol<T: Real> {
    g: DerivFn<T>,
    pub nu: T,
    pub form: SymbolForm,
    pub analytic_order: usize,
    pub label: String,
}

impl<T: Real> fmt::Debug for SmoothSymbol<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothSymbol")
            .field("label", &self.label)
            .field("nu", &self.nu)
            .field("form", &self.form)
            .finish()
    }
}

impl<T: Real> SmoothSymbol<T> {
    /// Exponential-form symbol with analytic derivatives up to order 4.
    pub fn new(
        label: impl Into<String>,
        nu: T,
        g: impl Fn(usize, usize, T, T) -> C<T> + Send + Sync + 'static,
    ) -> Self {
        Self { g: Arc::new(g), nu, form: SymbolForm::Exp, analytic_order: 4, label: label.into() }
    }

    /// Plain-form symbol from a value-only evaluator in x-coordinates
    /// (`nu = 1`); derivatives by central differences.
    pub fn plain_from_values(
        label: impl Into<String>,
        f: impl Fn(T, T) -> C<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            g: Arc::new(move |m1, m2, y, p| {
                assert!(m1 == 0 && m2 == 0, "value-only evaluator");
                f(y, p)
            }),
            nu: T::one(),
            form: SymbolForm::Plain,
            analytic_order: 0,
            label: label.into(),
        }
    }

    /// Value-only exponential-form symbol; derivatives by differences.
    pub fn from_values(
        label: impl Into<String>,
        nu: T,
        g: impl Fn(T, T) -> C<T> + Send + Sync + 'static,
    ) -> Self {
        let mut s = Self::plain_from_values(label, g);
        s.nu = nu;
        s.form = SymbolForm::Exp;
        s
    }

    pub fn with_form(mut self, form: SymbolForm) -> Self {
        self.form = form;
        self
    }

    /// `d_y^m1 d_p^m2 g(y, p)` in the natural coordinate `y = x nu`.
    pub fn deriv(&self, m1: usize, m2: usize, y: T, p: T) -> C<T> {
        if m1 + m2 <= self.analytic_order || (self.analytic_order >= 4 && m1 <= 4 && m2 <= 4) {
            return (self.g)(m1, m2, y, p);
        }
        self.fd_deriv(m1, m2, y, p)
    }

    fn fd_deriv(&self, m1: usize, m2: usize, y: T, p: T) -> C<T> {
        // Reduce the highest order first using analytic lower derivatives.
        let (h, dir) = if m1 > 0 { (T::lit(2e-3), 0) } else { (T::lit(2e-3), 1) };
        let (a1, a2) = if dir == 0 { (m1 - 1, m2) } else { (m1, m2 - 1) };
        let f = |d: T| {
            let (yy, pp) = if dir == 0 { (y + d, p) } else { (y, p + d) };
            self.deriv(a1, a2, yy, pp)
        };
        // Fourth-order central difference.
        let eight = T::lit(8.0);
        (f(-h - h) - f(-h) * eight + f(h) * eight - f(h + h)) / (h * T::lit(12.0))
    }

    /// `g` at `(y, p)`.
    pub fn g(&self, y: T, p: T) -> C<T> {
        self.deriv(0, 0, y, p)
    }

    /// Derivative in lattice coordinates: `d_x^m1 d_p^m2 [g(x nu, p)]`.
    pub fn dx(&self, m1: usize, m2: usize, x: T, p: T) -> C<T> {
        self.deriv(m1, m2, x * self.nu, p) * self.nu.powi(m1 as i32)
    }

    /// Value of the represented symbol at lattice coordinate `x`.
    pub fn value(&self, x: T, p: T) -> C<T> {
        let g = self.g(x * self.nu, p);
        match self.form {
            SymbolForm::Exp => g.exp(),
            SymbolForm::Plain => g,
        }
    }

    /// Lattice-coordinate derivatives `d_x^i d_p^j` of the represented
    /// symbol for `i <= a`, `j <= b`, as `table[i][j]`.
    pub fn jet(&self, a: usize, b: usize, x: T, p: T) -> Vec<Vec<C<T>>> {
        let mut g = vec![vec![C::zero(); b + 2]; a + 2];
        for (i, row) in g.iter_mut().enumerate().take(a + 1) {
            for (j, v) in row.iter_mut().enumerate().take(b + 1) {
                *v = self.dx(i, j, x, p);
            }
        }
        match self.form {
            SymbolForm::Plain => g.into_iter().take(a + 1).map(|r| r.into_iter().take(b + 1).collect()).collect(),
            SymbolForm::Exp => exp_jet(&g, a, b),
        }
    }

    /// Checks analytic derivatives against central differences at the
    /// given sample points; returns the largest relative mismatch.
    pub fn check_consistency(&self, points: &[(T, T)]) -> T {
        let h = T::lit(1e-3);
        let mut worst = T::zero();
        for &(y, p) in points {
            for m1 in 0..=3usize {
                for m2 in 0..=3usize {
                    if m1 + m2 >= self.analytic_order.max(1) || self.analytic_order == 0 {
                        continue;
                    }
                    let exact_y = self.deriv(m1 + 1, m2, y, p);
                    let fd_y = (self.deriv(m1, m2, y + h, p) - self.deriv(m1, m2, y - h, p)) / (h + h);
                    let exact_p = self.deriv(m1, m2 + 1, y, p);
                    let fd_p = (self.deriv(m1, m2, y, p + h) - self.deriv(m1, m2, y, p - h)) / (h + h);
                    for (e, f) in [(exact_y, fd_y), (exact_p, fd_p)] {
                        let scale = e.norm().max(T::one());
                        worst = worst.max((e - f).norm() / scale);
                    }
                }
            }
        }
        worst
    }

    /// Largest `|g(y, p) - g(y, p + 2 pi)|` at the sample points.
    pub fn periodicity_defect(&self, points: &[(T, T)]) -> T {
        points
            .iter()
            .map(|&(y, p)| (self.g(y, p) - self.g(y, p + T::TAU())).norm())
            .fold(T::zero(), T::max)
    }
}

/// Derivatives of `exp(g)` from the derivatives of `g` (`g[i][j]` for
/// `i <= a, j <= b`) via `d_x F = g_x F` and Leibniz.
pub fn exp_jet<T: Real>(g: &[Vec<C<T>>], a: usize, b: usize) -> Vec<Vec<C<T>>> {
    let binom = |n: usize, k: usize| -> T {
        let mut r = T::one();
        for i in 0..k {
            r = r * T::int((n - i) as i64) / T::int((i + 1) as i64);
        }
        r
    };
    let mut f = vec![vec![C::zero(); b + 1]; a + 1];
    f[0][0] = g[0][0].exp();
    for j in 1..=b {
        // d_p^{j} F = sum_l C(j-1, l) g^{(0, l+1)} F^{(0, j-1-l)}
        let mut s = C::zero();
        for l in 0..j {
            s = s + g[0][l + 1] * f[0][j - 1 - l] * binom(j - 1, l);
        }
        f[0][j] = s;
    }
    for i in 1..=a {
        for j in 0..=b {
            let mut s = C::zero();
            for u in 0..i {
                for v in 0..=j {
                    s = s + g[u + 1][v] * f[i - 1 - u][j - v] * (binom(i - 1, u) * binom(j, v));
                }
            }
            f[i][j] = s;
        }
    }
    f
}

/// Samples the represented symbol `exp(g(x nu, p))` onto a grid.
pub fn smooth_to_grid<T: Real>(
    s: &SmoothSymbol<T>,
    x_min: HalfInt,
    x_max: HalfInt,
    band: usize,
    n_p: usize,
) -> Result<SymbolGrid<T>> {
    sample_symbol(|x, p| s.value(x, p), x_min, x_max, band, n_p)
}

/// A plain-form smooth function whose values at a given `x` are computed as
/// a whole `p`-array (FFT-based constructions); caches the last `x`.
pub(crate) struct ArrayEvaluator<T: Real> {
    compute: Box<dyn Fn(T) -> Vec<C<T>> + Send + Sync>,
    cache: Mutex<Option<(T, Vec<C<T>>)>>,
}

impl<T: Real> ArrayEvaluator<T> {
    pub(crate) fn new(compute: impl Fn(T) -> Vec<C<T>> + Send + Sync + 'static) -> Self {
        Self { compute: Box::new(compute), cache: Mutex::new(None) }
    }

    /// Fourier coefficients (FFT slot order) of the function at `x`.
    fn spectrum_at(&self, x: T) -> Vec<C<T>> {
        let mut guard = self.cache.lock().expect("cache lock");
        if let Some((cx, spec)) = guard.as_ref() {
            if *cx == x {
                return spec.clone();
            }
        }
        let spec = fourier::spectrum(&(self.compute)(x));
        *guard = Some((x, spec.clone()));
        spec
    }

    pub(crate) fn eval(&self, x: T, p: T) -> C<T> {
        let spec = self.spectrum_at(x);
        let n = spec.len();
        let mut s = C::zero();
        for (i, &c) in spec.iter().enumerate() {
            let k = fourier::frequency(i, n);
            let w = if n.is_multiple_of(2) && i == n / 2 {
                // Split the Nyquist mode symmetrically.
                C::new((T::int(k) * p).cos(), T::zero())
            } else {
                C::from_polar(T::one(), T::int(k) * p)
            };
            s = s + c * w;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HalfInt {
        HalfInt::from_f64(v).unwrap()
    }

    #[test]
    fn half_int_arith() {
        assert_eq!(h(1.5) + h(0.5), HalfInt::int(2));
        assert!(HalfInt::from_f64(0.3).is_err());
        assert_eq!(format!("{}", h(-1.5)), "-3/2");
        assert_eq!(h(2.5).value::<f64>(), 2.5);
    }

    #[test]
    fn sample_identity_and_shift_symbol() {
        let a = sample_symbol(|_, _| C::new(1.0, 0.0), h(0.0), h(3.0), 4, 32).unwrap();
        for x in a.xs() {
            for k in -4..=4 {
                let want = if k == 0 { 1.0 } else { 0.0 };
                assert!((a.coeff(x, k) - C::new(want, 0.0)).norm() < 1e-15);
            }
        }
        let z = sample_symbol(|_, p: f64| C::from_polar(1.0, p), h(0.0), h(1.0), 3, 16).unwrap();
        assert!((z.coeff(h(0.5), 1) - C::new(1.0, 0.0)).norm() < 1e-15);
        assert!(z.coeff(h(0.5), 0).norm() < 1e-15);
    }

    #[test]
    fn sample_rejects_bad_input() {
        assert!(sample_symbol(|_, _| C::new(1.0, 0.0), h(0.0), h(1.0), 4, 16).is_err());
        assert!(sample_symbol(|_, _| C::new(f64::NAN, 0.0), h(0.0), h(1.0), 1, 8).is_err());
    }

    #[test]
    fn projections_on_three_term_symbol() {
        let a = SymbolGrid::toeplitz(h(0.0), h(1.0), &[C::new(1.0, 0.0), C::new(2.0, 0.0), C::new(3.0, 0.0)]);
        let get = |s: &SymbolGrid<f64>| [-1, 0, 1].map(|k| s.coeff(h(0.5), k).re);
        assert_eq!(get(&project(&a, ProjectionKind::Plus)), [0.0, 2.0, 3.0]);
        assert_eq!(get(&project(&a, ProjectionKind::Minus)), [1.0, 0.0, 0.0]);
        assert_eq!(get(&project(&a, ProjectionKind::Tilde)), [-1.0, 2.0, 3.0]);
    }

    #[test]
    fn reflect_index_arithmetic() {
        let mut a = SymbolGrid::<f64>::zeros(h(0.0), h(4.0), 2);
        a.set(h(1.0), 1, C::new(5.0, 0.0));
        let r = reflect(&a, 3);
        assert_eq!(r.coeff(h(3.0), -1), C::new(5.0, 0.0));
        assert_eq!(reflect(&r, 3), a);
    }

    #[test]
    fn toeplitz_reflect_reverses_k() {
        let c: Vec<C<f64>> = (0..5).map(|i| C::new(i as f64, 1.0)).collect();
        let a = SymbolGrid::toeplitz(h(-2.0), h(2.0), &c);
        let r = reflect(&a, 0);
        assert_eq!((r.x_min(), r.x_max()), (h(-1.0), h(3.0)));
        assert_eq!(r.coeff(h(1.0), 2), c[0]);
    }

    #[test]
    fn shift_group_action() {
        let a = SymbolGrid::<f64>::from_fn(h(0.0), h(6.0), 1, |x, k| C::new(x.as_f64(), k as f64));
        assert_eq!(shift(&a, HalfInt::ZERO), a);
        let b = shift(&shift(&a, h(1.5)), h(-1.5));
        assert_eq!(b, a);
        let s = shift(&a, h(1.0));
        assert_eq!(s.coeff(h(0.0), 1), a.coeff(h(1.0), 1));
    }

    #[test]
    fn smooth_constant_log_two() {
        let s = SmoothSymbol::new("log2", 1.0, |m1, m2, _, _| {
            if m1 + m2 == 0 { C::new(2f64.ln(), 0.0) } else { C::new(0.0, 0.0) }
        });
        let a = smooth_to_grid(&s, h(0.0), h(1.0), 2, 16).unwrap();
        assert!((a.coeff(h(0.5), 0) - C::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn exp_jet_matches_closed_form() {
        // g = x p  =>  F = e^{xp}, F_xp = (1 + xp) e^{xp}, F_xx = p^2 e^{xp}.
        let (x, p) = (0.3f64, 0.7f64);
        let mut g = vec![vec![C::new(0.0, 0.0); 4]; 4];
        g[0][0] = C::new(x * p, 0.0);
        g[1][0] = C::new(p, 0.0);
        g[0][1] = C::new(x, 0.0);
        g[1][1] = C::new(1.0, 0.0);
        let f = exp_jet(&g, 2, 2);
        let e = (x * p).exp();
        assert!((f[1][1].re - (1.0 + x * p) * e).abs() < 1e-14);
        assert!((f[2][0].re - p * p * e).abs() < 1e-14);
        assert!((f[2][2].re - (2.0 + 4.0 * x * p + x * x * p * p) * e).abs() < 1e-13);
    }
}

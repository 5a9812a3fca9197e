//! Left and right Wiener-Hopf star factorizations.
//!
//! `a = a_+^L * a_-^L = a_-^R * a_+^R`, with `+` factors lower triangular
//! and `-` factors upper triangular at the operator level, normalized by
//! `(a_-)_0 = 1`. Three routes: exact closed forms for tridiagonal
//! symbols, elimination without pivoting on finite sections, and the
//! semiclassical expansion in the inhomogeneity scale.

use crate::linalg::{lu_no_pivot, ul_no_pivot, DenseComplexMatrix};
use crate::moyal::{star_product, sublattice_sections, WindowSpec};
use crate::symbol::{ArrayEvaluator, HalfInt, ProjectionKind, SmoothSymbol, SymbolForm, SymbolGrid};
use crate::{fourier, Error, Real, Result, C};
use num_traits::{One, Zero};
use serde::Serialize;
use std::sync::Arc;

/// Relative pivot size below which elimination is abandoned.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Which factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// `a = a_+ * a_-`.
    Left,
    /// `a = a_- * a_+`.
    Right,
}

impl Side {
    /// `sigma_R = 1`, `sigma_L = -1`.
    pub fn sigma<T: Real>(self) -> T {
        match self {
            Side::Right => T::one(),
            Side::Left => -T::one(),
        }
    }
}

/// Minus and plus factors of one factorization.
#[derive(Debug, Clone)]
pub struct FactorPair<T: Real> {
    pub minus: SymbolGrid<T>,
    pub plus: SymbolGrid<T>,
    pub side: Side,
    pub method: &'static str,
    /// `max |product of factors - a|` on the common interior grid.
    pub residual: T,
    /// Smallest relative pivot (numeric route only).
    pub pivot_min: Option<T>,
    pub margin: usize,
}

impl<T: Real> FactorPair<T> {
    /// Product of the factors in the order of `side`.
    pub fn product(&self) -> Result<SymbolGrid<T>> {
        match self.side {
            Side::Left => star_product(&self.plus, &self.minus),
            Side::Right => star_product(&self.minus, &self.plus),
        }
    }

    /// Largest violation of the `+`/`-` structure and normalization.
    pub fn structure_defect(&self) -> T {
        let mut worst = T::zero();
        for x in self.minus.xs() {
            for k in 1..=self.minus.band() as i64 {
                worst = worst.max(self.minus.coeff(x, k).norm());
            }
            worst = worst.max((self.minus.coeff(x, 0) - C::one()).norm());
        }
        for x in self.plus.xs() {
            for k in 1..=self.plus.band() as i64 {
                worst = worst.max(self.plus.coeff(x, -k).norm());
            }
        }
        worst
    }

    fn with_residual(mut self, a: &SymbolGrid<T>) -> Result<Self> {
        let prod = self.product()?;
        self.residual = prod.max_diff_on(a, prod.x_min(), prod.x_max());
        Ok(self)
    }
}

/// Real-line coefficient function.
pub type LineFn<T> = Arc<dyn Fn(T) -> C<T> + Send + Sync>;

/// Coefficient functions of a tridiagonal symbol.
#[derive(Clone)]
pub struct TridiagonalSpec<T: Real> {
    pub f0: LineFn<T>,
    pub f1: LineFn<T>,
    pub fm1: LineFn<T>,
}

impl<T: Real> std::fmt::Debug for TridiagonalSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TridiagonalSpec")
    }
}

impl<T: Real> TridiagonalSpec<T> {
    pub fn new(
        f0: impl Fn(T) -> C<T> + Send + Sync + 'static,
        f1: impl Fn(T) -> C<T> + Send + Sync + 'static,
        fm1: impl Fn(T) -> C<T> + Send + Sync + 'static,
    ) -> Self {
        Self { f0: Arc::new(f0), f1: Arc::new(f1), fm1: Arc::new(fm1) }
    }

    /// x-independent coefficients.
    pub fn constant(f0: C<T>, f1: C<T>, fm1: C<T>) -> Self {
        Self::new(move |_| f0, move |_| f1, move |_| fm1)
    }

    /// `f0(x) - f_{-1}(x + 1/2) f_1(x + 1/2)`.
    fn gap(&self, x: T) -> C<T> {
        let h = x + T::lit(0.5);
        (self.f0)(x) - (self.fm1)(h) * (self.f1)(h)
    }

    /// Checks the winding conditions on the limits `x -> -inf, +inf`
    /// (approximated at `+-far`) and the gap on `[lo, hi]`.
    pub fn check(&self, lo: T, hi: T, far: T, tol: T) -> Result<()> {
        let mut x = lo - T::one();
        while x <= hi + T::one() {
            let g = self.gap(x).norm();
            if g < tol {
                return Err(Error::Input(format!("near-singular tridiagonal spec: gap {g:e} at x = {x}")));
            }
            x = x + T::lit(0.5);
        }
        let (m, p) = (-far, far);
        let lhs1 = ((self.fm1)(m) * (self.fm1)(p)).norm();
        let lhs2 = ((self.f1)(m) * (self.f1)(p)).norm();
        let rhs2 = ((self.f0)(m) * (self.f0)(p)).norm();
        if !(lhs1 < T::one()) || !(lhs2 < rhs2) {
            return Err(Error::Winding("tridiagonal limits violate the winding conditions".into()));
        }
        Ok(())
    }
}

/// The tridiagonal representative: band-1 symbol whose `L(a)` equals the
/// product of the closed-form factors.
pub fn tridiagonal_symbol<T: Real>(
    spec: &TridiagonalSpec<T>,
    x_min: HalfInt,
    x_max: HalfInt,
    tol: T,
) -> Result<SymbolGrid<T>> {
    let half = T::lit(0.5);
    let mut out = SymbolGrid::zeros(x_min, x_max, 1);
    for x in out.xs().collect::<Vec<_>>() {
        let xv: T = x.value();
        let (f0, f1, fm1) = (&spec.f0, &spec.f1, &spec.fm1);
        let d0 = f0(xv - T::one()) - fm1(xv - half) * f1(xv - half);
        let d1 = f0(xv - half) - fm1(xv) * f1(xv);
        if d0.norm() < tol || d1.norm() < tol {
            return Err(Error::Input(format!("near-singular tridiagonal spec at x = {x}")));
        }
        let c0 = (f0(xv - T::one()) * f0(xv)
            - fm1(xv - half) * f1(xv - half) * fm1(xv + half) * f1(xv + half))
            / d0;
        let cm1 = fm1(xv) * f0(xv - half) * (f0(xv + half) - fm1(xv + T::one()) * f1(xv + T::one())) / d1;
        out.set(x, -1, cm1);
        out.set(x, 0, c0);
        out.set(x, 1, f1(xv));
    }
    out.refit_decay();
    Ok(out)
}

/// Closed-form tridiagonal factors.
pub fn tridiagonal_factorize<T: Real>(
    spec: &TridiagonalSpec<T>,
    side: Side,
    x_min: HalfInt,
    x_max: HalfInt,
    tol: T,
) -> Result<FactorPair<T>> {
    let half = T::lit(0.5);
    let (f0, f1, fm1) = (spec.f0.clone(), spec.f1.clone(), spec.fm1.clone());
    let mut minus = SymbolGrid::zeros(x_min, x_max, 1);
    let mut plus = SymbolGrid::zeros(x_min, x_max, 1);
    for x in minus.xs().collect::<Vec<_>>() {
        let xv: T = x.value();
        match side {
            Side::Right => {
                let d = f0(xv - T::one()) - fm1(xv - half) * f1(xv - half);
                if d.norm() < tol {
                    return Err(Error::Input(format!("near-singular tridiagonal spec at x = {x}")));
                }
                minus.set(x, -1, fm1(xv));
                plus.set(x, 0, f0(xv - T::one()) * (f0(xv) - fm1(xv + half) * f1(xv + half)) / d);
                plus.set(x, 1, f1(xv));
            }
            Side::Left => {
                let d = f0(xv - half) - fm1(xv) * f1(xv);
                if d.norm() < tol {
                    return Err(Error::Input(format!("near-singular tridiagonal spec at x = {x}")));
                }
                plus.set(x, 0, f0(xv));
                plus.set(x, 1, f1(xv));
                minus.set(x, -1, fm1(xv) * (f0(xv + half) - fm1(xv + T::one()) * f1(xv + T::one())) / d);
            }
        }
        minus.set(x, 0, C::one());
    }
    minus.refit_decay();
    plus.refit_decay();
    let pair = FactorPair { minus, plus, side, method: "closed-form", residual: T::zero(), pivot_min: None, margin: 0 };
    let a = tridiagonal_symbol(spec, x_min, x_max, tol)?;
    pair.with_residual(&a)
}

/// Classical factors `(exp((log f)^-), exp((log f)^+))` of an x-independent
/// symbol, as coefficients ordered `k = -band..=band`.
pub fn classical_factors<T: Real>(a: &SymbolGrid<T>, band: usize) -> Result<(Vec<C<T>>, Vec<C<T>>)> {
    if !a.is_toeplitz(T::lit(1e-12)) {
        return Err(Error::Input("classical factors need an x-independent symbol".into()));
    }
    let np = (8 * band.max(a.band()) + 64).next_power_of_two();
    let samples = fourier::synthesize(a.row(a.x_min()), np);
    let logs = crate::asymptotics::log_samples(&samples)?;
    let factor = |kind| {
        let e: Vec<C<T>> = project_samples(&logs, kind).iter().map(|z| z.exp()).collect();
        fourier::coefficients(&e, band)
    };
    Ok((factor(ProjectionKind::Minus), factor(ProjectionKind::Plus)))
}

/// Factorization by elimination without pivoting on both sublattice
/// sections of `L(a)`: LU (unit upper) for `Left`, UL (unit upper) for
/// `Right`. The factors inherit the band of `a`; `margin` grid units are
/// dropped at each end.
pub fn numeric_factorize<T: Real>(a: &SymbolGrid<T>, side: Side, win: &WindowSpec<T>) -> Result<FactorPair<T>> {
    let w = HalfInt::int(win.margin as i64);
    let lo = a.x_min() + w;
    let hi = a.x_max() - w;
    if lo > hi {
        return Err(Error::Range("grid shorter than twice the margin".into()));
    }
    let band = a.band();
    let mut minus = SymbolGrid::zeros(lo, hi, band);
    let mut plus = SymbolGrid::zeros(lo, hi, band);
    let mut pivot_min = T::infinity();
    let tol = T::lit(PIVOT_REL_TOL);
    for (first, section) in sublattice_sections(a)? {
        let tri = match side {
            Side::Left => lu_no_pivot(&section, true, tol)?,
            Side::Right => ul_no_pivot(&section, tol)?,
        };
        pivot_min = pivot_min.min(tri.pivot_min_rel);
        fill_from_triangle(&mut plus, &tri.lower, first, true);
        fill_from_triangle(&mut minus, &tri.upper, first, false);
    }
    for x in minus.xs().collect::<Vec<_>>() {
        minus.set(x, 0, C::one());
    }
    minus.refit_decay();
    plus.refit_decay();
    let pair = FactorPair {
        minus,
        plus,
        side,
        method: "numeric",
        residual: T::zero(),
        pivot_min: Some(pivot_min),
        margin: win.margin,
    };
    pair.with_residual(a)
}

/// Copies the entries of a triangular section factor with `j - k = m`
/// (`m >= 0` for lower) into the symbol on matching sublattice points.
fn fill_from_triangle<T: Real>(out: &mut SymbolGrid<T>, m: &DenseComplexMatrix<T>, first: HalfInt, lower: bool) {
    let n = m.n() as i64;
    let band = out.band() as i64;
    for x in out.xs().collect::<Vec<_>>() {
        for d in 0..=band {
            let mm = if lower { d } else { -d };
            let j2 = x.0 + mm;
            if (j2 - first.0).rem_euclid(2) != 0 {
                continue;
            }
            let i = (j2 - first.0) / 2;
            let k = (x.0 - mm - first.0) / 2;
            if i < 0 || k < 0 || i >= n || k >= n {
                continue;
            }
            out.set(x, mm, m[(i as usize, k as usize)]);
        }
    }
}

/// y-derivative jets of functions of `p` sampled on `N_p` points at a fixed
/// lattice coordinate: `d[j]` holds `d_x^j f`.
#[derive(Debug, Clone)]
pub(crate) struct Jet<T: Real> {
    pub d: Vec<Vec<C<T>>>,
}

impl<T: Real> Jet<T> {
    pub fn order(&self) -> usize {
        self.d.len() - 1
    }

    fn np(&self) -> usize {
        self.d[0].len()
    }

    pub fn sample(s: &SmoothSymbol<T>, x: T, np: usize, order: usize) -> Self {
        let step = T::TAU() / T::int(np as i64);
        let d = (0..=order)
            .map(|j| (0..np).map(|m| s.dx(j, 0, x, step * T::int(m as i64))).collect())
            .collect();
        Self { d }
    }

    fn map(&self, f: impl Fn(&[C<T>]) -> Vec<C<T>>) -> Self {
        Self { d: self.d.iter().map(|v| f(v)).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.order().min(o.order());
        Self { d: (0..=n).map(|j| self.d[j].iter().zip(&o.d[j]).map(|(a, b)| *a + *b).collect()).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-C::<T>::one()))
    }

    pub fn scale(&self, s: C<T>) -> Self {
        self.map(|v| v.iter().map(|z| *z * s).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.order().min(o.order());
        let np = self.np();
        let mut d = vec![vec![C::zero(); np]; n + 1];
        for (j, dj) in d.iter_mut().enumerate() {
            let mut c = T::one();
            for i in 0..=j {
                for (m, slot) in dj.iter_mut().enumerate() {
                    *slot = *slot + self.d[i][m] * o.d[j - i][m] * c;
                }
                c = c * T::int((j - i) as i64) / T::int((i + 1) as i64);
            }
        }
        Self { d }
    }

    /// `d_p` by spectral differentiation.
    pub fn dp(&self) -> Self {
        self.map(|v| {
            let mut spec = fourier::spectrum(v);
            let n = spec.len();
            for (i, z) in spec.iter_mut().enumerate() {
                let k = fourier::frequency(i, n);
                *z = if n % 2 == 0 && i == n / 2 { C::zero() } else { *z * C::new(T::zero(), T::int(k)) };
            }
            fourier::from_spectrum(&spec)
        })
    }

    /// `d_x` (drops the top order).
    pub fn dy(&self) -> Self {
        Self { d: self.d[1..].to_vec() }
    }

    pub fn project(&self, kind: ProjectionKind) -> Self {
        self.map(|v| project_samples(v, kind))
    }

    /// Poisson bracket `{f, g} = d_x f d_p g - d_x g d_p f`.
    pub fn bracket(&self, o: &Self) -> Self {
        self.dy().mul(&o.dp()).sub(&o.dy().mul(&self.dp()))
    }

    #[cfg(test)]
    pub fn exp(&self) -> Self {
        let e0: Vec<C<T>> = self.d[0].iter().map(|z| z.exp()).collect();
        let mut out = Self { d: vec![e0] };
        for j in 1..=self.order() {
            // d^j e^f = sum_{i<j} C(j-1, i) f^{(i+1)} d^{j-1-i} e^f
            let np = self.np();
            let mut v = vec![C::zero(); np];
            let mut c = T::one();
            for i in 0..j {
                for (m, slot) in v.iter_mut().enumerate() {
                    *slot = *slot + self.d[i + 1][m] * out.d[j - 1 - i][m] * c;
                }
                c = c * T::int((j - 1 - i) as i64) / T::int((i + 1) as i64);
            }
            out.d.push(v);
        }
        out
    }
}

/// Fourier projection of a sampled periodic function.
pub(crate) fn project_samples<T: Real>(v: &[C<T>], kind: ProjectionKind) -> Vec<C<T>> {
    let mut spec = fourier::spectrum(v);
    let n = spec.len();
    for (i, z) in spec.iter_mut().enumerate() {
        let k = fourier::frequency(i, n);
        let neg = k < 0;
        match kind {
            ProjectionKind::Plus if neg => *z = C::zero(),
            ProjectionKind::Minus if !neg => *z = C::zero(),
            ProjectionKind::Tilde if neg => *z = -*z,
            _ => {}
        }
    }
    fourier::from_spectrum(&spec)
}

fn half_i<T: Real>(sigma: T) -> C<T> {
    C::new(T::zero(), sigma * T::lit(0.5))
}

/// `psi_1` and `psi_2` jets from `g` jets (lattice coordinates).
pub(crate) fn psi_terms<T: Real>(g: &Jet<T>, side: Side) -> (Jet<T>, Jet<T>) {
    let gp = g.project(ProjectionKind::Plus);
    let gm = g.project(ProjectionKind::Minus);
    let b = gm.bracket(&gp);
    let psi1 = b.scale(half_i(side.sigma()));
    let bm = b.project(ProjectionKind::Minus);
    let bp = b.project(ProjectionKind::Plus);
    let q = T::lit(0.25);
    let h = T::lit(0.5);
    let (gm_y, gm_p, gp_y, gp_p) = (gm.dy(), gm.dp(), gp.dy(), gp.dp());
    let mid = gm_p
        .mul(&gm.bracket(&gp_y))
        .sub(&gm_y.mul(&gm.bracket(&gp_p)))
        .add(&gp_y.mul(&gm_p.bracket(&gp)))
        .sub(&gp_p.mul(&gm_y.bracket(&gp)));
    let tail = gm_p.bracket(&gp_y).sub(&gm_y.bracket(&gp_p));
    let psi2 = bm
        .mul(&bp)
        .scale(C::new(h, T::zero()))
        .sub(&b.mul(&b).scale(C::new(q, T::zero())))
        .add(&gp.bracket(&bm).scale(C::new(h, T::zero())))
        .sub(&gm.bracket(&bp).scale(C::new(h, T::zero())))
        .sub(&mid.scale(C::new(q, T::zero())))
        .sub(&tail.scale(C::new(q, T::zero())));
    (psi1, psi2)
}

/// Samples of the semiclassical factors at lattice coordinate `x`.
fn psi_factor_samples<T: Real>(s: &SmoothSymbol<T>, side: Side, order: usize, x: T, np: usize) -> (Vec<C<T>>, Vec<C<T>>) {
    let g = Jet::sample(s, x, np, 3);
    let gp = project_samples(&g.d[0], ProjectionKind::Plus);
    let gm = project_samples(&g.d[0], ProjectionKind::Minus);
    let mut corr_p = vec![C::<T>::one(); np];
    let mut corr_m = vec![C::<T>::one(); np];
    if order >= 1 {
        let (psi1, psi2) = psi_terms(&g, side);
        let mut total = psi1.d[0].clone();
        if order >= 2 {
            for (t, v) in total.iter_mut().zip(&psi2.d[0]) {
                *t = *t + *v * T::lit(0.5);
            }
        }
        let tp = project_samples(&total, ProjectionKind::Plus);
        let tm = project_samples(&total, ProjectionKind::Minus);
        for m in 0..np {
            corr_p[m] = corr_p[m] + tp[m];
            corr_m[m] = corr_m[m] + tm[m];
        }
    }
    let minus = (0..np).map(|m| gm[m].exp() * corr_m[m]).collect();
    let plus = (0..np).map(|m| gp[m].exp() * corr_p[m]).collect();
    (minus, plus)
}

/// Semiclassical factors `e^{g^+-} sum_{j<=m} (psi_j)^+- / j!` as plain-form
/// symbols in lattice coordinates (`N_p` samples per `x`).
pub fn psi_expansion<T: Real>(
    s: &SmoothSymbol<T>,
    side: Side,
    order: usize,
    np: usize,
) -> Result<(SmoothSymbol<T>, SmoothSymbol<T>)> {
    if order > 2 {
        return Err(Error::Input(format!("psi order {order} not implemented (max 2)")));
    }
    if s.form != SymbolForm::Exp {
        return Err(Error::Input("psi_expansion needs an exponential-form symbol".into()));
    }
    let mk = |which: usize| {
        let label = s.label.clone();
        let s = s.clone();
        let ev = Arc::new(ArrayEvaluator::new(move |x| {
            let (m, p) = psi_factor_samples(&s, side, order, x, np);
            if which == 0 { m } else { p }
        }));
        let name = if which == 0 { "minus" } else { "plus" };
        SmoothSymbol::plain_from_values(format!("{label}[{name}, {side:?}, m={order}]"), move |x, p| ev.eval(x, p))
    };
    Ok((mk(0), mk(1)))
}

/// Semiclassical factors sampled directly onto grids.
pub fn psi_factor_grids<T: Real>(
    s: &SmoothSymbol<T>,
    side: Side,
    order: usize,
    lo: HalfInt,
    hi: HalfInt,
    band: usize,
    np: usize,
) -> Result<FactorPair<T>> {
    if order > 2 {
        return Err(Error::Input(format!("psi order {order} not implemented (max 2)")));
    }
    if np < 4 * band + 4 {
        return Err(Error::Input(format!("N_p = {np} below 4K + 4")));
    }
    let mut minus = SymbolGrid::zeros(lo, hi, band);
    let mut plus = SymbolGrid::zeros(lo, hi, band);
    for x in minus.xs().collect::<Vec<_>>() {
        let (m, p) = psi_factor_samples(s, side, order, x.value(), np);
        let cm = fourier::coefficients(&m, band);
        let cp = fourier::coefficients(&p, band);
        for k in -(band as i64)..=band as i64 {
            let i = (k + band as i64) as usize;
            if k <= 0 {
                minus.set(x, k, cm[i]);
            }
            if k >= 0 {
                plus.set(x, k, cp[i]);
            }
        }
        minus.set(x, 0, C::one());
    }
    minus.refit_decay();
    plus.refit_decay();
    Ok(FactorPair { minus, plus, side, method: "semiclassical", residual: T::zero(), pivot_min: None, margin: 0 })
}

/// `log f_+ + log f_-` through order `order <= 2` in the inhomogeneity.
pub fn log_factor_sum<T: Real>(s: &SmoothSymbol<T>, side: Side, order: usize, np: usize) -> Result<SmoothSymbol<T>> {
    if order > 2 {
        return Err(Error::Input(format!("order {order} not implemented (max 2)")));
    }
    let s2 = s.clone();
    let ev = Arc::new(ArrayEvaluator::new(move |x| log_factor_sum_samples(&s2, side, order, x, np)));
    Ok(SmoothSymbol::plain_from_values(format!("logsum[{}]", s.label), move |x, p| ev.eval(x, p)))
}

pub(crate) fn log_factor_sum_samples<T: Real>(s: &SmoothSymbol<T>, side: Side, order: usize, x: T, np: usize) -> Vec<C<T>> {
    let g = Jet::sample(s, x, np, 3);
    let mut out = g.d[0].clone();
    if order == 0 {
        return out;
    }
    let gp = g.project(ProjectionKind::Plus);
    let gm = g.project(ProjectionKind::Minus);
    let b = gm.bracket(&gp);
    let first = b.scale(half_i(side.sigma()));
    for (o, v) in out.iter_mut().zip(&first.d[0]) {
        *o = *o + *v;
    }
    if order >= 2 {
        let two = C::new(T::lit(2.0), T::zero());
        let (gm_y, gm_p, gp_y, gp_p) = (gm.dy(), gm.dp(), gp.dy(), gp.dp());
        let e = gp
            .bracket(&b.project(ProjectionKind::Minus))
            .scale(two)
            .sub(&gm.bracket(&b.project(ProjectionKind::Plus)).scale(two))
            .sub(&gm_p.mul(&gm.bracket(&gp_y)))
            .add(&gm_y.mul(&gm.bracket(&gp_p)))
            .sub(&gp_y.mul(&gm_p.bracket(&gp)))
            .add(&gp_p.mul(&gm_y.bracket(&gp)))
            .sub(&gm_p.bracket(&gp_y))
            .add(&gm_y.bracket(&gp_p));
        for (o, v) in out.iter_mut().zip(&e.d[0]) {
            *o = *o + *v / T::lit(8.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moyal::star_product;
    use crate::symbol::{sample_symbol, smooth_to_grid};

    fn h(v: f64) -> HalfInt {
        HalfInt::from_f64(v).unwrap()
    }

    fn c(v: f64) -> C<f64> {
        C::new(v, 0.0)
    }

    fn constant_spec() -> TridiagonalSpec<f64> {
        TridiagonalSpec::constant(c(2.0), c(1.0), c(0.25))
    }

    #[test]
    fn constant_tridiagonal_symbol() {
        let a = tridiagonal_symbol(&constant_spec(), h(-3.0), h(3.0), 1e-12).unwrap();
        for x in a.xs() {
            assert!((a.coeff(x, 0) - c(2.25)).norm() < 1e-15);
            assert!((a.coeff(x, 1) - c(1.0)).norm() < 1e-15);
            assert!((a.coeff(x, -1) - c(0.5)).norm() < 1e-15);
        }
    }

    #[test]
    fn diagonal_spec_decouples() {
        let spec = TridiagonalSpec::new(|x: f64| c(2.0 + x.sin()), |_| c(0.0), |_| c(0.0));
        let a = tridiagonal_symbol(&spec, h(-3.0), h(3.0), 1e-12).unwrap();
        for x in a.xs() {
            assert!((a.coeff(x, 0) - c(2.0 + x.as_f64().sin())).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_closed_form_factors() {
        let r = tridiagonal_factorize(&constant_spec(), Side::Right, h(-3.0), h(3.0), 1e-12).unwrap();
        assert!((r.minus.coeff(h(0.0), -1) - c(0.25)).norm() < 1e-15);
        assert!((r.plus.coeff(h(0.0), 0) - c(2.0)).norm() < 1e-15);
        assert!((r.plus.coeff(h(0.0), 1) - c(1.0)).norm() < 1e-15);
        let l = tridiagonal_factorize(&constant_spec(), Side::Left, h(-3.0), h(3.0), 1e-12).unwrap();
        assert!((l.plus.coeff(h(0.5), 0) - c(2.0)).norm() < 1e-15);
        assert!((l.minus.coeff(h(0.5), -1) - c(0.25)).norm() < 1e-15);
        assert!(r.residual < 1e-14 && l.residual < 1e-14);
    }

    #[test]
    fn numeric_matches_closed_form_for_inhomogeneous_spec() {
        let spec = TridiagonalSpec::new(|x: f64| c(2.0 + 0.5 * (0.3 * x).sin()), |x: f64| c(0.7 + 0.1 * x.cos()), |_| c(0.3));
        let a = tridiagonal_symbol(&spec, h(-30.0), h(30.0), 1e-12).unwrap();
        let win = WindowSpec::new(12, 1e-14);
        for side in [Side::Left, Side::Right] {
            let num = numeric_factorize(&a, side, &win).unwrap();
            let exact = tridiagonal_factorize(&spec, side, h(-30.0), h(30.0), 1e-12).unwrap();
            let (lo, hi) = (num.plus.x_min(), num.plus.x_max());
            assert!(num.plus.max_diff_on(&exact.plus, lo, hi) < 1e-10, "{side:?}");
            assert!(num.minus.max_diff_on(&exact.minus, lo, hi) < 1e-10, "{side:?}");
            assert!(num.structure_defect() < 1e-15);
        }
    }

    #[test]
    fn identity_factors_trivially() {
        let a = SymbolGrid::<f64>::identity(h(-10.0), h(10.0));
        let f = numeric_factorize(&a, Side::Right, &WindowSpec::new(2, 1e-14)).unwrap();
        assert_eq!(f.plus.coeff(h(0.0), 0), c(1.0));
        assert_eq!(f.minus.coeff(h(0.0), 0), c(1.0));
    }

    #[test]
    fn nonzero_winding_is_detected() {
        // a = e^{ip}: L(a) is a pure shift and the first pivot vanishes.
        let a = sample_symbol(|_, p: f64| C::from_polar(1.0, p), h(-10.0), h(10.0), 1, 8).unwrap();
        assert!(matches!(numeric_factorize(&a, Side::Left, &WindowSpec::new(2, 1e-14)), Err(Error::Winding(_))));
    }

    #[test]
    fn psi_zero_order_is_frozen_factorization() {
        let s = SmoothSymbol::new("t cos p", 1.0, |m1, m2, _, p: f64| {
            if m1 > 0 {
                return c(0.0);
            }
            c(0.5 * [p.cos(), -p.sin(), -p.cos(), p.sin(), p.cos()][m2])
        });
        for order in 0..=2 {
            let f = psi_factor_grids(&s, Side::Right, order, h(0.0), h(2.0), 12, 64).unwrap();
            // e^{(log f)^+} = e^{0.25 z}
            assert!((f.plus.coeff(h(1.0), 2) - c(0.25f64.powi(2) / 2.0)).norm() < 1e-14);
            assert!((f.minus.coeff(h(1.0), -1) - c(0.25)).norm() < 1e-14);
        }
        let sum = log_factor_sum(&s, Side::Left, 2, 32).unwrap();
        assert!((sum.value(3.0, 0.4) - c(0.5 * 0.4f64.cos())).norm() < 1e-14);
    }

    #[test]
    fn product_of_closed_forms_is_tridiagonal() {
        let spec = TridiagonalSpec::new(|x: f64| c(1.0 - 2.0 / (3.0 * (0.5 * x).cosh())), |_| c(0.5), |_| c(0.5));
        let a = tridiagonal_symbol(&spec, h(-20.0), h(20.0), 1e-12).unwrap();
        let r = tridiagonal_factorize(&spec, Side::Right, h(-20.0), h(20.0), 1e-12).unwrap();
        let prod = star_product(&r.minus, &r.plus).unwrap();
        assert!(prod.max_diff_on(&a, prod.x_min(), prod.x_max()) < 1e-14);
    }

    fn example3(nu: f64) -> SmoothSymbol<f64> {
        SmoothSymbol::new("ex3", nu, |m1, m2, y: f64, p: f64| {
            let ds = |k: usize, f0: f64, f1: f64| [f0, f1, -f0, -f1][k % 4];
            let h = if m2 == 0 { ds(m1, y.sin(), y.cos()) } else { 0.0 };
            let j = ds(m1, y.cos(), -y.sin());
            c(h - j * ds(m2, p.cos(), -p.sin()))
        })
    }

    /// `P^k (A (x) B)` at coincidence, `P = d_p (x) d_y - d_y (x) d_p`.
    fn tensor_power(a: &Jet<f64>, b: &Jet<f64>, k: usize) -> Vec<C<f64>> {
        let nth = |j: &Jet<f64>, ny: usize, np: usize| {
            let mut out = j.clone();
            for _ in 0..np {
                out = out.dp();
            }
            out.d[ny].clone()
        };
        let mut sum = vec![c(0.0); a.d[0].len()];
        let mut binom = 1.0;
        for r in 0..=k {
            let sign = if (k - r).is_multiple_of(2) { 1.0 } else { -1.0 };
            let left = nth(a, k - r, r);
            let right = nth(b, r, k - r);
            for (s, (l, q)) in sum.iter_mut().zip(left.iter().zip(&right)) {
                *s += *l * *q * (binom * sign);
            }
            binom = binom * (k - r) as f64 / (r + 1) as f64;
        }
        sum
    }

    #[test]
    fn psi_matches_recursion_oracle() {
        let s = example3(0.7);
        let np = 64;
        for side in [Side::Left, Side::Right] {
            let g = Jet::sample(&s, 0.9, np, 3);
            let (psi1, psi2) = psi_terms(&g, side);
            let gm = g.project(ProjectionKind::Minus);
            let gp = g.project(ProjectionKind::Plus);
            let (em, ep) = (gm.exp(), gp.exp());
            let w = half_i::<f64>(side.sigma());
            let undo: Vec<C<f64>> = (0..np).map(|m| (-gm.d[0][m] - gp.d[0][m]).exp()).collect();
            // First order from the recursion.
            let r1 = tensor_power(&em, &ep, 1);
            for m in 0..np {
                let v = -w * r1[m] * undo[m];
                assert!((v - psi1.d[0][m]).norm() < 1e-11, "psi1 {side:?}");
            }
            let p1m = psi1.project(ProjectionKind::Minus);
            let p1p = psi1.project(ProjectionKind::Plus);
            let t00 = tensor_power(&em, &ep, 2);
            let t10 = tensor_power(&em.mul(&p1m), &ep, 1);
            let t01 = tensor_power(&em, &ep.mul(&p1p), 1);
            for m in 0..np {
                let v = -(w * w * t00[m] * undo[m]
                    + w * 2.0 * t10[m] * undo[m]
                    + w * 2.0 * t01[m] * undo[m]
                    + p1m.d[0][m] * p1p.d[0][m] * 2.0);
                assert!((v - psi2.d[0][m]).norm() < 1e-10, "psi2 {side:?}: {v} vs {}", psi2.d[0][m]);
            }
        }
    }

    fn psi_residual(nu: f64, order: usize, side: Side) -> f64 {
        let s = example3(nu);
        let (lo, hi) = (h(0.0), h(2.0 / nu));
        let band = 14;
        let f = psi_factor_grids(&s, side, order, lo, hi, band, 64).unwrap();
        let a = smooth_to_grid(&s, lo, hi, 2 * band, 128).unwrap();
        let prod = f.product().unwrap();
        prod.max_diff_on(&a, prod.x_min(), prod.x_max())
    }

    #[test]
    fn psi_reconstruction_scales_with_order() {
        for side in [Side::Left, Side::Right] {
            for order in 0..=2 {
                let r1 = psi_residual(0.1, order, side);
                let r2 = psi_residual(0.05, order, side);
                let expected = 2f64.powi(order as i32 + 1);
                let ratio = r1 / r2;
                assert!(ratio > 0.7 * expected && ratio < 1.5 * expected, "{side:?} m={order}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn log_factor_sum_sign_and_reconstruction() {
        let s = example3(0.1);
        let l = log_factor_sum(&s, Side::Left, 1, 64).unwrap();
        let r = log_factor_sum(&s, Side::Right, 1, 64).unwrap();
        let (x, p) = (7.0, 0.3);
        let g = s.dx(0, 0, x, p);
        assert!(((l.value(x, p) - g) + (r.value(x, p) - g)).norm() < 1e-12);
        assert!((l.value(x, p) - g).norm() > 1e-3);
        // exp of the order-2 sum is the product of the order-2 factors up to O(nu^3).
        let (fm, fp) = psi_expansion(&s, Side::Right, 2, 64).unwrap();
        let sum2 = log_factor_sum(&s, Side::Right, 2, 64).unwrap();
        let lhs = sum2.value(x, p).exp();
        let rhs = fm.value(x, p) * fp.value(x, p);
        assert!((lhs - rhs).norm() < 1e-3, "{}", (lhs - rhs).norm());
    }
}

//! The star algebra of symbols.
//!
//! The exact product is the banded convolution
//! `((a*b)_x)_m = sum_n (a_{x+(m-n)/2})_n (b_{x-n/2})_{m-n}`, which realizes
//! `L(a*b) = L(a) L(b)`. Star inverse, logarithm and exponential are
//! evaluated on finite sections of `L(a)` (one per sublattice `Z` and
//! `Z + 1/2`) and read back away from the section edges.

use crate::linalg::{self, DenseComplexMatrix, MatrixKind};
use crate::symbol::{HalfInt, SmoothSymbol, SymbolForm, SymbolGrid};
use crate::{Error, Real, Result, C};
use num_traits::{One, Zero};

/// Reciprocal condition number below which inversion is refused.
pub const RCOND_MIN: f64 = 1e-12;

/// Edge margin (in units of `x`) discarded after section-level computations,
/// and the tolerance used for band trimming and branch checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec<T: Real> {
    pub margin: usize,
    pub tol: T,
}

impl<T: Real> WindowSpec<T> {
    pub fn new(margin: usize, tol: T) -> Self {
        assert!(margin >= 1, "margin must be positive");
        Self { margin, tol }
    }

    /// Margin such that edge contamination `~ rho^(2w)` stays below `tol`.
    pub fn for_decay(rho: T, tol: T) -> Self {
        let rho = rho.min(T::lit(0.95)).max(T::lit(1e-3));
        let w = (tol.ln() / (T::lit(2.0) * rho.ln())).ceil().to_usize().unwrap_or(1);
        Self::new(w.max(1) + 2, tol)
    }
}

/// Truncation order of the BCH correction series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BchOrder(u8);

impl BchOrder {
    pub fn new(order: u8) -> Result<Self> {
        if order > 2 {
            return Err(Error::Input(format!("BCH order {order} not implemented (max 2)")));
        }
        Ok(Self(order))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

/// Exact star product on the largest grid where all couplings are known.
pub fn star_product<T: Real>(a: &SymbolGrid<T>, b: &SymbolGrid<T>) -> Result<SymbolGrid<T>> {
    let ka = a.band() as i64;
    let kb = b.band() as i64;
    let lo = (a.x_min() + HalfInt(kb)).max(b.x_min() + HalfInt(ka));
    let hi = (a.x_max() - HalfInt(kb)).min(b.x_max() - HalfInt(ka));
    if lo > hi {
        return Err(Error::Range(format!(
            "grids too short for coupling reach {} / {}",
            HalfInt(kb),
            HalfInt(ka)
        )));
    }
    let band = (ka + kb) as usize;
    let mut out = SymbolGrid::zeros(lo, hi, band);
    for t in lo.0..=hi.0 {
        let x = HalfInt(t);
        for m in -(band as i64)..=band as i64 {
            let mut s = C::zero();
            let n_lo = (-ka).max(m - kb);
            let n_hi = ka.min(m + kb);
            for n in n_lo..=n_hi {
                s = s + a.coeff(x + HalfInt(m - n), n) * b.coeff(x - HalfInt(n), m - n);
            }
            out.set(x, m, s);
        }
    }
    let mut out = out.trimmed(T::zero(), 0);
    out.refit_decay();
    Ok(out)
}

/// `((a_x)_k)` for all `x`, `k` as a bracket `-i (a*b - b*a)`.
pub fn moyal_bracket<T: Real>(a: &SymbolGrid<T>, b: &SymbolGrid<T>) -> Result<SymbolGrid<T>> {
    let ab = star_product(a, b)?;
    if a.is_toeplitz(T::zero()) && b.is_toeplitz(T::zero()) {
        // Laurent symbols commute exactly.
        return Ok(SymbolGrid::zeros(ab.x_min(), ab.x_max(), 0));
    }
    let ba = star_product(b, a)?;
    let mut out = ab.sub(&ba)?.scale(C::new(T::zero(), -T::one()));
    out.refit_decay();
    Ok(out)
}

/// `Phi(c, d) = d + (i/3){c,d} - (1/12){{c,d},d} + ...` truncated at `order`
/// nested brackets.
pub fn phi_bch<T: Real>(c: &SymbolGrid<T>, d: &SymbolGrid<T>, order: BchOrder) -> Result<SymbolGrid<T>> {
    if order.get() == 0 {
        return Ok(d.clone());
    }
    let cd = moyal_bracket(c, d)?;
    let mut out = d.add(&cd.scale(C::new(T::zero(), T::one() / T::lit(3.0))))?;
    if order.get() >= 2 {
        let cdd = moyal_bracket(&cd, d)?;
        out = out.add(&cdd.scale(C::new(-T::one() / T::lit(12.0), T::zero())))?;
    }
    Ok(out)
}

/// Finite section of `L(a)` on lattice sites `j` with `2j = first + 2i`,
/// `i < size`, i.e. `M_{ik} = (a_{(j_i+j_k)/2})_{j_i-j_k}`.
pub fn laurent_section<T: Real>(a: &SymbolGrid<T>, first: HalfInt, size: usize) -> Result<DenseComplexMatrix<T>> {
    let last = first + HalfInt(2 * (size as i64 - 1));
    if size > 0 && (!a.contains(first) || !a.contains(last)) {
        return Err(Error::Range(format!(
            "section [{first}, {last}] outside grid [{}, {}]",
            a.x_min(),
            a.x_max()
        )));
    }
    let band = a.band() as i64;
    let mut m = DenseComplexMatrix::zeros(size, size).with_kind(MatrixKind::Section);
    for i in 0..size {
        for k in 0..size {
            let diff = i as i64 - k as i64;
            if diff.abs() > band {
                continue;
            }
            let x = HalfInt(first.0 + (i + k) as i64);
            m[(i, k)] = a.coeff(x, diff);
        }
    }
    Ok(m)
}

/// The two sublattice sections covering the grid of `a`: lattice sites
/// `j in [x_min, x_max]` of each parity. Returns `(first_site, matrix)`.
pub fn sublattice_sections<T: Real>(a: &SymbolGrid<T>) -> Result<Vec<(HalfInt, DenseComplexMatrix<T>)>> {
    let mut out = Vec::with_capacity(2);
    for parity in 0..2i64 {
        let mut first = a.x_min();
        if first.0.rem_euclid(2) != parity {
            first = first + HalfInt(1);
        }
        if first > a.x_max() {
            continue;
        }
        let size = ((a.x_max().0 - first.0) / 2 + 1) as usize;
        out.push((first, laurent_section(a, first, size)?));
    }
    Ok(out)
}

/// Reads a symbol back from section-level results: `(b_x)_m = F[j, k]` with
/// `j = x + m/2`, `k = x - m/2`. Output grid `[lo, hi]`, band `band`.
fn read_back<T: Real>(
    sections: &[(HalfInt, DenseComplexMatrix<T>)],
    lo: HalfInt,
    hi: HalfInt,
    band: usize,
) -> SymbolGrid<T> {
    let mut out = SymbolGrid::zeros(lo, hi, band);
    for t in lo.0..=hi.0 {
        for m in -(band as i64)..=band as i64 {
            let j2 = t + m;
            let k2 = t - m;
            let Some((first, f)) = sections.iter().find(|(s, _)| s.0.rem_euclid(2) == j2.rem_euclid(2)) else {
                continue;
            };
            let i = (j2 - first.0) / 2;
            let k = (k2 - first.0) / 2;
            let n = f.n() as i64;
            if i < 0 || k < 0 || i >= n || k >= n {
                continue;
            }
            out.set(HalfInt(t), m, f[(i as usize, k as usize)]);
        }
    }
    out
}

/// Applies a matrix function to both sublattice sections and reads the
/// symbol back on the grid shrunk by `margin`, with band trimmed to `tol`
/// and at most `2 * margin`.
pub fn functional_calculus<T: Real>(
    a: &SymbolGrid<T>,
    win: &WindowSpec<T>,
    f: impl Fn(&DenseComplexMatrix<T>) -> Result<DenseComplexMatrix<T>>,
) -> Result<SymbolGrid<T>> {
    let w = HalfInt::int(win.margin as i64);
    let lo = a.x_min() + w;
    let hi = a.x_max() - w;
    if lo > hi {
        return Err(Error::Range(format!(
            "grid [{}, {}] shorter than twice the margin {}",
            a.x_min(),
            a.x_max(),
            win.margin
        )));
    }
    let sections = sublattice_sections(a)?;
    let mapped = sections
        .iter()
        .map(|(s, m)| f(m).map(|fm| (*s, fm)))
        .collect::<Result<Vec<_>>>()?;
    let raw = read_back(&mapped, lo, hi, 2 * win.margin);
    let mut out = raw.trimmed(win.tol, 0);
    out.refit_decay();
    Ok(out)
}

/// Star inverse with the residual `||a*b - 1||_max` recorded in `diagnostics`.
pub fn star_inverse<T: Real>(a: &SymbolGrid<T>, win: &WindowSpec<T>) -> Result<SymbolGrid<T>> {
    let rcond_min = T::lit(RCOND_MIN);
    let mut b = functional_calculus(a, win, |m| {
        let (inv, rcond) = m.inverse()?;
        if !(rcond >= rcond_min) {
            return Err(Error::Singular(format!("reciprocal condition {rcond:e} below {rcond_min:e}")));
        }
        Ok(inv)
    })?;
    if let Ok(prod) = star_product(a, &b) {
        let one = SymbolGrid::identity(prod.x_min(), prod.x_max());
        b.warnings.push(format!("residual {:e}", prod.max_diff(&one).to_f64_lossy()));
    }
    Ok(b)
}

/// Principal star logarithm via the Schur-based matrix logarithm.
pub fn star_log<T: Real>(a: &SymbolGrid<T>, win: &WindowSpec<T>) -> Result<SymbolGrid<T>> {
    functional_calculus(a, win, |m| linalg::logm(m, win.tol))
}

/// Star exponential via the matrix exponential.
pub fn star_exp<T: Real>(a: &SymbolGrid<T>, win: &WindowSpec<T>) -> Result<SymbolGrid<T>> {
    functional_calculus(a, win, linalg::expm)
}

fn binom<T: Real>(n: usize, k: usize) -> T {
    let mut r = T::one();
    for i in 0..k {
        r = r * T::int((n - i) as i64) / T::int((i + 1) as i64);
    }
    r
}

fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, i| acc * T::int(i as i64))
}

/// Truncated Groenewold expansion `sum_{j<k} (1/j!) ((i/2)(d_p1 d_x2 - d_x1 d_p2))^j F G`
/// at coincident arguments, in lattice coordinates. Returns a plain-form
/// symbol evaluated in `x` directly.
pub fn semiclassical_product<T: Real>(f: &SmoothSymbol<T>, g: &SmoothSymbol<T>, k: usize) -> SmoothSymbol<T> {
    let (f, g) = (f.clone(), g.clone());
    let label = format!("({})*({})[k={k}]", f.label, g.label);
    SmoothSymbol::plain_from_values(label, move |x, p| {
        let order = k.saturating_sub(1);
        let jf = f.jet(order, order, x, p);
        let jg = g.jet(order, order, x, p);
        let half_i = C::new(T::zero(), T::lit(0.5));
        let mut total = C::zero();
        let mut pref = C::<T>::one();
        for j in 0..k {
            let mut s = C::<T>::zero();
            for r in 0..=j {
                let sign = if (j - r) % 2 == 0 { T::one() } else { -T::one() };
                s = s + jf[j - r][r] * jg[r][j - r] * (binom::<T>(j, r) * sign);
            }
            total = total + s * pref / factorial::<T>(j);
            pref = pref * half_i;
        }
        total
    })
}

/// Derivatives of `g = log a` in lattice coordinates up to order 2.
struct LogJet<T: Real> {
    g: C<T>,
    g1: C<T>,
    g2: C<T>,
    g11: C<T>,
    g12: C<T>,
    g22: C<T>,
}

fn log_jet<T: Real>(s: &SmoothSymbol<T>, x: T, p: T) -> LogJet<T> {
    LogJet {
        g: s.dx(0, 0, x, p),
        g1: s.dx(1, 0, x, p),
        g2: s.dx(0, 1, x, p),
        g11: s.dx(2, 0, x, p),
        g12: s.dx(1, 1, x, p),
        g22: s.dx(0, 2, x, p),
    }
}

/// Second-order semiclassical star logarithm of an exponential-form symbol.
pub fn semiclassical_log<T: Real>(s: &SmoothSymbol<T>) -> Result<SmoothSymbol<T>> {
    if s.form != SymbolForm::Exp {
        return Err(Error::Input("semiclassical_log needs an exponential-form symbol".into()));
    }
    let s = s.clone();
    let label = format!("log*({})", s.label);
    Ok(SmoothSymbol::plain_from_values(label, move |x, p| {
        let j = log_jet(&s, x, p);
        let three = T::lit(3.0);
        let corr = j.g1 * j.g2 * j.g12 * T::lit(2.0) + j.g12 * j.g12 * three
            - j.g2 * j.g2 * j.g11
            - j.g1 * j.g1 * j.g22
            - j.g11 * j.g22 * three;
        j.g - corr / T::lit(24.0)
    }))
}

/// Semiclassical resolvent `(zeta - a)^{-1}` at order `k in {0, 1}`.
/// Fails if `|zeta - a|` drops below `tol` at any of the `probe` points.
pub fn semiclassical_inverse<T: Real>(
    s: &SmoothSymbol<T>,
    zeta: C<T>,
    k: usize,
    probe: &[(T, T)],
    tol: T,
) -> Result<SmoothSymbol<T>> {
    if k > 1 {
        return Err(Error::Input(format!("resolvent order {k} not implemented (max 1)")));
    }
    for &(x, p) in probe {
        let gap = (zeta - s.value(x, p)).norm();
        if gap < tol {
            return Err(Error::Pole(format!("|zeta - a| = {gap:e} at x = {x}, p = {p}")));
        }
    }
    let s = s.clone();
    let label = format!("({}-{})^-1[k={k}]", zeta, s.label);
    Ok(SmoothSymbol::plain_from_values(label, move |x, p| {
        let jt = s.jet(2, 2, x, p);
        let r = C::<T>::one() / (zeta - jt[0][0]);
        if k == 0 {
            return r;
        }
        let (f1, f2, f11, f12, f22) = (jt[1][0], jt[0][1], jt[2][0], jt[1][1], jt[0][2]);
        let quarter = T::lit(0.25);
        let r3 = r * r * r;
        let t1 = (f12 * f12 - f11 * f22) * r3 * quarter;
        let t2 = (f22 * f1 * f1 + f11 * f2 * f2 - f1 * f2 * f12 * T::lit(2.0)) * r3 * r * quarter;
        r + t1 - t2
    }))
}

/// First-order semiclassical star function `F_*(a)` from `F`, `F''`, `F'''`.
pub fn semiclassical_function<T: Real>(
    s: &SmoothSymbol<T>,
    f0: impl Fn(C<T>) -> C<T> + Send + Sync + 'static,
    f2: impl Fn(C<T>) -> C<T> + Send + Sync + 'static,
    f3: impl Fn(C<T>) -> C<T> + Send + Sync + 'static,
) -> SmoothSymbol<T> {
    let s = s.clone();
    let label = format!("F*({})", s.label);
    SmoothSymbol::plain_from_values(label, move |x, p| {
        let jt = s.jet(2, 2, x, p);
        let v = jt[0][0];
        let (f1, f2v, f11, f12, f22) = (jt[1][0], jt[0][1], jt[2][0], jt[1][1], jt[0][2]);
        let a = (f12 * f12 - f11 * f22) / T::lit(8.0);
        let b = (f22 * f1 * f1 + f11 * f2v * f2v - f1 * f2v * f12 * T::lit(2.0)) / T::lit(24.0);
        f0(v) + f2(v) * a - f3(v) * b
    })
}

/// Samples a plain-form symbol (lattice coordinates) onto a grid.
pub fn plain_to_grid<T: Real>(
    s: &SmoothSymbol<T>,
    lo: HalfInt,
    hi: HalfInt,
    band: usize,
    n_p: usize,
) -> Result<SymbolGrid<T>> {
    crate::symbol::sample_symbol(|x, p| s.value(x, p), lo, hi, band, n_p)
}

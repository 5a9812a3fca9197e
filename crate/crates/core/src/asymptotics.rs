//! Predicted log-determinants: classical and star Szego formulas, the
//! semiclassical bulk/corner expansion, Euler-Maclaurin sums, locally
//! Toeplitz limits, gauge splitting and the block boundary formula.

use crate::finite_sections::{build_tn, logdet};
use crate::linalg::DenseComplexMatrix;
use crate::moyal::{phi_bch, star_log, BchOrder, WindowSpec};
use crate::quadrature::{circle_mean, integrate};
use crate::symbol::{HalfInt, ProjectionKind, SmoothSymbol, SymbolGrid};
use crate::wiener_hopf::{project_samples, FactorPair, Side};
use crate::{fourier, Error, Real, Result, C};
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::Serialize;
use std::collections::BTreeMap;

/// Default `p` resolution for tilde functions and circle averages.
pub const DEFAULT_NP: usize = 256;

/// Named contribution; `included` ones are part of the total.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Constant<T: Real> {
    pub value: C<T>,
    pub included: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prediction<T: Real> {
    pub bulk: C<T>,
    pub corner_ul: C<T>,
    pub corner_br: C<T>,
    pub constants: BTreeMap<String, Constant<T>>,
    pub total: C<T>,
    pub order_tags: Vec<String>,
    /// Truncation and remainder estimates (absolute).
    pub budgets: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl<T: Real> Prediction<T> {
    fn new(tags: &[&str]) -> Self {
        Self {
            bulk: C::zero(),
            corner_ul: C::zero(),
            corner_br: C::zero(),
            constants: BTreeMap::new(),
            total: C::zero(),
            order_tags: tags.iter().map(|s| s.to_string()).collect(),
            budgets: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn constant(&mut self, name: &str, value: C<T>, included: bool) {
        self.constants.insert(name.to_string(), Constant { value, included });
    }

    fn finish(mut self) -> Self {
        let extra = self.constants.values().filter(|c| c.included).fold(C::zero(), |s, c| s + c.value);
        self.total = self.bulk + self.corner_ul + self.corner_br + extra;
        self
    }
}

/// Bernoulli number `B_m` as an exact rational (`B_1 = -1/2`).
pub fn bernoulli(m: usize) -> Ratio<i128> {
    let mut b: Vec<Ratio<i128>> = vec![Ratio::from_integer(1)];
    for n in 1..=m {
        // sum_{k<=n} C(n+1, k) B_k = 0
        let mut s = Ratio::from_integer(0);
        let mut c: i128 = 1;
        for (k, bk) in b.iter().enumerate() {
            s += *bk * c;
            c = c * (n as i128 + 1 - k as i128) / (k as i128 + 1);
        }
        b.push(-s / Ratio::from_integer(n as i128 + 1));
    }
    b[m]
}

/// Euler-Maclaurin midpoint coefficients `c_j = (1 - 2^{1-2j}) B_{2j} / (2j)!`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EMSeries {
    pub max_order: usize,
    pub coefficients: Vec<Ratio<i128>>,
}

impl EMSeries {
    /// Exact coefficients for orders `1..=k`, `k <= 8`.
    pub fn new(k: usize) -> Result<Self> {
        if k > 8 {
            return Err(Error::Input(format!("Euler-Maclaurin order {k} above 8")));
        }
        let coefficients = (1..=k)
            .map(|j| {
                let fact: i128 = (1..=(2 * j) as i128).product();
                let pow = Ratio::new(1, 1i128 << (2 * j - 1));
                (Ratio::from_integer(1) - pow) * bernoulli(2 * j) / Ratio::from_integer(fact)
            })
            .collect();
        Ok(Self { max_order: k, coefficients })
    }

    pub fn coefficient<T: Real>(&self, j: usize) -> T {
        let r = self.coefficients[j - 1];
        T::lit(*r.numer() as f64) / T::lit(*r.denom() as f64)
    }
}

/// `(1/nu) int_{nu/2}^{(n+1/2) nu} [g - sum_j c_j nu^{2j} g^{(2j)}] dy`, which
/// approximates `sum_{j=1}^n g(j nu)`. `g(m, y)` is the `m`-th derivative.
pub fn euler_maclaurin_sum<T: Real>(
    g: impl Fn(usize, T) -> C<T>,
    n: usize,
    nu: T,
    k: usize,
    tol: T,
) -> Result<C<T>> {
    let em = EMSeries::new(k)?;
    let cs: Vec<T> = (1..=k).map(|j| em.coefficient::<T>(j) * nu.powi(2 * j as i32)).collect();
    let half = T::lit(0.5);
    let integrand = |y: T| {
        let mut v = g(0, y);
        for (j, c) in cs.iter().enumerate() {
            v = v - g(2 * (j + 1), y) * *c;
        }
        v
    };
    let lo = nu * half;
    let hi = (T::int(n as i64) + half) * nu;
    Ok(integrate(integrand, lo, hi, tol, tol)? / nu)
}

/// Continuous logarithm of circle samples; fails on nonzero winding.
pub fn log_samples<T: Real>(v: &[C<T>]) -> Result<Vec<C<T>>> {
    let pi = T::PI();
    let mut out = Vec::with_capacity(v.len());
    let mut prev = T::zero();
    let mut offset = T::zero();
    for (m, z) in v.iter().enumerate() {
        if z.norm() == T::zero() || !z.norm().is_finite() {
            return Err(Error::Winding(format!("symbol vanishes or diverges at sample {m}")));
        }
        let arg = z.arg();
        if m > 0 {
            let mut d = arg - prev;
            if d > pi {
                d = d - T::TAU();
            } else if d < -pi {
                d = d + T::TAU();
            }
            offset = offset + d - (arg - prev);
        }
        prev = arg;
        out.push(C::new(z.norm().ln(), arg + offset));
    }
    let closing = {
        let mut d = v[0].arg() - prev;
        if d > pi {
            d = d - T::TAU();
        } else if d < -pi {
            d = d + T::TAU();
        }
        out[v.len() - 1].im + d - out[0].im
    };
    if closing.abs() > T::lit(0.5) {
        return Err(Error::Winding(format!("winding number {:.3}", closing.to_f64_lossy() / std::f64::consts::TAU)));
    }
    Ok(out)
}

/// `sum_{k>=1} k g_k g_{-k}` from samples of `g` on the circle.
pub fn e_from_log_samples<T: Real>(g: &[C<T>]) -> C<T> {
    let spec = fourier::spectrum(g);
    let n = spec.len();
    let mut s = C::zero();
    for k in 1..n.div_ceil(2) {
        s = s + spec[k] * spec[n - k] * T::int(k as i64);
    }
    s
}

/// `E(c) = sum_k k (log c)_k (log c)_{-k}` of an x-independent symbol.
pub fn e_classical<T: Real>(c: &SymbolGrid<T>) -> Result<C<T>> {
    if !c.is_toeplitz(T::lit(1e-12)) {
        return Err(Error::Input("e_classical needs an x-independent symbol".into()));
    }
    let np = (8 * c.band() + 64).next_power_of_two();
    let row = c.row(c.x_min()).to_vec();
    let samples = fourier::synthesize(&row, np);
    Ok(e_from_log_samples(&log_samples(&samples)?))
}

/// `E` of `p -> exp(g(p))` from a log evaluator.
pub fn e_of_log<T: Real>(g: impl Fn(T) -> C<T>, np: usize) -> C<T> {
    let step = T::TAU() / T::int(np as i64);
    let v: Vec<C<T>> = (0..np).map(|m| g(step * T::int(m as i64))).collect();
    e_from_log_samples(&v)
}

/// Predicted `det T_n / det T_{n-1}`: `(a_{+,n}^L)_0 (a_{-,n}^L)_0`.
pub fn weak_ratio_prediction<T: Real>(left: &FactorPair<T>, n: usize) -> Result<C<T>> {
    if left.side != Side::Left {
        return Err(Error::Input("weak ratio needs the left factorization".into()));
    }
    let x = HalfInt::int(n as i64);
    Ok(left.plus.try_coeff(x, 0)? * left.minus.try_coeff(x, 0)?)
}

/// Predicted `det T_n(a) / det T_{n-1}(T^1 a)` (first row and column
/// removed): `(a_{-,1}^R)_0 (a_{+,1}^R)_0`, independent of `n`.
pub fn shifted_weak_ratio_prediction<T: Real>(right: &FactorPair<T>) -> Result<C<T>> {
    if right.side != Side::Right {
        return Err(Error::Input("shifted weak ratio needs the right factorization".into()));
    }
    let x = HalfInt::int(1);
    Ok(right.plus.try_coeff(x, 0)? * right.minus.try_coeff(x, 0)?)
}

/// Oracle `det T_n / det T_{n-1}`.
pub fn weak_ratio_oracle<T: Real>(a: &SymbolGrid<T>, n: usize) -> Result<C<T>> {
    if n < 2 {
        return Err(Error::Input("weak ratio needs n >= 2".into()));
    }
    let d1 = logdet(&build_tn(a, n)?);
    let d0 = logdet(&build_tn(a, n - 1)?);
    Ok((d1.log() - d0.log()).exp())
}

/// Corner constant `E_x` as the exact double sum over `m` and `j`.
pub fn corner_constant<T: Real>(
    b_plus: &SymbolGrid<T>,
    b_minus: &SymbolGrid<T>,
    d_plus: &SymbolGrid<T>,
    d_minus: &SymbolGrid<T>,
    x: HalfInt,
    cutoff: T,
) -> Result<C<T>> {
    let m_max = b_plus.band().max(b_minus.band()).max(d_plus.band()).max(d_minus.band());
    let top = |s: &SymbolGrid<T>, k: i64| {
        s.xs().map(|y| s.coeff(y, k).norm()).fold(T::zero(), T::max)
    };
    let mut m_eff = 0;
    for m in 1..=m_max as i64 {
        let bound = top(b_plus, m) * top(d_minus, -m) + top(d_plus, m) * top(b_minus, -m);
        if bound > cutoff {
            m_eff = m;
        }
    }
    let mut s = C::zero();
    for m in 1..=m_eff {
        for j in 1..=m {
            let y = HalfInt(x.0 + 2 * j - (m + 1));
            s = s + b_plus.try_coeff(y, m)? * d_minus.try_coeff(y, -m)? + d_plus.try_coeff(y, m)? * b_minus.try_coeff(y, -m)?;
        }
    }
    Ok(s * T::lit(0.5))
}

/// Corner constant from the leading terms of its small-`nu` expansion:
/// `-(i/2) (g d_p h)_0 + (i/48) d_x^2 (g (d_p + d_p^3) h)_0` with
/// `g = b_+ + b_-`, `h = d_(+)^+ - d_(-)^-` (lattice coordinates).
pub fn corner_constant_asymptotic<T: Real>(
    b_plus: &SymbolGrid<T>,
    b_minus: &SymbolGrid<T>,
    d_plus: &SymbolGrid<T>,
    d_minus: &SymbolGrid<T>,
    x: HalfInt,
    second_order: bool,
) -> Result<C<T>> {
    let band = b_plus.band().max(b_minus.band()).max(d_plus.band()).max(d_minus.band()) as i64;
    let pair = |y: HalfInt, cube: bool| -> Result<C<T>> {
        let mut s = C::zero();
        for k in -band..=band {
            let g = b_plus.try_coeff(y, -k)? + b_minus.try_coeff(y, -k)?;
            let h = if k >= 0 { d_plus.try_coeff(y, k)? } else { -d_minus.try_coeff(y, k)? };
            let kk = T::int(k);
            let w = if cube { C::new(T::zero(), kk) + C::new(T::zero(), -kk * kk * kk) } else { C::new(T::zero(), kk) };
            s = s + g * w * h;
        }
        Ok(s)
    };
    let i = C::new(T::zero(), T::one());
    let mut e = -i * pair(x, false)? * T::lit(0.5);
    if second_order {
        let f = |y| pair(y, true);
        let d2 = f(x + HalfInt(1))? - f(x)? * T::lit(2.0) + f(x - HalfInt(1))?;
        // step 1/2 in x
        e = e + i * d2 * T::lit(4.0) / T::lit(48.0);
    }
    Ok(e)
}

fn neg<T: Real>(a: &SymbolGrid<T>) -> SymbolGrid<T> {
    a.scale(-C::<T>::one())
}

/// The two star logarithms of one factorization.
struct SideLogs<T: Real> {
    side: Side,
    b_plus: SymbolGrid<T>,
    b_minus: SymbolGrid<T>,
}

/// The `d`-symbols `(d_(+), d_(-))` built from [`SideLogs`] at one BCH order.
fn d_symbols<T: Real>(s: &SideLogs<T>, bch: BchOrder) -> Result<(SymbolGrid<T>, SymbolGrid<T>)> {
    let (bp, bm) = (&s.b_plus, &s.b_minus);
    Ok(match s.side {
        Side::Left => (neg(&phi_bch(&neg(bm), &neg(bp), bch)?), phi_bch(bp, bm, bch)?),
        Side::Right => (phi_bch(bm, bp, bch)?, neg(&phi_bch(&neg(bp), &neg(bm), bch)?)),
    })
}

fn side_logs<T: Real>(f: &FactorPair<T>, win: &WindowSpec<T>) -> Result<SideLogs<T>> {
    Ok(SideLogs { side: f.side, b_plus: star_log(&f.plus, win)?, b_minus: star_log(&f.minus, win)? })
}

fn side_corner<T: Real>(s: &SideLogs<T>, bch: BchOrder, x: HalfInt, cutoff: T) -> Result<C<T>> {
    let (dp, dm) = d_symbols(s, bch)?;
    corner_constant(&s.b_plus, &s.b_minus, &dp, &dm, x, cutoff)
}

/// `sup_x sum_k |c_k| r^{-|k|}` on the annulus `r <= |z| <= 1/r`.
fn annulus_sup<T: Real>(c: &SymbolGrid<T>, r: T) -> T {
    let band = c.band() as i64;
    c.xs()
        .map(|x| (-band..=band).map(|k| c.coeff(x, k).norm() * r.powi(-(k.abs() as i32))).sum::<T>())
        .fold(T::zero(), T::max)
}

/// Exact star Szego formula: `sum_j ((log a)_j)_0 + (E^R_{1/2} + E^L_{n+1/2}) / 2`.
pub fn strong_formula<T: Real>(
    a: &SymbolGrid<T>,
    n: usize,
    left: &FactorPair<T>,
    right: &FactorPair<T>,
    bch: BchOrder,
    win: &WindowSpec<T>,
) -> Result<Prediction<T>> {
    let mut pred = Prediction::new(&["bulk:star-log", "corner:exact-sum"]);
    let w = HalfInt::int(win.margin as i64);
    let (lo, hi) = ((HalfInt::int(1) - w).max(a.x_min()), (HalfInt::int(n as i64) + w).min(a.x_max()));
    let la = star_log(&a.restrict(lo, hi)?, win)?;
    for j in 1..=n as i64 {
        pred.bulk = pred.bulk + la.try_coeff(HalfInt::int(j), 0)?;
    }
    let cutoff = T::lit(1e-16);
    let ends = [HalfInt(1), HalfInt(2 * n as i64 + 1)];
    let logs = [side_logs(right, win)?, side_logs(left, win)?];
    let evaluate = |order: BchOrder| -> Result<(C<T>, C<T>)> {
        Ok((side_corner(&logs[0], order, ends[0], cutoff)?, side_corner(&logs[1], order, ends[1], cutoff)?))
    };
    let (er, el) = evaluate(bch)?;
    pred.corner_ul = er * T::lit(0.5);
    pred.corner_br = el * T::lit(0.5);
    pred.constant("E_right", er, false);
    pred.constant("E_left", el, false);
    pred.order_tags.push(format!("phi:{}", bch.get()));
    if bch.get() > 0 {
        let (er0, el0) = evaluate(BchOrder::new(bch.get() - 1)?)?;
        let last = ((er - er0) + (el - el0)) * T::lit(0.5);
        pred.budgets.insert("phi_truncation".into(), last.norm().to_f64_lossy());
    }
    let mut rho = T::zero();
    for s in &logs {
        let r = T::lit(0.8);
        if (annulus_sup(&s.b_plus, r) + annulus_sup(&s.b_minus, r)) * (T::one() + r) / (T::one() - r) >= T::LN_2() {
            pred.warnings.push("BCH convergence condition not verified on the annulus 0.8".into());
        }
        for b in [&s.b_plus, &s.b_minus] {
            rho = rho.max(b.decay_rho);
        }
    }
    pred.warnings.dedup();
    pred.budgets.insert("rho_n".into(), rho.powi(n as i32).to_f64_lossy());
    Ok(pred.finish())
}

/// Which semiclassical terms to include.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Orders {
    pub d0: bool,
    pub d2: bool,
    pub c0: bool,
    pub c1: bool,
}

impl Orders {
    pub const ALL: Orders = Orders { d0: true, d2: true, c0: true, c1: true };
    pub const LEADING: Orders = Orders { d0: true, d2: false, c0: true, c1: false };

    /// Parses a comma list such as `d0,d2,c0,c1`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut o = Orders { d0: false, d2: false, c0: false, c1: false };
        for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match t {
                "d0" => o.d0 = true,
                "d2" => o.d2 = true,
                "c0" => o.c0 = true,
                "c1" => o.c1 = true,
                other => return Err(Error::Input(format!("unknown order toggle {other:?}"))),
            }
        }
        if !(o.d0 || o.d2 || o.c0 || o.c1) {
            return Err(Error::Input("empty order list".into()));
        }
        Ok(o)
    }

    fn tags(&self) -> Vec<&'static str> {
        let mut t = Vec::new();
        for (on, name) in [(self.d0, "D0"), (self.d2, "D2"), (self.c0, "C0"), (self.c1, "C1")] {
            if on {
                t.push(name);
            }
        }
        t
    }
}

/// `p`-average of the bulk density at lattice coordinate `x`.
pub fn bulk_density<T: Real>(s: &SmoothSymbol<T>, x: T, np: usize, d0: bool, d2: bool) -> C<T> {
    circle_mean(np, |p| {
        let g = s.dx(0, 0, x, p);
        let mut v = C::zero();
        if d0 {
            v = v + g;
        }
        if d2 {
            let det = s.dx(2, 0, x, p) * s.dx(0, 2, x, p) - s.dx(1, 1, x, p) * s.dx(1, 1, x, p);
            v = v - g * det / T::lit(12.0);
        }
        v
    })
}

/// `p`-averages of the corner densities `C^(0)` and `C^(1)_+` (the `-` sign
/// flips `C^(1)`) at lattice coordinate `x`.
pub fn corner_densities<T: Real>(s: &SmoothSymbol<T>, x: T, np: usize) -> (C<T>, C<T>) {
    let step = T::TAU() / T::int(np as i64);
    let sample = |m1: usize, m2: usize| -> Vec<C<T>> {
        (0..np).map(|m| s.dx(m1, m2, x, step * T::int(m as i64))).collect()
    };
    let g = sample(0, 0);
    let g1 = sample(1, 0);
    let g2 = sample(0, 1);
    let g22 = sample(0, 2);
    let gt = project_samples(&g, ProjectionKind::Tilde);
    let g1t = project_samples(&g1, ProjectionKind::Tilde);
    let g2t = spectral_dp(&gt);
    let i = C::new(T::zero(), T::one());
    let nf = T::int(np as i64);
    let mut c0 = C::zero();
    let mut c1 = C::zero();
    for m in 0..np {
        c0 = c0 - g[m] * i * g2t[m] / T::lit(4.0);
        let inner = -C::<T>::one() + g22[m] * T::lit(3.0) + g[m] * g22[m] * T::lit(2.0) + g2[m] * g2[m]
            - g2t[m] * g2t[m] * T::lit(2.0);
        c1 = c1 + (g1t[m] * g2[m] * g2t[m] * T::lit(2.0) + g1[m] * inner) / T::lit(24.0);
    }
    (c0 / nf, c1 / nf)
}

fn spectral_dp<T: Real>(v: &[C<T>]) -> Vec<C<T>> {
    let mut spec = fourier::spectrum(v);
    let n = spec.len();
    for (i, z) in spec.iter_mut().enumerate() {
        let k = fourier::frequency(i, n);
        *z = if n.is_multiple_of(2) && i == n / 2 { C::zero() } else { *z * C::new(T::zero(), T::int(k)) };
    }
    fourier::from_spectrum(&spec)
}

/// Semiclassical bulk plus corners for `T_n([exp g(x nu, p)])`.
pub fn semiclassical_prediction<T: Real>(
    s: &SmoothSymbol<T>,
    n: usize,
    orders: Orders,
    np: usize,
    tol: T,
) -> Result<Prediction<T>> {
    let mut pred = Prediction::new(&orders.tags());
    let half = T::lit(0.5);
    let hi = T::int(n as i64) + half;
    if orders.d0 || orders.d2 {
        pred.bulk = integrate(|x| bulk_density(s, x, np, orders.d0, orders.d2), half, hi, tol, tol)?;
    }
    let (c0_ul, c1_ul) = corner_densities(s, half, np);
    let (c0_br, c1_br) = corner_densities(s, hi, np);
    if orders.c0 {
        pred.corner_ul = pred.corner_ul + c0_ul;
        pred.corner_br = pred.corner_br + c0_br;
    }
    if orders.c1 {
        pred.corner_ul = pred.corner_ul - c1_ul;
        pred.corner_br = pred.corner_br + c1_br;
    }
    pred.constant("C1_ul", -c1_ul, false);
    pred.constant("C1_br", c1_br, false);
    Ok(pred.finish())
}

/// Quadratic extrapolation to `t -> 0` from values at `ts`.
fn richardson<T: Real>(ts: [T; 3], vs: [C<T>; 3]) -> C<T> {
    let mut s = C::zero();
    for i in 0..3 {
        let mut w = T::one();
        for j in 0..3 {
            if i != j {
                w = w * ts[j] / (ts[j] - ts[i]);
            }
        }
        s = s + vs[i] * w;
    }
    s
}

/// `(E(c_0) + E(c_1)) / 2 + (n / 2pi) int_0^1 int g dp dt` for symbols
/// `exp(g((x - 1/2) / n, p))`; the boundary limits are extrapolated from
/// `t = 1e-2, 1e-3, 1e-4`.
pub fn locally_toeplitz_prediction<T: Real>(
    g: impl Fn(T, T) -> C<T>,
    n: usize,
    np: usize,
    tol: T,
) -> Result<Prediction<T>> {
    let mut pred = Prediction::new(&["D0", "C0"]);
    let ts = [T::lit(1e-2), T::lit(1e-3), T::lit(1e-4)];
    let e0 = richardson(ts, ts.map(|t| e_of_log(|p| g(t, p), np)));
    let e1 = richardson(ts, ts.map(|t| e_of_log(|p| g(T::one() - t, p), np)));
    let spread = (e_of_log(|p| g(ts[2], p), np) - e0).norm() + (e_of_log(|p| g(T::one() - ts[2], p), np) - e1).norm();
    if !(e0.norm().is_finite() && e1.norm().is_finite()) {
        return Err(Error::Quadrature("boundary limit did not converge".into()));
    }
    pred.budgets.insert("boundary_extrapolation".into(), spread.to_f64_lossy());
    pred.corner_ul = e0 * T::lit(0.5);
    pred.corner_br = e1 * T::lit(0.5);
    pred.bulk = integrate(|t| circle_mean(np, |p| g(t, p)), T::zero(), T::one(), tol, tol)? * T::int(n as i64);
    pred.constant("E_c0", e0, false);
    pred.constant("E_c1", e1, false);
    Ok(pred.finish())
}

/// Locally-1/2 limit for symbols `exp(g((x - 1/2) / sqrt n, p))`; `g` is
/// given in its natural coordinate `t` (its `nu` is ignored).
pub fn locally_half_prediction<T: Real>(g: &SmoothSymbol<T>, n: usize, np: usize, tol: T) -> Result<Prediction<T>> {
    let mut pred = Prediction::new(&["D0", "D2", "C0"]);
    let rn = T::int(n as i64).sqrt();
    let at = |t: T, p: T| g.deriv(0, 0, t, p);
    let ts = [T::lit(1e-2), T::lit(1e-3), T::lit(1e-4)];
    let e0 = richardson(ts, ts.map(|t| e_of_log(|p| at(t, p), np)));
    let e1 = e_of_log(|p| at(rn, p), np);
    pred.corner_ul = e0 * T::lit(0.5);
    pred.corner_br = e1 * T::lit(0.5);
    let d0 = integrate(|t| circle_mean(np, |p| at(t, p)), T::zero(), rn, tol, tol)?;
    let d2 = integrate(
        |t| {
            circle_mean(np, |p| {
                let det = g.deriv(2, 0, t, p) * g.deriv(0, 2, t, p) - g.deriv(1, 1, t, p) * g.deriv(1, 1, t, p);
                at(t, p) * det
            })
        },
        T::zero(),
        rn,
        tol,
        tol,
    )?;
    pred.bulk = d0 * rn - d2 / (T::lit(12.0) * rn);
    pred.constant("D2", -d2 / (T::lit(12.0) * rn), false);
    pred.constant("E_c0", e0, false);
    pred.constant("E_c_sqrt_n", e1, false);
    Ok(pred.finish())
}

/// A product `coef * prod_i d_1^{c_i} d_2^{d_i} g`.
#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: f64,
    factors: Vec<(usize, usize)>,
}

fn differentiate(terms: &[Term], axis: usize) -> Vec<Term> {
    let mut out = Vec::new();
    for t in terms {
        for i in 0..t.factors.len() {
            let mut f = t.factors.clone();
            if axis == 0 {
                f[i].0 += 1;
            } else {
                f[i].1 += 1;
            }
            out.push(Term { coef: t.coef, factors: f });
        }
    }
    out
}

fn repeat(terms: Vec<Term>, axis: usize, times: usize, sign: f64) -> Vec<Term> {
    let mut t = terms;
    for _ in 0..times {
        t = differentiate(&t, axis);
        for x in t.iter_mut() {
            x.coef *= sign;
        }
    }
    t
}

fn eval_terms<T: Real>(terms: &[Term], s: &SmoothSymbol<T>, x: T, p: T) -> C<T> {
    terms.iter().fold(C::zero(), |acc, t| {
        acc + t.factors.iter().fold(C::new(T::lit(t.coef), T::zero()), |v, &(a, b)| v * s.dx(a, b, x, p))
    })
}

/// `F = G + Delta` for a monomial functional; `defect = |F - G - Delta|`.
#[derive(Debug, Clone, Serialize)]
pub struct GaugeSplit<T: Real> {
    pub f: C<T>,
    pub g: C<T>,
    pub delta: C<T>,
    pub defect: T,
}

/// Splits `(1/2pi) int_lo^hi int prod_i d_1^{c_i} d_2^{d_i} g` into the bulk
/// functional `G` and the boundary terms `Delta` (lattice coordinates).
pub fn gauge_split<T: Real>(
    monomial: &[(usize, usize)],
    s: &SmoothSymbol<T>,
    lo: T,
    hi: T,
    np: usize,
    tol: T,
) -> Result<GaugeSplit<T>> {
    if monomial.is_empty() {
        return Err(Error::Input("empty monomial".into()));
    }
    let k = monomial.len() as f64;
    let full = vec![Term { coef: 1.0, factors: monomial.to_vec() }];
    let mut bulk = Vec::new();
    let mut boundary = Vec::new();
    for (j, &(cj, dj)) in monomial.iter().enumerate() {
        let rest: Vec<(usize, usize)> = monomial.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, f)| *f).collect();
        let others = vec![Term { coef: 1.0 / k, factors: rest }];
        let mut b = repeat(repeat(others.clone(), 0, cj, -1.0), 1, dj, -1.0);
        for t in b.iter_mut() {
            t.factors.push((0, 0));
        }
        bulk.extend(b);
        for eta in 0..cj {
            let mut b = repeat(others.clone(), 0, cj - eta - 1, -1.0);
            for t in b.iter_mut() {
                t.factors.push((eta, dj));
            }
            boundary.extend(b);
        }
    }
    let area = |terms: &[Term]| integrate(|x| circle_mean(np, |p| eval_terms(terms, s, x, p)), lo, hi, tol, tol);
    let f = area(&full)?;
    let g = area(&bulk)?;
    let edge = |x: T| circle_mean(np, |p| eval_terms(&boundary, s, x, p));
    let delta = edge(hi) - edge(lo);
    Ok(GaugeSplit { f, g, delta, defect: (f - g - delta).norm() })
}

/// Matrix-valued function of `p` sampled on the circle.
pub type MatrixFn<'a, T> = &'a dyn Fn(T) -> DenseComplexMatrix<T>;

/// `n tr[(log a)_0] - (i/4) (1/2pi) int tr[beta_R gamma_R' + beta_L' gamma_L] dp`
/// with spectral `p`-derivatives.
pub fn block_boundary_formula<T: Real>(
    beta_l: MatrixFn<T>,
    beta_r: MatrixFn<T>,
    gamma_l: MatrixFn<T>,
    gamma_r: MatrixFn<T>,
    n: usize,
    trace_bulk: C<T>,
    np: usize,
) -> Result<Prediction<T>> {
    let step = T::TAU() / T::int(np as i64);
    let ps: Vec<T> = (0..np).map(|m| step * T::int(m as i64)).collect();
    let sample = |f: MatrixFn<T>| ps.iter().map(|&p| f(p)).collect::<Vec<_>>();
    let (bl, br, gl, gr) = (sample(beta_l), sample(beta_r), sample(gamma_l), sample(gamma_r));
    let kappa = bl[0].rows();
    for set in [&bl, &br, &gl, &gr] {
        if set.iter().any(|m| m.rows() != kappa || m.cols() != kappa) {
            return Err(Error::Dimension("block functions disagree in size".into()));
        }
    }
    let derivative = |set: &[DenseComplexMatrix<T>]| {
        let mut out = vec![DenseComplexMatrix::zeros(kappa, kappa); np];
        for r in 0..kappa {
            for c in 0..kappa {
                let v: Vec<C<T>> = set.iter().map(|m| m[(r, c)]).collect();
                for (o, d) in out.iter_mut().zip(spectral_dp(&v)) {
                    o[(r, c)] = d;
                }
            }
        }
        out
    };
    let gr_d = derivative(&gr);
    let bl_d = derivative(&bl);
    let mut acc = C::zero();
    for m in 0..np {
        acc = acc + br[m].matmul(&gr_d[m]).trace() + bl_d[m].matmul(&gl[m]).trace();
    }
    let mut pred = Prediction::new(&["bulk:trace", "boundary:block"]);
    pred.bulk = trace_bulk * T::int(n as i64);
    let boundary = -C::new(T::zero(), T::lit(0.25)) * acc / T::int(np as i64);
    pred.corner_ul = boundary;
    Ok(pred.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{sample_symbol, smooth_to_grid};
    use crate::wiener_hopf::numeric_factorize;

    fn c(v: f64) -> C<f64> {
        C::new(v, 0.0)
    }

    fn h(v: f64) -> HalfInt {
        HalfInt::from_f64(v).unwrap()
    }

    fn example3(nu: f64) -> SmoothSymbol<f64> {
        SmoothSymbol::new("ex3", nu, |m1, m2, y: f64, p: f64| {
            let ds = |k: usize, f0: f64, f1: f64| [f0, f1, -f0, -f1][k % 4];
            let hh = if m2 == 0 { ds(m1, y.sin(), y.cos()) } else { 0.0 };
            let j = ds(m1, y.cos(), -y.sin());
            c(hh - j * ds(m2, p.cos(), -p.sin()))
        })
    }

    fn cosine(t: f64) -> SmoothSymbol<f64> {
        SmoothSymbol::new("t cos", 1.0, move |m1, m2, _, p: f64| {
            if m1 > 0 {
                return c(0.0);
            }
            c(t * [p.cos(), -p.sin(), -p.cos(), p.sin()][m2 % 4])
        })
    }

    #[test]
    fn bernoulli_and_em_coefficients() {
        assert_eq!(bernoulli(2), Ratio::new(1, 6));
        assert_eq!(bernoulli(4), Ratio::new(-1, 30));
        assert_eq!(bernoulli(12), Ratio::new(-691, 2730));
        let em = EMSeries::new(8).unwrap();
        assert_eq!(em.coefficients[0], Ratio::new(1, 24));
        assert_eq!(em.coefficients[1], Ratio::new(-7, 5760));
    }

    #[test]
    fn euler_maclaurin_polynomials() {
        let nu = 0.3;
        let n = 7;
        let sq = euler_maclaurin_sum(|m, y: f64| c([y * y, 2.0 * y, 2.0, 0.0, 0.0][m.min(4)]), n, nu, 1, 1e-14).unwrap();
        let exact = nu * nu * (n * (n + 1) * (2 * n + 1)) as f64 / 6.0;
        assert!((sq.re - exact).abs() < 1e-12 * exact);
        let q = euler_maclaurin_sum(
            |m, y: f64| c([y.powi(4), 4.0 * y.powi(3), 12.0 * y * y, 24.0 * y, 24.0, 0.0][m.min(5)]),
            n,
            nu,
            2,
            1e-14,
        )
        .unwrap();
        let exact: f64 = (1..=n).map(|j| (j as f64 * nu).powi(4)).sum();
        assert!((q.re - exact).abs() < 1e-12 * exact);
        let k = euler_maclaurin_sum(|m, _| c(if m == 0 { 2.5 } else { 0.0 }), n, nu, 1, 1e-14).unwrap();
        assert!((k.re - 2.5 * n as f64).abs() < 1e-12);
    }

    #[test]
    fn classical_e() {
        let t = 0.5;
        let a = sample_symbol(|_, p: f64| c((2.0 * t * p.cos()).exp()), h(0.0), h(4.0), 24, 128).unwrap();
        assert!((e_classical(&a).unwrap() - c(0.25)).norm() < 1e-13);
        let one_sided = sample_symbol(|_, p: f64| C::new(0.0, t * p).exp() * 0.0 + (C::from_polar(t, p)).exp(), h(0.0), h(4.0), 24, 128).unwrap();
        assert!(e_classical(&one_sided).unwrap().norm() < 1e-14);
        let z = sample_symbol(|_, p: f64| C::from_polar(1.0, p), h(0.0), h(4.0), 2, 16).unwrap();
        assert!(matches!(e_classical(&z), Err(Error::Winding(_))));
    }

    #[test]
    fn weak_ratio_constant_tridiagonal() {
        use crate::wiener_hopf::{tridiagonal_factorize, tridiagonal_symbol, TridiagonalSpec};
        let spec = TridiagonalSpec::constant(c(2.0), c(1.0), c(0.25));
        let left = tridiagonal_factorize(&spec, Side::Left, h(-5.0), h(70.0), 1e-12).unwrap();
        assert!((weak_ratio_prediction(&left, 60).unwrap() - c(2.0)).norm() < 1e-15);
        let a = tridiagonal_symbol(&spec, h(-5.0), h(70.0), 1e-12).unwrap();
        let r = weak_ratio_oracle(&a, 60).unwrap();
        assert!((r / 2.0 - c(1.0)).norm() < 1e-6);
    }

    #[test]
    fn homogeneous_strong_formula_reduces_to_classical() {
        let t = 0.5;
        let a = sample_symbol(|_, p: f64| c((2.0 * t * p.cos()).exp()), h(-40.0), h(70.0), 16, 128).unwrap();
        let win = WindowSpec::new(12, 1e-14);
        let l = numeric_factorize(&a, Side::Left, &win).unwrap();
        let r = numeric_factorize(&a, Side::Right, &win).unwrap();
        let pred = strong_formula(&a, 20, &l, &r, BchOrder::new(2).unwrap(), &win).unwrap();
        assert!(pred.bulk.norm() < 1e-10, "{}", pred.bulk);
        assert!((pred.constants["E_right"].value - c(0.25)).norm() < 1e-9);
        assert!((pred.constants["E_left"].value - c(0.25)).norm() < 1e-9);
        let oracle = logdet(&build_tn(&a, 20).unwrap()).log();
        assert!((pred.total - oracle).norm() < 1e-9);
        let asym = {
            let s = side_logs(&r, &win).unwrap();
            let (dp, dm) = d_symbols(&s, BchOrder::new(2).unwrap()).unwrap();
            corner_constant_asymptotic(&s.b_plus, &s.b_minus, &dp, &dm, h(0.5), true).unwrap()
        };
        assert!((asym - c(0.25)).norm() < 1e-9);
    }

    #[test]
    fn semiclassical_homogeneous_and_zero() {
        let s = cosine(0.5);
        let p = semiclassical_prediction(&s, 10, Orders::ALL, 128, 1e-12).unwrap();
        assert!(p.bulk.norm() < 1e-12);
        assert!((p.corner_ul - c(0.03125)).norm() < 1e-12 && (p.corner_br - c(0.03125)).norm() < 1e-12);
        let z = SmoothSymbol::new("0", 1.0, |_, _, _, _: f64| c(0.0));
        assert!(semiclassical_prediction(&z, 10, Orders::ALL, 64, 1e-12).unwrap().total.norm() < 1e-15);
    }

    #[test]
    fn example3_integrated_forms() {
        let nu = 0.1;
        let s = example3(nu);
        for x in [3.0, 11.5] {
            let y = x * nu;
            let (hh, h1, h2) = (y.sin(), y.cos(), -y.sin());
            let (j, j1, j2) = (y.cos(), -y.sin(), -y.cos());
            let d = bulk_density(&s, x, 64, true, true);
            let want = hh + nu * nu / 24.0 * (hh * (j * j2 + j1 * j1) + j * j * h2);
            assert!((d - c(want)).norm() < 1e-12);
            let (c0, c1) = corner_densities(&s, x, 64);
            let want1 = nu / 48.0 * (h1 * (j * j - 2.0) - (3.0 + 2.0 * hh) * j * j1);
            assert!((c0 - c(j * j / 8.0)).norm() < 1e-12);
            assert!((c1 - c(want1)).norm() < 1e-12, "{c1} vs {want1}");
        }
    }

    #[test]
    fn locally_toeplitz_example() {
        let p = locally_toeplitz_prediction(|t: f64, p: f64| c(t * p.cos()), 50, 64, 1e-12).unwrap();
        assert!((p.total - c(0.125)).norm() < 1e-10);
    }

    #[test]
    fn locally_half_matches_example4_closed_form() {
        let w: f64 = 1.0;
        let g = SmoothSymbol::new("ex4", 1.0, move |m1, m2, t: f64, p: f64| {
            let ds = |k: usize, f0: f64, f1: f64| [f0, f1, -f0, -f1][k % 4];
            let a = if m2 == 0 {
                (if m1 == 0 { 1.0 } else { 0.0 }) + (2.0 * w).powi(m1 as i32) * ds(m1, (2.0 * w * t).cos(), -(2.0 * w * t).sin())
            } else {
                0.0
            };
            c(a - w.powi(m1 as i32) * ds(m1, (w * t).cos(), -(w * t).sin()) * ds(m2, p.cos(), -p.sin()))
        });
        for n in [100usize, 400] {
            let pred = locally_half_prediction(&g, n, 64, 1e-12).unwrap();
            let rn = (n as f64).sqrt();
            let closed = n as f64 + rn / (2.0 * w) * (2.0 * w * rn).sin() + (3.0 + (2.0 * w * rn).cos() - w * w) / 16.0;
            assert!((pred.total.re - closed).abs() < 5.0 / rn, "n={n}: {} vs {closed}", pred.total.re);
        }
    }

    #[test]
    fn gauge_split_monomials() {
        let s = example3(0.2);
        let monos: [&[(usize, usize)]; 6] = [
            &[(0, 0)],
            &[(1, 0), (0, 1), (1, 1)],
            &[(1, 1), (1, 1)],
            &[(0, 1), (0, 1), (2, 0)],
            &[(1, 0), (1, 0), (0, 2)],
            &[(2, 0), (0, 2)],
        ];
        for m in monos {
            let r = gauge_split(m, &s, 0.5, 20.5, 64, 1e-13).unwrap();
            assert!(r.defect < 1e-9, "{m:?}: {}", r.defect);
        }
        assert!(gauge_split(&[(0, 0)], &s, 0.5, 20.5, 64, 1e-13).unwrap().delta.norm() < 1e-15);
        assert!(gauge_split(&[(2, 0), (0, 2)], &s, 0.5, 20.5, 64, 1e-13).unwrap().delta.norm() < 1e-12);
    }

    #[test]
    fn block_formula_scalar_reduction() {
        let t = 0.5;
        // x-independent scalar: beta = g, gamma_R = g~, gamma_L = -g~.
        let g = move |p: f64| DenseComplexMatrix::from_fn(1, 1, |_, _| c(2.0 * t * p.cos()));
        let gt = move |p: f64| DenseComplexMatrix::from_fn(1, 1, |_, _| C::new(0.0, 2.0 * t * p.sin()));
        let gtm = move |p: f64| DenseComplexMatrix::from_fn(1, 1, |_, _| C::new(0.0, -2.0 * t * p.sin()));
        let pred = block_boundary_formula(&g, &g, &gtm, &gt, 10, c(0.0), 64).unwrap();
        assert!((pred.total - c(0.25)).norm() < 1e-13);
        let zero = |_: f64| DenseComplexMatrix::zeros(2, 2);
        let p2 = block_boundary_formula(&g, &g, &zero, &zero, 3, c(0.7), 16);
        assert!(matches!(p2, Err(Error::Dimension(_))));
        let beta2 = |p: f64| DenseComplexMatrix::from_fn(2, 2, |i, j| if i == j { c(p.cos()) } else { c(0.0) });
        let p3 = block_boundary_formula(&beta2, &beta2, &zero, &zero, 3, c(0.7), 16).unwrap();
        assert!((p3.total - c(2.1)).norm() < 1e-15);
    }

    #[test]
    fn example3_sampled_grid_is_consistent() {
        let s = example3(0.2);
        let a = smooth_to_grid(&s, h(0.0), h(5.0), 12, 64).unwrap();
        assert!((a.coeff(h(1.0), 0).ln().re - (0.2f64).sin()).abs() < 0.3);
    }
}

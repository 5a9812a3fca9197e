//! Quadrature rules: Gauss-Legendre nodes, adaptive Gauss-Kronrod on an
//! interval, and the periodic trapezoid rule in `p`.

use crate::{Error, Real, Result, C};
use num_traits::Zero;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = T::lit(x);
        weights[i] = T::lit(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Real>(f: &mut impl FnMut(T) -> C<T>, a: T, b: T) -> (C<T>, T) {
    let half = T::lit(0.5);
    let mid = (a + b) * half;
    let hl = (b - a) * half;
    let fc = f(mid);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = hl * T::lit(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        kron = kron + s * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s * T::lit(WG[j / 2]);
        }
    }
    ((kron * hl), ((kron - gauss) * hl).norm())
}

/// Adaptive Gauss-Kronrod integral of a complex function of one variable.
pub fn integrate<T: Real>(
    mut f: impl FnMut(T) -> C<T>,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<C<T>> {
    if a == b {
        return Ok(C::zero());
    }
    let mut pieces = vec![(a, b, gk15(&mut f, a, b))];
    for _ in 0..2000 {
        let total: C<T> = pieces.iter().fold(C::zero(), |s, p| s + p.2 .0);
        let err: T = pieces.iter().map(|p| p.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(total);
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .fold((0, -T::one()), |best, (i, p)| if p.2 .1 > best.1 { (i, p.2 .1) } else { best });
        let (lo, hi, _) = pieces.swap_remove(idx);
        let mid = (lo + hi) * T::lit(0.5);
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        pieces.push((lo, mid, left));
        pieces.push((mid, hi, right));
    }
    let total: C<T> = pieces.iter().fold(C::zero(), |s, p| s + p.2 .0);
    let err: T = pieces.iter().map(|p| p.2 .1).sum();
    if err <= T::lit(1e3) * abs_tol.max(rel_tol * total.norm()) {
        Ok(total)
    } else {
        Err(Error::Quadrature(format!("estimated error {err:e} after 2000 subdivisions")))
    }
}

/// `(1/2pi) * integral over one period` by the trapezoid rule with `np` points.
pub fn circle_mean<T: Real>(np: usize, mut f: impl FnMut(T) -> C<T>) -> C<T> {
    let step = T::TAU() / T::int(np as i64);
    let mut acc = C::zero();
    for m in 0..np {
        acc = acc + f(step * T::int(m as i64));
    }
    acc / T::int(np as i64)
}

/// `(1/2pi) * integral_a^b integral dp f(x, p) dx`.
pub fn phase_space_integral<T: Real>(
    mut f: impl FnMut(T, T) -> C<T>,
    a: T,
    b: T,
    np: usize,
    tol: T,
) -> Result<C<T>> {
    integrate(|x| circle_mean(np, |p| f(x, p)), a, b, tol, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre::<f64>(6);
        let s: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_integral() {
        let v = integrate(|x: f64| C::new(x.sin(), x.exp()), 0.0, 3.0, 1e-13, 1e-13).unwrap();
        assert!((v.re - (1.0 - 3f64.cos())).abs() < 1e-12);
        assert!((v.im - (3f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn circle_mean_is_fourier_zero_mode() {
        let m = circle_mean(64, |p: f64| C::new((p.cos()).exp(), 0.0));
        // I_0(1)
        assert!((m.re - 1.2660658777520082).abs() < 1e-14);
    }
}

//! Bundled example symbols and their closed-form predictions.

use crate::finite_sections::BlockSymbol;
use crate::linalg::{expm, DenseComplexMatrix};
use crate::symbol::{HalfInt, SmoothSymbol};
use crate::wiener_hopf::TridiagonalSpec;
use crate::{Result, C};

/// Names accepted by [`lookup`].
pub const NAMES: [&str; 6] = ["tridiagonal", "example2", "example3", "example4", "block-pauli", "toeplitz-exp"];

fn c(v: f64) -> C<f64> {
    C::new(v, 0.0)
}

/// `d^k/ds^k` of `cos(w s + phase)` style pairs: cycles `f, f', -f, -f'`.
fn cycle(k: usize, f0: f64, f1: f64) -> f64 {
    [f0, f1, -f0, -f1][k % 4]
}

/// Constant tridiagonal spec `f0 = 2, f1 = 1, f_{-1} = 1/4`.
pub fn tridiagonal_constant() -> TridiagonalSpec<f64> {
    TridiagonalSpec::constant(c(2.0), c(1.0), c(0.25))
}

/// `f0 = 1 - 2 / (3 cosh(omega x))`, `f_{+-1} = 1/2`.
pub fn example2(omega: f64) -> TridiagonalSpec<f64> {
    TridiagonalSpec::new(move |x: f64| c(1.0 - 2.0 / (3.0 * (omega * x).cosh())), |_| c(0.5), |_| c(0.5))
}

/// `g(y, p) = sin y - cos y cos p` at `y = x nu`.
pub fn example3(nu: f64) -> SmoothSymbol<f64> {
    SmoothSymbol::new(format!("example3(nu={nu})"), nu, |m1, m2, y: f64, p: f64| {
        let h = if m2 == 0 { cycle(m1, y.sin(), y.cos()) } else { 0.0 };
        c(h - cycle(m1, y.cos(), -y.sin()) * cycle(m2, p.cos(), -p.sin()))
    })
}

/// `p`-average of the bulk density `D0 + D2` of [`example3`] at `y`.
pub fn example3_bulk_average(nu: f64, y: f64) -> f64 {
    let (h, h2) = (y.sin(), -y.sin());
    let (j, j1, j2) = (y.cos(), -y.sin(), -y.cos());
    h + nu * nu / 24.0 * (h * (j * j2 + j1 * j1) + j * j * h2)
}

/// `p`-average of the corner density `C0 + C1_sign` of [`example3`] at `y`.
pub fn example3_corner_average(nu: f64, y: f64, sign: f64) -> f64 {
    let (h, h1) = (y.sin(), y.cos());
    let (j, j1) = (y.cos(), -y.sin());
    j * j / 8.0 + sign * nu / 48.0 * (h1 * (j * j - 2.0) - (3.0 + 2.0 * h) * j * j1)
}

/// `g(t, p) = 1 + cos(2 omega t) - cos(omega t) cos p` in its own coordinate `t`.
pub fn example4_profile(omega: f64) -> SmoothSymbol<f64> {
    SmoothSymbol::new(format!("example4-profile(omega={omega})"), 1.0, move |m1, m2, t: f64, p: f64| {
        let w2 = 2.0 * omega;
        let a = if m2 == 0 {
            let base = if m1 == 0 { 1.0 } else { 0.0 };
            base + w2.powi(m1 as i32) * cycle(m1, (w2 * t).cos(), -(w2 * t).sin())
        } else {
            0.0
        };
        let b = omega.powi(m1 as i32) * cycle(m1, (omega * t).cos(), -(omega * t).sin());
        c(a - b * cycle(m2, p.cos(), -p.sin()))
    })
}

/// Symbol `exp(g((x - 1/2) / sqrt n, p))` of the locally-1/2 example.
pub fn example4(omega: f64, n: usize) -> SmoothSymbol<f64> {
    let nu = 1.0 / (n as f64).sqrt();
    let profile = example4_profile(omega);
    SmoothSymbol::new(format!("example4(omega={omega}, n={n})"), nu, move |m1, m2, y: f64, p: f64| {
        profile.deriv(m1, m2, y - 0.5 * nu, p)
    })
}

/// Closed-form limit `n + (sqrt n / 2w) sin(2w sqrt n) + (3 + cos(2w sqrt n) - w^2) / 16`.
pub fn example4_closed_form(omega: f64, n: usize) -> f64 {
    let r = (n as f64).sqrt();
    n as f64 + r / (2.0 * omega) * (2.0 * omega * r).sin() + (3.0 + (2.0 * omega * r).cos() - omega * omega) / 16.0
}

/// x-independent `exp(2t cos p) = exp(t (z + 1/z))`.
pub fn toeplitz_exp(t: f64) -> SmoothSymbol<f64> {
    SmoothSymbol::new(format!("toeplitz-exp(t={t})"), 1.0, move |m1, m2, _, p: f64| {
        if m1 > 0 {
            return c(0.0);
        }
        c(2.0 * t * cycle(m2, p.cos(), -p.sin()))
    })
}

/// Strong Szego limit `t^2` of [`toeplitz_exp`].
pub fn toeplitz_exp_limit(t: f64) -> f64 {
    t * t
}

/// How the Pauli vector `n(p)` is turned into a matrix symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliForm {
    /// `exp(n^+ . sigma) exp(n^- . sigma)`.
    Factored,
    /// `exp(n . sigma)`.
    Exponential,
}

/// Pauli example parameters: `n(p) = eps (cos p, gamma sin p, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pauli {
    pub eps: f64,
    pub gamma: f64,
    pub h: f64,
    pub form: PauliForm,
}

fn sigma_dot(v: [C<f64>; 3]) -> DenseComplexMatrix<f64> {
    let i = C::new(0.0, 1.0);
    let m = [[v[2], v[0] - i * v[1]], [v[0] + i * v[1], -v[2]]];
    DenseComplexMatrix::from_fn(2, 2, |r, s| m[r][s])
}

impl Pauli {
    pub fn new(eps: f64, gamma: f64, h: f64) -> Self {
        Self { eps, gamma, h, form: PauliForm::Factored }
    }

    /// `n^+` (modes `k >= 0`) and `n^-` (modes `k < 0`).
    pub fn split(&self, p: f64) -> ([C<f64>; 3], [C<f64>; 3]) {
        let e = self.eps;
        let zp = C::from_polar(0.5, p);
        let zm = C::from_polar(0.5, -p);
        let i = C::new(0.0, 1.0);
        let plus = [zp * e, -i * zp * (e * self.gamma), c(e * self.h)];
        let minus = [zm * e, i * zm * (e * self.gamma), c(0.0)];
        (plus, minus)
    }

    pub fn matrix(&self, p: f64) -> Result<DenseComplexMatrix<f64>> {
        let (np, nm) = self.split(p);
        match self.form {
            PauliForm::Factored => Ok(expm(&sigma_dot(np))?.matmul(&expm(&sigma_dot(nm))?)),
            PauliForm::Exponential => {
                let full = [np[0] + nm[0], np[1] + nm[1], np[2] + nm[2]];
                expm(&sigma_dot(full))
            }
        }
    }

    /// Sampled block symbol on `[x_min, x_max]` (x-independent).
    pub fn block_symbol(&self, x_min: HalfInt, x_max: HalfInt, band: usize, n_p: usize) -> Result<BlockSymbol<f64>> {
        let samples: Vec<DenseComplexMatrix<f64>> = (0..n_p)
            .map(|m| self.matrix(std::f64::consts::TAU * m as f64 / n_p as f64))
            .collect::<Result<_>>()?;
        let step = std::f64::consts::TAU / n_p as f64;
        BlockSymbol::sample(
            2,
            |_, p: f64| samples[((p / step).round() as usize) % n_p].clone(),
            x_min,
            x_max,
            band,
            n_p,
        )
    }

    /// Perturbative limit `(eps^2 / 2)(1 + gamma^2 + 2 h gamma eps)`.
    pub fn prediction(&self) -> f64 {
        let e = self.eps;
        0.5 * e * e * (1.0 + self.gamma * self.gamma + 2.0 * self.h * self.gamma * e)
    }
}

/// A catalogue entry with default parameters.
#[derive(Debug, Clone)]
pub enum Entry {
    Tridiagonal { omega: Option<f64> },
    Smooth { name: &'static str, symbol: SmoothSymbol<f64> },
    Block(Pauli),
}

/// Resolves a catalogue name. `param` is omega, t, nu or eps depending on the entry;
/// `n` feeds the locally-1/2 scaling.
pub fn lookup(name: &str, param: Option<f64>, n: usize) -> Option<Entry> {
    Some(match name {
        "tridiagonal" => Entry::Tridiagonal { omega: None },
        "example2" => Entry::Tridiagonal { omega: Some(param.unwrap_or(0.5)) },
        "example3" => Entry::Smooth { name: "example3", symbol: example3(param.unwrap_or(0.1)) },
        "example4" => Entry::Smooth { name: "example4", symbol: example4(param.unwrap_or(1.0), n.max(1)) },
        "toeplitz-exp" => Entry::Smooth { name: "toeplitz-exp", symbol: toeplitz_exp(param.unwrap_or(0.5)) },
        "block-pauli" => Entry::Block(Pauli::new(param.unwrap_or(0.1), 0.5, 0.3)),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_sections::{build_block_tn, logdet};

    fn h(v: f64) -> HalfInt {
        HalfInt::from_f64(v).unwrap()
    }

    #[test]
    fn pauli_split_sums_to_vector() {
        let pl = Pauli::new(0.3, 0.5, 0.3);
        for p in [0.0, 0.7, 2.9] {
            let (a, b) = pl.split(p);
            let want = [0.3 * f64::cos(p), 0.15 * f64::sin(p), 0.09];
            for k in 0..3 {
                assert!((a[k] + b[k] - c(want[k])).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn pauli_forms_determinant_one() {
        for form in [PauliForm::Factored, PauliForm::Exponential] {
            let pl = Pauli { form, ..Pauli::new(0.2, 0.5, 0.3) };
            let m = pl.matrix(1.1).unwrap();
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            assert!((det - c(1.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn pauli_logdet_scales_like_eps_squared() {
        let pl = Pauli::new(0.1, 0.5, 0.3);
        let a = pl.block_symbol(h(0.0), h(41.0), 12, 64).unwrap();
        let ld = logdet(&build_block_tn(&a, 40).unwrap()).log();
        assert!(ld.re.is_finite());
        assert!((ld.re - pl.prediction()).abs() < 0.2 * pl.prediction());
    }

    #[test]
    fn example4_offset() {
        let s = example4(1.0, 100);
        let prof = example4_profile(1.0);
        let v = s.dx(0, 0, 0.5, 0.3);
        assert!((v - prof.deriv(0, 0, 0.0, 0.3)).norm() < 1e-15);
        let d = s.dx(1, 0, 10.5, 0.3);
        assert!((d - prof.deriv(1, 0, 1.0, 0.3) * 0.1).norm() < 1e-14);
    }

    #[test]
    fn lookup_names() {
        for n in NAMES {
            assert!(lookup(n, None, 16).is_some(), "{n}");
        }
        assert!(lookup("nope", None, 16).is_none());
    }
}

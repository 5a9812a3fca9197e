//! Finite matrices built from symbols and the dense determinant oracle.

use crate::linalg::{DenseComplexMatrix, LogDet, MatrixKind};
use crate::moyal::laurent_section;
use crate::symbol::{HalfInt, SymbolGrid};
use crate::wiener_hopf::{FactorPair, Side};
use crate::{fourier, Error, Real, Result, C};
use num_traits::{One, Zero};
use serde::Serialize;

/// `(T_n)_{jk} = (a_{(j+k)/2})_{j-k}`, `j, k = 1..n`.
pub fn build_tn<T: Real>(a: &SymbolGrid<T>, n: usize) -> Result<DenseComplexMatrix<T>> {
    if n == 0 {
        return Err(Error::Input("n must be positive".into()));
    }
    let need_lo = HalfInt::int(1);
    let need_hi = HalfInt::int(n as i64);
    if !a.contains(need_lo) || !a.contains(need_hi) {
        return Err(Error::Range(format!(
            "grid [{}, {}] does not cover [1, {n}]",
            a.x_min(),
            a.x_max()
        )));
    }
    let band = a.band() as i64;
    let mut m = DenseComplexMatrix::zeros(n, n).with_kind(MatrixKind::StarToeplitz);
    for j in 0..n {
        for k in 0..n {
            let d = j as i64 - k as i64;
            if d.abs() <= band {
                m[(j, k)] = a.coeff(HalfInt((j + k + 2) as i64), d);
            }
        }
    }
    Ok(m)
}

/// Star-Hankel section `H_{jk} = (a_{(j-k+1)/2})_{j+k-1}`, `j <= rows`,
/// `k <= cols`.
pub fn build_hankel<T: Real>(a: &SymbolGrid<T>, rows: usize, cols: usize) -> Result<DenseComplexMatrix<T>> {
    let band = a.band() as i64;
    let mut m = DenseComplexMatrix::zeros(rows, cols).with_kind(MatrixKind::HankelProduct);
    for j in 1..=rows as i64 {
        for k in 1..=cols as i64 {
            let d = j + k - 1;
            if d > band {
                continue;
            }
            let x = HalfInt(j - k + 1);
            m[((j - 1) as usize, (k - 1) as usize)] = a.try_coeff(x, d)?;
        }
    }
    Ok(m)
}

/// Dense LU log-determinant.
pub fn logdet<T: Real>(m: &DenseComplexMatrix<T>) -> LogDet<T> {
    m.logdet()
}

/// `log det T_n(a)` for each `n` (sequential; callers parallelize).
pub fn logdet_sweep<T: Real>(a: &SymbolGrid<T>, ns: &[usize]) -> Result<Vec<(usize, LogDet<T>)>> {
    ns.iter().map(|&n| Ok((n, logdet(&build_tn(a, n)?)))).collect()
}

/// Smallest `N` with `rho^N < tol`.
pub fn truncation_size<T: Real>(rho: T, tol: T) -> usize {
    if !(rho > T::zero()) {
        return 8;
    }
    if !(rho < T::one()) {
        return 400;
    }
    let n = (tol.ln() / rho.ln()).ceil().to_f64_lossy();
    (n.max(8.0) as usize).min(400)
}

/// Lattice range `[lo, hi]` the factor grids must cover for
/// [`bocg_evaluate`] at size `n`, Hankel truncation `trunc` and factor band.
pub fn bocg_required_range(n: usize, trunc: usize, band: usize) -> (HalfInt, HalfInt) {
    let lo = 1 - (trunc + band) as i64;
    let hi = (n + trunc + band) as i64;
    (HalfInt::int(lo), HalfInt::int(hi))
}

/// Every term of the identity
/// `det T_n(a) = det(I - H_n H'_n) / det(I - H_0 H'_0) * prod_j (a_{+,j}^L)_0 (a_{-,j}^L)_0`.
#[derive(Debug, Clone, Serialize)]
pub struct BocgReport<T: Real> {
    pub n: usize,
    pub lhs: LogDet<T>,
    pub numerator: C<T>,
    pub denominator: C<T>,
    pub log_diagonal_product: C<T>,
    pub log_rhs: C<T>,
    /// `|rhs / lhs - 1|`.
    pub residual: T,
    pub truncation: usize,
    /// Largest Hankel entry on the truncation boundary.
    pub tail: T,
    /// Fitted decay of the `k > 0` coefficients of `b = a_-^L * (a_+^R)^{-1}`.
    pub b_decay: Option<T>,
    /// Fitted decay of the `k < 0` coefficients of `b^{-1}`.
    pub b_inv_decay: Option<T>,
}

/// Finite sections of `L(b)` and `L(b^{-1})` on the integer window starting
/// at `lo`, built from factor sections without forming `b` as a symbol.
struct BSections<T: Real> {
    lo: i64,
    b: DenseComplexMatrix<T>,
    b_inv: DenseComplexMatrix<T>,
}

impl<T: Real> BSections<T> {
    fn new(left: &FactorPair<T>, right: &FactorPair<T>, lo: i64, hi: i64) -> Result<Self> {
        if left.side != Side::Left || right.side != Side::Right {
            return Err(Error::Input("expected (left, right) factor pairs".into()));
        }
        let size = (hi - lo + 1) as usize;
        let first = HalfInt::int(lo);
        let sec = |s: &SymbolGrid<T>| laurent_section(s, first, size);
        let (inv_plus, rc1) = sec(&right.plus)?.inverse()?;
        let (inv_minus, rc2) = sec(&right.minus)?.inverse()?;
        if rc1.min(rc2) < T::lit(1e-14) {
            return Err(Error::Singular(format!("right factor section ill-conditioned (rcond {:e})", rc1.min(rc2))));
        }
        let b = sec(&left.minus)?.matmul(&inv_plus);
        let b_inv = inv_minus.matmul(&sec(&left.plus)?);
        Ok(Self { lo, b, b_inv })
    }

    fn b_at(&self, j: i64, k: i64) -> C<T> {
        self.b[((j - self.lo) as usize, (k - self.lo) as usize)]
    }

    fn b_inv_at(&self, j: i64, k: i64) -> C<T> {
        self.b_inv[((j - self.lo) as usize, (k - self.lo) as usize)]
    }

    /// `det(I - H(z^{-n} b) H((b^{-1})~ z^{-n}))` on `trunc x trunc` sections,
    /// plus the largest boundary entry.
    fn hankel_det(&self, n: usize, trunc: usize) -> (C<T>, T) {
        let n = n as i64;
        let h1 = DenseComplexMatrix::from_fn(trunc, trunc, |j, k| self.b_at(j as i64 + 1 + n, -(k as i64)));
        let h2 = DenseComplexMatrix::from_fn(trunc, trunc, |j, k| self.b_inv_at(-(j as i64), n + k as i64 + 1));
        let mut tail = T::zero();
        for i in 0..trunc {
            for (r, c) in [(i, trunc - 1), (trunc - 1, i)] {
                tail = tail.max(h1[(r, c)].norm()).max(h2[(r, c)].norm());
            }
        }
        let prod = h1.matmul(&h2);
        let eye = DenseComplexMatrix::identity(trunc);
        (eye.sub(&prod).logdet().value(), tail)
    }

    fn decays(&self) -> (Option<T>, Option<T>) {
        let mid = (self.b.n() / 2) as i64 + self.lo;
        let span = (self.b.n() / 2 - 1) as i64;
        let bs: Vec<(f64, f64)> = (1..span).map(|d| (d as f64, self.b_at(mid + d, mid).norm().to_f64_lossy())).collect();
        let cs: Vec<(f64, f64)> = (1..span).map(|d| (d as f64, self.b_inv_at(mid, mid + d).norm().to_f64_lossy())).collect();
        (fit_geometric(&bs).map(T::lit), fit_geometric(&cs).map(T::lit))
    }
}

/// Least-squares fit of `y ~ C r^x`; points below `1e-13 max y` are noise.
pub fn fit_geometric(points: &[(f64, f64)]) -> Option<f64> {
    let top = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > top * 1e-13 && p.1 > 1e-300 && p.1.is_finite())
        .map(|p| (p.0, p.1.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| (sxy / sxx).exp())
}

/// Evaluates both sides of the BOCG identity at size `n`.
pub fn bocg_evaluate<T: Real>(
    a: &SymbolGrid<T>,
    n: usize,
    left: &FactorPair<T>,
    right: &FactorPair<T>,
    trunc: usize,
) -> Result<BocgReport<T>> {
    let band = left.plus.band().max(left.minus.band()).max(right.plus.band()).max(right.minus.band());
    let (lo, hi) = bocg_required_range(n, trunc, band);
    for f in [&left.plus, &left.minus, &right.plus, &right.minus] {
        if !f.contains(lo) || !f.contains(hi) {
            return Err(Error::Range(format!(
                "factor grid [{}, {}] does not cover [{lo}, {hi}]",
                f.x_min(),
                f.x_max()
            )));
        }
    }
    let secs = BSections::new(left, right, lo.0 / 2, hi.0 / 2)?;
    let (numerator, tail_n) = secs.hankel_det(n, trunc);
    let (denominator, tail_0) = secs.hankel_det(0, trunc);
    let mut log_diag = C::<T>::zero();
    for j in 1..=n as i64 {
        let x = HalfInt::int(j);
        log_diag = log_diag + (left.plus.coeff(x, 0) * left.minus.coeff(x, 0)).ln();
    }
    let lhs = logdet(&build_tn(a, n)?);
    let log_rhs = numerator.ln() - denominator.ln() + log_diag;
    let residual = ((log_rhs - lhs.log()).exp() - C::<T>::one()).norm();
    let (b_decay, b_inv_decay) = secs.decays();
    Ok(BocgReport {
        n,
        lhs,
        numerator,
        denominator,
        log_diagonal_product: log_diag,
        log_rhs,
        residual,
        truncation: trunc,
        tail: tail_n.max(tail_0),
        b_decay,
        b_inv_decay,
    })
}

/// `|numerator - 1|` across `n` and the fitted geometric rate per unit `n`.
#[derive(Debug, Clone, Serialize)]
pub struct HankelProbe<T: Real> {
    pub points: Vec<(usize, T)>,
    pub rate: Option<f64>,
    /// `b_decay * b_inv_decay`, the rate the numerator bound predicts.
    pub predicted_rate: Option<f64>,
}

pub fn hankel_decay_probe<T: Real>(
    left: &FactorPair<T>,
    right: &FactorPair<T>,
    ns: &[usize],
    trunc: usize,
) -> Result<HankelProbe<T>> {
    let band = left.plus.band().max(left.minus.band()).max(right.plus.band()).max(right.minus.band());
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let (lo, hi) = bocg_required_range(n_max, trunc, band);
    let secs = BSections::new(left, right, lo.0 / 2, hi.0 / 2)?;
    let points: Vec<(usize, T)> =
        ns.iter().map(|&n| (n, (secs.hankel_det(n, trunc).0 - C::<T>::one()).norm())).collect();
    let fit: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n as f64, v.to_f64_lossy())).collect();
    let (bd, cd) = secs.decays();
    Ok(HankelProbe {
        points,
        rate: fit_geometric(&fit),
        predicted_rate: bd.zip(cd).map(|(b, c)| b.to_f64_lossy() * c.to_f64_lossy()),
    })
}

/// `kappa x kappa` matrix-valued symbol stored entrywise.
#[derive(Debug, Clone)]
pub struct BlockSymbol<T: Real> {
    kappa: usize,
    entries: Vec<SymbolGrid<T>>,
}

impl<T: Real> BlockSymbol<T> {
    /// `entries` in row-major order, all on the same grid.
    pub fn new(kappa: usize, entries: Vec<SymbolGrid<T>>) -> Result<Self> {
        if kappa == 0 || entries.len() != kappa * kappa {
            return Err(Error::Dimension(format!("{} entries for kappa = {kappa}", entries.len())));
        }
        let (lo, hi) = (entries[0].x_min(), entries[0].x_max());
        if entries.iter().any(|e| e.x_min() != lo || e.x_max() != hi) {
            return Err(Error::Dimension("block entries on different grids".into()));
        }
        Ok(Self { kappa, entries })
    }

    /// Samples a matrix-valued function `f(x, p)` (returns `kappa x kappa`).
    pub fn sample(
        kappa: usize,
        f: impl Fn(T, T) -> DenseComplexMatrix<T>,
        x_min: HalfInt,
        x_max: HalfInt,
        band: usize,
        n_p: usize,
    ) -> Result<Self> {
        if n_p < 4 * band + 4 {
            return Err(Error::Input(format!("N_p = {n_p} below 4K + 4")));
        }
        let mut entries = vec![SymbolGrid::zeros(x_min, x_max, band); kappa * kappa];
        let step = T::TAU() / T::int(n_p as i64);
        for x in entries[0].xs().collect::<Vec<_>>() {
            let mut samples = vec![Vec::with_capacity(n_p); kappa * kappa];
            for m in 0..n_p {
                let v = f(x.value(), step * T::int(m as i64));
                if v.rows() != kappa || v.cols() != kappa {
                    return Err(Error::Dimension("block function returned wrong shape".into()));
                }
                if !v.is_finite() {
                    return Err(Error::Input(format!("non-finite block value at x = {x}")));
                }
                for (i, s) in samples.iter_mut().enumerate() {
                    s.push(v[(i / kappa, i % kappa)]);
                }
            }
            for (e, s) in entries.iter_mut().zip(&samples) {
                for (idx, c) in fourier::coefficients(s, band).into_iter().enumerate() {
                    e.set(x, idx as i64 - band as i64, c);
                }
            }
        }
        for e in entries.iter_mut() {
            e.refit_decay();
        }
        Self::new(kappa, entries)
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn entry(&self, r: usize, s: usize) -> &SymbolGrid<T> {
        &self.entries[r * self.kappa + s]
    }
}

/// Block star-Toeplitz matrix: block `(l, m)` (`1 <= l, m <= n`) holds the
/// `(l - m)`-th coefficient of `a_{(l+m)/2}`.
pub fn build_block_tn<T: Real>(a: &BlockSymbol<T>, n: usize) -> Result<DenseComplexMatrix<T>> {
    let kappa = a.kappa();
    if kappa == 1 {
        return build_tn(a.entry(0, 0), n);
    }
    let blocks: Vec<DenseComplexMatrix<T>> = a.entries.iter().map(|e| build_tn(e, n)).collect::<Result<_>>()?;
    let mut m = DenseComplexMatrix::zeros(n * kappa, n * kappa).with_kind(MatrixKind::Block);
    for l in 0..n {
        for q in 0..n {
            for r in 0..kappa {
                for s in 0..kappa {
                    m[(l * kappa + r, q * kappa + s)] = blocks[r * kappa + s][(l, q)];
                }
            }
        }
    }
    Ok(m)
}

/// Magic bytes of the binary matrix export.
pub const MATRIX_MAGIC: [u8; 8] = *b"SZMATRX1";

/// Metadata written next to an exported matrix.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixSidecar {
    pub schema: &'static str,
    pub kind: MatrixKind,
    pub kappa: u32,
    pub n: u32,
    pub rows: usize,
    pub cols: usize,
    pub layout: &'static str,
    pub scalar: &'static str,
    pub header_bytes: usize,
}

/// Column-major `(re, im)` little-endian `f64` pairs after a 16-byte
/// header: magic, `kappa` (u32), `n` (u32).
pub fn encode_matrix<T: Real>(m: &DenseComplexMatrix<T>, kappa: u32) -> (Vec<u8>, MatrixSidecar) {
    let n = (m.rows() as u32) / kappa.max(1);
    let mut out = Vec::with_capacity(16 + 16 * m.rows() * m.cols());
    out.extend_from_slice(&MATRIX_MAGIC);
    out.extend_from_slice(&kappa.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    for z in m.column_major() {
        out.extend_from_slice(&z.re.to_f64_lossy().to_le_bytes());
        out.extend_from_slice(&z.im.to_f64_lossy().to_le_bytes());
    }
    let side = MatrixSidecar {
        schema: "starszego/1",
        kind: m.kind,
        kappa,
        n,
        rows: m.rows(),
        cols: m.cols(),
        layout: "column-major",
        scalar: "complex-f64-le",
        header_bytes: 16,
    };
    (out, side)
}

/// Inverse of [`encode_matrix`] for square exports.
pub fn decode_matrix(bytes: &[u8]) -> Result<(DenseComplexMatrix<f64>, u32)> {
    if bytes.len() < 16 || bytes[..8] != MATRIX_MAGIC {
        return Err(Error::Input("not a matrix export".into()));
    }
    let u = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let (kappa, n) = (u(8), u(12));
    let dim = (kappa * n) as usize;
    if bytes.len() != 16 + 16 * dim * dim {
        return Err(Error::Input("truncated matrix export".into()));
    }
    let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let m = DenseComplexMatrix::from_fn(dim, dim, |r, c| {
        let off = 16 + 16 * (c * dim + r);
        C::new(f(off), f(off + 8))
    });
    Ok((m, kappa))
}

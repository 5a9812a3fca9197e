//! Command implementations. Each sweep point is computed independently and
//! the rows are sorted by `(n, nu, param)` before reporting.

use crate::report::{num, Check, Report};
use crate::symbols::{Instance, SmoothKind, SymbolSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use starszego::asymptotics::{
    locally_half_prediction, semiclassical_prediction, shifted_weak_ratio_prediction, strong_formula,
    weak_ratio_oracle, weak_ratio_prediction, Orders,
};
use starszego::catalogue;
use starszego::finite_sections::{
    bocg_evaluate, build_block_tn, build_tn, encode_matrix, fit_geometric, logdet, truncation_size,
};
use starszego::moyal::{laurent_section, star_product, BchOrder, WindowSpec};
use starszego::symbol::{SymbolGrid, HalfInt};
use starszego::wiener_hopf::{classical_factors, numeric_factorize, tridiagonal_factorize, FactorPair, Side};
use starszego::{Error, Matrix, Result, C};
use std::path::PathBuf;

/// Everything a command needs besides its name.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub symbol: Option<SymbolSpec>,
    pub ns: Vec<usize>,
    pub nus: Vec<f64>,
    pub params: Vec<f64>,
    pub orders: Orders,
    pub tolerance: Option<f64>,
    pub assert: bool,
    pub jobs: usize,
    pub seed: u64,
    pub bch: u8,
    pub export: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    n: usize,
    nu: Option<f64>,
    param: Option<f64>,
}

impl RunConfig {
    fn spec(&self) -> Result<&SymbolSpec> {
        self.symbol.as_ref().ok_or_else(|| Error::Input("--symbol is required for this command".into()))
    }

    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    fn points(&self) -> Result<Vec<Point>> {
        let spec = self.spec()?;
        let nus: Vec<Option<f64>> = if spec.uses_nu() {
            self.nus.iter().map(|&v| Some(v)).collect()
        } else {
            vec![None]
        };
        let params: Vec<Option<f64>> = if self.params.is_empty() {
            vec![spec.default_param]
        } else {
            self.params.iter().map(|&v| Some(v)).collect()
        };
        let mut out = Vec::new();
        for &n in &self.ns {
            for &nu in &nus {
                for &param in &params {
                    out.push(Point { n, nu, param });
                }
            }
        }
        Ok(out)
    }

    fn base_report(&self, command: &str, columns: Vec<&'static str>) -> Result<Report> {
        let spec = self.spec()?;
        let mut r = Report::new(command, &spec.name, columns);
        r.assert_enabled = self.assert;
        r.config.insert("n".into(), json!(self.ns));
        if spec.uses_nu() {
            r.config.insert("nu".into(), Value::Array(self.nus.iter().map(|&v| num(v)).collect()));
        }
        r.config.insert("param".into(), Value::Array(self.params.iter().map(|&v| num(v)).collect()));
        r.config.insert("grid".into(), json!({"K": spec.grid.band, "N_p": spec.grid.n_p}));
        Ok(r)
    }

    /// Evaluates `f` at every point on a pool of `jobs` workers; rows come back
    /// in `(n, nu, param)` order.
    fn sweep<R: Send>(&self, f: impl Fn(&Point) -> Result<R> + Sync) -> Result<Vec<(Point, R)>> {
        let mut points = self.points()?;
        points.sort_by(|a, b| {
            (a.n, a.nu.unwrap_or(0.0), a.param.unwrap_or(0.0))
                .partial_cmp(&(b.n, b.nu.unwrap_or(0.0), b.param.unwrap_or(0.0)))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| Error::Input(format!("worker pool: {e}")))?;
        let results: Vec<Result<R>> = pool.install(|| points.par_iter().map(&f).collect());
        points.into_iter().zip(results).map(|(p, r)| r.map(|v| (p, v))).collect()
    }

    fn instance(&self, p: &Point) -> Result<Instance> {
        self.spec()?.instance(p.n, p.nu.unwrap_or(0.1), p.param)
    }
}

fn h(v: i64) -> HalfInt {
    HalfInt::int(v)
}

fn opt(v: Option<f64>) -> Value {
    v.map(num).unwrap_or(Value::Null)
}

fn head(p: &Point) -> Vec<Value> {
    vec![json!(p.n), opt(p.nu), opt(p.param)]
}

/// Factor window wide enough for edge contamination below 1e-14 at decay 0.6.
fn default_window() -> WindowSpec<f64> {
    WindowSpec::for_decay(0.6, 1e-14)
}

/// Left and right factors on a grid covering `[lo, hi]`: closed forms for
/// tridiagonal specs, windowed numerics otherwise.
fn factor_pair(inst: &Instance, lo: i64, hi: i64, cfg: &RunConfig) -> Result<(SymbolGrid<f64>, FactorPair<f64>, FactorPair<f64>)> {
    let grid = cfg.spec()?.grid;
    match inst {
        Instance::Tridiagonal(spec) => {
            let a = inst.grid(h(lo), h(hi), &grid)?;
            let l = tridiagonal_factorize(spec, Side::Left, h(lo), h(hi), 1e-12)?;
            let r = tridiagonal_factorize(spec, Side::Right, h(lo), h(hi), 1e-12)?;
            Ok((a, l, r))
        }
        Instance::Pauli(_) => Err(Error::Input("block symbols have no scalar factorization".into())),
        _ => {
            let win = default_window();
            let w = win.margin as i64;
            let a = inst.grid(h(lo - w), h(hi + w), &grid)?;
            let l = numeric_factorize(&a, Side::Left, &win)?;
            let r = numeric_factorize(&a, Side::Right, &win)?;
            Ok((a, l, r))
        }
    }
}

fn write_matrix(path: &PathBuf, m: &Matrix, kappa: u32) -> Result<()> {
    let (bytes, sidecar) = encode_matrix(m, kappa);
    let io = |e: std::io::Error| Error::Input(format!("{}: {e}", path.display()));
    std::fs::write(path, bytes).map_err(io)?;
    let side = serde_json::to_vec_pretty(&sidecar).map_err(|e| Error::Input(e.to_string()))?;
    let mut sp = path.clone().into_os_string();
    sp.push(".json");
    std::fs::write(PathBuf::from(sp), side).map_err(io)
}

pub fn logdet_cmd(cfg: &RunConfig) -> Result<Report> {
    let mut rep = cfg.base_report("logdet", vec!["n", "nu", "param", "log_abs", "phase", "pivot_min"])?;
    if cfg.export.is_some() && cfg.points()?.len() != 1 {
        return Err(Error::Input("--export needs a single sweep point".into()));
    }
    let grid = cfg.spec()?.grid;
    let rows = cfg.sweep(|p| {
        let inst = cfg.instance(p)?;
        let (m, kappa) = match &inst {
            Instance::Pauli(pl) => (build_block_tn(&pl.block_symbol(h(0), h(p.n as i64 + 1), 12, 64)?, p.n)?, 2),
            _ => (build_tn(&inst.grid(h(0), h(p.n as i64 + 1), &grid)?, p.n)?, 1),
        };
        if let Some(path) = &cfg.export {
            write_matrix(path, &m, kappa)?;
        }
        let ld = logdet(&m);
        Ok((inst, ld))
    })?;
    for (p, (_, ld)) in &rows {
        let mut r = head(p);
        r.extend([num(ld.log_abs), num(ld.phase), num(ld.pivot_min)]);
        rep.rows.push(r);
    }
    if cfg.assert {
        let (p, (inst, ld)) = rows.last().ok_or_else(|| Error::Input("empty sweep".into()))?;
        match inst {
            Instance::Smooth { kind: SmoothKind::ToeplitzExp, param, .. } => {
                let limit = catalogue::toeplitz_exp_limit(*param);
                rep.checks.push(Check::new(format!("|log_abs - t^2| at n={}", p.n), (ld.log_abs - limit).abs(), cfg.tol(1e-6)));
            }
            _ => return Err(Error::Input(format!("no reference log-determinant for {}", rep.symbol))),
        }
    }
    Ok(rep)
}

struct Compared {
    oracle: C<f64>,
    prediction: C<f64>,
    closed: Option<f64>,
    budget: Option<f64>,
}

fn compare_point(cfg: &RunConfig, p: &Point) -> Result<Compared> {
    let inst = cfg.instance(p)?;
    let grid = cfg.spec()?.grid;
    let n = p.n;
    let oracle_scalar = |inst: &Instance| -> Result<C<f64>> {
        Ok(logdet(&build_tn(&inst.grid(h(0), h(n as i64 + 1), &grid)?, n)?).log())
    };
    Ok(match &inst {
        Instance::Tridiagonal(_) | Instance::Table(_) => {
            let win = default_window();
            let pad = 3 * win.margin as i64 + 4;
            let (a, l, r) = factor_pair(&inst, 1 - pad, n as i64 + pad, cfg)?;
            let pred = strong_formula(&a, n, &l, &r, BchOrder::new(cfg.bch)?, &win)?;
            let budget = pred.budgets.get("phi_truncation").copied();
            Compared { oracle: oracle_scalar(&inst)?, prediction: pred.total, closed: None, budget }
        }
        Instance::Smooth { kind, symbol, param } => {
            let (prediction, closed) = match kind {
                SmoothKind::Example4 => {
                    let pr = locally_half_prediction(&catalogue::example4_profile(*param), n, 128, 1e-10)?;
                    (pr.total, Some(catalogue::example4_closed_form(*param, n)))
                }
                SmoothKind::ToeplitzExp => {
                    let pr = semiclassical_prediction(symbol, n, cfg.orders, 256, 1e-10)?;
                    (pr.total, Some(catalogue::toeplitz_exp_limit(*param)))
                }
                SmoothKind::Example3 => (semiclassical_prediction(symbol, n, cfg.orders, 256, 1e-10)?.total, None),
            };
            Compared { oracle: oracle_scalar(&inst)?, prediction, closed, budget: None }
        }
        Instance::Pauli(pl) => {
            let m = build_block_tn(&pl.block_symbol(h(0), h(n as i64 + 1), 12, 64)?, n)?;
            let pred = pl.prediction();
            Compared { oracle: logdet(&m).log(), prediction: C::new(pred, 0.0), closed: Some(pred), budget: None }
        }
    })
}

/// Log-log slopes and consecutive ratios of residuals along one sweep axis.
fn fits(points: &[(Point, f64)], vary_n: bool) -> Vec<Value> {
    let mut groups: Vec<(Option<f64>, Option<f64>, usize, Vec<(f64, f64)>)> = Vec::new();
    for (p, res) in points {
        let x = if vary_n { p.n as f64 } else { p.nu.unwrap_or(f64::NAN) };
        let key = if vary_n { (p.nu, p.param, 0) } else { (None, p.param, p.n) };
        match groups.iter_mut().find(|g| (g.0, g.1, g.2) == key) {
            Some(g) => g.3.push((x, *res)),
            None => groups.push((key.0, key.1, key.2, vec![(x, *res)])),
        }
    }
    groups
        .into_iter()
        .filter(|g| g.3.len() >= 2)
        .map(|(nu, param, n, mut pts)| {
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            let logs: Vec<(f64, f64)> = pts.iter().filter(|q| q.1 > 0.0).map(|q| (q.0.ln(), q.1.ln())).collect();
            let slope = least_squares_slope(&logs);
            let ratios: Vec<Value> = pts.windows(2).map(|w| num(w[0].1 / w[1].1)).collect();
            let mut v = json!({"vary": if vary_n { "n" } else { "nu" }, "param": opt(param), "slope": opt(slope), "ratios": ratios});
            if vary_n {
                v["nu"] = opt(nu);
            } else {
                v["n"] = json!(n);
            }
            v
        })
        .collect()
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |s, p| (s.0 + p.0, s.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn compare_cmd(cfg: &RunConfig) -> Result<Report> {
    let cols = vec!["n", "nu", "param", "oracle_re", "oracle_im", "prediction_re", "prediction_im", "residual", "closed_form", "budget"];
    let mut rep = cfg.base_report("compare", cols)?;
    rep.config.insert("orders".into(), json!(cfg.orders));
    let rows = cfg.sweep(|p| compare_point(cfg, p))?;
    let mut residuals = Vec::new();
    let tol = cfg.tol(5e-2);
    for (p, c) in &rows {
        let res = (c.oracle - c.prediction).norm();
        residuals.push((*p, res));
        let mut r = head(p);
        r.extend([
            num(c.oracle.re),
            num(c.oracle.im),
            num(c.prediction.re),
            num(c.prediction.im),
            num(res),
            opt(c.closed),
            opt(c.budget),
        ]);
        rep.rows.push(r);
        if cfg.assert {
            rep.checks.push(Check::new(format!("residual n={} nu={:?} param={:?}", p.n, p.nu, p.param), res, tol));
        }
    }
    let mut all = fits(&residuals, true);
    if cfg.spec()?.uses_nu() {
        all.extend(fits(&residuals, false));
    }
    rep.summary.insert("fits".into(), Value::Array(all));
    Ok(rep)
}

pub fn bocg_cmd(cfg: &RunConfig) -> Result<Report> {
    let cols = vec!["n", "nu", "param", "log_lhs_re", "log_lhs_im", "log_rhs_re", "log_rhs_im", "residual", "numerator_re", "numerator_im", "truncation", "tail"];
    let mut rep = cfg.base_report("bocg", cols)?;
    let rows = cfg.sweep(|p| {
        let inst = cfg.instance(p)?;
        let trunc = truncation_size(0.6, 1e-16).max(30);
        let win = default_window();
        let mut pad = trunc as i64 + 2 * win.margin as i64 + 4;
        let mut last = None;
        for _ in 0..3 {
            let (a, l, r) = factor_pair(&inst, 1 - pad, p.n as i64 + pad, cfg)?;
            match bocg_evaluate(&a, p.n, &l, &r, trunc) {
                Err(Error::Range(msg)) => {
                    last = Some(Error::Range(msg));
                    pad *= 2;
                }
                other => return other,
            }
        }
        Err(last.unwrap_or_else(|| Error::Range("factor grid too small".into())))
    })?;
    let tol = cfg.tol(1e-8);
    let mut decay = Vec::new();
    for (p, b) in &rows {
        let mut r = head(p);
        r.extend([
            num(b.lhs.log_abs),
            num(b.lhs.phase),
            num(b.log_rhs.re),
            num(b.log_rhs.im),
            num(b.residual),
            num(b.numerator.re),
            num(b.numerator.im),
            json!(b.truncation),
            num(b.tail),
        ]);
        rep.rows.push(r);
        decay.push((p.n as f64, (b.numerator - C::new(1.0, 0.0)).norm()));
        if cfg.assert {
            rep.checks.push(Check::new(format!("BOCG residual n={}", p.n), b.residual, tol));
        }
    }
    if let Some((_, b)) = rows.last() {
        rep.summary.insert("numerator_rate".into(), opt(fit_geometric(&decay)));
        rep.summary.insert("predicted_rate".into(), opt(b.b_decay.zip(b.b_inv_decay).map(|(x, y)| x * y)));
    }
    Ok(rep)
}

pub fn factorize_cmd(cfg: &RunConfig) -> Result<Report> {
    let mut rep = cfg.base_report("factorize", vec!["n", "nu", "param", "side", "factor", "k", "re", "im"])?;
    let tol = cfg.tol(1e-10);
    let rows = cfg.sweep(|p| {
        let inst = cfg.instance(p)?;
        let x = p.n as i64;
        let pad = 4 * default_window().margin as i64 + 8;
        let (a, l, r) = factor_pair(&inst, x - pad, x + pad, cfg)?;
        let mut defects = vec![("reconstruction_left", l.residual), ("reconstruction_right", r.residual)];
        if let Instance::Tridiagonal(_) = inst {
            let win = default_window();
            let nl = numeric_factorize(&a, Side::Left, &win)?;
            let nr = numeric_factorize(&a, Side::Right, &win)?;
            let (lo, hi) = (h(x - 4), h(x + 4));
            let d = [
                nl.plus.max_diff_on(&l.plus, lo, hi),
                nl.minus.max_diff_on(&l.minus, lo, hi),
                nr.plus.max_diff_on(&r.plus, lo, hi),
                nr.minus.max_diff_on(&r.minus, lo, hi),
            ];
            defects.push(("closed_vs_numeric", d.into_iter().fold(0.0, f64::max)));
        }
        if a.is_toeplitz(1e-12) {
            let band = l.plus.band().max(l.minus.band()).max(r.plus.band()).max(r.minus.band());
            let (cm, cp) = classical_factors(&a, band)?;
            let mut worst: f64 = 0.0;
            for f in [&l, &r] {
                for (k, idx) in (-(band as i64)..=band as i64).zip(0..) {
                    worst = worst.max((f.plus.coeff(h(x), k) - cp[idx]).norm());
                    worst = worst.max((f.minus.coeff(h(x), k) - cm[idx]).norm());
                }
            }
            defects.push(("classical", worst));
        }
        Ok((l, r, defects))
    })?;
    let mut summary = Vec::new();
    for (p, (l, r, defects)) in &rows {
        let x = h(p.n as i64);
        for (side, f) in [("left", l), ("right", r)] {
            for (name, g) in [("minus", &f.minus), ("plus", &f.plus)] {
                let band = g.band() as i64;
                for k in -band..=band {
                    let v = g.coeff(x, k);
                    if v.norm() > 1e-15 {
                        let mut row = head(p);
                        row.extend([json!(side), json!(name), json!(k), num(v.re), num(v.im)]);
                        rep.rows.push(row);
                    }
                }
            }
        }
        let mut d = serde_json::Map::new();
        d.insert("n".into(), json!(p.n));
        for (name, v) in defects {
            d.insert((*name).into(), num(*v));
            if cfg.assert {
                rep.checks.push(Check::new(format!("{name} x={}", p.n), *v, tol.max(if *name == "closed_vs_numeric" { 1e-8 } else { 0.0 })));
            }
        }
        summary.push(Value::Object(d));
    }
    rep.summary.insert("defects".into(), Value::Array(summary));
    Ok(rep)
}

pub fn weak_ratio_cmd(cfg: &RunConfig) -> Result<Report> {
    let cols = vec!["n", "nu", "param", "ratio_re", "ratio_im", "prediction_re", "prediction_im", "defect", "shifted_ratio_re", "shifted_prediction_re", "shifted_defect"];
    let mut rep = cfg.base_report("weak-ratio", cols)?;
    let rows = cfg.sweep(|p| {
        if p.n < 2 {
            return Err(Error::Input("weak-ratio needs n >= 2".into()));
        }
        let inst = cfg.instance(p)?;
        let pad = 3 * default_window().margin as i64 + 4;
        let (a, l, r) = factor_pair(&inst, 1 - pad, p.n as i64 + pad, cfg)?;
        let ratio = weak_ratio_oracle(&a, p.n)?;
        let pred = weak_ratio_prediction(&l, p.n)?;
        let m = build_tn(&a, p.n)?;
        let shifted = (logdet(&m).log() - logdet(&m.submatrix(1, 1, p.n - 1, p.n - 1)).log()).exp();
        let spred = shifted_weak_ratio_prediction(&r)?;
        Ok((ratio, pred, shifted, spred))
    })?;
    for (p, (ratio, pred, shifted, spred)) in &rows {
        let mut r = head(p);
        r.extend([
            num(ratio.re),
            num(ratio.im),
            num(pred.re),
            num(pred.im),
            num((ratio / pred - 1.0).norm()),
            num(shifted.re),
            num(spred.re),
            num((shifted / spred - 1.0).norm()),
        ]);
        rep.rows.push(r);
    }
    if cfg.assert {
        let (p, (ratio, pred, _, _)) = rows.last().ok_or_else(|| Error::Input("empty sweep".into()))?;
        rep.checks.push(Check::new(format!("|ratio/prediction - 1| at n={}", p.n), (ratio / pred - 1.0).norm(), cfg.tol(1e-6)));
    }
    Ok(rep)
}

/// Randomized check of `L(a * b) = L(a) L(b)` on banded symbols.
pub fn star_check_cmd(cfg: &RunConfig, trials: usize) -> Result<Report> {
    let mut rep = Report::new("star-check", "random-banded", vec!["trial", "band_a", "band_b", "residual"]);
    rep.assert_enabled = cfg.assert;
    rep.config.insert("seed".into(), json!(cfg.seed));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tol = cfg.tol(1e-10);
    for trial in 0..trials {
        let (ka, kb) = (rng.gen_range(0..4usize), rng.gen_range(0..4usize));
        let mut random = |band: usize| {
            let vals: Vec<C<f64>> = (0..(61 * (2 * band + 1))).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            SymbolGrid::from_fn(h(0), h(30), band, |x, k| vals[(x.0 as usize) * (2 * band + 1) + (k + band as i64) as usize])
        };
        let (a, b) = (random(ka), random(kb));
        let ab = star_product(&a, &b)?;
        let (m, first) = (8usize, h(10));
        let kb_h = HalfInt(2 * kb as i64);
        let la = laurent_section(&a, first - kb_h, m + 2 * kb)?;
        let lb = laurent_section(&b, first - kb_h, m + 2 * kb)?;
        let prod = la.matmul(&lb).submatrix(kb, kb, m, m);
        let want = laurent_section(&ab, first, m)?;
        let res = prod.sub(&want).max_abs();
        rep.rows.push(vec![json!(trial), json!(ka), json!(kb), num(res)]);
        if cfg.assert {
            rep.checks.push(Check::new(format!("trial {trial}"), res, tol));
        }
    }
    Ok(rep)
}

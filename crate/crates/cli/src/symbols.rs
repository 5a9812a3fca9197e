//! Symbol sources: catalogue names and JSON definition files.

use serde_json::Value;
use starszego::catalogue::{self, Pauli};
use starszego::symbol::{smooth_to_grid, SymbolGrid};
use starszego::wiener_hopf::{tridiagonal_symbol, TridiagonalSpec};
use starszego::{Error, HalfInt, Result, Smooth, C};
use std::path::Path;

/// Sampling parameters for smooth symbols.
#[derive(Debug, Clone, Copy)]
pub struct GridParams {
    pub band: usize,
    pub n_p: usize,
    pub x_range: Option<(HalfInt, HalfInt)>,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { band: 24, n_p: 128, x_range: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothKind {
    Example3,
    Example4,
    ToeplitzExp,
}

#[derive(Debug, Clone)]
pub enum Source {
    /// Constant coefficients (`None`) or example 2 with `omega` from the sweep.
    Tridiagonal { constant: Option<[C<f64>; 3]> },
    Example2,
    Smooth(SmoothKind),
    Table(SymbolGrid<f64>),
    Pauli { gamma: f64, h: f64 },
}

/// A resolved symbol source with its sampling parameters.
#[derive(Debug, Clone)]
pub struct SymbolSpec {
    pub name: String,
    pub source: Source,
    pub grid: GridParams,
    /// Default for the per-symbol parameter (omega, t, eps); `None` if unused.
    pub default_param: Option<f64>,
}

/// One materialized sweep point.
pub enum Instance {
    Tridiagonal(TridiagonalSpec<f64>),
    Smooth { kind: SmoothKind, symbol: Smooth, param: f64 },
    Table(SymbolGrid<f64>),
    Pauli(Pauli),
}

impl SymbolSpec {
    pub fn resolve(arg: &str) -> Result<Self> {
        if let Some(s) = Self::named(arg) {
            return Ok(s);
        }
        let path = Path::new(arg);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{arg}: {e}")))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| Error::Input(format!("{arg}: {e}")))?;
            return Self::from_json(&value, arg);
        }
        Err(Error::Input(format!(
            "unknown symbol {arg:?}: not a file and not one of {}",
            catalogue::NAMES.join(", ")
        )))
    }

    fn named(name: &str) -> Option<Self> {
        let (source, default_param) = match name {
            "tridiagonal" => (Source::Tridiagonal { constant: None }, None),
            "example2" => (Source::Example2, Some(0.5)),
            "example3" => (Source::Smooth(SmoothKind::Example3), None),
            "example4" => (Source::Smooth(SmoothKind::Example4), Some(1.0)),
            "toeplitz-exp" => (Source::Smooth(SmoothKind::ToeplitzExp), Some(0.5)),
            "block-pauli" => (Source::Pauli { gamma: 0.5, h: 0.3 }, Some(0.1)),
            _ => return None,
        };
        Some(Self { name: name.to_string(), source, grid: GridParams::default(), default_param })
    }

    fn from_json(v: &Value, label: &str) -> Result<Self> {
        let kind = v.get("kind").and_then(Value::as_str).ok_or_else(|| bad(label, "missing \"kind\""))?;
        let mut grid = GridParams::default();
        if let Some(g) = v.get("grid") {
            if let Some(k) = g.get("K").and_then(Value::as_u64) {
                grid.band = k as usize;
            }
            if let Some(np) = g.get("N_p").and_then(Value::as_u64) {
                grid.n_p = np as usize;
            }
            if let (Some(lo), Some(hi)) = (g.get("x_min").and_then(Value::as_f64), g.get("x_max").and_then(Value::as_f64)) {
                grid.x_range = Some((HalfInt::from_f64(lo)?, HalfInt::from_f64(hi)?));
            }
        }
        let param = v.get("param").and_then(Value::as_f64);
        let (name, source, default_param) = match kind {
            "tridiagonal" => {
                if v.get("example").and_then(Value::as_str) == Some("example2") {
                    ("example2".to_string(), Source::Example2, param.or(v.get("omega").and_then(Value::as_f64)).or(Some(0.5)))
                } else {
                    let f = |key: &str| complex_field(v, key, label);
                    let constant = [f("f0")?, f("f1")?, f("fm1")?];
                    ("tridiagonal".to_string(), Source::Tridiagonal { constant: Some(constant) }, None)
                }
            }
            "smooth-exp" => {
                let name = v.get("name").and_then(Value::as_str).ok_or_else(|| bad(label, "smooth-exp needs \"name\""))?;
                let base = Self::named(name).filter(|s| matches!(s.source, Source::Smooth(_)));
                let base = base.ok_or_else(|| bad(label, &format!("no smooth catalogue entry {name:?}")))?;
                (name.to_string(), base.source, param.or(base.default_param))
            }
            "fourier-table" => ("fourier-table".to_string(), Source::Table(table(v, label)?), None),
            "block-pauli" => {
                let num = |key: &str, d: f64| v.get(key).and_then(Value::as_f64).unwrap_or(d);
                ("block-pauli".to_string(), Source::Pauli { gamma: num("gamma", 0.5), h: num("h", 0.3) }, Some(num("eps", 0.1)))
            }
            other => return Err(bad(label, &format!("unknown kind {other:?}"))),
        };
        if grid.n_p < 4 * grid.band + 4 {
            return Err(bad(label, "grid N_p must be at least 4K + 4"));
        }
        Ok(Self { name, source, grid, default_param })
    }

    /// Whether the sweep's `nu` list is meaningful for this symbol.
    pub fn uses_nu(&self) -> bool {
        matches!(self.source, Source::Smooth(SmoothKind::Example3))
    }

    pub fn instance(&self, n: usize, nu: f64, param: Option<f64>) -> Result<Instance> {
        let param = param.or(self.default_param);
        Ok(match &self.source {
            Source::Tridiagonal { constant: None } => Instance::Tridiagonal(catalogue::tridiagonal_constant()),
            Source::Tridiagonal { constant: Some([a, b, c]) } => Instance::Tridiagonal(TridiagonalSpec::constant(*a, *b, *c)),
            Source::Example2 => Instance::Tridiagonal(catalogue::example2(param.unwrap_or(0.5))),
            Source::Smooth(kind) => {
                let p = param.unwrap_or(0.0);
                let symbol = match kind {
                    SmoothKind::Example3 => catalogue::example3(nu),
                    SmoothKind::Example4 => catalogue::example4(p, n),
                    SmoothKind::ToeplitzExp => catalogue::toeplitz_exp(p),
                };
                Instance::Smooth { kind: *kind, symbol, param: p }
            }
            Source::Table(g) => Instance::Table(g.clone()),
            Source::Pauli { gamma, h } => Instance::Pauli(Pauli::new(param.unwrap_or(0.1), *gamma, *h)),
        })
    }
}

impl Instance {
    /// Scalar symbol grid on `[lo, hi]` (tables are returned as stored).
    pub fn grid(&self, lo: HalfInt, hi: HalfInt, g: &GridParams) -> Result<SymbolGrid<f64>> {
        match self {
            Instance::Tridiagonal(spec) => tridiagonal_symbol(spec, lo, hi, 1e-12),
            Instance::Smooth { symbol, .. } => Ok(smooth_to_grid(symbol, lo, hi, g.band, g.n_p)?.trimmed(1e-16, 2)),
            Instance::Table(t) => Ok(t.clone()),
            Instance::Pauli(_) => Err(Error::Input("block symbol has no scalar grid".into())),
        }
    }
}

fn bad(label: &str, msg: &str) -> Error {
    Error::Input(format!("{label}: {msg}"))
}

fn complex_field(v: &Value, key: &str, label: &str) -> Result<C<f64>> {
    match v.get(key) {
        Some(Value::Number(x)) => Ok(C::new(x.as_f64().unwrap_or(f64::NAN), 0.0)),
        Some(Value::Array(a)) if a.len() == 2 => {
            let re = a[0].as_f64().ok_or_else(|| bad(label, key))?;
            let im = a[1].as_f64().ok_or_else(|| bad(label, key))?;
            Ok(C::new(re, im))
        }
        _ => Err(bad(label, &format!("field {key:?} must be a number or [re, im]"))),
    }
}

fn table(v: &Value, label: &str) -> Result<SymbolGrid<f64>> {
    let entries = v.get("entries").and_then(Value::as_array).ok_or_else(|| bad(label, "fourier-table needs \"entries\""))?;
    let mut rows = Vec::with_capacity(entries.len());
    for e in entries {
        let t = e.as_array().filter(|t| t.len() == 4).ok_or_else(|| bad(label, "entries are [x, k, re, im]"))?;
        let num = |i: usize| t[i].as_f64().ok_or_else(|| bad(label, "non-numeric table entry"));
        let k = num(1)?;
        if k.fract() != 0.0 {
            return Err(bad(label, "mode index k must be an integer"));
        }
        rows.push((HalfInt::from_f64(num(0)?)?, k as i64, C::new(num(2)?, num(3)?)));
    }
    if rows.is_empty() {
        return Err(bad(label, "empty table"));
    }
    let lo = rows.iter().map(|r| r.0).min().unwrap_or(HalfInt(0));
    let hi = rows.iter().map(|r| r.0).max().unwrap_or(HalfInt(0));
    let band = rows.iter().map(|r| r.1.unsigned_abs() as usize).max().unwrap_or(0);
    let mut g = SymbolGrid::zeros(lo, hi, band);
    for (x, k, val) in rows {
        g.set(x, k, val);
    }
    g.refit_decay();
    Ok(g)
}

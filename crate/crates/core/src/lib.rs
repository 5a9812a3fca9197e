//! Star-Toeplitz matrices built from inhomogeneous symbols.
//!
//! A symbol assigns to every half-integer `x` a Laurent series `a_x(z)`;
//! `T_n(a)` has entries `(a_{(j+k)/2})_{j-k}`. The crate provides the
//! Moyal star algebra that realizes operator composition on symbols,
//! left/right Wiener-Hopf star factorizations, exact log-determinants by
//! dense LU, and the asymptotic formulas (BOCG identity, weak and strong
//! Szego-type limits, semiclassical bulk/corner expansion).
//!
//! All numerical code is generic over [`Real`] (implemented for `f32` and
//! `f64`); the `f64` aliases at the crate root are what the CLI uses.

pub mod asymptotics;
pub mod catalogue;
pub mod finite_sections;
pub mod fourier;
pub mod linalg;
pub mod moyal;
pub mod quadrature;
pub mod symbol;
pub mod wiener_hopf;

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

pub use num_complex::Complex;

/// Scalar field for every kernel in the crate.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::Signed
    + rustfft::FftNum
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }

    /// Converts a small integer.
    #[inline]
    fn int(v: i64) -> Self {
        Self::from_i64(v).expect("integer representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("range error: {0}")]
    Range(String),
    #[error("rejected input: {0}")]
    Input(String),
    #[error("inversion failed: {0}")]
    Singular(String),
    #[error("branch error: {0}")]
    Branch(String),
    #[error("nonzero star winding number suspected: {0}")]
    Winding(String),
    #[error("pole proximity: {0}")]
    Pole(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Range(_) | Error::Input(_) | Error::Dimension(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub use symbol::{HalfInt, ProjectionKind};

/// `f64` symbol grid.
pub type Symbol = symbol::SymbolGrid<f64>;
/// `f64` smooth symbol.
pub type Smooth = symbol::SmoothSymbol<f64>;
/// `f64` dense complex matrix.
pub type Matrix = linalg::DenseComplexMatrix<f64>;
/// `f64` factorization.
pub type Factors = wiener_hopf::FactorPair<f64>;
/// `f64` prediction.
pub type Prediction = asymptotics::Prediction<f64>;
/// `f64` window parameters.
pub type Window = moyal::WindowSpec<f64>;

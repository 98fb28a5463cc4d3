//! Scalar abstraction: real tensors for ground-state work, complex for
//! dynamics.

use num_complex::Complex64;

/// Element type of tensor-network data: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + 'static
    + std::fmt::Debug
    + std::ops::Neg<Output = Self>
    + ndarray::LinalgScalar
    + faer_traits::ComplexField<Real = f64>
{
    const IS_COMPLEX: bool;

    fn from_real(x: f64) -> Self;
    /// Build from parts; the imaginary part is dropped for real scalars.
    fn from_parts(re: f64, im: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn conj(self) -> Self;
    /// `|z|²`
    fn abs2(self) -> f64;
    fn scale(self, x: f64) -> Self;
    fn as_complex(self) -> Complex64;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn from_real(x: f64) -> Self {
        x
    }

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    fn re(self) -> f64 {
        self
    }

    fn im(self) -> f64 {
        0.0
    }

    fn conj(self) -> Self {
        self
    }

    fn abs2(self) -> f64 {
        self * self
    }

    fn scale(self, x: f64) -> Self {
        self * x
    }

    fn as_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }

    fn re(self) -> f64 {
        self.re
    }

    fn im(self) -> f64 {
        self.im
    }

    fn conj(self) -> Self {
        Complex64::new(self.re, -self.im)
    }

    fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    fn scale(self, x: f64) -> Self {
        Complex64::new(self.re * x, self.im * x)
    }

    fn as_complex(self) -> Complex64 {
        self
    }
}

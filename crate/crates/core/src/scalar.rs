//! Scalar abstraction for the numeric kernels: f32 or f64.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the math modules are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + std::iter::Sum + std::fmt::Debug + Send + Sync + 'static
{
    /// Gaussian error function, evaluated through f64.
    fn erf(self) -> Self {
        Self::from_f64(libm::erf(self.to_f64().unwrap_or(f64::NAN))).unwrap()
    }

    fn from_usize_(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar")
    }

    fn from_f64_(v: f64) -> Self {
        Self::from_f64(v).expect("f64 representable in scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_values() {
        assert!(Scalar::erf(0.0f64).abs() < 1e-15);
        assert!((Scalar::erf(1.0f64) - 0.8427007929497149).abs() < 1e-12);
        assert!((Scalar::erf(-1.0f64) + 0.8427007929497149).abs() < 1e-12);
        assert!((Scalar::erf(0.5f32) - 0.5204999).abs() < 1e-5);
    }
}

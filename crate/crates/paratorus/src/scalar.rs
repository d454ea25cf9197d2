//! Scalar abstraction: all core math is written against a floating point
//! trait so the library can be instantiated at `f32` or `f64`.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point scalar: f32 or f64.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssignOps + Sum + Debug + Display + Send + Sync + 'static
{
    /// Shorthand for lifting an `f64` literal into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}
impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Complex number over the crate scalar.
pub type Cx<T> = Complex<T>;

pub fn cx<T: Scalar>(re: f64, im: f64) -> Cx<T> {
    Complex::new(T::of(re), T::of(im))
}

pub fn c_zero<T: Scalar>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

pub fn c_one<T: Scalar>() -> Cx<T> {
    Complex::new(T::one(), T::zero())
}

/// e^{i theta}
pub fn cis<T: Scalar>(theta: T) -> Cx<T> {
    Complex::new(theta.cos(), theta.sin())
}

//! Scalar abstraction shared by every solver.
//!
//! All model code is written against [`Real`], which `f32` and `f64` both
//! satisfy. The verification tolerances quoted in the tests assume `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the solvers.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Lossy conversion to `f64`, used for error payloads and output.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Smallest positive denominator the solvers divide by.
#[inline]
pub fn denominator_floor<T: Real>() -> T {
    let floor = T::from_f64(1e-300).unwrap_or_else(T::zero);
    floor.max(T::min_positive_value())
}

/// Two simultaneous dot products `(Σ a·u, Σ b·u)` over equal-length slices.
///
/// Uses eight independent accumulators per sum so the loop vectorizes while
/// keeping a fixed, platform-independent summation order.
#[inline]
pub fn dot2<T: Real>(a: &[T], b: &[T], u: &[T]) -> (T, T) {
    const W: usize = 8;
    debug_assert!(a.len() == u.len() && b.len() == u.len());
    let mut sa = [T::zero(); W];
    let mut sb = [T::zero(); W];
    let ca = a.chunks_exact(W);
    let cb = b.chunks_exact(W);
    let cu = u.chunks_exact(W);
    let (ra, rb, ru) = (ca.remainder(), cb.remainder(), cu.remainder());
    for ((xa, xb), xu) in ca.zip(cb).zip(cu) {
        for k in 0..W {
            sa[k] = sa[k] + xa[k] * xu[k];
            sb[k] = sb[k] + xb[k] * xu[k];
        }
    }
    let fold = |s: [T; W]| ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
    let mut ta = fold(sa);
    let mut tb = fold(sb);
    for ((&xa, &xb), &xu) in ra.iter().zip(rb).zip(ru) {
        ta = ta + xa * xu;
        tb = tb + xb * xu;
    }
    (ta, tb)
}

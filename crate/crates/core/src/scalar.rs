use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type usable for probabilities, log-probabilities and
/// similarity scores.
///
/// Implemented for every type meeting the bounds, so `f32` and `f64` both
/// qualify.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; panics only for types that cannot
    /// represent finite `f64` values at all.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("scalar type cannot represent f64 value")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance for "sums to one" checks over `len` terms.
    ///
    /// `1e-9` for `f64`-like precision; scaled by machine epsilon for
    /// narrower types where `1e-9` is not representable as a meaningful bound.
    fn normalization_tolerance(len: usize) -> Self {
        let floor = Self::of(1e-9);
        let scaled = Self::epsilon() * Self::of(4.0 * (len.max(1) as f64));
        if scaled > floor {
            scaled
        } else {
            floor
        }
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
}

/// Cosine similarity of two equal-length vectors, accumulated in `T`.
///
/// Returns `None` when lengths differ or either vector has zero norm.
pub fn cosine<T: Scalar>(a: &[f32], b: &[f32]) -> Option<T> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let mut dot = T::zero();
    let mut na = T::zero();
    let mut nb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let x = T::of(x as f64);
        let y = T::of(y as f64);
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na <= T::zero() || nb <= T::zero() {
        return None;
    }
    Some(dot / (na.sqrt() * nb.sqrt()))
}

//! Saturating coupling functions and their derivatives.
//!
//! Every sigmoid here is smooth and odd with `S'(0) = 1`, `S' > 0` and
//! `sgn S''(x) = -sgn x`. Derivatives come from closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{CtmError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigmoid {
    /// Hyperbolic tangent. The only family the closed-form bifurcation
    /// analysis accepts.
    #[default]
    Tanh,
    /// `x / sqrt(1 + x^2)`. Usable for simulation only.
    Algebraic,
}

impl Sigmoid {
    /// `S(x)`, rejecting non-finite input.
    pub fn eval<T: Real>(self, x: T) -> Result<T> {
        if !x.is_finite() {
            return Err(CtmError::Domain(format!("sigmoid argument {x} is not finite")));
        }
        Ok(self.value(x))
    }

    /// `S(x)` without the finiteness check. Used on hot paths.
    #[inline]
    pub fn value<T: Real>(self, x: T) -> T {
        match self {
            Sigmoid::Tanh => x.tanh(),
            Sigmoid::Algebraic => x / (T::one() + x * x).sqrt(),
        }
    }

    /// `S'(x)` without the finiteness check.
    #[inline]
    pub fn slope<T: Real>(self, x: T) -> T {
        match self {
            Sigmoid::Tanh => {
                let s = x.tanh();
                T::one() - s * s
            }
            Sigmoid::Algebraic => {
                let q = T::one() + x * x;
                T::one() / (q * q.sqrt())
            }
        }
    }

    /// The `order`-th derivative, `order` in {1, 2, 3}.
    pub fn derivative<T: Real>(self, x: T, order: u32) -> Result<T> {
        if !x.is_finite() {
            return Err(CtmError::Domain(format!("sigmoid argument {x} is not finite")));
        }
        let two = T::lit(2.0);
        match self {
            Sigmoid::Tanh => {
                let s = x.tanh();
                let d1 = T::one() - s * s;
                let d2 = -two * s * d1;
                match order {
                    1 => Ok(d1),
                    2 => Ok(d2),
                    3 => Ok(-two * d1 * d1 - two * s * d2),
                    _ => Err(unsupported(order)),
                }
            }
            Sigmoid::Algebraic => {
                let q = T::one() + x * x;
                let r = q.sqrt();
                match order {
                    1 => Ok(T::one() / (q * r)),
                    2 => Ok(-T::lit(3.0) * x / (q * q * r)),
                    3 => Ok((T::lit(12.0) * x * x - T::lit(3.0)) / (q * q * q * r)),
                    _ => Err(unsupported(order)),
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sigmoid::Tanh => "tanh",
            Sigmoid::Algebraic => "algebraic",
        }
    }
}

impl std::str::FromStr for Sigmoid {
    type Err = CtmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tanh" => Ok(Sigmoid::Tanh),
            "algebraic" => Ok(Sigmoid::Algebraic),
            other => Err(CtmError::Parse(format!("unknown sigmoid '{other}'"))),
        }
    }
}

fn unsupported(order: u32) -> CtmError {
    CtmError::Usage(format!("derivative order {order} unsupported (expected 1, 2 or 3)"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Central-difference oracles of order h^4 built only on `value`.
    fn fd1(s: Sigmoid, x: f64) -> f64 {
        let h = 1e-3;
        let f = |k: f64| s.value(x + k * h);
        (-f(2.0) + 8.0 * f(1.0) - 8.0 * f(-1.0) + f(-2.0)) / (12.0 * h)
    }

    fn fd2(s: Sigmoid, x: f64) -> f64 {
        let h = 1e-3;
        let f = |k: f64| s.value(x + k * h);
        (-f(2.0) + 16.0 * f(1.0) - 30.0 * f(0.0) + 16.0 * f(-1.0) - f(-2.0)) / (12.0 * h * h)
    }

    fn fd3(s: Sigmoid, x: f64) -> f64 {
        let h = 5e-3;
        let f = |k: f64| s.value(x + k * h);
        (-f(3.0) + 8.0 * f(2.0) - 13.0 * f(1.0) + 13.0 * f(-1.0) - 8.0 * f(-2.0) + f(-3.0))
            / (8.0 * h * h * h)
    }

    #[test]
    fn tanh_values() {
        assert_eq!(Sigmoid::Tanh.eval(0.0_f64).unwrap(), 0.0);
        // mpmath, 30 digits: 0.761594155955764888119458282605
        assert!((Sigmoid::Tanh.eval(1.0_f64).unwrap() - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert!(Sigmoid::Tanh.eval(f64::NAN).is_err());
        assert!(Sigmoid::Tanh.eval(f64::INFINITY).is_err());
    }

    #[test]
    fn derivatives_at_origin() {
        let s = Sigmoid::Tanh;
        assert_eq!(s.derivative(0.0_f64, 1).unwrap(), 1.0);
        assert_eq!(s.derivative(0.0_f64, 2).unwrap(), 0.0);
        assert_eq!(s.derivative(0.0_f64, 3).unwrap(), -2.0);
        // five-point third-derivative stencil, h = 1e-4
        let h = 1e-4_f64;
        let f = |k: f64| (k * h).tanh();
        let fd = (f(2.0) - 2.0 * f(1.0) + 2.0 * f(-1.0) - f(-2.0)) / (2.0 * h * h * h);
        assert!((fd + 2.0).abs() < 1e-6, "fd = {fd}");
        assert_eq!(Sigmoid::Algebraic.derivative(0.0_f64, 1).unwrap(), 1.0);
        assert_eq!(Sigmoid::Algebraic.derivative(0.0_f64, 3).unwrap(), -3.0);
    }

    #[test]
    fn bad_order_is_usage_error() {
        assert!(matches!(Sigmoid::Tanh.derivative(0.5_f64, 0), Err(CtmError::Usage(_))));
        assert!(matches!(Sigmoid::Tanh.derivative(0.5_f64, 4), Err(CtmError::Usage(_))));
    }

    #[test]
    fn closed_forms_match_finite_differences() {
        for s in [Sigmoid::Tanh, Sigmoid::Algebraic] {
            for i in 0..1000 {
                let x = -5.0 + 10.0 * (i as f64 + 0.5) / 1000.0;
                let oracles = [fd1(s, x), fd2(s, x), fd3(s, x)];
                for (k, fd) in oracles.iter().enumerate() {
                    let exact = s.derivative(x, k as u32 + 1).unwrap();
                    assert!(
                        (exact - fd).abs() <= 1e-6 * exact.abs().max(1.0),
                        "{s:?} order {} at {x}: {exact} vs {fd}",
                        k + 1
                    );
                }
                assert!(s.derivative(x, 1).unwrap() > 0.0);
                if x != 0.0 {
                    assert_eq!(s.derivative(x, 2).unwrap().signum(), -x.signum());
                }
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let v: f32 = Sigmoid::Tanh.eval(1.0_f32).unwrap();
        assert!((v - 0.761_594_2).abs() < 1e-6);
        assert_eq!(Sigmoid::Tanh.derivative(0.0_f32, 1).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn odd_and_bounded(x in -50.0_f64..50.0) {
            for s in [Sigmoid::Tanh, Sigmoid::Algebraic] {
                let a = s.eval(x).unwrap();
                let b = s.eval(-x).unwrap();
                prop_assert!((a + b).abs() <= 1e-15);
                prop_assert!(a.abs() <= 1.0);
            }
        }
    }
}

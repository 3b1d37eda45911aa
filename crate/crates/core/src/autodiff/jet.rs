//! Second-order truncated Taylor jets along a single seed direction.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Real;
use crate::error::Error;

/// Coordinate a jet is seeded along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    T,
    X,
}

/// `f(p + εs) = val + d1·ε + ½·d2·ε² + O(ε³)` for a unit seed direction `s`.
///
/// The coefficients are themselves generic so that a `Jet2<Var>` carries
/// parameter gradients through spatial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<S> {
    pub val: S,
    pub d1: S,
    pub d2: S,
}

impl<S: Real> Jet2<S> {
    pub fn new(val: S, d1: S, d2: S) -> Self {
        Self { val, d1, d2 }
    }

    /// Constant lift: both derivative coefficients zero.
    pub fn constant(val: S) -> Self {
        Self {
            val,
            d1: S::lift(0.0),
            d2: S::lift(0.0),
        }
    }

    /// Independent variable along the seed direction.
    pub fn variable(val: S) -> Self {
        Self {
            val,
            d1: S::lift(1.0),
            d2: S::lift(0.0),
        }
    }

    /// Chain rule through a scalar function given `f(v)`, `f'(v)`, `f''(v)`.
    #[inline]
    fn chain(self, f: S, df: S, d2f: S) -> Self {
        Self {
            val: f,
            d1: df * self.d1,
            d2: df * self.d2 + d2f * self.d1 * self.d1,
        }
    }

    /// Division that reports a zero denominator instead of producing inf/NaN.
    pub fn checked_div(self, rhs: Self) -> Result<Self, Error> {
        if rhs.val.value() == 0.0 {
            return Err(Error::Domain("division by a jet with zero value".into()));
        }
        Ok(self / rhs)
    }
}

/// Seed a coordinate value: the seeded coordinate gets `(v, 1, 0)`, any other
/// coordinate is lifted as a constant.
pub fn jet_seed(value: f64, seeded: Direction, coordinate: Direction) -> Jet2<f64> {
    if seeded == coordinate {
        Jet2::variable(value)
    } else {
        Jet2::constant(value)
    }
}

impl<S: Real> Add for Jet2<S> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self {
            val: self.val + rhs.val,
            d1: self.d1 + rhs.d1,
            d2: self.d2 + rhs.d2,
        }
    }
}

impl<S: Real> Sub for Jet2<S> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self {
            val: self.val - rhs.val,
            d1: self.d1 - rhs.d1,
            d2: self.d2 - rhs.d2,
        }
    }
}

impl<S: Real> Neg for Jet2<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            val: -self.val,
            d1: -self.d1,
            d2: -self.d2,
        }
    }
}

impl<S: Real> Mul for Jet2<S> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let two = S::lift(2.0);
        Self {
            val: self.val * rhs.val,
            d1: self.d1 * rhs.val + self.val * rhs.d1,
            d2: self.d2 * rhs.val + two * self.d1 * rhs.d1 + self.val * rhs.d2,
        }
    }
}

impl<S: Real> Div for Jet2<S> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.val / rhs.val;
        let q1 = (self.d1 - q * rhs.d1) / rhs.val;
        let q2 = (self.d2 - S::lift(2.0) * q1 * rhs.d1 - q * rhs.d2) / rhs.val;
        Self {
            val: q,
            d1: q1,
            d2: q2,
        }
    }
}

impl<S: Real> Real for Jet2<S> {
    fn lift(v: f64) -> Self {
        Self::constant(S::lift(v))
    }

    fn value(&self) -> f64 {
        self.val.value()
    }

    fn sin(self) -> Self {
        let (s, c) = (self.val.sin(), self.val.cos());
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = (self.val.sin(), self.val.cos());
        self.chain(c, -s, -c)
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.chain(e, e, e)
    }

    fn tanh(self) -> Self {
        let th = self.val.tanh();
        let one = S::lift(1.0);
        let d = one - th * th;
        self.chain(th, d, S::lift(-2.0) * th * d)
    }

    fn relu(self) -> Self {
        if self.val.value() > 0.0 {
            self
        } else {
            Self::lift(0.0)
        }
    }

    fn abs(self) -> Self {
        if self.val.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::lift(1.0),
            1 => self,
            _ => {
                let nf = f64::from(n);
                let p2 = self.val.powi(n - 2);
                let p1 = p2 * self.val;
                self.chain(p1 * self.val, p1.scale(nf), p2.scale(nf * (nf - 1.0)))
            }
        }
    }

    fn powf(self, p: f64) -> Self {
        let p2 = self.val.powf(p - 2.0);
        let p1 = p2 * self.val;
        self.chain(p1 * self.val, p1.scale(p), p2.scale(p * (p - 1.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Jet2<f64>, b: (f64, f64, f64)) -> bool {
        (a.val - b.0).abs() < 1e-12 && (a.d1 - b.1).abs() < 1e-12 && (a.d2 - b.2).abs() < 1e-12
    }

    #[test]
    fn seeds_and_lifts() {
        assert_eq!(jet_seed(0.7, Direction::X, Direction::X), Jet2::new(0.7, 1.0, 0.0));
        assert_eq!(jet_seed(0.7, Direction::X, Direction::T), Jet2::new(0.7, 0.0, 0.0));
        assert_eq!(<Jet2<f64> as Real>::lift(3.0), Jet2::new(3.0, 0.0, 0.0));
        assert_eq!(jet_seed(0.0, Direction::T, Direction::T), Jet2::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn elementary_examples() {
        assert!(close(Jet2::variable(0.0).sin(), (0.0, 1.0, 0.0)));
        assert!(close(Jet2::variable(3.0).square(), (9.0, 6.0, 2.0)));
        // d²/dx² e^{sin x} = e^{sin x}(cos²x − sin x) = 1 at 0
        assert!(close(Jet2::variable(0.0).sin().exp(), (1.0, 1.0, 1.0)));
    }

    #[test]
    fn quotient_and_powers_match_symbolic() {
        let x = 0.8;
        let j = Jet2::variable(x);
        // 1/x
        let q = Jet2::constant(1.0) / j;
        assert!(close(q, (1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))));
        let p = j.powi(3);
        assert!(close(p, (x.powi(3), 3.0 * x * x, 6.0 * x)));
        let r = j.powf(0.5);
        assert!(close(r, (x.sqrt(), 0.5 / x.sqrt(), -0.25 * x.powf(-1.5))));
        let th = j.tanh();
        let t = x.tanh();
        assert!(close(th, (t, 1.0 - t * t, -2.0 * t * (1.0 - t * t))));
        let c = j.cos();
        assert!(close(c, (x.cos(), -x.sin(), -x.cos())));
    }

    #[test]
    fn division_by_zero_jet_is_a_domain_error() {
        let a = Jet2::variable(1.0);
        let b = Jet2::constant(0.0);
        assert!(matches!(a.checked_div(b), Err(Error::Domain(_))));
        assert!(a.checked_div(Jet2::constant(2.0)).is_ok());
    }

    #[test]
    fn product_rule_and_linearity() {
        let a = Jet2::new(1.3, -0.4, 2.2);
        let b = Jet2::new(-0.7, 0.9, 0.1);
        let p = a * b;
        assert!((p.d1 - (a.d1 * b.val + a.val * b.d1)).abs() < 1e-15);
        assert!((p.d2 - (a.d2 * b.val + 2.0 * a.d1 * b.d1 + a.val * b.d2)).abs() < 1e-15);
        let l = a.scale(2.0) + b.scale(-3.0);
        assert!((l.d1 - (2.0 * a.d1 - 3.0 * b.d1)).abs() < 1e-15);
        assert!((l.d2 - (2.0 * a.d2 - 3.0 * b.d2)).abs() < 1e-15);
    }
}

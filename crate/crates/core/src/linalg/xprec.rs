//! Double-double complex numbers and compensated sums.

use std::ops::{Add, Mul, Neg, Sub};

use twofloat::TwoFloat;

use super::matrix::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cdd {
    pub re: TwoFloat,
    pub im: TwoFloat,
}

impl Cdd {
    pub const ZERO: Cdd = Cdd {
        re: TwoFloat::from_f64(0.0),
        im: TwoFloat::from_f64(0.0),
    };

    #[inline]
    pub fn from_c64(z: C64) -> Self {
        Self {
            re: TwoFloat::from(z.re),
            im: TwoFloat::from(z.im),
        }
    }

    #[inline]
    pub fn to_c64(self) -> C64 {
        C64::new(self.re.hi() + self.re.lo(), self.im.hi() + self.im.lo())
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    #[inline]
    pub fn norm_sqr(self) -> TwoFloat {
        self.re * self.re + self.im * self.im
    }

    #[inline]
    pub fn scale(self, s: TwoFloat) -> Self {
        Self {
            re: self.re * s,
            im: self.im * s,
        }
    }

    /// Approximate modulus, for comparisons.
    #[inline]
    pub fn abs_hi(self) -> f64 {
        self.re.hi().hypot(self.im.hi())
    }
}

impl Add for Cdd {
    type Output = Cdd;
    #[inline]
    fn add(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    #[inline]
    fn sub(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }
}

impl Neg for Cdd {
    type Output = Cdd;
    #[inline]
    fn neg(self) -> Cdd {
        Cdd {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    #[inline]
    fn mul(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

/// `1 / b` to double-double accuracy (the crate's own division stops at
/// double precision).
#[inline]
pub fn recip(b: TwoFloat) -> TwoFloat {
    let y = 1.0 / b.hi();
    let e = TwoFloat::from(1.0) - b * y;
    TwoFloat::from(y) + e * y
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Compensated accumulator (Ogita, Rump and Oishi's `Dot2`) for one real
/// sum. The result is as accurate as if summed in twice the precision.
#[derive(Clone, Copy, Debug, Default)]
struct Acc {
    s: f64,
    c: f64,
}

impl Acc {
    #[inline]
    fn add_prod(&mut self, x: f64, y: f64) {
        let p = x * y;
        let e = x.mul_add(y, -p);
        let (s, q) = two_sum(self.s, p);
        self.s = s;
        self.c += q + e;
    }

    /// `x (y_hi + y_lo)`, the low part in plain arithmetic.
    #[inline]
    fn add_prod_dd(&mut self, x: f64, y: TwoFloat) {
        self.add_prod(x, y.hi());
        self.c += x * y.lo();
    }

    #[inline]
    fn finish(self) -> TwoFloat {
        TwoFloat::new_add(self.s, self.c)
    }
}

/// Compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CAcc {
    re: Acc,
    im: Acc,
}

impl CAcc {
    /// `+= conj(a) b`
    #[inline]
    pub fn add_conj_mul(&mut self, a: C64, b: C64) {
        self.re.add_prod(a.re, b.re);
        self.re.add_prod(a.im, b.im);
        self.im.add_prod(a.re, b.im);
        self.im.add_prod(-a.im, b.re);
    }

    /// `+= a b`
    #[inline]
    pub fn add_mul_dd(&mut self, a: C64, b: Cdd) {
        self.re.add_prod_dd(a.re, b.re);
        self.re.add_prod_dd(-a.im, b.im);
        self.im.add_prod_dd(a.re, b.im);
        self.im.add_prod_dd(a.im, b.re);
    }

    /// `+= conj(a) b`
    #[inline]
    pub fn add_conj_mul_dd(&mut self, a: C64, b: Cdd) {
        self.re.add_prod_dd(a.re, b.re);
        self.re.add_prod_dd(a.im, b.im);
        self.im.add_prod_dd(a.re, b.im);
        self.im.add_prod_dd(-a.im, b.re);
    }

    #[inline]
    pub fn finish(self) -> Cdd {
        Cdd {
            re: self.re.finish(),
            im: self.im.finish(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_survives_cancellation() {
        let mut acc = CAcc::default();
        acc.add_conj_mul(C64::new(1e16, 0.0), C64::new(1.0, 0.0));
        acc.add_conj_mul(C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        acc.add_conj_mul(C64::new(-1e16, 0.0), C64::new(1.0, 0.0));
        assert_eq!(acc.finish().to_c64(), C64::new(1.0, 0.0));
    }

    #[test]
    fn reciprocal_is_double_double() {
        let b = TwoFloat::new_add(36.68515932666929, 1.234e-15).sqrt();
        let err = recip(b) * b - TwoFloat::from(1.0);
        assert!(err.hi().abs() < 1e-30);
    }

    #[test]
    fn products_keep_low_bits() {
        let a = C64::new(1.0 + f64::EPSILON, 0.0);
        let mut acc = CAcc::default();
        acc.add_conj_mul(a, a);
        acc.add_mul_dd(C64::new(-1.0, 0.0), Cdd::from_c64(C64::new(1.0, 0.0)));
        let r = acc.finish();
        assert_eq!(r.re.hi(), 2.0 * f64::EPSILON);
        assert_eq!(r.re.lo(), f64::EPSILON * f64::EPSILON);
    }
}

//! Complex numbers with an explicit binary exponent, for trace-map orbits
//! whose magnitudes grow doubly exponentially.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// `mantissa · 2^exponent`, with `max(|re|, |im|)` of the mantissa in
/// `[0.5, 1)` or the mantissa zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledComplex {
    pub mantissa: Complex64,
    pub exponent: i64,
}

/// `x · 2^k` without intermediate overflow or premature underflow.
pub(crate) fn ldexp(mut x: f64, mut k: i64) -> f64 {
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(k as i32)
}

/// Binary exponent `e` with `|x| = f · 2^e`, `f ∈ [0.5, 1)`; `x` finite and nonzero.
fn frexp_exponent(x: f64) -> i64 {
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        // subnormal
        return frexp_exponent(x * 2f64.powi(64)) - 64;
    }
    raw - 1022
}

impl ScaledComplex {
    pub const ZERO: ScaledComplex = ScaledComplex { mantissa: Complex64::new(0.0, 0.0), exponent: 0 };

    pub fn from_complex(z: Complex64) -> Self {
        ScaledComplex { mantissa: z, exponent: 0 }.normalized()
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    fn normalized(self) -> Self {
        let m = self.mantissa;
        let big = m.re.abs().max(m.im.abs());
        if big == 0.0 || !big.is_finite() {
            return ScaledComplex { mantissa: m, exponent: if big == 0.0 { 0 } else { self.exponent } };
        }
        let e = frexp_exponent(big);
        ScaledComplex {
            mantissa: Complex64::new(ldexp(m.re, -e), ldexp(m.im, -e)),
            exponent: self.exponent.saturating_add(e),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.re == 0.0 && self.mantissa.im == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.mantissa.re.is_finite()
            && self.mantissa.im.is_finite()
            && self.exponent.abs() < i64::MAX / 4
    }

    /// The plain complex value; infinite components past `f64` range.
    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(ldexp(self.mantissa.re, self.exponent), ldexp(self.mantissa.im, self.exponent))
    }

    /// `ln |x|`, `-∞` at zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mantissa.norm().ln() + self.exponent as f64 * std::f64::consts::LN_2
    }

    pub fn abs(&self) -> f64 {
        self.ln_abs().exp()
    }

    pub fn scale_pow2(self, k: i64) -> Self {
        if self.is_zero() {
            return self;
        }
        ScaledComplex { mantissa: self.mantissa, exponent: self.exponent.saturating_add(k) }
    }
}

impl Mul for ScaledComplex {
    type Output = ScaledComplex;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        ScaledComplex {
            mantissa: self.mantissa * rhs.mantissa,
            exponent: self.exponent.saturating_add(rhs.exponent),
        }
        .normalized()
    }
}

impl Add for ScaledComplex {
    type Output = ScaledComplex;
    fn add(self, rhs: Self) -> Self {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.exponent >= rhs.exponent { (self, rhs) } else { (rhs, self) };
        let shift = small.exponent.saturating_sub(big.exponent);
        let aligned = if shift < -1100 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(ldexp(small.mantissa.re, shift), ldexp(small.mantissa.im, shift))
        };
        ScaledComplex { mantissa: big.mantissa + aligned, exponent: big.exponent }.normalized()
    }
}

impl Neg for ScaledComplex {
    type Output = ScaledComplex;
    fn neg(self) -> Self {
        ScaledComplex { mantissa: -self.mantissa, exponent: self.exponent }
    }
}

impl Sub for ScaledComplex {
    type Output = ScaledComplex;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

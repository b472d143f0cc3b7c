//! Signed log-magnitude numbers.
//!
//! Quantities like `e^{-2τφ}` leave the range of `f64` for moderate `τ`, so
//! the indicator pipeline and the closed-form layered solution carry them
//! as `(sign, ln|x|)`. Zero is an explicit marker, never `ln 0`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Mul, Neg};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    sign: i8,
    ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };
    pub const ONE: SignedLog = SignedLog {
        sign: 1,
        ln_abs: 0.0,
    };

    pub fn new(sign: i8, ln_abs: f64) -> Self {
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            return SignedLog::ZERO;
        }
        SignedLog {
            sign: sign.signum(),
            ln_abs,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            SignedLog::ZERO
        } else {
            SignedLog {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    /// `e^x` as a positive log-number.
    pub fn exp(x: f64) -> Self {
        SignedLog { sign: 1, ln_abs: x }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }
    pub fn ln_abs(&self) -> f64 {
        self.ln_abs
    }
    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Back to `f64`; underflows to zero and overflows to infinity.
    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            self.sign as f64 * self.ln_abs.exp()
        }
    }

    /// Like [`to_f64`](Self::to_f64) but refuses to flush a nonzero value to
    /// zero or infinity.
    pub fn try_to_f64(&self) -> Option<f64> {
        let v = self.to_f64();
        if self.sign != 0 && (v == 0.0 || !v.is_finite()) {
            None
        } else {
            Some(v)
        }
    }

    /// Multiply by `e^x`.
    pub fn scale_exp(self, x: f64) -> Self {
        if self.sign == 0 {
            self
        } else {
            SignedLog {
                sign: self.sign,
                ln_abs: self.ln_abs + x,
            }
        }
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            SignedLog {
                sign: 1,
                ln_abs: self.ln_abs,
            }
        }
    }

    /// Sum with sign-aware log-sum-exp. Exact cancellation gives zero.
    pub fn add(self, other: SignedLog) -> SignedLog {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        let ratio = (small.ln_abs - big.ln_abs).exp();
        if big.sign == small.sign {
            SignedLog {
                sign: big.sign,
                ln_abs: big.ln_abs + ratio.ln_1p(),
            }
        } else if ratio == 1.0 {
            SignedLog::ZERO
        } else {
            SignedLog {
                sign: big.sign,
                ln_abs: big.ln_abs + (-ratio).ln_1p(),
            }
        }
    }

    pub fn sub(self, other: SignedLog) -> SignedLog {
        self.add(-other)
    }

    /// Sum of many terms.
    pub fn sum<I: IntoIterator<Item = SignedLog>>(terms: I) -> SignedLog {
        terms.into_iter().fold(SignedLog::ZERO, SignedLog::add)
    }

    pub fn powi(self, n: i32) -> SignedLog {
        if n == 0 {
            return SignedLog::ONE;
        }
        if self.sign == 0 {
            return self;
        }
        let sign = if n % 2 == 0 { 1 } else { self.sign };
        SignedLog {
            sign,
            ln_abs: self.ln_abs * n as f64,
        }
    }

    pub fn recip(self) -> SignedLog {
        assert!(self.sign != 0, "reciprocal of zero");
        SignedLog {
            sign: self.sign,
            ln_abs: -self.ln_abs,
        }
    }

    /// Ordering by value.
    pub fn cmp_value(&self, other: &SignedLog) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.ln_abs.total_cmp(&other.ln_abs),
                _ => other.ln_abs.total_cmp(&self.ln_abs),
            },
            o => o,
        }
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        if self.sign == 0 || rhs.sign == 0 {
            return SignedLog::ZERO;
        }
        SignedLog {
            sign: self.sign * rhs.sign,
            ln_abs: self.ln_abs + rhs.ln_abs,
        }
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;
    fn neg(self) -> SignedLog {
        SignedLog {
            sign: -self.sign,
            ln_abs: self.ln_abs,
        }
    }
}

impl fmt::Display for SignedLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s => write!(f, "{}exp({})", if s < 0 { "-" } else { "" }, self.ln_abs),
        }
    }
}
